//! Scenario description, Monte Carlo driver and outage curves.

mod config;
mod curve;

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    correlation_matrix, covariance_factor, restrict_channels, sample_channels,
    ChannelSet, CovarianceFactor, PathLoss, C64, DEFAULT_ARG_SCALE, DEFAULT_JITTER_FLOOR, JITTER_CAP,
};
use crate::error::{Error, Result};
use crate::geometry::{
    build_preset_grid, compact_ris_layout, conventional_ris_layout, PresetGrid, Selection, SurfaceConfig,
};
use crate::joint::{link_magnitude, optimized_power, AltOptParams, LinkMode};
use crate::link::{incident, random_phases, uniform_beamformer};
use crate::mixture::{
    analytic_op, em_fit, ks_fit, ks_statistic, mom_fit, EmOptions, MixtureModel,
    NakagamiComponent, TrainingSet,
};
use crate::position::{
    epso_optimize, exhaustive_select, CachedFitness, EpsoOutcome, EpsoParams, DEFAULT_EXHAUSTIVE_CAP,
};

pub use config::{emit_config, parse_config, parse_config_str};
pub use curve::{read_curve, write_curve, CurveFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Fluid surface, positions chosen by the swarm under random phases and a uniform beamformer.
    FrisSpo,
    /// Fluid surface, positions chosen by the swarm with the jointly optimized link as fitness.
    FrisSpoBfPs,
    /// Evenly spread fixed elements, random phases, uniform beamformer.
    ConventionalRandom,
    /// Evenly spread fixed elements, jointly optimized beamformer and phases.
    ConventionalBfPs,
    /// Half-wavelength packed fixed elements, jointly optimized.
    CompactBfPs,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::FrisSpo,
        Architecture::FrisSpoBfPs,
        Architecture::ConventionalRandom,
        Architecture::ConventionalBfPs,
        Architecture::CompactBfPs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::FrisSpo => "fris_spo",
            Architecture::FrisSpoBfPs => "fris_spo_bf_ps",
            Architecture::ConventionalRandom => "conventional_random",
            Architecture::ConventionalBfPs => "conventional_bf_ps",
            Architecture::CompactBfPs => "compact_bf_ps",
        }
    }

    pub fn is_fluid(self) -> bool {
        matches!(self, Architecture::FrisSpo | Architecture::FrisSpoBfPs)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Em,
    Mom,
    Ks,
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMethod::Em => "em",
            FitMethod::Mom => "mom",
            FitMethod::Ks => "ks",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub beta1_db: f64,
    pub beta2_db: f64,
    /// Multiplier of `distance/λ` inside the Bessel function.
    pub arg_scale: f64,
    pub jitter_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    /// Mixture components for EM.
    pub q: usize,
    /// Training-set size.
    pub t_sp: usize,
    pub tol: f64,
    /// Empty disables fitting.
    pub methods: Vec<FitMethod>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub surface: SurfaceConfig,
    /// Element pitch of the compact layout.
    pub compact_spacing_m: f64,
    pub architecture: Architecture,
    pub num_bs_antennas: usize,
    pub gamma_bar_grid_db: Vec<f64>,
    pub trials: usize,
    /// Rate threshold in bit/s/Hz.
    pub rate: f64,
    pub channel: ChannelSpec,
    /// `rng_seed` is ignored; each trial derives its own.
    pub epso: EpsoParams,
    pub altopt: AltOptParams,
    pub fit: FitSpec,
    pub master_seed: u64,
}

impl Default for ScenarioSpec {
    /// 2.4 GHz carrier, `λ/3` pitch on a 12 × 12 grid with 16 active elements.
    fn default() -> Self {
        let wavelength = 0.125;
        let d = wavelength / 3.0;
        ScenarioSpec {
            surface: SurfaceConfig::new(wavelength, d, d, 12, 12, 16),
            compact_spacing_m: wavelength / 2.0,
            architecture: Architecture::FrisSpo,
            num_bs_antennas: 3,
            gamma_bar_grid_db: (0..=10).map(|i| 90.0 + 5.0 * i as f64).collect(),
            trials: 2000,
            rate: 1.0,
            channel: ChannelSpec {
                beta1_db: -40.0,
                beta2_db: -40.0,
                arg_scale: DEFAULT_ARG_SCALE,
                jitter_floor: DEFAULT_JITTER_FLOOR,
            },
            epso: EpsoParams::with_pitch(d),
            altopt: AltOptParams::default(),
            fit: FitSpec {
                q: 2,
                t_sp: 10_000,
                tol: 1e-3,
                methods: vec![FitMethod::Em, FitMethod::Mom, FitMethod::Ks],
            },
            master_seed: 1,
        }
    }
}

impl ScenarioSpec {
    pub fn pathloss(&self) -> PathLoss {
        PathLoss::from_db(self.channel.beta1_db, self.channel.beta2_db, self.surface.element_area())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::Config { field, reason });
        self.surface.validate()?;
        if !(self.compact_spacing_m > 0.0 && self.compact_spacing_m.is_finite()) {
            return bad("compact_spacing_m", format!("must be positive, got {}", self.compact_spacing_m));
        }
        if self.num_bs_antennas == 0 {
            return bad("num_bs_antennas", "must be at least 1".into());
        }
        if self.gamma_bar_grid_db.is_empty() {
            return bad("gamma_bar_grid_db", "must not be empty".into());
        }
        if self.gamma_bar_grid_db.iter().any(|g| !g.is_finite())
            || self.gamma_bar_grid_db.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("gamma_bar_grid_db", "must be finite and strictly increasing".into());
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate", format!("must be positive, got {}", self.rate));
        }
        self.pathloss().validate()?;
        if !(self.channel.arg_scale > 0.0 && self.channel.arg_scale.is_finite()) {
            return bad("arg_scale", format!("must be positive, got {}", self.channel.arg_scale));
        }
        if !(0.0..=JITTER_CAP).contains(&self.channel.jitter_floor) {
            return bad("jitter_floor", format!("must lie in [0, {JITTER_CAP}]"));
        }
        self.epso.validate()?;
        if !(self.altopt.tolerance > 0.0) {
            return bad("tolerance", "must be positive".into());
        }
        if self.altopt.max_iter == 0 {
            return bad("max_iter", "must be at least 1".into());
        }
        if !self.fit.methods.is_empty() {
            if self.fit.q == 0 {
                return bad("q", "must be at least 1".into());
            }
            if !(self.fit.tol > 0.0) {
                return bad("tol", "must be positive".into());
            }
            let need = if self.fit.methods.contains(&FitMethod::Em) { 100 * self.fit.q } else { 2 };
            if self.fit.t_sp < need {
                return bad("t_sp", format!("must be at least {need} for the requested fits"));
            }
        }
        Ok(())
    }
}

/// Per-trial random stream: the master seed with the trial index as stream id.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Stream reserved for mixture fitting.
const FIT_STREAM: u64 = u64::MAX;

/// A validated scenario with the grid and channel factor built once.
pub struct Scenario {
    spec: ScenarioSpec,
    grid: PresetGrid,
    layout: Option<Selection>,
    factor: CovarianceFactor,
    pathloss: PathLoss,
}

/// Channels of one trial together with the position-selection fitness.
pub struct PositionProblem<'a> {
    scenario: &'a Scenario,
    pub channels: ChannelSet,
    objective: Objective,
    pub epso_seed: u64,
}

enum Objective {
    /// Per-preset terms `conj(h_n)(G_n w)` and the per-element rotations.
    RandomPhases { terms: Vec<C64>, rotations: Vec<C64> },
    /// Per-preset `|h_n|` and row-major `G`.
    Joint { h_abs: Vec<f64>, rows: Vec<C64> },
}

impl PositionProblem<'_> {
    /// Link power `|hᴴΨGw|²` of `sel` with unit transmit SNR.
    pub fn fitness(&self, sel: &Selection) -> f64 {
        match &self.objective {
            Objective::RandomPhases { terms, rotations } => sel
                .preset_indices
                .iter()
                .zip(rotations)
                .map(|(&n, r)| terms[n] * r)
                .sum::<C64>()
                .norm_sqr(),
            Objective::Joint { h_abs, rows } => {
                let l = self.channels.num_antennas();
                let terms: Vec<(f64, &[C64])> = sel
                    .preset_indices
                    .iter()
                    .map(|&n| (h_abs[n], &rows[n * l..(n + 1) * l]))
                    .collect();
                optimized_power(&terms, &self.scenario.spec.altopt)
            }
        }
    }

    pub fn epso(&self) -> Result<EpsoOutcome> {
        let sc = self.scenario;
        let params = EpsoParams {
            rng_seed: self.epso_seed,
            ..sc.spec.epso.clone()
        };
        let mut cache = CachedFitness::new(|s: &Selection| self.fitness(s));
        epso_optimize(&sc.grid, &sc.spec.surface, &params, |s| cache.eval(s))
    }

    pub fn exhaustive(&self, cap: u128) -> Result<(Selection, f64)> {
        let sc = self.scenario;
        exhaustive_select(&sc.grid, &sc.spec.surface, cap, |s| self.fitness(s))
    }
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let grid = build_preset_grid(&spec.surface)?;
        let (positions, layout) = match spec.architecture {
            Architecture::CompactBfPs => (compact_ris_layout(&spec.surface, spec.compact_spacing_m)?, None),
            // conventional layouts sample the full grid and keep their rows,
            // so they see exactly the channels a fluid surface would
            Architecture::ConventionalRandom | Architecture::ConventionalBfPs => {
                (grid.coords().to_vec(), Some(conventional_ris_layout(&grid)))
            }
            Architecture::FrisSpo | Architecture::FrisSpoBfPs => (grid.coords().to_vec(), None),
        };
        let r = correlation_matrix(&positions, spec.surface.wavelength_m, spec.channel.arg_scale);
        let factor = covariance_factor(&r, spec.channel.jitter_floor)?;
        let pathloss = spec.pathloss();
        Ok(Scenario {
            spec,
            grid,
            layout,
            factor,
            pathloss,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn grid(&self) -> &PresetGrid {
        &self.grid
    }

    pub fn covariance(&self) -> &CovarianceFactor {
        &self.factor
    }

    fn channels(&self, rng: &mut ChaCha8Rng) -> ChannelSet {
        sample_channels(&self.factor, &self.pathloss, self.spec.num_bs_antennas, rng)
    }

    /// Channels and fitness of trial `t`; fluid architectures only.
    pub fn position_problem(&self, t: u64) -> Result<PositionProblem<'_>> {
        let mut rng = trial_rng(self.spec.master_seed, t);
        let channels = self.channels(&mut rng);
        let objective = match self.spec.architecture {
            Architecture::FrisSpo => {
                let psi = random_phases(self.spec.surface.num_active, &mut rng);
                let gw = incident(&channels.g, &uniform_beamformer(self.spec.num_bs_antennas));
                let terms = channels.h.iter().zip(gw.iter()).map(|(h, x)| h.conj() * x).collect();
                Objective::RandomPhases {
                    terms,
                    rotations: psi.rotations().collect(),
                }
            }
            Architecture::FrisSpoBfPs => Objective::Joint {
                h_abs: channels.h.iter().map(|x| x.norm()).collect(),
                rows: (0..channels.num_elements())
                    .flat_map(|n| channels.g.row(n).iter().copied().collect::<Vec<_>>())
                    .collect(),
            },
            other => {
                return Err(Error::Config {
                    field: "architecture",
                    reason: format!("{other} has no position search"),
                })
            }
        };
        let epso_seed = rng.next_u64();
        Ok(PositionProblem {
            scenario: self,
            channels,
            objective,
            epso_seed,
        })
    }

    /// End-to-end magnitude `z = |hᴴΨGw|` of trial `t`.
    pub fn run_trial(&self, t: u64) -> Result<f64> {
        match self.spec.architecture {
            Architecture::FrisSpo | Architecture::FrisSpoBfPs => {
                Ok(self.position_problem(t)?.epso()?.fitness.sqrt())
            }
            Architecture::ConventionalRandom | Architecture::ConventionalBfPs | Architecture::CompactBfPs => {
                let mut rng = trial_rng(self.spec.master_seed, t);
                let full = self.channels(&mut rng);
                let ch = match &self.layout {
                    Some(sel) => restrict_channels(&full, sel),
                    None => full,
                };
                let mode = if self.spec.architecture == Architecture::ConventionalRandom {
                    LinkMode::RandomPsUniformW
                } else {
                    LinkMode::OptimizedBfPs
                };
                link_magnitude(&ch.h, &ch.g, mode, &self.spec.altopt, &mut rng)
            }
        }
    }
}

/// Fraction of magnitudes whose SNR `γ̄z²` falls below `2^R − 1`.
pub fn mc_outage(magnitudes: &[f64], gamma_bar: f64, rate: f64) -> f64 {
    if magnitudes.is_empty() {
        return f64::NAN;
    }
    let threshold = 2f64.powf(rate) - 1.0;
    let n = magnitudes.iter().filter(|&&z| gamma_bar * z * z < threshold).count();
    n as f64 / magnitudes.len() as f64
}

/// Pooled standard error of the difference of two empirical proportions.
pub fn pooled_standard_error(p1: f64, n1: usize, p2: f64, n2: usize) -> f64 {
    let p = (p1 * n1 as f64 + p2 * n2 as f64) / (n1 + n2) as f64;
    (p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpPoint {
    pub gamma_bar_db: f64,
    pub op_monte_carlo: f64,
    pub op_em: Option<f64>,
    pub op_mom: Option<f64>,
    pub op_ks: Option<f64>,
    pub trials_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FittedModels {
    pub em: Option<MixtureModel>,
    pub mom: Option<NakagamiComponent>,
    pub ks: Option<NakagamiComponent>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub spec: ScenarioSpec,
    pub points: Vec<OpPoint>,
    pub models: FittedModels,
    /// Magnitudes of the Monte Carlo trials, in trial order.
    pub magnitudes: Vec<f64>,
    pub training: Option<TrainingSet>,
    pub truncated: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
    /// Set from a signal handler to stop early.
    pub cancel: Option<&'a AtomicBool>,
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config {
            field: "threads",
            reason: e.to_string(),
        })?;
    Ok(pool.install(f))
}

/// Magnitudes of trials `0..n`; a cancelled run keeps the completed prefix.
pub fn simulate(scenario: &Scenario, n: usize, opts: RunOptions<'_>) -> Result<(Vec<f64>, bool)> {
    let cancelled = || opts.cancel.is_some_and(|c| c.load(Ordering::Relaxed));
    let out: Vec<Option<Result<f64>>> = with_pool(opts.threads, || {
        (0..n as u64)
            .into_par_iter()
            .map(|t| (!cancelled()).then(|| scenario.run_trial(t)))
            .collect()
    })?;
    let mut z = Vec::with_capacity(n);
    for r in out {
        match r {
            Some(v) => z.push(v?),
            None => return Ok((z, true)),
        }
    }
    Ok((z, false))
}

/// Fits the requested models to a training set. EM draws from its own stream.
pub fn fit_models(data: &TrainingSet, fit: &FitSpec, master_seed: u64) -> Result<FittedModels> {
    let mut models = FittedModels::default();
    for method in &fit.methods {
        match method {
            FitMethod::Em => {
                let mut rng = trial_rng(master_seed, FIT_STREAM);
                let opts = EmOptions {
                    tolerance: fit.tol,
                    ..EmOptions::new(fit.q)
                };
                models.em = Some(em_fit(data, &opts, &mut rng)?);
            }
            FitMethod::Mom => models.mom = Some(mom_fit(data)?),
            FitMethod::Ks => models.ks = Some(ks_fit(data)?),
        }
    }
    Ok(models)
}

/// Runs the Monte Carlo trials, fits the training set and tabulates outage.
pub fn run_scenario(spec: &ScenarioSpec, opts: RunOptions<'_>) -> Result<RunReport> {
    let start = Instant::now();
    let scenario = Scenario::new(spec.clone())?;
    let fitting = !spec.fit.methods.is_empty();
    let needed = if fitting { spec.trials.max(spec.fit.t_sp) } else { spec.trials };
    let (all, truncated) = simulate(&scenario, needed, opts)?;

    let magnitudes: Vec<f64> = all.iter().take(spec.trials).copied().collect();
    let (training, models) = if fitting && all.len() >= spec.fit.t_sp {
        let data = TrainingSet::new(
            all[..spec.fit.t_sp].to_vec(),
            format!("{} trials 0..{} seed {}", spec.architecture, spec.fit.t_sp, spec.master_seed),
        )?;
        let models = fit_models(&data, &spec.fit, spec.master_seed)?;
        (Some(data), models)
    } else {
        (None, FittedModels::default())
    };

    let single = |c: &Option<NakagamiComponent>, g: f64| {
        c.map(|c| analytic_op(&MixtureModel::single(NakagamiComponent::new(1.0, c.shape, c.mean_power)), g, spec.rate))
    };
    let points = spec
        .gamma_bar_grid_db
        .iter()
        .map(|&db| {
            let g = 10f64.powf(db / 10.0);
            OpPoint {
                gamma_bar_db: db,
                op_monte_carlo: mc_outage(&magnitudes, g, spec.rate),
                op_em: models.em.as_ref().map(|m| analytic_op(m, g, spec.rate)),
                op_mom: single(&models.mom, g),
                op_ks: single(&models.ks, g),
                trials_used: magnitudes.len(),
            }
        })
        .collect();

    Ok(RunReport {
        spec: spec.clone(),
        points,
        models,
        magnitudes,
        training,
        truncated,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Kolmogorov-Smirnov distance of each fitted model to the training set.
pub fn fit_distances(data: &TrainingSet, models: &FittedModels) -> Vec<(FitMethod, f64)> {
    let mut out = Vec::new();
    if let Some(m) = &models.em {
        out.push((FitMethod::Em, ks_statistic(data, m)));
    }
    for (method, c) in [(FitMethod::Mom, &models.mom), (FitMethod::Ks, &models.ks)] {
        if let Some(c) = c {
            let m = MixtureModel::single(NakagamiComponent::new(1.0, c.shape, c.mean_power));
            out.push((method, ks_statistic(data, &m)));
        }
    }
    out
}

/// Paired comparison of two scenarios over common trial indices.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Same master seed and same channel support, so trial `t` shares its channels.
    pub paired: bool,
    pub gamma_bar_grid_db: Vec<f64>,
    pub rate: f64,
}

impl Comparison {
    /// Fraction of trials where `a` delivers at least the magnitude of `b`.
    pub fn dominance(&self) -> f64 {
        let n = self.a.len().min(self.b.len());
        let k = self.a.iter().zip(&self.b).filter(|(a, b)| a >= b).count();
        k as f64 / n as f64
    }

    /// `(γ̄ dB, OP_a, OP_b)` over the first scenario's grid.
    pub fn outage_rows(&self) -> Vec<(f64, f64, f64)> {
        self.gamma_bar_grid_db
            .iter()
            .map(|&db| {
                let g = 10f64.powf(db / 10.0);
                (db, mc_outage(&self.a, g, self.rate), mc_outage(&self.b, g, self.rate))
            })
            .collect()
    }
}

fn same_support(a: &ScenarioSpec, b: &ScenarioSpec) -> bool {
    let full = |s: &ScenarioSpec| s.architecture != Architecture::CompactBfPs;
    a.master_seed == b.master_seed
        && a.surface == b.surface
        && a.num_bs_antennas == b.num_bs_antennas
        && a.channel == b.channel
        && (full(a) && full(b) || a.architecture == b.architecture && a.compact_spacing_m == b.compact_spacing_m)
}

pub fn compare_scenarios(a: &ScenarioSpec, b: &ScenarioSpec, opts: RunOptions<'_>) -> Result<Comparison> {
    let n = a.trials.min(b.trials);
    let (za, _) = simulate(&Scenario::new(a.clone())?, n, opts)?;
    let (zb, _) = simulate(&Scenario::new(b.clone())?, n, opts)?;
    let k = za.len().min(zb.len());
    Ok(Comparison {
        a: za[..k].to_vec(),
        b: zb[..k].to_vec(),
        paired: same_support(a, b),
        gamma_bar_grid_db: a.gamma_bar_grid_db.clone(),
        rate: a.rate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub trial: u64,
    pub exhaustive: f64,
    pub epso: f64,
    pub same_selection: bool,
}

/// Swarm against brute force on the first `trials` instances of a fluid scenario.
pub fn run_oracle(spec: &ScenarioSpec, trials: usize, opts: RunOptions<'_>) -> Result<Vec<OracleRow>> {
    let scenario = Scenario::new(spec.clone())?;
    let rows: Vec<Result<OracleRow>> = with_pool(opts.threads, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let p = scenario.position_problem(t)?;
                let (sel, best) = p.exhaustive(DEFAULT_EXHAUSTIVE_CAP)?;
                let swarm = p.epso()?;
                Ok(OracleRow {
                    trial: t,
                    exhaustive: best,
                    epso: swarm.fitness,
                    same_selection: swarm.selection.preset_indices == sel.preset_indices,
                })
            })
            .collect()
    })?;
    rows.into_iter().collect()
}
