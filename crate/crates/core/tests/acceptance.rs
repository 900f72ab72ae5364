//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use fris_core::channel::{
    complex_normal, correlation_matrix, covariance_factor, sample_channels, PathLoss, C64, DEFAULT_JITTER_FLOOR,
};
use fris_core::geometry::{build_preset_grid, SurfaceConfig};
use fris_core::harness::{
    fit_distances, fit_models, mc_outage, pooled_standard_error, run_scenario, simulate, write_curve,
    Architecture, FitMethod, FitSpec, RunOptions, Scenario, ScenarioSpec,
};
use fris_core::joint::{alternating_optimize, snr_upper_bound, AltOptParams};
use fris_core::link::{effective_gain, snr, Beamformer, PhaseConfig, SnrContext};
use fris_core::mixture::{
    analytic_op, em_fit, nakagami_pdf, EmOptions, MixtureModel, NakagamiComponent, TrainingSet,
};
use fris_core::position::DEFAULT_EXHAUSTIVE_CAP;

type Outcome = Result<String, String>;

fn desk(arch: Architecture, m: usize, l: usize, trials: usize, seed: u64) -> ScenarioSpec {
    let mut s = ScenarioSpec::default();
    s.architecture = arch;
    s.surface.num_active = m;
    s.num_bs_antennas = l;
    s.trials = trials;
    s.master_seed = seed;
    s.fit.methods.clear();
    s
}

fn magnitudes(spec: &ScenarioSpec) -> Vec<f64> {
    let sc = Scenario::new(spec.clone()).expect("scenario");
    simulate(&sc, spec.trials, RunOptions::default()).expect("simulate").0
}

fn db_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Optimized fluid surface, M = 16, L = 3: 1e4 trials shared by several criteria.
fn fluid_bf_ps_16() -> &'static [f64] {
    static Z: OnceLock<Vec<f64>> = OnceLock::new();
    Z.get_or_init(|| magnitudes(&desk(Architecture::FrisSpoBfPs, 16, 3, 10_000, 1)))
}

fn criterion_1() -> Outcome {
    let grid = db_grid(90.0, 150.0, 1.0);
    let mut checked = 0;
    for l in [1, 5] {
        let fluid = magnitudes(&desk(Architecture::FrisSpo, 16, l, 2000, 11));
        let conv = magnitudes(&desk(Architecture::ConventionalRandom, 16, l, 2000, 11));
        for &db in &grid {
            let (a, b) = (mc_outage(&fluid, lin(db), 1.0), mc_outage(&conv, lin(db), 1.0));
            if !((0.02..=0.98).contains(&a) || (0.02..=0.98).contains(&b)) {
                continue;
            }
            checked += 1;
            if a >= b {
                return Err(format!("L={l} at {db} dB: fluid OP {a} not below conventional {b}"));
            }
        }
    }
    if checked == 0 {
        return Err("no grid point in range".into());
    }
    Ok(format!("{checked} points, 2000 paired trials each"))
}

fn criterion_2() -> Outcome {
    let grid = db_grid(90.0, 140.0, 1.0);
    let n = 2000;
    let mut worst = (0.0f64, String::new());
    let mut failures = Vec::new();
    for m in [4, 16, 36] {
        let fluid = if m == 16 {
            fluid_bf_ps_16()[..n].to_vec()
        } else {
            magnitudes(&desk(Architecture::FrisSpoBfPs, m, 3, n, 1))
        };
        let conv = magnitudes(&desk(Architecture::ConventionalBfPs, m, 3, n, 1));
        for &db in &grid {
            let (a, b) = (mc_outage(&fluid, lin(db), 1.0), mc_outage(&conv, lin(db), 1.0));
            if !((0.02..=0.98).contains(&a) || (0.02..=0.98).contains(&b)) {
                continue;
            }
            let bound = 3.0 * pooled_standard_error(a, n, b, n) + 0.01;
            let excess = (a - b).abs() / bound;
            if excess > worst.0 {
                worst = (excess, format!("M={m} {db} dB: fluid {a:.4} vs conventional {b:.4}, bound {bound:.4}"));
            }
            if (a - b).abs() > bound {
                failures.push(format!("M={m}@{db}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("largest gap/bound {:.2} ({})", worst.0, worst.1))
    } else {
        Err(format!(
            "{} points outside the band, e.g. {}; worst {}",
            failures.len(),
            failures[0],
            worst.1
        ))
    }
}

fn criterion_3() -> Outcome {
    let grid = db_grid(90.0, 140.0, 0.5);
    let fluid = &fluid_bf_ps_16()[..2000];
    let mut spec = desk(Architecture::CompactBfPs, 16, 3, 2000, 1);
    spec.compact_spacing_m = spec.surface.wavelength_m / 2.0;
    let compact = magnitudes(&spec);
    let mut checked = 0;
    for &db in &grid {
        let (f, c) = (mc_outage(fluid, lin(db), 1.0), mc_outage(&compact, lin(db), 1.0));
        if !((0.05..=0.95).contains(&f) && (0.05..=0.95).contains(&c)) {
            continue;
        }
        checked += 1;
        if c <= f {
            return Err(format!("{db} dB: compact OP {c} not above fluid {f}"));
        }
    }
    if checked == 0 {
        return Err("no grid point with both outage values in [0.05, 0.95]".into());
    }
    Ok(format!("{checked} points"))
}

fn criterion_4() -> Outcome {
    let z = fluid_bf_ps_16();
    let n = z.len();
    let data = TrainingSet::new(z.to_vec(), "optimized fluid surface").map_err(|e| e.to_string())?;
    let fit = FitSpec {
        q: 2,
        t_sp: n,
        tol: 1e-3,
        methods: vec![FitMethod::Em],
    };
    let models = fit_models(&data, &fit, 1).map_err(|e| e.to_string())?;
    let em = models.em.as_ref().unwrap();
    let mut checked = 0;
    for db in db_grid(90.0, 130.0, 0.5) {
        let p = mc_outage(z, lin(db), 1.0);
        if !(0.01..=0.99).contains(&p) {
            continue;
        }
        checked += 1;
        let a = analytic_op(em, lin(db), 1.0);
        let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt() + 0.01;
        if (a - p).abs() > bound {
            return Err(format!("{db} dB: analytic {a:.4} vs Monte Carlo {p:.4}, bound {bound:.4}"));
        }
    }
    if checked == 0 {
        return Err("no grid point in range".into());
    }

    // KS comparison over scenario seeds
    let t_sp = 2000;
    let mut wins = 0;
    let seeds = 20;
    for seed in 100..100 + seeds {
        let spec = desk(Architecture::FrisSpoBfPs, 16, 3, t_sp, seed);
        let data = TrainingSet::new(magnitudes(&spec), "seed").map_err(|e| e.to_string())?;
        let fit = FitSpec {
            q: 2,
            t_sp,
            tol: 1e-3,
            methods: vec![FitMethod::Em, FitMethod::Mom],
        };
        let models = fit_models(&data, &fit, seed).map_err(|e| e.to_string())?;
        let d = fit_distances(&data, &models);
        let ks = |m: FitMethod| d.iter().find(|x| x.0 == m).unwrap().1;
        wins += usize::from(ks(FitMethod::Em) <= ks(FitMethod::Mom));
    }
    if wins * 10 < seeds as usize * 9 {
        return Err(format!("EM KS distance beat moment matching in only {wins}/{seeds} seeds"));
    }
    Ok(format!(
        "{checked} points within band (t_sp={n}); EM KS <= MoM KS in {wins}/{seeds} seeds (t_sp={t_sp})"
    ))
}

fn criterion_5() -> Outcome {
    let mut hits = 0;
    let mut total = 0;
    for (n_h, n_v, m) in [(4, 2, 4), (4, 2, 2)] {
        for arch in [Architecture::FrisSpoBfPs, Architecture::FrisSpo] {
            let mut spec = desk(arch, m, 3, 25, 7);
            let d = spec.surface.spacing_h_m;
            spec.surface.n_h = n_h;
            spec.surface.n_v = n_v;
            spec.surface.min_distance_m = 0.5 * d;
            spec.epso.swarm_size = 20;
            spec.epso.max_iter = 10;
            let sc = Scenario::new(spec).map_err(|e| e.to_string())?;
            let presets = sc.grid().subarea_members(0).len();
            for t in 0..25 {
                let p = sc.position_problem(t).map_err(|e| e.to_string())?;
                let (_, best) = p.exhaustive(DEFAULT_EXHAUSTIVE_CAP).map_err(|e| e.to_string())?;
                let out = p.epso().map_err(|e| e.to_string())?;
                total += 1;
                if out.fitness > best * (1.0 + 1e-12) {
                    return Err(format!("{m}x{presets} trial {t}: swarm {} exceeds optimum {best}", out.fitness));
                }
                if out.trace.windows(2).any(|w| w[1] < w[0]) {
                    return Err(format!("{m}x{presets} trial {t}: global-best trace decreased"));
                }
                hits += usize::from(out.fitness >= best * (1.0 - 1e-12));
            }
        }
    }
    if hits * 10 < total * 9 {
        return Err(format!("optimum reached in {hits}/{total} instances"));
    }
    Ok(format!("optimum reached in {hits}/{total} instances"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ctx = SnrContext::new(10.0, 1.0);
    let params = AltOptParams::default();
    for i in 0..1000 {
        let h = DVector::from_fn(8, |_, _| complex_normal(&mut rng));
        let g = DMatrix::from_fn(8, 3, |_, _| complex_normal(&mut rng));
        let design = alternating_optimize(&h, &g, &ctx, &params).map_err(|e| e.to_string())?;
        if design.snr_trace.windows(2).any(|w| w[1] < w[0]) {
            return Err(format!("instance {i}: trace decreased"));
        }
        let best = design.snr();
        if best > snr_upper_bound(&h, &g, &ctx) * (1.0 + 1e-12) {
            return Err(format!("instance {i}: above the triangle bound"));
        }
        for _ in 0..10_000 {
            let psi = PhaseConfig::new((0..8).map(|_| rng.random::<f64>() * TAU));
            let w = Beamformer::normalized(DVector::from_fn(3, |_, _| complex_normal(&mut rng))).unwrap();
            let probe = snr(effective_gain(&h, &psi, &g, &w), &ctx);
            if probe > best * (1.0 + 1e-12) {
                return Err(format!("instance {i}: random probe {probe} beats {best}"));
            }
        }
    }
    Ok("1000 instances, 1e4 probes each".into())
}

fn criterion_7() -> Outcome {
    let lambda = 0.125;
    let d = lambda / 3.0;
    let mut cfg = SurfaceConfig::new(lambda, d, d, 4, 4, 16);
    cfg.min_distance_m = 0.0;
    let grid = build_preset_grid(&cfg).map_err(|e| e.to_string())?;
    let r = correlation_matrix(grid.coords(), lambda, 2.0);
    for i in 0..16 {
        if r.entries[(i, i)] != 1.0 {
            return Err(format!("diagonal entry {i} is {}", r.entries[(i, i)]));
        }
    }
    if r.entries.iter().any(|x| !(-1.0..=1.0).contains(x)) {
        return Err("entry outside [-1, 1]".into());
    }
    let factor = covariance_factor(&r, DEFAULT_JITTER_FLOOR).map_err(|e| e.to_string())?;
    let pl = PathLoss::from_db(-40.0, -40.0, cfg.element_area());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let mut acc = DMatrix::<C64>::zeros(16, 16);
    for _ in 0..draws {
        let h = sample_channels(&factor, &pl, 1, &mut rng).h;
        acc += &h * h.adjoint();
    }
    let emp = acc / C64::new(draws as f64, 0.0);
    let scale = pl.element_area_m2 * pl.beta2;
    let target = (&r.entries + DMatrix::identity(16, 16) * factor.jitter) * scale;
    let diff: f64 = (0..16)
        .flat_map(|i| (0..16).map(move |j| (i, j)))
        .map(|(i, j)| (emp[(i, j)] - C64::new(target[(i, j)], 0.0)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let rel = diff / target.norm();
    if rel > 0.05 {
        return Err(format!("relative Frobenius error {rel:.4}"));
    }
    Ok(format!("relative Frobenius error {rel:.4} over {draws} draws"))
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn nakagami_draws(c: &[(f64, f64, f64)], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mut u: f64 = rng.random();
            let mut pick = c.len() - 1;
            for (i, comp) in c.iter().enumerate() {
                if u < comp.0 {
                    pick = i;
                    break;
                }
                u -= comp.0;
            }
            let (_, m, omega) = c[pick];
            let power: f64 = Gamma::new(m, omega / m).unwrap().sample(rng);
            power.sqrt()
        })
        .collect()
}

fn criterion_8() -> Outcome {
    for m in [0.5f64, 0.75, 1.0, 2.0, 5.0, 10.0, 50.0] {
        for omega in [0.1, 1.0, 4.0] {
            // substitute r = s² so the integrand stays smooth at the origin
            let upper = (omega * (m + 60.0) / m).sqrt().sqrt();
            let f = |s: f64| 2.0 * s * nakagami_pdf(s * s, m, omega);
            let total = simpson(&f, 0.0, upper, 1e-13);
            if (total - 1.0).abs() > 1e-8 {
                return Err(format!("pdf(m={m}, omega={omega}) integrates to {total}"));
            }
        }
    }
    for omega in [0.3, 1.0, 2.5] {
        let model = MixtureModel::single(NakagamiComponent::new(1.0, 1.0, omega));
        for db in [-10.0, 0.0, 10.0, 20.0] {
            for rate in [0.5, 1.0, 3.0] {
                let g = lin(db);
                let want = 1.0 - (-(2f64.powf(rate) - 1.0) / (g * omega)).exp();
                let got = analytic_op(&model, g, rate);
                if (got - want).abs() > 1e-12 {
                    return Err(format!("Rayleigh case omega={omega} {db} dB R={rate}: {got} vs {want}"));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let single = TrainingSet::new(nakagami_draws(&[(1.0, 2.0, 1.0)], 10_000, &mut rng), "synthetic")
        .map_err(|e| e.to_string())?;
    let fit = em_fit(&single, &EmOptions::new(1), &mut rng).map_err(|e| e.to_string())?;
    let c = fit.components[0];
    if (c.shape - 2.0).abs() > 0.1 || (c.mean_power - 1.0).abs() > 0.03 {
        return Err(format!("single component recovered as m={} omega={}", c.shape, c.mean_power));
    }
    let data = TrainingSet::new(nakagami_draws(&[(0.5, 1.0, 1.0), (0.5, 5.0, 4.0)], 10_000, &mut rng), "synthetic")
        .map_err(|e| e.to_string())?;
    let fit = em_fit(&data, &EmOptions::new(2), &mut rng).map_err(|e| e.to_string())?;
    let mut comps = fit.components.clone();
    comps.sort_by(|a, b| a.mean_power.total_cmp(&b.mean_power));
    for (c, (w, m)) in comps.iter().zip([(0.5, 1.0), (0.5, 5.0)]) {
        if (c.weight - w).abs() > 0.05 || (c.shape - m).abs() > 0.15 * m {
            return Err(format!("two-component fit {fit}"));
        }
    }
    Ok(format!("quadrature, Rayleigh closed form, mixture recovery ({fit})"))
}

fn criterion_9() -> Outcome {
    let mut spec = desk(Architecture::FrisSpoBfPs, 4, 2, 300, 9);
    spec.surface.n_h = 8;
    spec.surface.n_v = 8;
    spec.epso.swarm_size = 30;
    spec.epso.max_iter = 8;
    spec.fit = FitSpec {
        q: 2,
        t_sp: 400,
        tol: 1e-3,
        methods: vec![FitMethod::Em, FitMethod::Mom, FitMethod::Ks],
    };
    let strip = |text: String| {
        text.lines()
            .filter(|l| !l.starts_with("# generated"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut archs = 0;
    for arch in [Architecture::FrisSpoBfPs, Architecture::ConventionalRandom] {
        spec.architecture = arch;
        let mut reference: Option<String> = None;
        archs += 1;
        for threads in [1, 2, 3, 4] {
            let report = run_scenario(&spec, RunOptions { threads, cancel: None }).map_err(|e| e.to_string())?;
            let text = strip(write_curve(&report));
            match &reference {
                None => reference = Some(text),
                Some(r) if *r != text => return Err(format!("{arch}: output differs at {threads} threads")),
                Some(_) => {}
            }
        }
    }
    Ok(format!("{archs} scenarios identical across 1 to 4 threads"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("fluid positions beat conventional layout without phase design", criterion_1),
        ("optimized fluid and conventional surfaces have matching outage", criterion_2),
        ("optimized fluid surface beats compact surface", criterion_3),
        ("mixture fit reproduces Monte Carlo outage", criterion_4),
        ("swarm reaches brute-force optimum on micro-instances", criterion_5),
        ("alternating optimization properties", criterion_6),
        ("channel covariance statistics", criterion_7),
        ("numerical kernels", criterion_8),
        ("determinism across thread counts", criterion_9),
    ];
    // ACCEPTANCE_ONLY=2,5 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
