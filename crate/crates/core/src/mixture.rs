//! Nakagami-m mixture models of the optimized end-to-end magnitude.
//!
//! The EM fit alternates soft cluster memberships with closed-form parameter
//! updates; the shape update uses the approximation
//! `m = (1 + √(1 + 4Δ/3)) / (4Δ)` with `Δ` the weighted log-power deficit.
//! Moment matching and Kolmogorov–Smirnov distance minimization give the
//! single-component benchmarks, and the outage probability follows from the
//! mixture CDF at `√((2^R − 1)/γ̄)`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{gamma_p, gamma_q, ln_gamma};

/// Shape assigned when a cluster's log-power deficit is not positive.
pub const SHAPE_CLAMP: f64 = 100.0;
pub const DEFAULT_EM_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_EM_MAX_ITER: usize = 10_000;

fn check_params(m: f64, omega: f64) {
    assert!(m > 0.0 && m.is_finite(), "Nakagami shape must be positive, got {m}");
    assert!(omega > 0.0 && omega.is_finite(), "Nakagami mean power must be positive, got {omega}");
}

pub fn nakagami_ln_pdf(r: f64, m: f64, omega: f64) -> f64 {
    check_params(m, omega);
    assert!(r >= 0.0, "Nakagami support is r >= 0, got {r}");
    if r == 0.0 {
        return if m < 0.5 {
            f64::INFINITY
        } else if m == 0.5 {
            (2.0 / (std::f64::consts::PI * omega)).sqrt().ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    std::f64::consts::LN_2 + m * m.ln() - ln_gamma(m) - m * omega.ln() + (2.0 * m - 1.0) * r.ln()
        - m * r * r / omega
}

/// `2 m^m r^{2m−1} e^{−m r²/Ω} / (Γ(m) Ω^m)`.
pub fn nakagami_pdf(r: f64, m: f64, omega: f64) -> f64 {
    nakagami_ln_pdf(r, m, omega).exp()
}

/// `P(m, m r²/Ω)`.
pub fn nakagami_cdf(r: f64, m: f64, omega: f64) -> f64 {
    check_params(m, omega);
    assert!(r >= 0.0, "Nakagami support is r >= 0, got {r}");
    gamma_p(m, m * r * r / omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiComponent {
    pub weight: f64,
    pub shape: f64,
    pub mean_power: f64,
}

impl NakagamiComponent {
    pub fn new(weight: f64, shape: f64, mean_power: f64) -> Self {
        NakagamiComponent {
            weight,
            shape,
            mean_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSnapshot {
    pub components: Vec<NakagamiComponent>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub components: Vec<NakagamiComponent>,
    pub fit_log: Vec<FitSnapshot>,
    pub converged: bool,
    /// Set when some shape update hit `SHAPE_CLAMP`.
    pub shape_clamped: bool,
}

impl MixtureModel {
    pub fn single(c: NakagamiComponent) -> Self {
        Self::from_components(vec![NakagamiComponent { weight: 1.0, ..c }])
    }

    pub fn from_components(components: Vec<NakagamiComponent>) -> Self {
        assert!(!components.is_empty(), "mixture needs at least one component");
        MixtureModel {
            components,
            fit_log: Vec::new(),
            converged: true,
            shape_clamped: false,
        }
    }

    pub fn pdf(&self, r: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * nakagami_pdf(r, c.shape, c.mean_power))
            .sum()
    }

    pub fn cdf(&self, r: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * nakagami_cdf(r, c.shape, c.mean_power))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| log_sum_exp(self.components.iter().map(|c| {
            c.weight.ln() + nakagami_ln_pdf(x, c.shape, c.mean_power)
        }))).sum()
    }
}

impl fmt::Display for MixtureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(
                f,
                "alpha={:.10e} m={:.10e} omega={:.10e}",
                c.weight, c.shape, c.mean_power
            )?;
        }
        Ok(())
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Realizations of the optimized magnitude `z`, all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    samples: Vec<f64>,
    pub provenance: String,
}

impl TrainingSet {
    pub fn new(samples: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if let Some((i, &x)) = samples.iter().enumerate().find(|(_, &x)| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Constraint(format!(
                "training sample {i} is {x}; samples must be positive and finite"
            )));
        }
        Ok(TrainingSet {
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One decimal per line; blank lines and `#` comments are skipped.
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut samples = Vec::new();
        for (i, line) in file.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let x: f64 = t.parse().map_err(|_| Error::Parse {
                key: "sample".into(),
                line: i + 1,
                reason: format!("`{t}` is not a number"),
            })?;
            samples.push(x);
        }
        Self::new(samples, path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for x in &self.samples {
            writeln!(out, "{x:.17e}")?;
        }
        out.flush()?;
        Ok(())
    }
}

fn shape_from_deficit(delta: f64) -> (f64, bool) {
    if delta > 0.0 {
        ((1.0 + (1.0 + 4.0 * delta / 3.0).sqrt()) / (4.0 * delta), false)
    } else {
        (SHAPE_CLAMP, true)
    }
}

/// Single-population estimate: `Ω = mean(x²)`, shape from the log deficit.
pub fn single_population_mle(samples: &[f64]) -> NakagamiComponent {
    let n = samples.len() as f64;
    let omega = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let mean_log = samples.iter().map(|x| (x * x).ln()).sum::<f64>() / n;
    let (shape, _) = shape_from_deficit(omega.ln() - mean_log);
    NakagamiComponent::new(1.0, shape, omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub components: usize,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl EmOptions {
    pub fn new(components: usize) -> Self {
        EmOptions {
            components,
            tolerance: DEFAULT_EM_TOLERANCE,
            max_iter: DEFAULT_EM_MAX_ITER,
        }
    }
}

/// EM fit of a `Q`-component Nakagami mixture.
///
/// Weights start uniform-random and normalized; component `i` starts at the
/// single-population estimate scaled by `0.8 + 0.4·i/(Q−1)`. Iteration stops
/// when every shape and mean power moves by less than `tolerance` relative.
pub fn em_fit<R: Rng + ?Sized>(data: &TrainingSet, opts: &EmOptions, rng: &mut R) -> Result<MixtureModel> {
    let q = opts.components;
    let x = data.samples();
    let n = x.len();
    if q == 0 {
        return Err(Error::Constraint("mixture needs at least one component".into()));
    }
    if n < 100 * q {
        return Err(Error::Constraint(format!(
            "{n} samples are too few for {q} components (need at least {})",
            100 * q
        )));
    }

    let base = single_population_mle(x);
    let raw: Vec<f64> = (0..q).map(|_| rng.random::<f64>() + f64::MIN_POSITIVE).collect();
    let total: f64 = raw.iter().sum();
    let mut comps: Vec<NakagamiComponent> = (0..q)
        .map(|i| {
            let scale = if q == 1 { 1.0 } else { 0.8 + 0.4 * i as f64 / (q - 1) as f64 };
            NakagamiComponent::new(raw[i] / total, base.shape * scale, base.mean_power * scale)
        })
        .collect();

    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let log_sq: Vec<f64> = sq.iter().map(|v| v.ln()).collect();
    let mut resp = vec![0.0; n * q];
    let mut log_terms = vec![0.0; q];
    let mut fit_log = Vec::new();
    let mut converged = false;
    let mut shape_clamped = false;

    for _ in 0..opts.max_iter {
        // E-step, in the log domain
        let mut ll = 0.0;
        for j in 0..n {
            for (i, c) in comps.iter().enumerate() {
                log_terms[i] = c.weight.ln() + nakagami_ln_pdf(x[j], c.shape, c.mean_power);
            }
            let lse = log_sum_exp(log_terms.iter().copied());
            ll += lse;
            for i in 0..q {
                resp[j * q + i] = (log_terms[i] - lse).exp();
            }
        }
        fit_log.push(FitSnapshot {
            components: comps.clone(),
            log_likelihood: ll,
        });

        // M-step
        let mut next = Vec::with_capacity(q);
        for i in 0..q {
            let mass: f64 = (0..n).map(|j| resp[j * q + i]).sum();
            if !(mass >= 1e-8 * n as f64) {
                return Err(Error::ComponentCollapse { component: i, mass });
            }
            let omega = (0..n).map(|j| resp[j * q + i] * sq[j]).sum::<f64>() / mass;
            let delta = (0..n)
                .map(|j| resp[j * q + i] * (omega.ln() - log_sq[j]))
                .sum::<f64>()
                / mass;
            let (shape, clamped) = shape_from_deficit(delta);
            shape_clamped |= clamped;
            next.push(NakagamiComponent::new(mass / n as f64, shape, omega));
        }

        let moved = comps.iter().zip(&next).any(|(a, b)| {
            ((b.shape - a.shape) / a.shape).abs() >= opts.tolerance
                || ((b.mean_power - a.mean_power) / a.mean_power).abs() >= opts.tolerance
        });
        comps = next;
        if !moved {
            converged = true;
            break;
        }
    }

    let ll = MixtureModel::from_components(comps.clone()).log_likelihood(x);
    fit_log.push(FitSnapshot {
        components: comps.clone(),
        log_likelihood: ll,
    });
    Ok(MixtureModel {
        components: comps,
        fit_log,
        converged,
        shape_clamped,
    })
}

/// Moment matching on the power `x²`: `Ω = E[x²]`, `m = Ω² / Var[x²]`.
pub fn mom_fit(data: &TrainingSet) -> Result<NakagamiComponent> {
    let x = data.samples();
    if x.is_empty() {
        return Err(Error::Constraint("moment matching needs at least one sample".into()));
    }
    let n = x.len() as f64;
    let omega = x.iter().map(|v| v * v).sum::<f64>() / n;
    let var = x.iter().map(|v| (v * v - omega).powi(2)).sum::<f64>() / n;
    if !(var > 1e-14 * omega * omega) {
        return Err(Error::Degenerate("sample power has zero variance".into()));
    }
    Ok(NakagamiComponent::new(1.0, omega * omega / var, omega))
}

/// Two-sided Kolmogorov–Smirnov distance between the samples and a model CDF.
pub fn ks_statistic_with(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_statistic(data: &TrainingSet, model: &MixtureModel) -> f64 {
    ks_statistic_with(data.samples(), |r| model.cdf(r))
}

/// Single Nakagami minimizing the KS distance, by coordinate search over
/// `(ln m, ln Ω)` started from the moment-matching estimate.
pub fn ks_fit(data: &TrainingSet) -> Result<NakagamiComponent> {
    let seed = mom_fit(data)?;
    let mut sorted = data.samples().to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let stat = |lm: f64, lo: f64| {
        let (m, o) = (lm.exp(), lo.exp());
        sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = nakagami_cdf(x, m, o);
                (f - i as f64 / n).max((i + 1) as f64 / n - f)
            })
            .fold(0.0, f64::max)
    };
    let mut p = [seed.shape.ln(), seed.mean_power.ln()];
    let mut best = stat(p[0], p[1]);
    let mut step = 0.25;
    while step > 1e-6 {
        let mut improved = false;
        for axis in 0..2 {
            for dir in [1.0, -1.0] {
                let mut cand = p;
                cand[axis] += dir * step;
                let v = stat(cand[0], cand[1]);
                if v < best {
                    best = v;
                    p = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(NakagamiComponent::new(1.0, p[0].exp(), p[1].exp()))
}

/// Outage threshold on the magnitude, `√((2^R − 1)/γ̄)`.
pub fn magnitude_threshold(gamma_bar: f64, rate: f64) -> f64 {
    ((2f64.powf(rate) - 1.0) / gamma_bar).sqrt()
}

/// Closed-form outage `1 − Σ α_i Γ(m_i, m_i(2^R − 1)/(γ̄ Ω_i)) / Γ(m_i)`.
pub fn analytic_op(model: &MixtureModel, gamma_bar: f64, rate: f64) -> f64 {
    let snr_threshold = 2f64.powf(rate) - 1.0;
    let survive: f64 = model
        .components
        .iter()
        .map(|c| c.weight * gamma_q(c.shape, c.shape * snr_threshold / (gamma_bar * c.mean_power)))
        .sum();
    (1.0 - survive).clamp(0.0, 1.0)
}
