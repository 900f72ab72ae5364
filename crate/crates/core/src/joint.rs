//! Alternating phase-shift and beamforming design for a fixed element layout.
//!
//! With `w` fixed the best phases co-phase all reflected paths; with the
//! phases fixed the best unit-norm `w` is the matched filter of the effective
//! row `hᴴΨG`. Alternating the two never decreases the SNR.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;

use crate::channel::C64;
use crate::error::{Error, Result};
use crate::link::{
    aligned_phases, effective_gain, random_phases, snr, uniform_beamformer, Beamformer, PhaseConfig,
    SnrContext,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltOptParams {
    /// Stop once the fractional SNR increase of a round drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for AltOptParams {
    fn default() -> Self {
        AltOptParams {
            tolerance: 1e-6,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDesign {
    pub beamformer: Beamformer,
    pub phases: PhaseConfig,
    /// SNR after initial alignment, then after each accepted round.
    pub snr_trace: Vec<f64>,
    pub converged: bool,
}

impl LinkDesign {
    /// Optimized SNR `γ*`.
    pub fn snr(&self) -> f64 {
        *self.snr_trace.last().expect("trace is never empty")
    }
}

/// `hᴴ·diag(e^{jφ})·G` as a row vector.
pub fn effective_row(h: &DVector<C64>, psi: &PhaseConfig, g: &DMatrix<C64>) -> RowDVector<C64> {
    assert_eq!(h.len(), g.nrows(), "h and G row counts differ");
    assert_eq!(h.len(), psi.len(), "h and phase vector lengths differ");
    let mut row = RowDVector::<C64>::zeros(g.ncols());
    for ((m, hm), rot) in h.iter().enumerate().zip(psi.rotations()) {
        let coef = hm.conj() * rot;
        for l in 0..g.ncols() {
            row[l] += coef * g[(m, l)];
        }
    }
    row
}

/// Matched-filter beamformer `(hᴴΨG)ᴴ / ‖hᴴΨG‖`.
pub fn mrt_beamformer(h: &DVector<C64>, psi: &PhaseConfig, g: &DMatrix<C64>) -> Result<Beamformer> {
    let row = effective_row(h, psi, g);
    let w = DVector::from_iterator(row.len(), row.iter().map(|x| x.conj()));
    Beamformer::normalized(w)
        .ok_or_else(|| Error::Degenerate("effective channel row hᴴΨG is zero".into()))
}

pub fn alternating_optimize(
    h: &DVector<C64>,
    g: &DMatrix<C64>,
    ctx: &SnrContext,
    params: &AltOptParams,
) -> Result<LinkDesign> {
    assert!(h.len() >= 1 && g.ncols() >= 1, "need at least one element and one antenna");
    let mut w = uniform_beamformer(g.ncols());
    let mut phases = aligned_phases(h, g, &w);
    let mut trace = vec![snr(effective_gain(h, &phases, g, &w), ctx)];
    let mut converged = false;

    for _ in 0..params.max_iter {
        let prev = *trace.last().unwrap();
        let next_w = mrt_beamformer(h, &phases, g)?;
        let next_phases = aligned_phases(h, g, &next_w);
        let value = snr(effective_gain(h, &next_phases, g, &next_w), ctx);
        if value < prev {
            // rounding-level regression at the optimum
            converged = true;
            break;
        }
        w = next_w;
        phases = next_phases;
        trace.push(value);
        if prev <= 0.0 || (value - prev) / prev < params.tolerance {
            converged = true;
            break;
        }
    }

    Ok(LinkDesign {
        beamformer: w,
        phases,
        snr_trace: trace,
        converged,
    })
}

/// Unit-SNR result of [`alternating_optimize`] computed in place.
///
/// Each term is `(|h_m|, g_m)` with `g_m` the element's row of `G`; the phase
/// of `h_m` is absorbed by the aligned phases and never needed. Returns 0 when
/// the effective row vanishes.
pub fn optimized_power(terms: &[(f64, &[C64])], params: &AltOptParams) -> f64 {
    let Some(l) = terms.first().map(|t| t.1.len()) else {
        return 0.0;
    };
    let zero = C64::new(0.0, 0.0);
    let mut w = vec![C64::new(1.0 / (l as f64).sqrt(), 0.0); l];
    let mut row = vec![zero; l];
    // incident signals g_m·w for the current w
    let mut xs = vec![zero; terms.len()];
    let incident = |w: &[C64], xs: &mut [C64]| {
        let mut s = 0.0;
        for ((a, g), x) in terms.iter().zip(xs.iter_mut()) {
            *x = g.iter().zip(w).map(|(p, q)| p * q).sum();
            s += a * x.norm_sqr().sqrt();
        }
        s * s
    };

    let mut prev = incident(&w, &mut xs);
    let mut next_xs = vec![zero; terms.len()];
    for _ in 0..params.max_iter {
        row.fill(zero);
        for ((a, g), x) in terms.iter().zip(&xs) {
            let n = x.norm_sqr().sqrt();
            // a zero incident signal keeps phase 0, which leaves |h_m| unrotated
            let c = if n > 0.0 { x.conj() * (a / n) } else { C64::new(*a, 0.0) };
            for (r, gl) in row.iter_mut().zip(g.iter()) {
                *r += c * gl;
            }
        }
        let norm = row.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return 0.0;
        }
        row.iter_mut().for_each(|x| *x = x.conj() / norm);
        let value = incident(&row, &mut next_xs);
        if value < prev {
            break;
        }
        std::mem::swap(&mut w, &mut row);
        std::mem::swap(&mut xs, &mut next_xs);
        let old = prev;
        prev = value;
        if old <= 0.0 || (value - old) / old < params.tolerance {
            break;
        }
    }
    prev
}

/// How the reflecting elements and the base station are configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    /// Random reflection phases and the uniform beamformer.
    RandomPsUniformW,
    /// Alternating optimization of phases and beamformer.
    OptimizedBfPs,
}

/// End-to-end magnitude `|hᴴΨGw|` of a layout under `mode`.
pub fn link_magnitude<R: Rng + ?Sized>(
    h: &DVector<C64>,
    g: &DMatrix<C64>,
    mode: LinkMode,
    params: &AltOptParams,
    rng: &mut R,
) -> Result<f64> {
    match mode {
        LinkMode::RandomPsUniformW => {
            let psi = random_phases(h.len(), rng);
            Ok(effective_gain(h, &psi, g, &uniform_beamformer(g.ncols())).norm())
        }
        LinkMode::OptimizedBfPs => {
            let unit = SnrContext::new(1.0, 0.0);
            Ok(alternating_optimize(h, g, &unit, params)?.snr().sqrt())
        }
    }
}

/// SNR of a layout under `mode`.
pub fn evaluate_architecture<R: Rng + ?Sized>(
    h: &DVector<C64>,
    g: &DMatrix<C64>,
    mode: LinkMode,
    ctx: &SnrContext,
    params: &AltOptParams,
    rng: &mut R,
) -> Result<f64> {
    match mode {
        LinkMode::RandomPsUniformW => {
            let psi = random_phases(h.len(), rng);
            Ok(snr(effective_gain(h, &psi, g, &uniform_beamformer(g.ncols())), ctx))
        }
        LinkMode::OptimizedBfPs => Ok(alternating_optimize(h, g, ctx, params)?.snr()),
    }
}

/// `γ̄·(Σ_m |h_m|·‖g_m‖)²`, an upper bound on any design's SNR.
pub fn snr_upper_bound(h: &DVector<C64>, g: &DMatrix<C64>, ctx: &SnrContext) -> f64 {
    let s: f64 = (0..h.len()).map(|m| h[m].norm() * g.row(m).norm()).sum();
    ctx.gamma_bar * s * s
}
