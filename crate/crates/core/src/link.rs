//! End-to-end gain and SNR of the reflected link.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::C64;

/// Reflection phases, stored reduced to `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    phases: Vec<f64>,
}

impl PhaseConfig {
    pub fn new(phases: impl IntoIterator<Item = f64>) -> Self {
        PhaseConfig {
            phases: phases.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn zeros(m: usize) -> Self {
        PhaseConfig { phases: vec![0.0; m] }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal entries `e^{jφ_m}`.
    pub fn rotations(&self) -> impl Iterator<Item = C64> + '_ {
        self.phases.iter().map(|&p| C64::from_polar(1.0, p))
    }
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Unit-norm transmit beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    weights: DVector<C64>,
}

impl Beamformer {
    /// Normalizes `weights`; `None` when they are all zero.
    pub fn normalized(weights: DVector<C64>) -> Option<Self> {
        let n = weights.norm();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        Some(Beamformer {
            weights: weights / C64::new(n, 0.0),
        })
    }

    pub fn weights(&self) -> &DVector<C64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same beamformer with every weight multiplied by `e^{jθ}`.
    pub fn rotated(&self, theta: f64) -> Self {
        Beamformer {
            weights: &self.weights * C64::from_polar(1.0, theta),
        }
    }
}

/// Transmit SNR `γ̄ = P/σ²` and the rate threshold in bit/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrContext {
    pub gamma_bar: f64,
    pub rate_threshold_bpshz: f64,
}

impl SnrContext {
    pub fn new(gamma_bar: f64, rate_threshold_bpshz: f64) -> Self {
        assert!(gamma_bar > 0.0, "average transmit SNR must be positive");
        SnrContext {
            gamma_bar,
            rate_threshold_bpshz,
        }
    }

    pub fn from_db(gamma_bar_db: f64, rate_threshold_bpshz: f64) -> Self {
        Self::new(10f64.powf(gamma_bar_db / 10.0), rate_threshold_bpshz)
    }
}

/// `G·w`, the per-element incident signal.
pub fn incident(g: &DMatrix<C64>, w: &Beamformer) -> DVector<C64> {
    assert_eq!(g.ncols(), w.len(), "G has {} columns but w has {} weights", g.ncols(), w.len());
    g * w.weights()
}

/// `hᴴ·diag(e^{jφ})·G·w`.
pub fn effective_gain(h: &DVector<C64>, psi: &PhaseConfig, g: &DMatrix<C64>, w: &Beamformer) -> C64 {
    assert_eq!(h.len(), psi.len(), "h and phase vector lengths differ");
    assert_eq!(h.len(), g.nrows(), "h and G row counts differ");
    let gw = incident(g, w);
    h.iter()
        .zip(psi.rotations())
        .zip(gw.iter())
        .map(|((hm, rot), x)| hm.conj() * rot * x)
        .sum()
}

pub fn snr(gain: C64, ctx: &SnrContext) -> f64 {
    ctx.gamma_bar * gain.norm_sqr()
}

/// Phases that co-phase every reflected path: `φ_m = ∠h_m − ∠(g_m w)`.
pub fn aligned_phases(h: &DVector<C64>, g: &DMatrix<C64>, w: &Beamformer) -> PhaseConfig {
    assert_eq!(h.len(), g.nrows(), "h and G row counts differ");
    let gw = incident(g, w);
    PhaseConfig::new(h.iter().zip(gw.iter()).map(|(hm, x)| {
        if hm.norm_sqr() == 0.0 || x.norm_sqr() == 0.0 {
            0.0
        } else {
            hm.arg() - x.arg()
        }
    }))
}

pub fn random_phases<R: Rng + ?Sized>(m: usize, rng: &mut R) -> PhaseConfig {
    PhaseConfig::new((0..m).map(|_| rng.random::<f64>() * TAU))
}

/// All-ones beamformer scaled to unit norm.
pub fn uniform_beamformer(l: usize) -> Beamformer {
    assert!(l >= 1, "need at least one antenna");
    let v = 1.0 / (l as f64).sqrt();
    Beamformer {
        weights: DVector::from_element(l, C64::new(v, 0.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(m: usize, l: usize, seed: u64) -> (DVector<C64>, DMatrix<C64>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = DVector::from_fn(m, |_, _| complex_normal(&mut rng));
        let g = DMatrix::from_fn(m, l, |_, _| complex_normal(&mut rng));
        (h, g, rng)
    }

    fn random_beam(l: usize, rng: &mut ChaCha8Rng) -> Beamformer {
        Beamformer::normalized(DVector::from_fn(l, |_, _| complex_normal(rng))).unwrap()
    }

    #[test]
    fn scalar_link() {
        let h = DVector::from_element(1, C64::new(1.0, 0.0));
        let g = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let gain = effective_gain(&h, &PhaseConfig::zeros(1), &g, &uniform_beamformer(1));
        assert_eq!(gain, C64::new(1.0, 0.0));
    }

    #[test]
    fn matches_triple_sum() {
        let (h, g, mut rng) = random_instance(4, 2, 1);
        let psi = random_phases(4, &mut rng);
        let w = random_beam(2, &mut rng);
        let mut want = C64::new(0.0, 0.0);
        for m in 0..4 {
            for l in 0..2 {
                want += h[m].conj() * C64::from_polar(1.0, psi.phases()[m]) * g[(m, l)] * w.weights()[l];
            }
        }
        assert!((effective_gain(&h, &psi, &g, &w) - want).norm() < 1e-12);
    }

    #[test]
    fn common_rotation_of_w() {
        let (h, g, mut rng) = random_instance(5, 3, 2);
        let psi = random_phases(5, &mut rng);
        let w = random_beam(3, &mut rng);
        let a = effective_gain(&h, &psi, &g, &w);
        let b = effective_gain(&h, &psi, &g, &w.rotated(0.7));
        assert!((b - a * C64::from_polar(1.0, 0.7)).norm() < 1e-12);
        let ctx = SnrContext::new(3.0, 1.0);
        assert!((snr(a, &ctx) - snr(b, &ctx)).abs() < 1e-12 * snr(a, &ctx));
    }

    #[test]
    fn snr_values() {
        let ctx = SnrContext::new(100.0, 1.0);
        assert_eq!(snr(C64::new(0.0, 0.0), &ctx), 0.0);
        assert_eq!(snr(C64::new(1.0, 0.0), &ctx), 100.0);
        let z = 0.37;
        assert!((snr(C64::from_polar(z, 1.1), &ctx) - 100.0 * z * z).abs() < 1e-12);
    }

    #[test]
    fn alignment_gives_triangle_sum() {
        for seed in 0..20 {
            let (h, g, mut rng) = random_instance(3, 2, 10 + seed);
            let w = random_beam(2, &mut rng);
            let psi = aligned_phases(&h, &g, &w);
            let gain = effective_gain(&h, &psi, &g, &w);
            let gw = incident(&g, &w);
            let want: f64 = (0..3).map(|m| h[m].norm() * gw[m].norm()).sum();
            assert!(gain.im.abs() < 1e-12);
            assert!((gain.re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn alignment_single_element() {
        let (h, g, mut rng) = random_instance(1, 3, 99);
        let w = random_beam(3, &mut rng);
        let gain = effective_gain(&h, &aligned_phases(&h, &g, &w), &g, &w);
        assert!((gain.norm() - h[0].norm() * incident(&g, &w)[0].norm()).abs() < 1e-12);
    }

    #[test]
    fn real_positive_inputs_need_no_phase() {
        let h = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        let g = DMatrix::from_row_slice(2, 1, &[C64::new(0.5, 0.0), C64::new(3.0, 0.0)]);
        let psi = aligned_phases(&h, &g, &uniform_beamformer(1));
        assert_eq!(psi.phases(), &[0.0, 0.0]);
    }

    #[test]
    fn alignment_beats_random_phases() {
        for seed in 0..20 {
            let (h, g, mut rng) = random_instance(6, 2, 200 + seed);
            let w = random_beam(2, &mut rng);
            let best = effective_gain(&h, &aligned_phases(&h, &g, &w), &g, &w).norm();
            for _ in 0..1000 {
                let psi = random_phases(6, &mut rng);
                assert!(effective_gain(&h, &psi, &g, &w).norm() <= best + 1e-12);
            }
        }
    }

    #[test]
    fn uniform_weights() {
        let w = uniform_beamformer(4);
        assert!(w.weights().iter().all(|x| (*x - C64::new(0.5, 0.0)).norm() < 1e-15));
        assert_eq!(uniform_beamformer(1).weights()[0], C64::new(1.0, 0.0));
        assert!((w.weights().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_phases_are_uniform() {
        // chi-square over 20 bins, 19 dof; 1% critical value 36.19
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bins = 20;
        let draws = 100_000;
        let mut counts = vec![0usize; bins];
        let psi = random_phases(draws, &mut rng);
        for &p in psi.phases() {
            assert!((0.0..TAU).contains(&p));
            counts[((p / TAU) * bins as f64) as usize] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn phases_wrap() {
        let p = PhaseConfig::new([-0.5, TAU + 0.25, 3.0, -1e-20]);
        assert!((p.phases()[0] - (TAU - 0.5)).abs() < 1e-12);
        assert!((p.phases()[1] - 0.25).abs() < 1e-12);
        assert_eq!(p.phases()[2], 3.0);
        assert!(p.phases()[3] < TAU);
    }
}
