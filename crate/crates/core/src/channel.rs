//! Jakes spatial correlation and correlated Rayleigh channel sampling.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Point, Selection};
use crate::special::bessel_j0;

pub type C64 = Complex<f64>;

/// Bessel argument multiplier matching the printed correlation model.
pub const DEFAULT_ARG_SCALE: f64 = 2.0;
/// Multiplier giving the textbook Jakes model `J0(2π d / λ)`.
pub const JAKES_ARG_SCALE: f64 = std::f64::consts::TAU;

pub const DEFAULT_JITTER_FLOOR: f64 = 1e-10;
pub const JITTER_CAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub beta1: f64,
    pub beta2: f64,
    pub element_area_m2: f64,
}

impl PathLoss {
    pub fn from_db(beta1_db: f64, beta2_db: f64, element_area_m2: f64) -> Self {
        PathLoss {
            beta1: 10f64.powf(beta1_db / 10.0),
            beta2: 10f64.powf(beta2_db / 10.0),
            element_area_m2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config {
                    field,
                    reason: format!("linear gain must lie in (0, 1], got {v}"),
                });
            }
        }
        if !(self.element_area_m2 > 0.0) {
            return Err(Error::Config {
                field: "element_area_m2",
                reason: format!("must be positive, got {}", self.element_area_m2),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub entries: DMatrix<f64>,
    pub positions: Vec<Point>,
    pub wavelength: f64,
    pub arg_scale: f64,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// `R[a, b] = J0(arg_scale · |pos_a - pos_b| / λ)`.
pub fn correlation_matrix(positions: &[Point], wavelength: f64, arg_scale: f64) -> CorrelationMatrix {
    assert!(!positions.is_empty(), "correlation matrix needs at least one position");
    assert!(wavelength > 0.0, "wavelength must be positive");
    let k = positions.len();
    let mut entries = DMatrix::<f64>::identity(k, k);
    // Lattice layouts repeat the same few distances many times.
    let mut cache: HashMap<u64, f64> = HashMap::new();
    for a in 0..k {
        for b in 0..a {
            let d = positions[a].distance(positions[b]);
            let v = *cache
                .entry(d.to_bits())
                .or_insert_with(|| bessel_j0(arg_scale * d / wavelength));
            entries[(a, b)] = v;
            entries[(b, a)] = v;
        }
    }
    CorrelationMatrix {
        entries,
        positions: positions.to_vec(),
        wavelength,
        arg_scale,
    }
}

/// Lower-triangular `F` with `F·Fᵀ = R + jitter·I`.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    pub lower: DMatrix<f64>,
    pub jitter: f64,
}

impl CovarianceFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }
}

/// Cholesky factor of `R`, adding diagonal jitter from `jitter_floor` upward
/// by decades until the factorization succeeds or `JITTER_CAP` is passed.
pub fn covariance_factor(r: &CorrelationMatrix, jitter_floor: f64) -> Result<CovarianceFactor> {
    assert!(jitter_floor >= 0.0, "jitter floor must be nonnegative");
    let k = r.dim();
    let mut jitter = jitter_floor.min(JITTER_CAP);
    loop {
        let mut m = r.entries.clone();
        for i in 0..k {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok(CovarianceFactor {
                lower: chol.unpack(),
                jitter,
            });
        }
        if jitter >= JITTER_CAP {
            let min_eigenvalue = r
                .entries
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            return Err(Error::Factorization {
                jitter,
                min_eigenvalue,
            });
        }
        jitter = if jitter == 0.0 { 1e-12 } else { (jitter * 10.0).min(JITTER_CAP) };
    }
}

/// Per-element channels: `g` is `K × L` with row `k` the surface element's
/// channel to every BS antenna, `h` the element-to-user channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub g: DMatrix<C64>,
    pub h: DVector<C64>,
}

impl ChannelSet {
    pub fn num_elements(&self) -> usize {
        self.h.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.g.ncols()
    }
}

/// One standard circularly-symmetric complex Gaussian draw.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_channels<R: Rng + ?Sized>(
    factor: &CovarianceFactor,
    pl: &PathLoss,
    num_antennas: usize,
    rng: &mut R,
) -> ChannelSet {
    sample_channels_with(factor, pl, num_antennas, || complex_normal(rng))
}

/// Sampling with an explicit source of `CN(0, 1)` innovations. The draw order
/// is `h` first, then the columns of `G`.
pub fn sample_channels_with(
    factor: &CovarianceFactor,
    pl: &PathLoss,
    num_antennas: usize,
    mut innovation: impl FnMut() -> C64,
) -> ChannelSet {
    let k = factor.dim();
    let cols = num_antennas + 1;
    let mut re = DMatrix::<f64>::zeros(k, cols);
    let mut im = DMatrix::<f64>::zeros(k, cols);
    for c in 0..cols {
        for r in 0..k {
            let e = innovation();
            re[(r, c)] = e.re;
            im[(r, c)] = e.im;
        }
    }
    let re = &factor.lower * re;
    let im = &factor.lower * im;
    let sh = (pl.element_area_m2 * pl.beta2).sqrt();
    let sg = (pl.element_area_m2 * pl.beta1).sqrt();
    let h = DVector::from_fn(k, |r, _| C64::new(re[(r, 0)], im[(r, 0)]) * sh);
    let g = DMatrix::from_fn(k, num_antennas, |r, c| {
        C64::new(re[(r, c + 1)], im[(r, c + 1)]) * sg
    });
    ChannelSet { g, h }
}

/// Rows of a full-grid channel set at the selected presets, in element order.
pub fn restrict_channels(full: &ChannelSet, sel: &Selection) -> ChannelSet {
    restrict_indices(full, &sel.preset_indices)
}

pub fn restrict_indices(full: &ChannelSet, indices: &[usize]) -> ChannelSet {
    let n = full.num_elements();
    for &i in indices {
        assert!(i < n, "preset index {i} out of range for {n} presets");
    }
    ChannelSet {
        g: full.g.select_rows(indices),
        h: DVector::from_iterator(indices.len(), indices.iter().map(|&i| full.h[i])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_preset_grid, SurfaceConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(k: usize, pitch: f64) -> Vec<Point> {
        (0..k).map(|i| Point::new(i as f64 * pitch, 0.0)).collect()
    }

    #[test]
    fn single_position_is_unit() {
        let r = correlation_matrix(&[Point::new(0.3, 0.1)], 0.125, 2.0);
        assert_eq!(r.entries, DMatrix::identity(1, 1));
    }

    #[test]
    fn third_wavelength_pair() {
        let lambda = 0.125;
        let r = correlation_matrix(&line(2, lambda / 3.0), lambda, 2.0);
        // series: J0(2/3) = Σ (-1)^k (1/3)^{2k} / (k!)^2
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 0..30 {
            if k > 0 {
                t *= -(1.0 / 9.0) / (k as f64 * k as f64);
            }
            s += t;
        }
        assert!((r.entries[(0, 1)] - s).abs() < 1e-13);
        // the commonly quoted 0.89164 is off in the fourth decimal
        assert!((s - 0.891_937_468).abs() < 1e-9);
    }

    #[test]
    fn first_zero_spacing_decorrelates() {
        let lambda = 0.125;
        let z1 = 2.404_825_557_695_773;
        let r = correlation_matrix(&line(2, lambda * z1 / 2.0), lambda, 2.0);
        assert!(r.entries[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn duplicates_are_legal() {
        let p = Point::new(0.1, 0.1);
        let r = correlation_matrix(&[p, p], 0.125, 2.0);
        assert_eq!(r.entries[(0, 1)], 1.0);
    }

    #[test]
    fn identity_factor() {
        let r = CorrelationMatrix {
            entries: DMatrix::identity(3, 3),
            positions: vec![],
            wavelength: 1.0,
            arg_scale: 2.0,
        };
        let f = covariance_factor(&r, 0.0).unwrap();
        assert_eq!(f.lower, DMatrix::identity(3, 3));
        assert_eq!(f.jitter, 0.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let r = CorrelationMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
            positions: vec![],
            wavelength: 1.0,
            arg_scale: 2.0,
        };
        let f = covariance_factor(&r, 0.0).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.75f64.sqrt()]);
        assert!((f.lower - want).norm() < 1e-15);
    }

    #[test]
    fn dense_row_multiplies_back() {
        let lambda = 0.125;
        let r = correlation_matrix(&line(48, lambda / 3.0), lambda, 2.0);
        let f = covariance_factor(&r, DEFAULT_JITTER_FLOOR).unwrap();
        assert!(f.jitter <= JITTER_CAP);
        let mut target = r.entries.clone();
        for i in 0..48 {
            target[(i, i)] += f.jitter;
        }
        let back = &f.lower * f.lower.transpose();
        assert!((back - &target).norm() / target.norm() < 1e-10);
    }

    #[test]
    fn duplicate_positions_need_jitter() {
        let p = Point::new(0.0, 0.0);
        let r = correlation_matrix(&[p, p, Point::new(0.01, 0.0)], 0.125, 2.0);
        let f = covariance_factor(&r, 0.0).unwrap();
        assert!(f.jitter > 0.0);
    }

    #[test]
    fn indefinite_matrix_fails_at_cap() {
        let r = CorrelationMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            positions: vec![],
            wavelength: 1.0,
            arg_scale: 2.0,
        };
        match covariance_factor(&r, DEFAULT_JITTER_FLOOR) {
            Err(Error::Factorization { min_eigenvalue, .. }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_innovations_give_zero_channels() {
        let r = correlation_matrix(&line(4, 0.05), 0.125, 2.0);
        let f = covariance_factor(&r, DEFAULT_JITTER_FLOOR).unwrap();
        let pl = PathLoss::from_db(-40.0, -40.0, 1.0);
        let ch = sample_channels_with(&f, &pl, 3, || C64::new(0.0, 0.0));
        assert!(ch.g.iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(ch.h.iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert_eq!(ch.g.shape(), (4, 3));
    }

    #[test]
    fn unit_variance_per_entry() {
        let f = CovarianceFactor {
            lower: DMatrix::identity(2, 2),
            jitter: 0.0,
        };
        let pl = PathLoss {
            beta1: 1.0,
            beta2: 1.0,
            element_area_m2: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut acc = [0.0; 4];
        for _ in 0..draws {
            let ch = sample_channels(&f, &pl, 1, &mut rng);
            acc[0] += ch.h[0].norm_sqr();
            acc[1] += ch.h[1].norm_sqr();
            acc[2] += ch.g[(0, 0)].norm_sqr();
            acc[3] += ch.g[(1, 0)].norm_sqr();
        }
        for a in acc {
            assert!((a / draws as f64 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn default_path_loss_power() {
        let lambda = 0.125;
        let area = (lambda / 3.0) * (lambda / 3.0);
        let pl = PathLoss::from_db(-40.0, -40.0, area);
        assert!((pl.beta1 - 1e-4).abs() < 1e-18);
        let r = correlation_matrix(&line(3, lambda / 3.0), lambda, 2.0);
        let f = covariance_factor(&r, DEFAULT_JITTER_FLOOR).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 50_000;
        let mut p = 0.0;
        for _ in 0..draws {
            p += sample_channels(&f, &pl, 1, &mut rng).h[1].norm_sqr();
        }
        let want = area * 1e-4;
        assert!((p / draws as f64 / want - 1.0).abs() < 0.03);
    }

    #[test]
    fn restriction() {
        let c = SurfaceConfig::new(0.125, 0.04, 0.04, 4, 4, 4);
        let grid = build_preset_grid(&c).unwrap();
        let r = correlation_matrix(grid.coords(), 0.125, 2.0);
        let f = covariance_factor(&r, DEFAULT_JITTER_FLOOR).unwrap();
        let pl = PathLoss::from_db(0.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let full = sample_channels(&f, &pl, 2, &mut rng);

        let all = Selection::from_indices(&grid, (0..16).collect());
        assert_eq!(restrict_channels(&full, &all), full);

        let one = restrict_indices(&full, &[5]);
        assert_eq!(one.h[0], full.h[5]);
        assert_eq!(one.g.row(0), full.g.row(5));

        let idx = [0, 3, 9, 14];
        let sel = Selection::from_indices(&grid, idx.to_vec());
        let sub = correlation_matrix(&sel.positions, 0.125, 2.0);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                assert_eq!(sub.entries[(a, b)], r.entries[(ia, ib)]);
            }
        }
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn restriction_out_of_range_panics() {
        let f = CovarianceFactor {
            lower: DMatrix::identity(2, 2),
            jitter: 0.0,
        };
        let pl = PathLoss::from_db(0.0, 0.0, 1.0);
        let ch = sample_channels_with(&f, &pl, 1, || C64::new(1.0, 0.0));
        restrict_indices(&ch, &[2]);
    }
}
