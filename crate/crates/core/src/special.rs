//! Special functions used by the channel and fading models.
//!
//! The gamma family is delegated to `statrs`; the Bessel function is local
//! because none of the usual numeric crates ship `J0`.

use std::f64::consts::PI;

/// Zeroth-order Bessel function of the first kind.
///
/// Evaluated from the integral representation
/// `J0(x) = (1/2π) ∫ cos(x sin θ) dθ` over one period with the trapezoidal
/// rule. For a periodic analytic integrand the rule converges
/// geometrically; its error is `2·J_n(x)` for `n` nodes, so `n = 2|x| + 32`
/// keeps it below double precision for any argument.
///
/// ```
/// use fris_core::special::bessel_j0;
/// assert_eq!(bessel_j0(0.0), 1.0);
/// assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-12);
/// ```
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return 1.0;
    }
    // Quarter-period symmetry: sum over θ in [0, π/2] with half weights on the ends.
    let quarter = (x.ceil() as usize) / 2 + 8;
    let n = 4 * quarter;
    let step = 2.0 * PI / n as f64;
    let mut acc = 0.5 * (1.0 + (x).cos());
    for k in 1..quarter {
        acc += (x * (k as f64 * step).sin()).cos();
    }
    acc * 4.0 / n as f64
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma function `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    statrs::function::gamma::gamma_ur(a, x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Power series J0(x) = Σ (-1)^k (x/2)^{2k} / (k!)^2, accurate for moderate x.
    fn j0_series(x: f64) -> f64 {
        let q = -(x * x) / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn matches_power_series() {
        for i in 0..=120 {
            let x = i as f64 * 0.1;
            let a = bessel_j0(x);
            let b = j0_series(x);
            assert!((a - b).abs() < 1e-12, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn large_arguments_follow_hankel_asymptotics() {
        // J0(x) ≈ sqrt(2/(πx)) [P cos(x - π/4) - Q sin(x - π/4)] with two terms each.
        for &x in &[40.0, 75.5, 140.0, 300.0] {
            let p = 1.0 - 9.0 / (128.0 * x * x);
            let q = -1.0 / (8.0 * x) + 75.0 / (1024.0 * x * x * x);
            let chi = x - PI / 4.0;
            let approx = (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin());
            assert!((bessel_j0(x) - approx).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn first_zero() {
        // bisection on the series oracle
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if j0_series(lo) * j0_series(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(bessel_j0(0.5 * (lo + hi)).abs() < 1e-12);
    }

    #[test]
    fn bounded_by_one() {
        for i in 0..2000 {
            let x = i as f64 * 0.05;
            assert!(bessel_j0(x).abs() <= 1.0);
        }
    }

    #[test]
    fn incomplete_gamma_exponential_case() {
        for &x in &[0.01, 0.5, 1.0, 3.0, 20.0] {
            assert!((gamma_q(1.0, x) - (-x as f64).exp()).abs() < 1e-14);
            assert!((gamma_p(1.0, x) + gamma_q(1.0, x) - 1.0).abs() < 1e-14);
        }
        assert_eq!(gamma_p(2.0, 0.0), 0.0);
        assert_eq!(gamma_q(2.0, f64::INFINITY), 0.0);
    }
}
