//! The Gaussian kernel, its second derivative, and the effective kernel of
//! the bias-reduced density estimator.
//!
//! Writing `K` for the standard normal density, the bias-reduced estimator
//! averages the *effective kernel*
//!
//! ```text
//! phi(u) = K(u) - (mu2 / 2) K''(u) = (3 - u^2) K(u) / 2
//! ```
//!
//! where `mu2 = 1` is the kernel's second moment. `phi` integrates to one
//! but is negative for `|u| > sqrt(3)`, which is what buys the extra order
//! of bias reduction.

use crate::error::{Error, Result};

/// `1 / sqrt(2 pi)`, the Gaussian normalization constant.
pub(crate) const INV_SQRT_2PI: f64 = 0.3989422804014327;

/// Moment and norm constants of the Gaussian kernel and its effective kernel.
///
/// All values are closed forms; the test suite cross-checks each against
/// adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    /// Second moment `mu2 = ∫ u^2 K(u) du`.
    pub mu2: f64,
    /// Third moment `mu3 = ∫ u^3 K(u) du` (zero by symmetry).
    pub mu3: f64,
    /// `∫ K(u)^2 du = 1 / (2 sqrt(pi))`.
    pub l2_k: f64,
    /// `∫ K''(u)^2 du = 3 / (8 sqrt(pi))`.
    pub l2_kpp: f64,
    /// `∫ phi(u)^2 du = 6.75 / (8 sqrt(pi))`.
    pub l2_phi: f64,
    /// `zeta = ∫ phi(u) du` (one: `∫ K = 1` and `∫ K'' = 0`).
    pub zeta: f64,
}

/// Returns the Gaussian kernel constants.
pub fn kernel_constants() -> KernelConstants {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    KernelConstants {
        mu2: 1.0,
        mu3: 0.0,
        l2_k: 1.0 / (2.0 * sqrt_pi),
        l2_kpp: 3.0 / (8.0 * sqrt_pi),
        l2_phi: 6.75 / (8.0 * sqrt_pi),
        zeta: 1.0,
    }
}

fn check_finite(u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("kernel argument must be finite, got {u}")))
    }
}

/// Gaussian kernel `K(u) = exp(-u^2/2) / sqrt(2 pi)`.
///
/// ```
/// let k0 = kldsel::kernels::kernel_value(0.0).unwrap();
/// assert!((k0 - 0.3989423).abs() < 1e-7);
/// ```
pub fn kernel_value(u: f64) -> Result<f64> {
    check_finite(u)?;
    Ok(gaussian(u))
}

/// Second derivative `K''(u) = (u^2 - 1) K(u)`.
pub fn kernel_second_derivative(u: f64) -> Result<f64> {
    check_finite(u)?;
    Ok(gaussian_second_derivative(u))
}

/// Effective kernel `phi(u) = K(u) - (mu2/2) K''(u)`.
///
/// Negative for `|u| > sqrt(3)`; see the module docs.
pub fn effective_kernel_value(u: f64) -> Result<f64> {
    check_finite(u)?;
    Ok(effective(u))
}

/// Integral of the Gaussian kernel over `(-inf, t]`, i.e. the standard
/// normal CDF.
pub fn kernel_integral(t: f64) -> Result<f64> {
    check_finite(t)?;
    Ok(normal_cdf(t))
}

/// Integral of the effective kernel over `(-inf, t]`.
///
/// Closed form `Phi(t) + t K(t) / 2`; exceeds one on an interval to the
/// right of `sqrt(3)` because `phi` is signed, and tends to one at
/// infinity.
pub fn effective_kernel_integral(t: f64) -> Result<f64> {
    check_finite(t)?;
    Ok(effective_integral(t))
}

// Unchecked fast paths used by the estimator hot loops. The public wrappers
// above validate; everything below assumes finite arguments.

#[inline(always)]
pub(crate) fn gaussian(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

#[inline(always)]
pub(crate) fn gaussian_second_derivative(u: f64) -> f64 {
    (u * u - 1.0) * gaussian(u)
}

#[inline(always)]
pub(crate) fn effective(u: f64) -> f64 {
    gaussian(u) - 0.5 * gaussian_second_derivative(u)
}

#[inline(always)]
pub(crate) fn normal_cdf(t: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-t * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline(always)]
pub(crate) fn effective_integral(t: f64) -> f64 {
    normal_cdf(t) + 0.5 * t * gaussian(t)
}

/// Autocorrelation of the Gaussian kernel, `(K ⋆ K)(t) = ∫ K(u) K(u - t) du`.
///
/// Equals the `N(0, 2)` density.
#[inline(always)]
pub(crate) fn gaussian_autocorrelation(t: f64) -> f64 {
    let c = 0.5 / std::f64::consts::PI.sqrt();
    c * (-0.25 * t * t).exp()
}

/// Autocorrelation of the effective kernel, `(phi ⋆ phi)(t)`.
///
/// With `g` the `N(0, 2)` density, `phi ⋆ phi = g - g'' + g''''/4`, which
/// expands to `g(t) · (27/16 - 7 t^2/16 + t^4/64)`. At zero this reduces to
/// `∫ phi^2 = 6.75 / (8 sqrt(pi))`.
#[inline(always)]
pub(crate) fn effective_autocorrelation(t: f64) -> f64 {
    let t2 = t * t;
    gaussian_autocorrelation(t) * (27.0 / 16.0 - 7.0 / 16.0 * t2 + t2 * t2 / 64.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::trapezoid_adaptive;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_values() {
        assert_abs_diff_eq!(kernel_value(0.0).unwrap(), 0.3989423, epsilon = 1e-7);
        assert_abs_diff_eq!(kernel_value(1.0).unwrap(), 0.2419707, epsilon = 1e-7);
        assert_eq!(kernel_value(1.0).unwrap(), kernel_value(-1.0).unwrap());
        assert!(kernel_value(40.0).unwrap() >= 0.0);
    }

    #[test]
    fn second_derivative_values() {
        assert_abs_diff_eq!(kernel_second_derivative(1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            kernel_second_derivative(0.0).unwrap(),
            -0.3989423,
            epsilon = 1e-7
        );
        // 3 K(2), from differentiating the Gaussian twice.
        assert_abs_diff_eq!(kernel_second_derivative(2.0).unwrap(), 0.1619729, epsilon = 1e-7);
    }

    #[test]
    fn effective_kernel_values() {
        // 3 / (2 sqrt(2 pi))
        assert_abs_diff_eq!(effective_kernel_value(0.0).unwrap(), 0.5984134, epsilon = 1e-7);
        assert_abs_diff_eq!(
            effective_kernel_value(3f64.sqrt()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // (3 - 4) e^{-2} / (2 sqrt(2 pi)), the admissible negative region
        assert_abs_diff_eq!(effective_kernel_value(2.0).unwrap(), -0.0269955, epsilon = 1e-7);
    }

    #[test]
    fn non_finite_arguments_are_domain_errors() {
        for f in [kernel_value, kernel_second_derivative, effective_kernel_value] {
            assert!(matches!(f(f64::NAN), Err(crate::Error::Domain(_))));
            assert!(matches!(f(f64::INFINITY), Err(crate::Error::Domain(_))));
        }
    }

    #[test]
    fn effective_kernel_is_exact_combination() {
        let c = kernel_constants();
        for i in 0..=400 {
            let u = -10.0 + i as f64 * 0.05;
            let phi = effective_kernel_value(u).unwrap();
            let combo = kernel_value(u).unwrap()
                - 0.5 * c.mu2 * kernel_second_derivative(u).unwrap();
            assert_eq!(phi, combo, "mismatch at u = {u}");
        }
    }

    #[test]
    fn effective_kernel_closed_form() {
        // (3 - u^2) e^{-u^2/2} / (2 sqrt(2 pi))
        for i in 0..=100 {
            let u = -5.0 + i as f64 * 0.1;
            let closed = (3.0 - u * u) * (-0.5 * u * u).exp() * 0.5 * INV_SQRT_2PI;
            assert_abs_diff_eq!(effective_kernel_value(u).unwrap(), closed, epsilon = 1e-15);
        }
    }

    #[test]
    fn constants_match_quadrature() {
        let c = kernel_constants();
        let quad = |f: &dyn Fn(f64) -> f64| trapezoid_adaptive(f, -12.0, 12.0, 1e-10, 1e-12, 24).unwrap();

        assert_abs_diff_eq!(c.l2_k, 0.2820948, epsilon = 1e-7);
        assert_abs_diff_eq!(c.l2_kpp, 0.2115711, epsilon = 1e-7);
        assert_abs_diff_eq!(c.l2_phi, 0.4760349, epsilon = 1e-7);

        assert_abs_diff_eq!(quad(&|u| gaussian(u).powi(2)), c.l2_k, epsilon = 1e-9);
        assert_abs_diff_eq!(
            quad(&|u| gaussian_second_derivative(u).powi(2)),
            c.l2_kpp,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(quad(&|u| effective(u).powi(2)), c.l2_phi, epsilon = 1e-9);
        assert_abs_diff_eq!(quad(&|u| u * u * gaussian(u)), c.mu2, epsilon = 1e-9);
        assert_abs_diff_eq!(quad(&|u| u * u * u * gaussian(u)), c.mu3, epsilon = 1e-10);
    }

    #[test]
    fn effective_kernel_integrates_to_one() {
        let zeta = trapezoid_adaptive(&effective, -12.0, 12.0, 1e-10, 1e-12, 24).unwrap();
        assert_abs_diff_eq!(zeta, 1.0, epsilon = 1e-8);
        let first_moment = trapezoid_adaptive(&|u| u * effective(u), -12.0, 12.0, 1e-10, 1e-12, 24).unwrap();
        assert_abs_diff_eq!(first_moment, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn second_derivative_squared_is_even() {
        // ∫ u (K''(u))^2 du = 0
        let v = trapezoid_adaptive(
            &|u| u * gaussian_second_derivative(u).powi(2),
            -12.0,
            12.0,
            1e-10,
            1e-12,
            24,
        )
        .unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let step = 1e-4;
        for i in 0..100 {
            let u = -5.0 + i as f64 * (10.0 / 99.0);
            let fd = (gaussian(u + step) - 2.0 * gaussian(u) + gaussian(u - step)) / (step * step);
            assert_abs_diff_eq!(gaussian_second_derivative(u), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        for t in [-3.0, -1.0, 0.0, 0.5, 1.7, 3.0] {
            let phi_int = trapezoid_adaptive(&effective, -14.0, t, 1e-10, 1e-12, 24).unwrap();
            assert_abs_diff_eq!(effective_integral(t), phi_int, epsilon = 1e-8);
            let k_int = trapezoid_adaptive(&gaussian, -14.0, t, 1e-10, 1e-12, 24).unwrap();
            assert_abs_diff_eq!(normal_cdf(t), k_int, epsilon = 1e-8);
        }
        // The signed kernel's CDF overshoots one past sqrt(3).
        assert!(effective_integral(2.0) > 1.0);
    }

    #[test]
    fn autocorrelations_match_quadrature() {
        for t in [0.0, 0.5, 1.0, 2.5, 4.0] {
            let direct = trapezoid_adaptive(&|u| effective(u) * effective(u - t), -16.0, 16.0, 1e-10, 1e-12, 24)
                .unwrap();
            assert_abs_diff_eq!(effective_autocorrelation(t), direct, epsilon = 1e-9);
            let direct_k =
                trapezoid_adaptive(&|u| gaussian(u) * gaussian(u - t), -16.0, 16.0, 1e-10, 1e-12, 24).unwrap();
            assert_abs_diff_eq!(gaussian_autocorrelation(t), direct_k, epsilon = 1e-9);
        }
    }
}
