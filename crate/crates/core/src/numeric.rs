//! Shared numerical routines: adaptive trapezoid quadrature and
//! one-dimensional minimization by coarse grid plus golden-section
//! refinement.

use crate::error::{Error, Result};

/// Composite trapezoid rule with `n` panels over `[a, b]`.
pub(crate) fn trapezoid_fixed(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n >= 1 && b > a);
    let h = (b - a) / n as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for i in 1..n {
        sum += f(a + i as f64 * h);
    }
    sum * h
}

/// Trapezoid quadrature of `f` over `[a, b]`, refined by successive panel
/// doubling until two consecutive estimates agree to `rel_tol` relative
/// (or `abs_tol` absolute, whichever is weaker), up to `max_halvings`
/// doublings.
///
/// Each refinement reuses previous evaluations: `T_{2n} = T_n/2 + h' * sum
/// of the new midpoints`. Fails with a numeric error if the refinement
/// never settles. An absolute floor is needed whenever the integral itself
/// can be zero (symmetric moments, empty truncation regions).
pub fn trapezoid_adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_halvings: usize,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::parameter(format!("bad quadrature interval [{a}, {b}]")));
    }
    let mut n: usize = 16;
    let mut estimate = trapezoid_fixed(f, a, b, n);
    // Two consecutive agreements are required: a single pair of levels can
    // agree by aliasing coincidence while still being far from the limit.
    let mut agreements = 0;
    for _ in 0..max_halvings {
        let h = (b - a) / n as f64;
        let mut mid_sum = 0.0;
        for i in 0..n {
            mid_sum += f(a + (i as f64 + 0.5) * h);
        }
        let refined = 0.5 * estimate + 0.5 * h * mid_sum;
        if (refined - estimate).abs() <= (rel_tol * refined.abs()).max(abs_tol) {
            agreements += 1;
            if agreements >= 2 {
                return Ok(refined);
            }
        } else {
            agreements = 0;
        }
        estimate = refined;
        n *= 2;
    }
    Err(Error::numeric(format!(
        "quadrature did not converge to relative tolerance {rel_tol} after {max_halvings} halvings"
    )))
}

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy)]
pub struct MinimizeResult {
    /// Location of the minimum.
    pub x_min: f64,
    /// Objective value at `x_min`.
    pub f_min: f64,
    /// Number of objective evaluations performed.
    pub evaluations: usize,
}

/// `n` log-spaced points over `[lo, hi]`, both endpoints included.
pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Minimizes `f` over `[lo, hi]` by evaluating a coarse log-spaced grid of
/// `grid_points`, then golden-section refinement of the bracket around the
/// best grid point until the bracket is narrower than `rel_width * x`.
///
/// Non-finite objective values are treated as +infinity; the whole grid
/// being non-finite is a numeric error. Grid ties are broken toward the
/// smaller abscissa, so the result does not depend on evaluation order.
pub fn minimize_grid_golden(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_points: usize,
    rel_width: f64,
) -> Result<MinimizeResult> {
    if !(lo > 0.0 && hi.is_finite() && lo < hi) {
        return Err(Error::parameter(format!("bad search interval [{lo}, {hi}]")));
    }
    let grid = log_grid(lo, hi, grid_points);
    let mut evaluations = 0;
    let clean = |v: f64| if v.is_finite() { v } else { f64::INFINITY };

    let values: Vec<f64> = grid
        .iter()
        .map(|&x| {
            evaluations += 1;
            clean(f(x))
        })
        .collect();

    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    if values[best].is_infinite() {
        return Err(Error::numeric(
            "objective is non-finite on the entire search grid".to_string(),
        ));
    }

    // Bracket around the best grid point, clamped at the range edges.
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];

    const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_GOLDEN * (b - a);
    let mut x2 = a + INV_GOLDEN * (b - a);
    let mut f1 = clean(f(x1));
    let mut f2 = clean(f(x2));
    evaluations += 2;

    while b - a > rel_width * 0.5 * (a + b) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_GOLDEN * (b - a);
            f1 = clean(f(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_GOLDEN * (b - a);
            f2 = clean(f(x2));
        }
        evaluations += 1;
    }

    let x_min = 0.5 * (a + b);
    let f_min = clean(f(x_min));
    evaluations += 1;

    // The midpoint of a tiny bracket can in principle lose to an already
    // evaluated grid point; keep whichever is better.
    if values[best] < f_min {
        return Ok(MinimizeResult {
            x_min: grid[best],
            f_min: values[best],
            evaluations,
        });
    }
    Ok(MinimizeResult { x_min, f_min, evaluations })
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    debug_assert!(x.len() == y.len() && x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    sxy / sxx
}

/// Mean and sample standard deviation (n-1 denominator; zero for n < 2).
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadrature_of_polynomial() {
        // ∫_0^1 x^2 dx = 1/3
        let v = trapezoid_adaptive(&|x| x * x, 0.0, 1.0, 1e-9, 0.0, 24).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn quadrature_rejects_bad_interval() {
        assert!(trapezoid_adaptive(&|x| x, 1.0, 1.0, 1e-6, 0.0, 10).is_err());
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        // An oscillation far below the resolution reachable in two halvings.
        let rough = |x: f64| (1e8 * x).sin() + 2.0;
        let r = trapezoid_adaptive(&rough, 0.0, 1.0, 1e-12, 0.0, 2);
        assert!(matches!(r, Err(crate::Error::Numeric(_))));
    }

    #[test]
    fn minimizer_finds_quadratic_minimum() {
        let mut f = |h: f64| (h - 0.5) * (h - 0.5);
        let r = minimize_grid_golden(&mut f, 0.01, 3.0, 40, 1e-4).unwrap();
        assert_abs_diff_eq!(r.x_min, 0.5, epsilon = 1e-3);
        assert!(r.evaluations >= 40);
    }

    #[test]
    fn minimizer_handles_boundary_minimum() {
        let mut f = |h: f64| h; // monotone increasing
        let r = minimize_grid_golden(&mut f, 0.05, 2.0, 40, 1e-4).unwrap();
        // Must land in the leftmost grid bracket.
        assert!(r.x_min <= 0.06, "x_min = {}", r.x_min);
    }

    #[test]
    fn minimizer_rejects_all_non_finite() {
        let mut f = |_h: f64| f64::NAN;
        assert!(matches!(
            minimize_grid_golden(&mut f, 0.1, 1.0, 10, 1e-3),
            Err(crate::Error::Numeric(_))
        ));
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert_abs_diff_eq!(least_squares_slope(&x, &y), 2.0, epsilon = 1e-12);
    }
}
