//! Classical and bias-reduced kernel density estimators.
//!
//! The classical estimator averages Gaussian bumps over the data,
//!
//! ```text
//! f_h(x) = 1/(n h) * sum_i K((x - X_i) / h),
//! ```
//!
//! and the bias-reduced estimator subtracts a curvature correction, which
//! is the same average taken with the effective kernel `phi` instead of
//! `K`. The bias-reduced estimate is genuinely signed: it dips below zero
//! in low-density regions and no clipping happens at this layer, because
//! the cross-validation objective depends on the signed values. Clipping
//! is applied only where positivity is semantically required (binning and
//! divergence).

use crate::error::{Error, Result};
use crate::kernels;
use serde::{Deserialize, Serialize};

/// An observed sample `X_1, ..., X_n`. Construction validates that the
/// sample is nonempty and every value is finite; estimators rely on this.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::parameter("sample must be nonempty"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::parameter(format!("sample contains non-finite value {bad}")));
        }
        Ok(Sample { values })
    }

    /// Builds a sample from nonnegative-integer observations.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation (n-1 denominator).
    pub fn std_dev(&self) -> f64 {
        crate::numeric::mean_sd(&self.values).1
    }
}

/// Which estimator a density value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Classical,
    BiasReduced,
}

/// A density estimate evaluated on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct DensityEstimate {
    /// Strictly increasing evaluation points.
    pub grid: Vec<f64>,
    /// Estimated density at each grid point. May be negative for the
    /// bias-reduced kind.
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub kind: DensityKind,
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::parameter(format!("bandwidth must be positive and finite, got {h}")))
    }
}

fn check_point(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("evaluation point must be finite, got {x}")))
    }
}

/// Classical kernel density estimate at a point. Always nonnegative.
pub fn kde_at(sample: &Sample, h: f64, x: f64) -> Result<f64> {
    check_bandwidth(h)?;
    check_point(x)?;
    Ok(point_estimate(sample.values(), h, x, DensityKind::Classical))
}

/// Bias-reduced kernel density estimate at a point. May be negative.
pub fn bkde_at(sample: &Sample, h: f64, x: f64) -> Result<f64> {
    check_bandwidth(h)?;
    check_point(x)?;
    Ok(point_estimate(sample.values(), h, x, DensityKind::BiasReduced))
}

/// Leave-one-out classical estimate: the estimator recomputed from the
/// sample with observation `i` removed.
pub fn kde_loo_at(sample: &Sample, h: f64, i: usize, x: f64) -> Result<f64> {
    check_loo(sample, i)?;
    check_bandwidth(h)?;
    check_point(x)?;
    Ok(loo_estimate(sample.values(), h, i, x, DensityKind::Classical))
}

/// Leave-one-out bias-reduced estimate.
pub fn bkde_loo_at(sample: &Sample, h: f64, i: usize, x: f64) -> Result<f64> {
    check_loo(sample, i)?;
    check_bandwidth(h)?;
    check_point(x)?;
    Ok(loo_estimate(sample.values(), h, i, x, DensityKind::BiasReduced))
}

fn check_loo(sample: &Sample, i: usize) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::parameter("leave-one-out requires at least two observations"));
    }
    if i >= sample.len() {
        return Err(Error::parameter(format!(
            "leave-one-out index {i} out of range for sample of size {}",
            sample.len()
        )));
    }
    Ok(())
}

/// Evaluates the chosen estimator on a strictly increasing grid.
pub fn evaluate_on_grid(
    sample: &Sample,
    h: f64,
    grid: &[f64],
    kind: DensityKind,
) -> Result<DensityEstimate> {
    check_bandwidth(h)?;
    if grid.is_empty() {
        return Err(Error::parameter("grid must be nonempty"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::parameter("grid must be strictly increasing"));
    }
    for &x in grid {
        check_point(x)?;
    }
    let values = grid
        .iter()
        .map(|&x| point_estimate(sample.values(), h, x, kind))
        .collect();
    Ok(DensityEstimate { grid: grid.to_vec(), values, bandwidth: h, kind })
}

/// Default evaluation grid: 512 points spanning `[min(X) - 4h, max(X) + 4h]`.
/// The Gaussian tail beyond four bandwidths contributes less than 1e-4.
pub fn default_grid(sample: &Sample, h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let lo = sample.min() - 4.0 * h;
    let hi = sample.max() + 4.0 * h;
    let n = 512usize;
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + i as f64 * step).collect())
}

// Unchecked hot paths shared with the bandwidth and divergence modules.

#[inline]
pub(crate) fn point_estimate(values: &[f64], h: f64, x: f64, kind: DensityKind) -> f64 {
    let inv_h = 1.0 / h;
    let sum: f64 = match kind {
        DensityKind::Classical => values.iter().map(|&v| kernels::gaussian((x - v) * inv_h)).sum(),
        DensityKind::BiasReduced => values.iter().map(|&v| kernels::effective((x - v) * inv_h)).sum(),
    };
    sum * inv_h / values.len() as f64
}

#[inline]
pub(crate) fn loo_estimate(values: &[f64], h: f64, i: usize, x: f64, kind: DensityKind) -> f64 {
    let inv_h = 1.0 / h;
    let mut sum = 0.0;
    for (j, &v) in values.iter().enumerate() {
        if j != i {
            let u = (x - v) * inv_h;
            sum += match kind {
                DensityKind::Classical => kernels::gaussian(u),
                DensityKind::BiasReduced => kernels::effective(u),
            };
        }
    }
    sum * inv_h / (values.len() - 1) as f64
}
