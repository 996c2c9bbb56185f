//! Goodness-of-fit and model-selection statistics built on the binned
//! divergence.
//!
//! The selection statistic standardizes the difference of two estimated
//! divergences,
//!
//! ```text
//! KL_n = sqrt(n)/xi * [ D(F_b, F_model1) - D(F_b, F_model2) ],
//! ```
//!
//! which is asymptotically standard normal when the candidates are
//! equally close to the truth. Sign convention: significantly *negative*
//! selects the first model, significantly *positive* the second.
//!
//! The scale parameters `xi` and `lambda_phi` are estimated by a
//! nonparametric bootstrap that refits both models and recomputes both
//! divergences on each resample with the bandwidth held fixed at the
//! original-sample value. A multinomial plug-in variant is provided for
//! comparison.

use crate::density::Sample;
use crate::divergence::{self, BinnedDistribution};
use crate::error::{Error, Result};
use crate::models::{self, CellPartition, ModelFamily, ParametricModel};
use crate::numeric;
use crate::rng::{stream_rng, PURPOSE_BOOTSTRAP};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

/// Scales below this are reported as degenerate and decisions withheld.
pub const DEGENERATE_SCALE: f64 = 1e-10;

/// Partial derivatives of the discrete divergence `D(p, q)` with respect
/// to the cell masses of each argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientPair {
    /// `u_i = d D / d p_i = ln(p_i / q_i) + 1`.
    pub u: Vec<f64>,
    /// `s_i = d D / d q_i = -p_i / q_i`.
    pub s: Vec<f64>,
}

/// Test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    #[serde(rename = "model_1")]
    Model1,
    #[serde(rename = "model_2")]
    Model2,
    #[serde(rename = "indecisive")]
    Indecisive,
    #[serde(rename = "reject")]
    Reject,
    #[serde(rename = "no_reject")]
    NoReject,
    /// Scale was degenerate; no decision is meaningful.
    #[serde(rename = "withheld")]
    Withheld,
}

/// A standardized test statistic with its scale, p-value and decision.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Estimated standard deviation used for standardization.
    pub scale: f64,
    /// Two-sided normal tail probability.
    pub p_value: f64,
    pub alpha: f64,
    pub decision: Decision,
    pub degenerate: bool,
}

/// Bootstrap (or plug-in) estimates of the standardization scales.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleEstimates {
    /// Scale of the divergence difference: `sqrt(n) * sd(D_1 - D_2)`.
    pub xi: f64,
    /// Scale of the first model's divergence: `sqrt(n) * sd(D_1)`.
    pub lambda_model_1: f64,
    /// Scale of the second model's divergence: `sqrt(n) * sd(D_2)`.
    pub lambda_model_2: f64,
    /// Resamples that produced admissible fits (zero for the plug-in).
    pub resamples_used: usize,
    pub degenerate_resamples: usize,
}

/// Analytic gradients of the discrete divergence. The model masses must be
/// strictly positive (floor them first); the estimate masses are floored
/// at 1e-12 inside the logarithm.
pub fn divergence_gradients(p: &BinnedDistribution, q: &BinnedDistribution) -> Result<GradientPair> {
    if p.cells() != q.cells() {
        return Err(Error::parameter("binned distributions live on different partitions"));
    }
    if q.masses().iter().any(|&m| m <= 0.0) {
        return Err(Error::parameter("model masses must be strictly positive (floor them first)"));
    }
    let u = p
        .masses()
        .iter()
        .zip(q.masses())
        .map(|(&pi, &qi)| (pi.max(1e-12) / qi).ln() + 1.0)
        .collect();
    let s = p.masses().iter().zip(q.masses()).map(|(&pi, &qi)| -pi / qi).collect();
    Ok(GradientPair { u, s })
}

/// Nonparametric bootstrap estimate of the scales `xi` and `lambda_phi`.
///
/// Draws `b_resamples` resamples with replacement, refits both families,
/// and recomputes the binned bias-reduced divergences with the bandwidth
/// held fixed at `h`. Resamples where a fit is inadmissible or lands on
/// the parameter boundary are skipped and counted. Deterministic given
/// `seed`.
pub fn bootstrap_scale(
    counts: &[u64],
    h: f64,
    family_1: ModelFamily,
    family_2: ModelFamily,
    cells: &CellPartition,
    b_resamples: usize,
    seed: u64,
) -> Result<ScaleEstimates> {
    let n = counts.len();
    if n < 2 {
        return Err(Error::parameter("bootstrap requires n >= 2"));
    }
    if b_resamples < 100 {
        return Err(Error::parameter("bootstrap requires at least 100 resamples"));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::parameter(format!("bandwidth must be positive and finite, got {h}")));
    }

    let mut d1 = Vec::with_capacity(b_resamples);
    let mut d2 = Vec::with_capacity(b_resamples);
    let mut degenerate = 0usize;

    for b in 0..b_resamples {
        let mut rng = stream_rng(seed, b as u64, PURPOSE_BOOTSTRAP);
        let mut tally: BTreeMap<u64, u64> = BTreeMap::new();
        let mut resample = Vec::with_capacity(n);
        for _ in 0..n {
            let v = counts[rng.gen_range(0..n)];
            resample.push(v);
            *tally.entry(v).or_insert(0) += 1;
        }

        let fits = (models::fit_mle(family_1, &resample), models::fit_mle(family_2, &resample));
        let (fit_1, fit_2) = match fits {
            (Ok(f1), Ok(f2)) if !f1.degenerate && !f2.degenerate => (f1, f2),
            _ => {
                degenerate += 1;
                continue;
            }
        };

        let grouped: Vec<(f64, f64)> =
            tally.iter().map(|(&v, &c)| (v as f64, c as f64)).collect();
        let max_v = grouped.last().map(|g| g.0).unwrap_or(0.0);
        let p_hat = models::grouped_cell_probs(
            &grouped,
            n as f64,
            h,
            cells,
            max_v + 8.0 * h,
            crate::density::DensityKind::BiasReduced,
        )?;
        let q1 = models::model_cell_probs(&fit_1.model, cells)?;
        let q2 = models::model_cell_probs(&fit_2.model, cells)?;
        d1.push(divergence::kld_discrete(&p_hat, &q1)?);
        d2.push(divergence::kld_discrete(&p_hat, &q2)?);
    }

    let used = d1.len();
    if used < 2 {
        return Err(Error::numeric(format!(
            "bootstrap produced only {used} admissible resamples out of {b_resamples}"
        )));
    }
    let sqrt_n = (n as f64).sqrt();
    let diffs: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a - b).collect();
    Ok(ScaleEstimates {
        xi: sqrt_n * numeric::mean_sd(&diffs).1,
        lambda_model_1: sqrt_n * numeric::mean_sd(&d1).1,
        lambda_model_2: sqrt_n * numeric::mean_sd(&d2).1,
        resamples_used: used,
        degenerate_resamples: degenerate,
    })
}

/// Multinomial plug-in scale estimate, for cross-checking the bootstrap.
///
/// Uses the covariance `diag(F) - F F^T` of the binned estimate for the
/// first block of the joint covariance and zero for the parametric blocks,
/// restricted to cells where both model masses are positive.
pub fn plugin_scale(
    sample: &Sample,
    h: f64,
    cells: &CellPartition,
    model_1: &ParametricModel,
    model_2: &ParametricModel,
) -> Result<ScaleEstimates> {
    let p_hat = models::bkde_cell_probs(sample, h, cells)?;
    let q1 = models::model_cell_probs(model_1, cells)?;
    let q2 = models::model_cell_probs(model_2, cells)?;

    let considered: Vec<usize> = (0..p_hat.masses().len())
        .filter(|&i| q1.masses()[i] > 1e-9 && q2.masses()[i] > 1e-9)
        .collect();
    if considered.len() < 2 {
        return Err(Error::numeric("fewer than two cells supported by both models"));
    }
    let renorm = |src: &[f64]| {
        let total: f64 = considered.iter().map(|&i| src[i]).sum();
        considered.iter().map(|&i| src[i] / total).collect::<Vec<f64>>()
    };
    let p = renorm(p_hat.masses());
    let q1 = renorm(q1.masses());
    let q2 = renorm(q2.masses());

    let grad = |q: &[f64]| -> Vec<f64> {
        p.iter().zip(q).map(|(&pi, &qi)| (pi.max(1e-12) / qi).ln() + 1.0).collect()
    };
    let u1 = grad(&q1);
    let u2 = grad(&q2);

    // a' (diag(p) - p p') a  =  sum p_i a_i^2 - (sum p_i a_i)^2
    let quad_form = |a: &[f64]| -> f64 {
        let e2: f64 = a.iter().zip(&p).map(|(&ai, &pi)| pi * ai * ai).sum();
        let e1: f64 = a.iter().zip(&p).map(|(&ai, &pi)| pi * ai).sum();
        (e2 - e1 * e1).max(0.0)
    };
    let diff: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
    Ok(ScaleEstimates {
        xi: quad_form(&diff).sqrt(),
        lambda_model_1: quad_form(&u1).sqrt(),
        lambda_model_2: quad_form(&u2).sqrt(),
        resamples_used: 0,
        degenerate_resamples: 0,
    })
}

/// The model-selection statistic; see the module docs for the sign
/// convention. `xi_hat` must be a positive scale.
pub fn kl_n_statistic(
    sample: &Sample,
    h: f64,
    cells: &CellPartition,
    model_1: &ParametricModel,
    model_2: &ParametricModel,
    xi_hat: f64,
) -> Result<f64> {
    if !(xi_hat > 0.0) {
        return Err(Error::parameter(format!("scale must be positive, got {xi_hat}")));
    }
    let p_hat = models::bkde_cell_probs(sample, h, cells)?;
    let d1 = divergence::kld_discrete(&p_hat, &models::model_cell_probs(model_1, cells)?)?;
    let d2 = divergence::kld_discrete(&p_hat, &models::model_cell_probs(model_2, cells)?)?;
    Ok((sample.len() as f64).sqrt() / xi_hat * (d1 - d2))
}

/// Goodness-of-fit test of the hypothesis that the candidate model matches
/// the data-generating distribution: `sqrt(n) D / lambda` against the
/// standard normal, two-sided.
pub fn gof_statistic(
    sample: &Sample,
    h: f64,
    cells: &CellPartition,
    model: &ParametricModel,
    lambda_phi_hat: f64,
    alpha: f64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if !(lambda_phi_hat >= 0.0) || !lambda_phi_hat.is_finite() {
        return Err(Error::parameter(format!("scale must be nonnegative, got {lambda_phi_hat}")));
    }
    let p_hat = models::bkde_cell_probs(sample, h, cells)?;
    let d = divergence::kld_discrete(&p_hat, &models::model_cell_probs(model, cells)?)?;
    if lambda_phi_hat < DEGENERATE_SCALE {
        return Ok(TestResult {
            statistic: 0.0,
            scale: lambda_phi_hat,
            p_value: 1.0,
            alpha,
            decision: Decision::Withheld,
            degenerate: true,
        });
    }
    let statistic = (sample.len() as f64).sqrt() * d / lambda_phi_hat;
    let p_value = two_sided_p(statistic);
    Ok(TestResult {
        statistic,
        scale: lambda_phi_hat,
        p_value,
        alpha,
        decision: if p_value < alpha { Decision::Reject } else { Decision::NoReject },
        degenerate: false,
    })
}

/// Maps a selection statistic to a decision at level `alpha`: inside
/// `[-z, z]` (inclusive) is indecisive, below selects the first model,
/// above the second.
pub fn decide(statistic: f64, alpha: f64) -> Result<Decision> {
    check_alpha(alpha)?;
    let z = normal_quantile(1.0 - alpha / 2.0);
    Ok(if statistic.abs() <= z {
        Decision::Indecisive
    } else if statistic < 0.0 {
        Decision::Model1
    } else {
        Decision::Model2
    })
}

/// Packages a selection statistic as a [`TestResult`].
pub fn selection_result(statistic: f64, xi_hat: f64, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if xi_hat < DEGENERATE_SCALE {
        return Ok(TestResult {
            statistic: 0.0,
            scale: xi_hat,
            p_value: 1.0,
            alpha,
            decision: Decision::Withheld,
            degenerate: true,
        });
    }
    Ok(TestResult {
        statistic,
        scale: xi_hat,
        p_value: two_sided_p(statistic),
        alpha,
        decision: decide(statistic, alpha)?,
        degenerate: false,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::parameter(format!("significance level must lie in (0, 1), got {alpha}")))
    }
}

fn two_sided_p(statistic: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - normal.cdf(statistic.abs()))
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(p)
}
