//! Monte Carlo experiments: mixture sampling, the per-replication
//! estimation pipeline, experiment aggregation, and the pointwise MSE rate
//! experiment.
//!
//! The data-generating process is the two-component mixture
//! `pi * Poisson(9) + (1 - pi) * Geometric(0.1)`, whose components are
//! calibrated to have close means (9 and 10). Each replication draws a
//! sample, selects bandwidths, fits both candidate models, computes the
//! binned divergences with the classical and bias-reduced estimators, the
//! bootstrap scale, and the selection statistic.

use crate::bandwidth::{self, BandwidthObjective};
use crate::density::{DensityKind, Sample};
use crate::divergence;
use crate::error::{Error, Result};
use crate::hypothesis::{self, Decision, DEGENERATE_SCALE};
use crate::models::{self, CellPartition, ModelFamily};
use crate::numeric;
use crate::rng::{stream_rng, stream_seed, PURPOSE_RATE, PURPOSE_SAMPLE};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// Poisson rate of the mixture's first component.
pub const MIXTURE_POISSON_RATE: f64 = 9.0;
/// Geometric success probability of the mixture's second component.
pub const MIXTURE_GEOMETRIC_PROB: f64 = 0.1;

/// How the per-replication bandwidths are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Modified cross-validation for the bias-reduced estimator, classical
    /// cross-validation for the classical one.
    Mcv,
    /// Classical cross-validation for both estimators.
    Cv,
    /// One fixed bandwidth for both estimators.
    Fixed { h: f64 },
}

/// Full configuration of a selection experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Mixture weight of the Poisson component.
    pub pi: f64,
    /// Sample size per replication.
    pub n: usize,
    /// Number of replications.
    pub reps: usize,
    /// Significance level of the selection test.
    pub alpha: f64,
    pub seed: u64,
    pub bandwidth_policy: BandwidthPolicy,
    /// Bootstrap resamples per replication.
    pub bootstrap_resamples: usize,
    pub cells: CellPartition,
}

impl ExperimentConfig {
    /// A configuration with the study defaults: MCV bandwidths, 500
    /// bootstrap resamples, the eight-cell partition.
    pub fn new(pi: f64, n: usize, reps: usize, alpha: f64, seed: u64) -> Result<Self> {
        let config = ExperimentConfig {
            pi,
            n,
            reps,
            alpha,
            seed,
            bandwidth_policy: BandwidthPolicy::Mcv,
            bootstrap_resamples: 500,
            cells: models::default_partition(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::parameter(format!("mixture weight must lie in [0, 1], got {}", self.pi)));
        }
        if self.n < 2 {
            return Err(Error::parameter("sample size must be at least 2"));
        }
        if self.reps < 1 {
            return Err(Error::parameter("at least one replication required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::parameter(format!(
                "significance level must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let BandwidthPolicy::Fixed { h } = self.bandwidth_policy {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::parameter(format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        if self.bootstrap_resamples < 100 {
            return Err(Error::parameter("bootstrap requires at least 100 resamples"));
        }
        Ok(())
    }
}

/// Everything measured on one replication. Optional fields are absent when
/// the corresponding quantity was inadmissible on this draw (for example
/// the Geometric fit when the sample contains a zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep_index: usize,
    pub h_bias_reduced: f64,
    pub h_classical: f64,
    pub lambda_hat: f64,
    pub lambda_degenerate: bool,
    pub theta_hat: Option<f64>,
    pub theta_degenerate: bool,
    /// Binned bias-reduced divergence against the fitted Poisson model.
    pub divergence_vs_poisson: f64,
    /// Same, scaled by n.
    pub scaled_divergence_vs_poisson: f64,
    /// Binned bias-reduced divergence against the fitted Geometric model.
    pub divergence_vs_geometric: Option<f64>,
    pub scaled_divergence_vs_geometric: Option<f64>,
    /// Binned classical divergence against the fitted Geometric model.
    pub divergence_classical_vs_geometric: Option<f64>,
    /// Efficiency ratio bias-reduced / classical.
    pub mkld: Option<f64>,
    pub xi_hat: Option<f64>,
    pub kl_n: Option<f64>,
    pub decision: Decision,
    /// Set when any stage of the pipeline was inadmissible or on a
    /// parameter boundary; such records keep their data but withhold the
    /// decision.
    pub degenerate: bool,
}

/// Mean/sd summary of one aggregated column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    /// Number of records the column was available on.
    pub count: usize,
}

fn summarize(values: &[f64]) -> SummaryStat {
    let (mean, sd) = numeric::mean_sd(values);
    SummaryStat { mean, sd, count: values.len() }
}

/// Aggregated experiment results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub pi: f64,
    pub n: usize,
    pub reps: usize,
    pub lambda_hat: SummaryStat,
    pub theta_hat: SummaryStat,
    pub divergence_vs_poisson: SummaryStat,
    pub divergence_vs_geometric: SummaryStat,
    pub scaled_divergence_vs_poisson: SummaryStat,
    pub scaled_divergence_vs_geometric: SummaryStat,
    pub divergence_classical_vs_geometric: SummaryStat,
    pub mkld: SummaryStat,
    pub kl_n: SummaryStat,
    /// Percentage of replications selecting the Poisson model.
    pub percent_poisson: f64,
    /// Percentage selecting the Geometric model.
    pub percent_geometric: f64,
    /// Percentage selecting neither (including withheld decisions).
    pub percent_indecisive: f64,
    pub degenerate_records: usize,
}

/// Draws `n` observations from the mixture: each draw independently picks
/// the Poisson component with probability `pi`, otherwise the Geometric.
/// Poisson variates come from sequential-search inversion of the CDF and
/// Geometric variates from `ceil(ln(U) / ln(1 - theta))`.
pub fn sample_mixture(pi: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::parameter(format!("mixture weight must lie in [0, 1], got {pi}")));
    }
    Ok((0..n)
        .map(|_| {
            if rng.gen::<f64>() < pi {
                poisson_draw(MIXTURE_POISSON_RATE, rng)
            } else {
                geometric_draw(MIXTURE_GEOMETRIC_PROB, rng)
            }
        })
        .collect())
}

fn poisson_draw(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    let u: f64 = rng.gen();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    // Sequential search: the cap is far beyond any attainable quantile.
    while u > cdf && k < 10_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

fn geometric_draw(theta: f64, rng: &mut ChaCha8Rng) -> u64 {
    let u: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
    let x = (u.ln() / (1.0 - theta).ln()).ceil();
    (x as u64).max(1)
}

/// Runs the full estimation pipeline on one replication. Deterministic
/// given `(config.seed, rep_index)`.
pub fn run_replication(config: &ExperimentConfig, rep_index: usize) -> Result<ReplicationRecord> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, rep_index as u64, PURPOSE_SAMPLE);
    let counts = sample_mixture(config.pi, config.n, &mut rng)?;
    let sample = Sample::from_counts(&counts)?;

    let (h_br, h_cl) = select_policy_bandwidths(&sample, config.bandwidth_policy)?;

    let poisson_fit = models::fit_mle(ModelFamily::Poisson, &counts)?;
    let geometric_fit = match models::fit_mle(ModelFamily::Geometric, &counts) {
        Ok(fit) => Some(fit),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };

    let p_br = models::bkde_cell_probs(&sample, h_br, &config.cells)?;
    let p_cl = models::kde_cell_probs(&sample, h_cl, &config.cells)?;
    let q_poisson = models::model_cell_probs(&poisson_fit.model, &config.cells)?;

    let d_poisson = divergence::kld_discrete(&p_br, &q_poisson)?;

    let mut record = ReplicationRecord {
        rep_index,
        h_bias_reduced: h_br,
        h_classical: h_cl,
        lambda_hat: poisson_fit.model.parameter(),
        lambda_degenerate: poisson_fit.degenerate,
        theta_hat: None,
        theta_degenerate: false,
        divergence_vs_poisson: d_poisson,
        scaled_divergence_vs_poisson: config.n as f64 * d_poisson,
        divergence_vs_geometric: None,
        scaled_divergence_vs_geometric: None,
        divergence_classical_vs_geometric: None,
        mkld: None,
        xi_hat: None,
        kl_n: None,
        decision: Decision::Withheld,
        degenerate: poisson_fit.degenerate,
    };

    let geometric_fit = match geometric_fit {
        Some(fit) => fit,
        None => {
            // A zero observation makes the Geometric fit inadmissible; the
            // record is kept but flagged.
            record.degenerate = true;
            return Ok(record);
        }
    };
    record.theta_hat = Some(geometric_fit.model.parameter());
    record.theta_degenerate = geometric_fit.degenerate;
    if geometric_fit.degenerate {
        record.degenerate = true;
        return Ok(record);
    }

    let q_geometric = models::model_cell_probs(&geometric_fit.model, &config.cells)?;
    let d_geometric = divergence::kld_discrete(&p_br, &q_geometric)?;
    let d_classical_geometric = divergence::kld_discrete(&p_cl, &q_geometric)?;
    record.divergence_vs_geometric = Some(d_geometric);
    record.scaled_divergence_vs_geometric = Some(config.n as f64 * d_geometric);
    record.divergence_classical_vs_geometric = Some(d_classical_geometric);
    record.mkld = if d_classical_geometric > 0.0 {
        Some(d_geometric / d_classical_geometric)
    } else {
        record.degenerate = true;
        None
    };

    let scales = hypothesis::bootstrap_scale(
        &counts,
        h_br,
        ModelFamily::Poisson,
        ModelFamily::Geometric,
        &config.cells,
        config.bootstrap_resamples,
        stream_seed(config.seed, rep_index as u64, crate::rng::PURPOSE_BOOTSTRAP),
    );
    let scales = match scales {
        Ok(s) => s,
        Err(Error::Numeric(_)) => {
            record.degenerate = true;
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    record.xi_hat = Some(scales.xi);
    if scales.xi < DEGENERATE_SCALE {
        record.degenerate = true;
        return Ok(record);
    }

    let kl_n = hypothesis::kl_n_statistic(
        &sample,
        h_br,
        &config.cells,
        &poisson_fit.model,
        &geometric_fit.model,
        scales.xi,
    )?;
    record.kl_n = Some(kl_n);
    record.decision = hypothesis::decide(kl_n, config.alpha)?;
    Ok(record)
}

fn select_policy_bandwidths(sample: &Sample, policy: BandwidthPolicy) -> Result<(f64, f64)> {
    match policy {
        BandwidthPolicy::Fixed { h } => Ok((h, h)),
        BandwidthPolicy::Cv => {
            let (lo, hi) = bandwidth::default_search_range(sample)?;
            let cv = bandwidth::select_bandwidth(sample, BandwidthObjective::Cv, lo, hi)?;
            Ok((cv.h_star, cv.h_star))
        }
        BandwidthPolicy::Mcv => {
            let (lo, hi) = bandwidth::default_search_range(sample)?;
            let mcv = bandwidth::select_bandwidth(sample, BandwidthObjective::Mcv, lo, hi)?;
            let cv = bandwidth::select_bandwidth(sample, BandwidthObjective::Cv, lo, hi)?;
            Ok((mcv.h_star, cv.h_star))
        }
    }
}

/// Runs all replications (in parallel) and aggregates. The fold is over
/// replication index order, so the report is independent of scheduling,
/// and fails if more than half the records are degenerate.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SelectionReport> {
    config.validate()?;
    let records: Result<Vec<ReplicationRecord>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();
    let records = records?;
    aggregate(config, &records)
}

fn aggregate(config: &ExperimentConfig, records: &[ReplicationRecord]) -> Result<SelectionReport> {
    let degenerate_records = records.iter().filter(|r| r.degenerate).count();
    if 2 * degenerate_records > records.len() {
        return Err(Error::numeric(format!(
            "{degenerate_records} of {} replications degenerate",
            records.len()
        )));
    }

    let collect = |f: &dyn Fn(&ReplicationRecord) -> Option<f64>| -> Vec<f64> {
        records.iter().filter_map(f).collect()
    };

    let mut poisson = 0usize;
    let mut geometric = 0usize;
    for r in records {
        match r.decision {
            Decision::Model1 => poisson += 1,
            Decision::Model2 => geometric += 1,
            _ => {}
        }
    }
    let total = records.len() as f64;
    let percent_poisson = 100.0 * poisson as f64 / total;
    let percent_geometric = 100.0 * geometric as f64 / total;

    Ok(SelectionReport {
        pi: config.pi,
        n: config.n,
        reps: config.reps,
        lambda_hat: summarize(&collect(&|r| Some(r.lambda_hat))),
        theta_hat: summarize(&collect(&|r| r.theta_hat)),
        divergence_vs_poisson: summarize(&collect(&|r| Some(r.divergence_vs_poisson))),
        divergence_vs_geometric: summarize(&collect(&|r| r.divergence_vs_geometric)),
        scaled_divergence_vs_poisson: summarize(&collect(&|r| Some(r.scaled_divergence_vs_poisson))),
        scaled_divergence_vs_geometric: summarize(&collect(&|r| r.scaled_divergence_vs_geometric)),
        divergence_classical_vs_geometric: summarize(&collect(&|r| r.divergence_classical_vs_geometric)),
        mkld: summarize(&collect(&|r| r.mkld)),
        kl_n: summarize(&collect(&|r| r.kl_n)),
        percent_poisson,
        percent_geometric,
        percent_indecisive: 100.0 - percent_poisson - percent_geometric,
        degenerate_records,
    })
}

/// One row of the MSE rate experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RateEntry {
    pub n: usize,
    pub h: f64,
    pub mse: f64,
}

/// Result of the MSE rate experiment: per-size pointwise MSE and the
/// fitted log-log slope.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub kind: DensityKind,
    pub x0: f64,
    pub reps: usize,
    pub entries: Vec<RateEntry>,
    /// Least-squares slope of `log MSE` against `log n`.
    pub slope: f64,
}

/// Estimates the pointwise mean squared error of the chosen estimator at
/// `x0` for standard normal data across the sizes in `n_list`, with the
/// rate-optimal bandwidth order for each estimator (`n^{-1/9}` for the
/// bias-reduced kind, `n^{-1/5}` for the classical), and returns the
/// fitted decay slope.
pub fn mse_rate_experiment(
    kind: DensityKind,
    n_list: &[usize],
    reps: usize,
    x0: f64,
    seed: u64,
) -> Result<RateReport> {
    let mut distinct = n_list.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::parameter("rate experiment needs at least 4 distinct sizes"));
    }
    if reps < 200 {
        return Err(Error::parameter("rate experiment needs at least 200 replications"));
    }
    if !x0.is_finite() {
        return Err(Error::domain(format!("evaluation point must be finite, got {x0}")));
    }

    let exponent = match kind {
        DensityKind::BiasReduced => -1.0 / 9.0,
        DensityKind::Classical => -1.0 / 5.0,
    };
    let truth = crate::kernels::gaussian(x0);

    let entries: Vec<RateEntry> = distinct
        .iter()
        .enumerate()
        .map(|(n_idx, &n)| {
            let h = (n as f64).powf(exponent);
            let sq_errors: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let stream = ((n_idx as u64) << 32) | rep as u64;
                    let mut rng = stream_rng(seed, stream, PURPOSE_RATE);
                    let values: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    let est = crate::density::point_estimate(&values, h, x0, kind);
                    (est - truth) * (est - truth)
                })
                .collect();
            let mse = sq_errors.iter().sum::<f64>() / reps as f64;
            RateEntry { n, h, mse }
        })
        .collect();

    let log_n: Vec<f64> = entries.iter().map(|e| (e.n as f64).ln()).collect();
    let log_mse: Vec<f64> = entries.iter().map(|e| e.mse.ln()).collect();
    let slope = numeric::least_squares_slope(&log_n, &log_mse);
    Ok(RateReport { kind, x0, reps, entries, slope })
}
