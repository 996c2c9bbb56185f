//! Parametric candidate families (Poisson and Geometric), their maximum
//! likelihood estimators, and binned probability construction over a cell
//! partition of `[0, inf)`.
//!
//! Three kinds of binned distributions feed the divergence and test
//! machinery: cell probabilities of a fitted model, cell masses of a
//! kernel density estimate (integral of the estimate over each cell), and
//! raw relative frequencies.

use crate::density::{DensityKind, Sample};
use crate::divergence::BinnedDistribution;
use crate::error::{Error, Result};
use crate::kernels;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Candidate model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Poisson,
    Geometric,
}

/// A parametrized candidate model.
///
/// The Poisson family has support `{0, 1, 2, ...}` and the Geometric
/// family (number of trials up to the first success) has support
/// `{1, 2, ...}`, so its mass at zero is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParametricModel {
    Poisson { lambda: f64 },
    Geometric { theta: f64 },
}

impl ParametricModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            ParametricModel::Poisson { .. } => ModelFamily::Poisson,
            ParametricModel::Geometric { .. } => ModelFamily::Geometric,
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            ParametricModel::Poisson { lambda } => lambda,
            ParametricModel::Geometric { theta } => theta,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ParametricModel::Poisson { lambda } => {
                if lambda.is_finite() && lambda > 0.0 {
                    Ok(())
                } else {
                    Err(Error::parameter(format!("Poisson rate must be positive, got {lambda}")))
                }
            }
            ParametricModel::Geometric { theta } => {
                if theta.is_finite() && theta > 0.0 && theta < 1.0 {
                    Ok(())
                } else {
                    Err(Error::parameter(format!(
                        "Geometric success probability must lie in (0, 1), got {theta}"
                    )))
                }
            }
        }
    }
}

/// A fitted model together with a boundary flag.
///
/// Degenerate fits (all-zero Poisson sample, all-ones Geometric sample)
/// land exactly on the parameter-space boundary; they are flagged rather
/// than rejected so simulation aggregates stay honest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleFit {
    pub model: ParametricModel,
    pub degenerate: bool,
}

/// Contiguous half-open cells `[c_0, c_1), ..., [c_{M-2}, c_{M-1})` plus
/// the unbounded tail `[c_{M-1}, inf)`, partitioning `[c_0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellPartition {
    boundaries: Vec<f64>,
}

impl CellPartition {
    /// Builds a partition from its strictly increasing finite boundaries.
    /// The number of cells equals the number of boundaries (the last cell
    /// is unbounded).
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::parameter("a partition needs at least two cells"));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::parameter("partition boundaries must be finite"));
        }
        if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::parameter("partition boundaries must be strictly increasing"));
        }
        Ok(CellPartition { boundaries })
    }

    pub fn num_cells(&self) -> usize {
        self.boundaries.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Index of the cell containing `x` (values below the first boundary
    /// are assigned to the first cell).
    pub fn cell_index(&self, x: f64) -> usize {
        let above = self.boundaries.partition_point(|&b| b <= x);
        above.saturating_sub(1)
    }
}

/// The eight-cell partition used throughout the simulation study:
/// `[i-1, i)` for `i = 1..=7` plus `[7, inf)`.
pub fn default_partition() -> CellPartition {
    CellPartition::new((0..8).map(f64::from).collect()).expect("static partition is valid")
}

/// Probability mass function of the model at a nonnegative integer,
/// evaluated in log space so large arguments cannot overflow.
pub fn model_pmf(model: &ParametricModel, x: u64) -> Result<f64> {
    model.validate()?;
    Ok(pmf_unchecked(model, x))
}

fn pmf_unchecked(model: &ParametricModel, x: u64) -> f64 {
    match *model {
        ParametricModel::Poisson { lambda } => {
            let xf = x as f64;
            (-lambda + xf * lambda.ln() - ln_gamma(xf + 1.0)).exp()
        }
        ParametricModel::Geometric { theta } => {
            if x == 0 {
                0.0
            } else {
                (theta.ln() + (x as f64 - 1.0) * (1.0 - theta).ln()).exp()
            }
        }
    }
}

/// The model pmf extended to a positive density on the real line, for use
/// with the continuous divergence estimator: `theta (1-theta)^{x-1}` as a
/// function of real `x` for the Geometric family, and
/// `exp(-lambda + x ln(lambda) - ln Gamma(x+1))` for the Poisson family
/// (a vanishing value is returned left of the Gamma pole at `x = -1`,
/// where the extension stops being a density; the truncated divergence
/// never integrates there because the estimate's mass lives on
/// `[0, infinity)`).
pub fn continuous_pmf_extension(model: &ParametricModel) -> Result<impl Fn(f64) -> f64> {
    model.validate()?;
    let model = *model;
    Ok(move |x: f64| match model {
        ParametricModel::Geometric { theta } => theta * (1.0 - theta).powf(x - 1.0),
        ParametricModel::Poisson { lambda } => {
            if x > -0.999 {
                (-lambda + x * lambda.ln() - ln_gamma(x + 1.0)).exp()
            } else {
                1e-300
            }
        }
    })
}

/// Closed-form maximum likelihood fit: `lambda = mean(X)` for Poisson,
/// `theta = n / (n + sum(X_i - 1))` for Geometric.
pub fn fit_mle(family: ModelFamily, counts: &[u64]) -> Result<MleFit> {
    if counts.is_empty() {
        return Err(Error::parameter("MLE requires a nonempty sample"));
    }
    let n = counts.len() as f64;
    match family {
        ModelFamily::Poisson => {
            let lambda = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
            Ok(MleFit {
                model: ParametricModel::Poisson { lambda },
                degenerate: lambda == 0.0,
            })
        }
        ModelFamily::Geometric => {
            if counts.iter().any(|&c| c < 1) {
                return Err(Error::domain(
                    "Geometric MLE requires every observation to be at least 1".to_string(),
                ));
            }
            let excess = counts.iter().map(|&c| (c - 1) as f64).sum::<f64>();
            let theta = n / (n + excess);
            Ok(MleFit {
                model: ParametricModel::Geometric { theta },
                degenerate: theta == 1.0,
            })
        }
    }
}

/// Cell probabilities of a parametric model: each bounded cell sums the
/// pmf over the integers it contains, and the unbounded tail takes the
/// complement so the masses add to one exactly.
pub fn model_cell_probs(model: &ParametricModel, cells: &CellPartition) -> Result<BinnedDistribution> {
    model.validate()?;
    let b = cells.boundaries();
    let m = cells.num_cells();
    let mut masses = Vec::with_capacity(m);
    let mut head = 0.0;
    for i in 0..m - 1 {
        let lo = b[i].ceil() as u64;
        let hi = b[i + 1].ceil() as u64; // exclusive
        let mut mass = 0.0;
        for k in lo..hi {
            mass += pmf_unchecked(model, k);
        }
        masses.push(mass);
        head += mass;
    }
    masses.push((1.0 - head).max(0.0));
    BinnedDistribution::new(masses, cells.clone())
}

/// Cell masses of the bias-reduced kernel density estimate: the exact
/// integral of the estimate over each cell (the unbounded cell is cut at
/// `max(X) + 8h`), floored at 1e-12 and renormalized to sum to one.
///
/// The signed estimate can put (slightly) negative mass in a far cell;
/// flooring is exactly the place where positivity becomes semantically
/// required.
pub fn bkde_cell_probs(sample: &Sample, h: f64, cells: &CellPartition) -> Result<BinnedDistribution> {
    kde_cell_probs_kind(sample, h, cells, DensityKind::BiasReduced)
}

/// Classical-estimator counterpart of [`bkde_cell_probs`].
pub fn kde_cell_probs(sample: &Sample, h: f64, cells: &CellPartition) -> Result<BinnedDistribution> {
    kde_cell_probs_kind(sample, h, cells, DensityKind::Classical)
}

/// Shared implementation for both estimator kinds.
pub fn kde_cell_probs_kind(
    sample: &Sample,
    h: f64,
    cells: &CellPartition,
    kind: DensityKind,
) -> Result<BinnedDistribution> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::parameter(format!("bandwidth must be positive and finite, got {h}")));
    }
    let grouped = group_values(sample.values());
    let upper = sample.max() + 8.0 * h;
    grouped_cell_probs(&grouped, sample.len() as f64, h, cells, upper, kind)
}

/// Relative frequency of the sample per cell.
pub fn empirical_cell_freqs(sample: &Sample, cells: &CellPartition) -> Result<BinnedDistribution> {
    let mut masses = vec![0.0; cells.num_cells()];
    for &x in sample.values() {
        masses[cells.cell_index(x)] += 1.0;
    }
    let n = sample.len() as f64;
    for m in &mut masses {
        *m /= n;
    }
    BinnedDistribution::new(masses, cells.clone())
}

/// Distinct sample values with multiplicities, sorted ascending. Integer
/// data collapses to a handful of groups, which keeps repeated CDF sums
/// cheap in the bootstrap loop.
pub(crate) fn group_values(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut grouped: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        if let Some(last) = grouped.last_mut().filter(|g| g.0 == v) {
            last.1 += 1.0;
        } else {
            grouped.push((v, 1.0));
        }
    }
    grouped
}

/// Cell masses from grouped values via the kernel antiderivative:
/// the integral of the estimate over `[a, b)` is
/// `1/n * sum_v count_v * (G((b - v)/h) - G((a - v)/h))`
/// with `G` the CDF of the kernel in use.
pub(crate) fn grouped_cell_probs(
    grouped: &[(f64, f64)],
    n: f64,
    h: f64,
    cells: &CellPartition,
    upper: f64,
    kind: DensityKind,
) -> Result<BinnedDistribution> {
    let cdf: fn(f64) -> f64 = match kind {
        DensityKind::Classical => kernels::normal_cdf,
        DensityKind::BiasReduced => kernels::effective_integral,
    };
    let b = cells.boundaries();
    let m = cells.num_cells();
    let inv_h = 1.0 / h;

    // Cumulative kernel mass below each boundary, plus the truncation point.
    let mut below = Vec::with_capacity(m + 1);
    for &boundary in b {
        let mut s = 0.0;
        for &(v, count) in grouped {
            s += count * cdf((boundary - v) * inv_h);
        }
        below.push(s / n);
    }
    let upper = upper.max(b[m - 1] + h);
    let mut s = 0.0;
    for &(v, count) in grouped {
        s += count * cdf((upper - v) * inv_h);
    }
    below.push(s / n);

    let raw: Vec<f64> = (0..m).map(|i| below[i + 1] - below[i]).collect();
    if raw.iter().sum::<f64>() <= 0.0 {
        return Err(Error::numeric(
            "kernel estimate carries no positive mass on the partition".to_string(),
        ));
    }
    let floored: Vec<f64> = raw.iter().map(|&x| x.max(1e-12)).collect();
    let total: f64 = floored.iter().sum();
    BinnedDistribution::new(floored.iter().map(|&x| x / total).collect(), cells.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density;
    use crate::numeric::trapezoid_adaptive;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pmf_values() {
        let p9 = ParametricModel::Poisson { lambda: 9.0 };
        assert_abs_diff_eq!(model_pmf(&p9, 0).unwrap(), 1.2341e-4, epsilon = 1e-8);
        let g = ParametricModel::Geometric { theta: 0.1 };
        assert_abs_diff_eq!(model_pmf(&g, 1).unwrap(), 0.1, epsilon = 1e-14);
        assert_eq!(model_pmf(&g, 0).unwrap(), 0.0);
        // Log-space evaluation stays finite far into the tail.
        assert!(model_pmf(&p9, 5_000).unwrap() >= 0.0);
        assert!(model_pmf(&g, 100_000).unwrap() >= 0.0);
    }

    #[test]
    fn pmf_rejects_bad_parameters() {
        assert!(model_pmf(&ParametricModel::Poisson { lambda: 0.0 }, 1).is_err());
        assert!(model_pmf(&ParametricModel::Geometric { theta: 1.0 }, 1).is_err());
        assert!(model_pmf(&ParametricModel::Geometric { theta: -0.1 }, 1).is_err());
    }

    #[test]
    fn mle_closed_forms() {
        let fit = fit_mle(ModelFamily::Poisson, &[2, 4]).unwrap();
        assert_eq!(fit.model, ParametricModel::Poisson { lambda: 3.0 });
        assert!(!fit.degenerate);

        let fit = fit_mle(ModelFamily::Geometric, &[3, 5]).unwrap();
        assert_eq!(fit.model, ParametricModel::Geometric { theta: 0.25 });
        assert!(!fit.degenerate);
    }

    #[test]
    fn mle_degenerate_boundaries() {
        let fit = fit_mle(ModelFamily::Geometric, &[1, 1, 1]).unwrap();
        assert_eq!(fit.model.parameter(), 1.0);
        assert!(fit.degenerate);

        let fit = fit_mle(ModelFamily::Poisson, &[0, 0]).unwrap();
        assert_eq!(fit.model.parameter(), 0.0);
        assert!(fit.degenerate);
    }

    #[test]
    fn geometric_mle_rejects_zeros() {
        assert!(matches!(
            fit_mle(ModelFamily::Geometric, &[0, 3]),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn default_partition_shape() {
        let cells = default_partition();
        assert_eq!(cells.num_cells(), 8);
        assert_eq!(cells.cell_index(6.5), 6); // cell [6, 7)
        assert_eq!(cells.cell_index(100.0), 7); // unbounded tail
        assert_eq!(cells.cell_index(0.0), 0);
    }

    #[test]
    fn geometric_cell_probs_form_geometric_progression() {
        let g = ParametricModel::Geometric { theta: 0.1 };
        let probs = model_cell_probs(&g, &default_partition()).unwrap();
        let m = probs.masses();
        let expected = [0.0, 0.1, 0.09, 0.081, 0.0729, 0.06561, 0.059049, 0.531441];
        for (a, b) in m.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        for i in 2..7 {
            assert_abs_diff_eq!(m[i] / m[i - 1], 0.9, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(m.iter().sum::<f64>(), 1.0, epsilon = 0.0);
    }

    #[test]
    fn poisson_cell_probs_match_pmf_sums() {
        let p = ParametricModel::Poisson { lambda: 9.0 };
        let probs = model_cell_probs(&p, &default_partition()).unwrap();
        for i in 0..7 {
            assert_abs_diff_eq!(
                probs.masses()[i],
                model_pmf(&p, i as u64).unwrap(),
                epsilon = 1e-12
            );
        }
        let tail: f64 = (0..7).map(|k| model_pmf(&p, k).unwrap()).sum();
        assert_abs_diff_eq!(probs.masses()[7], 1.0 - tail, epsilon = 1e-12);
        assert_abs_diff_eq!(probs.masses()[7], 0.7932, epsilon = 5e-5);
    }

    #[test]
    fn bkde_cell_probs_concentrate_for_tight_kernel() {
        let sample = Sample::new(vec![3.5]).unwrap();
        let probs = bkde_cell_probs(&sample, 0.1, &default_partition()).unwrap();
        assert!(probs.masses()[3] > 0.99, "mass = {}", probs.masses()[3]);
        assert_abs_diff_eq!(probs.masses().iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn kde_cell_probs_match_quadrature_oracle() {
        let sample = Sample::new(vec![0.7, 2.0, 2.0, 4.2, 9.5]).unwrap();
        let cells = default_partition();
        let h = 0.9;
        for kind in [DensityKind::Classical, DensityKind::BiasReduced] {
            let probs = kde_cell_probs_kind(&sample, h, &cells, kind).unwrap();
            let upper = sample.max() + 8.0 * h;
            let b = cells.boundaries();
            let mut raw = Vec::new();
            for i in 0..cells.num_cells() {
                let lo = b[i];
                let hi = if i + 1 < cells.num_cells() { b[i + 1] } else { upper };
                raw.push(
                    trapezoid_adaptive(
                        &|x| density::point_estimate(sample.values(), h, x, kind),
                        lo,
                        hi,
                        1e-9,
                        1e-12,
                        22,
                    )
                    .unwrap(),
                );
            }
            let floored: Vec<f64> = raw.iter().map(|&x| x.max(1e-12)).collect();
            let total: f64 = floored.iter().sum();
            for (i, &f) in floored.iter().enumerate() {
                assert_abs_diff_eq!(probs.masses()[i], f / total, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn empirical_freqs_count() {
        let sample = Sample::new(vec![0.0, 1.0, 1.0, 9.0]).unwrap();
        let probs = empirical_cell_freqs(&sample, &default_partition()).unwrap();
        let expected = [0.25, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25];
        for (a, b) in probs.masses().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 0.0);
        }

        let single = Sample::new(vec![2.2]).unwrap();
        let probs = empirical_cell_freqs(&single, &default_partition()).unwrap();
        assert_eq!(probs.masses()[2], 1.0);
    }

    /// Population counterpart of the binned estimate under a discrete
    /// model at bandwidth `h`: pmf-weighted kernel cell masses. Oracle
    /// for the convergence test below, built from the pmf directly.
    fn smoothed_limit(model: &ParametricModel, h: f64, cells: &CellPartition) -> BinnedDistribution {
        let grouped: Vec<(f64, f64)> = (0..160)
            .map(|k| (k as f64, model_pmf(model, k).unwrap()))
            .collect();
        grouped_cell_probs(&grouped, 1.0, h, cells, 160.0, DensityKind::BiasReduced).unwrap()
    }

    #[test]
    fn bkde_cells_converge_under_the_model() {
        // With integer data every atom sits exactly on a cell boundary, so
        // the binned estimate converges not to the model cells themselves
        // but to their kernel-smoothed counterpart; the total-variation gap
        // between the two is a fixed discretization floor (about 0.06 for
        // Poisson(9) on the default cells). Convergence is therefore tested
        // against the smoothed limit, plus an absolute bound witnessing
        // that the model cells are approached up to that floor.
        let p9 = ParametricModel::Poisson { lambda: 9.0 };
        let cells = default_partition();
        let truth = model_cell_probs(&p9, &cells).unwrap();
        let tv = |a: &BinnedDistribution, b: &BinnedDistribution| {
            a.masses()
                .iter()
                .zip(b.masses())
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / 2.0
        };
        let h_small = 100f64.powf(-1.0 / 7.0);
        let h_large = 2000f64.powf(-1.0 / 7.0);
        let limit_small = smoothed_limit(&p9, h_small, &cells);
        let limit_large = smoothed_limit(&p9, h_large, &cells);
        let floor = tv(&limit_large, &truth);
        assert!(floor < 0.08, "discretization floor unexpectedly large: {floor}");

        let mut improved = 0;
        let total = 50;
        for seed in 0..total {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    // Poisson(9) by inversion.
                    let u: f64 = rng.gen();
                    let mut k = 0u64;
                    let mut p = (-9.0f64).exp();
                    let mut cdf = p;
                    while u > cdf && k < 200 {
                        k += 1;
                        p *= 9.0 / k as f64;
                        cdf += p;
                    }
                    v.push(k as f64);
                }
                Sample::new(v).unwrap()
            };
            let small = draw(&mut rng, 100);
            let large = draw(&mut rng, 2000);
            let est_small = bkde_cell_probs(&small, h_small, &cells).unwrap();
            let est_large = bkde_cell_probs(&large, h_large, &cells).unwrap();
            if tv(&est_large, &limit_large) < tv(&est_small, &limit_small) {
                improved += 1;
            }
            assert!(tv(&est_large, &truth) < floor + 0.05);
        }
        assert!(
            improved * 100 >= 85 * total,
            "improved in only {improved}/{total} pairs"
        );
    }

    proptest! {
        #[test]
        fn poisson_mle_is_sample_mean(counts in proptest::collection::vec(0u64..50, 1..60)) {
            let fit = fit_mle(ModelFamily::Poisson, &counts).unwrap();
            let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len() as f64;
            prop_assert!((fit.model.parameter() - mean).abs() < 1e-12);
        }

        #[test]
        fn model_cells_always_sum_to_one(lambda in 0.1f64..30.0, theta in 0.01f64..0.99) {
            let cells = default_partition();
            for model in [
                ParametricModel::Poisson { lambda },
                ParametricModel::Geometric { theta },
            ] {
                let probs = model_cell_probs(&model, &cells).unwrap();
                let total: f64 = probs.masses().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(probs.masses().iter().all(|&m| m >= 0.0));
            }
        }
    }
}
