//! One function per subcommand; each returns the rendered report text.

use crate::cli::{BandwidthArg, FormatArg, HistModels, RateKind, ScaleEstimator};
use crate::io;
use kldsel::bandwidth::{self, BandwidthObjective, BandwidthSelection};
use kldsel::density::{self, DensityKind, Sample};
use kldsel::divergence;
use kldsel::hypothesis;
use kldsel::models::{self, ModelFamily};
use kldsel::rng::{stream_rng, stream_seed, PURPOSE_BOOTSTRAP, PURPOSE_SAMPLE};
use kldsel::simulate::{self, BandwidthPolicy, ExperimentConfig};
use kldsel::Error;
use serde_json::{json, Map, Value};
use std::path::Path;

/// A command's JSON envelope (`{config, results}`) plus an optional
/// preferred CSV rendering.
pub type CmdOutcome = (Value, Option<String>);
type CmdResult = Result<CmdOutcome, Error>;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report value")
}

/// Resolves a bandwidth argument against a sample.
fn resolve_bandwidth(sample: &Sample, arg: &BandwidthArg) -> Result<(f64, Value), Error> {
    match arg {
        BandwidthArg::Fixed(h) => {
            if !(h.is_finite() && *h > 0.0) {
                return Err(Error::Parameter(format!("bandwidth must be positive, got {h}")));
            }
            Ok((*h, to_value(&BandwidthSelection::fixed(*h))))
        }
        BandwidthArg::Cv | BandwidthArg::Mcv => {
            let objective = match arg {
                BandwidthArg::Cv => BandwidthObjective::Cv,
                _ => BandwidthObjective::Mcv,
            };
            let (lo, hi) = bandwidth::default_search_range(sample)?;
            let sel = bandwidth::select_bandwidth(sample, objective, lo, hi)?;
            Ok((sel.h_star, to_value(&sel)))
        }
    }
}

/// Truncation threshold for continuous divergences on arbitrary data:
/// n^{-1/4} scaled by the normal-reference peak height so the cutoff
/// tracks the density's magnitude.
fn scaled_epsilon(sample: &Sample) -> f64 {
    let scale = 1.0 / (sample.std_dev() * (2.0 * std::f64::consts::PI).sqrt());
    divergence::threshold_epsilon(sample.len()) * scale.min(1.0).max(1e-12)
}


pub fn density_cmd(
    input: &Path,
    bandwidth_arg: &BandwidthArg,
    grid_points: usize,
    format: FormatArg,
) -> CmdResult {
    if grid_points < 2 {
        return Err(Error::Parameter("grid needs at least two points".into()));
    }
    let sample = Sample::new(io::read_observations(input)?)?;
    let (h, selection) = resolve_bandwidth(&sample, bandwidth_arg)?;

    let lo = sample.min() - 4.0 * h;
    let hi = sample.max() + 4.0 * h;
    let step = (hi - lo) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| lo + i as f64 * step).collect();

    let classical = density::evaluate_on_grid(&sample, h, &grid, DensityKind::Classical)?;
    let bias_reduced = density::evaluate_on_grid(&sample, h, &grid, DensityKind::BiasReduced)?;

    let config = json!({
        "input": input.display().to_string(),
        "bandwidth": bandwidth_arg.describe(),
        "grid_points": grid_points,
        "n": sample.len(),
    });
    let results = json!({
        "h": h,
        "selection": selection,
        "grid": grid,
        "f_classical": classical.values,
        "f_bias_reduced": bias_reduced.values,
    });

    let csv = match format {
        FormatArg::Csv => {
            let mut text = String::from("x,f_classical,f_bias_reduced\n");
            for i in 0..grid.len() {
                text.push_str(&format!(
                    "{},{},{}\n",
                    io::format_csv(grid[i]),
                    io::format_csv(classical.values[i]),
                    io::format_csv(bias_reduced.values[i])
                ));
            }
            Some(text)
        }
        FormatArg::Json => None,
    };
    Ok((json!({"config": config, "results": results}), csv))
}

pub fn bandwidth_cmd(input: &Path, objective: &BandwidthArg, format: FormatArg) -> CmdResult {
    let sample = Sample::new(io::read_observations(input)?)?;
    let (h, selection) = resolve_bandwidth(&sample, objective)?;
    let config = json!({
        "input": input.display().to_string(),
        "objective": objective.describe(),
        "n": sample.len(),
    });
    let results = json!({"h": h, "selection": selection});
    let csv = match format {
        FormatArg::Csv => {
            let mut text = String::from("objective,h_star,objective_value,search_lo,search_hi,evaluations\n");
            let sel: &Value = &results["selection"];
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                objective.describe(),
                io::format_csv(h),
                sel["objective_value"].as_f64().map_or("nan".into(), io::format_csv),
                sel["search_lo"].as_f64().map_or("nan".into(), io::format_csv),
                sel["search_hi"].as_f64().map_or("nan".into(), io::format_csv),
                sel["evaluations"]
            ));
            Some(text)
        }
        FormatArg::Json => None,
    };
    Ok((json!({"config": config, "results": results}), csv))
}

pub fn kld_cmd(input: &Path, family: ModelFamily, bandwidth_arg: &BandwidthArg) -> CmdResult {
    let values = io::read_observations(input)?;
    let counts = io::as_counts(&values)?;
    let sample = Sample::new(values)?;
    let (h, selection) = resolve_bandwidth(&sample, bandwidth_arg)?;
    let fit = models::fit_mle(family, &counts)?;
    let cells = models::default_partition();

    let p_hat = models::bkde_cell_probs(&sample, h, &cells)?;
    let q = models::model_cell_probs(&fit.model, &cells)?;
    let binned = divergence::kld_discrete(&p_hat, &q)?;

    let epsilon = scaled_epsilon(&sample);
    let continuous = divergence::kld_continuous(
        &sample,
        h,
        models::continuous_pmf_extension(&fit.model)?,
        epsilon,
    )?;

    let config = json!({
        "input": input.display().to_string(),
        "model": to_value(&family),
        "bandwidth": bandwidth_arg.describe(),
        "n": sample.len(),
    });
    let results = json!({
        "h": h,
        "selection": selection,
        "fitted_model": to_value(&fit.model),
        "fit_degenerate": fit.degenerate,
        "binned_divergence": binned,
        "scaled_binned_divergence": sample.len() as f64 * binned,
        "continuous": to_value(&continuous),
    });
    Ok((json!({"config": config, "results": results}), None))
}

pub fn gof_cmd(
    input: &Path,
    family: ModelFamily,
    bandwidth_arg: &BandwidthArg,
    alpha: f64,
    resamples: usize,
    seed: u64,
    scale_estimator: ScaleEstimator,
) -> CmdResult {
    let values = io::read_observations(input)?;
    let counts = io::as_counts(&values)?;
    let sample = Sample::new(values)?;
    let (h, selection) = resolve_bandwidth(&sample, bandwidth_arg)?;
    let fit = models::fit_mle(family, &counts)?;
    let cells = models::default_partition();

    let other = match family {
        ModelFamily::Poisson => ModelFamily::Geometric,
        ModelFamily::Geometric => ModelFamily::Poisson,
    };
    let scales = match scale_estimator {
        ScaleEstimator::Bootstrap => hypothesis::bootstrap_scale(
            &counts,
            h,
            family,
            other,
            &cells,
            resamples,
            stream_seed(seed, 0, PURPOSE_BOOTSTRAP),
        )?,
        ScaleEstimator::Plugin => {
            let other_fit = models::fit_mle(other, &counts)?;
            hypothesis::plugin_scale(&sample, h, &cells, &fit.model, &other_fit.model)?
        }
    };
    let test = hypothesis::gof_statistic(&sample, h, &cells, &fit.model, scales.lambda_model_1, alpha)?;

    let config = json!({
        "input": input.display().to_string(),
        "model": to_value(&family),
        "bandwidth": bandwidth_arg.describe(),
        "alpha": alpha,
        "resamples": resamples,
        "scale_estimator": scale_estimator.as_str(),
        "n": sample.len(),
    });
    let results = json!({
        "h": h,
        "selection": selection,
        "fitted_model": to_value(&fit.model),
        "scale": to_value(&scales),
        "test": to_value(&test),
    });
    Ok((json!({"config": config, "results": results}), None))
}

pub fn select_cmd(
    input: &Path,
    bandwidth_arg: &BandwidthArg,
    alpha: f64,
    resamples: usize,
    seed: u64,
    scale_estimator: ScaleEstimator,
) -> CmdResult {
    let values = io::read_observations(input)?;
    let counts = io::as_counts(&values)?;
    let sample = Sample::new(values)?;
    let (h, selection) = resolve_bandwidth(&sample, bandwidth_arg)?;
    let cells = models::default_partition();

    let poisson = models::fit_mle(ModelFamily::Poisson, &counts)?;
    let geometric = models::fit_mle(ModelFamily::Geometric, &counts)?;

    let p_hat = models::bkde_cell_probs(&sample, h, &cells)?;
    let d_poisson =
        divergence::kld_discrete(&p_hat, &models::model_cell_probs(&poisson.model, &cells)?)?;
    let d_geometric =
        divergence::kld_discrete(&p_hat, &models::model_cell_probs(&geometric.model, &cells)?)?;

    let scales = match scale_estimator {
        ScaleEstimator::Bootstrap => hypothesis::bootstrap_scale(
            &counts,
            h,
            ModelFamily::Poisson,
            ModelFamily::Geometric,
            &cells,
            resamples,
            stream_seed(seed, 0, PURPOSE_BOOTSTRAP),
        )?,
        ScaleEstimator::Plugin => {
            hypothesis::plugin_scale(&sample, h, &cells, &poisson.model, &geometric.model)?
        }
    };

    let (statistic, test) = if scales.xi < hypothesis::DEGENERATE_SCALE {
        (None, hypothesis::selection_result(0.0, scales.xi, alpha)?)
    } else {
        let kl_n = hypothesis::kl_n_statistic(
            &sample,
            h,
            &cells,
            &poisson.model,
            &geometric.model,
            scales.xi,
        )?;
        (Some(kl_n), hypothesis::selection_result(kl_n, scales.xi, alpha)?)
    };

    let config = json!({
        "input": input.display().to_string(),
        "model_1": "poisson",
        "model_2": "geometric",
        "bandwidth": bandwidth_arg.describe(),
        "alpha": alpha,
        "resamples": resamples,
        "scale_estimator": scale_estimator.as_str(),
        "n": sample.len(),
    });
    let results = json!({
        "h": h,
        "selection": selection,
        "fitted_poisson": to_value(&poisson.model),
        "fitted_geometric": to_value(&geometric.model),
        "divergence_vs_poisson": d_poisson,
        "divergence_vs_geometric": d_geometric,
        "scale": to_value(&scales),
        "kl_n": statistic,
        "test": to_value(&test),
    });
    Ok((json!({"config": config, "results": results}), None))
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_cmd(
    pi: f64,
    n: usize,
    reps: usize,
    alpha: f64,
    seed: u64,
    policy: &BandwidthArg,
    resamples: usize,
) -> CmdResult {
    let mut config = ExperimentConfig::new(pi, n, reps, alpha, seed)?;
    config.bandwidth_policy = match policy {
        BandwidthArg::Mcv => BandwidthPolicy::Mcv,
        BandwidthArg::Cv => BandwidthPolicy::Cv,
        BandwidthArg::Fixed(h) => BandwidthPolicy::Fixed { h: *h },
    };
    config.bootstrap_resamples = resamples;
    config.validate()?;
    let report = simulate::run_experiment(&config)?;
    Ok((json!({"config": to_value(&config), "results": to_value(&report)}), None))
}

pub fn rate_cmd(
    sizes: &[usize],
    reps: usize,
    x0: f64,
    seed: u64,
    kind: RateKind,
    format: FormatArg,
) -> CmdResult {
    let mut results = Map::new();
    let kinds: Vec<DensityKind> = match kind {
        RateKind::BiasReduced => vec![DensityKind::BiasReduced],
        RateKind::Classical => vec![DensityKind::Classical],
        RateKind::Both => vec![DensityKind::BiasReduced, DensityKind::Classical],
    };
    for k in &kinds {
        let report = simulate::mse_rate_experiment(*k, sizes, reps, x0, seed)?;
        let key = match k {
            DensityKind::BiasReduced => "bias_reduced",
            DensityKind::Classical => "classical",
        };
        results.insert(key.to_string(), to_value(&report));
    }
    let config = json!({
        "sizes": sizes,
        "reps": reps,
        "x0": x0,
        "kind": kind.as_str(),
    });
    let results = Value::Object(results);
    let csv = match format {
        FormatArg::Csv => {
            let mut text = String::from("kind,n,h,mse,slope\n");
            for (key, report) in results.as_object().unwrap() {
                let slope = report["slope"].as_f64().unwrap_or(f64::NAN);
                for e in report["entries"].as_array().unwrap() {
                    text.push_str(&format!(
                        "{key},{},{},{},{}\n",
                        e["n"],
                        io::format_csv(e["h"].as_f64().unwrap_or(f64::NAN)),
                        io::format_csv(e["mse"].as_f64().unwrap_or(f64::NAN)),
                        io::format_csv(slope)
                    ));
                }
            }
            Some(text)
        }
        FormatArg::Json => None,
    };
    Ok((json!({"config": config, "results": results}), csv))
}

#[allow(clippy::too_many_arguments)]
pub fn hist_cmd(
    input: Option<&Path>,
    pi: Option<f64>,
    n: usize,
    seed: u64,
    models_arg: HistModels,
    format: FormatArg,
) -> CmdResult {
    let counts: Vec<u64> = match (input, pi) {
        (Some(path), None) => io::as_counts(&io::read_observations(path)?)?,
        (None, Some(pi)) => {
            let mut rng = stream_rng(seed, 0, PURPOSE_SAMPLE);
            simulate::sample_mixture(pi, n, &mut rng)?
        }
        _ => {
            return Err(Error::Parameter(
                "provide exactly one of --input or --pi".to_string(),
            ))
        }
    };

    let max = *counts.iter().max().unwrap_or(&0);
    let mut bins = vec![0u64; max as usize + 1];
    for &c in &counts {
        bins[c as usize] += 1;
    }
    let total = counts.len() as f64;

    let want_poisson = matches!(models_arg, HistModels::Both | HistModels::Poisson);
    let want_geometric = matches!(models_arg, HistModels::Both | HistModels::Geometric);
    let poisson = if want_poisson {
        Some(models::fit_mle(ModelFamily::Poisson, &counts)?)
    } else {
        None
    };
    let geometric = if want_geometric {
        Some(models::fit_mle(ModelFamily::Geometric, &counts)?)
    } else {
        None
    };

    let pmf_column = |fit: &Option<models::MleFit>| -> Result<Option<Vec<f64>>, Error> {
        fit.as_ref()
            .map(|f| {
                (0..=max)
                    .map(|x| models::model_pmf(&f.model, x))
                    .collect::<Result<Vec<f64>, Error>>()
            })
            .transpose()
    };
    let poisson_pmf = pmf_column(&poisson)?;
    let geometric_pmf = pmf_column(&geometric)?;

    let config = json!({
        "input": input.map(|p| p.display().to_string()),
        "pi": pi,
        "n": counts.len(),
        "models": models_arg.as_str(),
    });
    let results = json!({
        "x": (0..=max).collect::<Vec<u64>>(),
        "count": bins,
        "rel_freq": bins.iter().map(|&c| c as f64 / total).collect::<Vec<f64>>(),
        "poisson": poisson.as_ref().map(|f| to_value(&f.model)),
        "geometric": geometric.as_ref().map(|f| to_value(&f.model)),
        "poisson_pmf": poisson_pmf,
        "geometric_pmf": geometric_pmf,
    });

    let csv = match format {
        FormatArg::Csv => {
            let mut header = String::from("x,count,rel_freq");
            if poisson.is_some() {
                header.push_str(",poisson_pmf");
            }
            if geometric.is_some() {
                header.push_str(",geometric_pmf");
            }
            header.push('\n');
            let mut text = header;
            for x in 0..=max as usize {
                let mut row = format!("{x},{},{}", bins[x], io::format_csv(bins[x] as f64 / total));
                if let Some(col) = poisson_pmf.as_ref() {
                    row.push_str(&format!(",{}", io::format_csv(col[x])));
                }
                if let Some(col) = geometric_pmf.as_ref() {
                    row.push_str(&format!(",{}", io::format_csv(col[x])));
                }
                row.push('\n');
                text.push_str(&row);
            }
            Some(text)
        }
        FormatArg::Json => None,
    };
    Ok((json!({"config": config, "results": results}), csv))
}
