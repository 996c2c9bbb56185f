mod cli;
mod commands;
mod io;

use clap::Parser;
use cli::{Cli, Command, CommonArgs, FormatArg};
use kldsel::models::ModelFamily;
use kldsel::Error;
use serde_json::Value;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems (unknown flags, bad values) exit 1 with the
            // help text on standard error; --help/--version exit 0.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    if let Err(code) = init_thread_pool() {
        return code;
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Parameter(_) => 1,
                Error::Domain(_) => 2,
                Error::Numeric(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

/// KLDSEL_THREADS caps worker parallelism; 0 or unset means automatic.
fn init_thread_pool() -> Result<(), ExitCode> {
    if let Ok(raw) = std::env::var("KLDSEL_THREADS") {
        let Ok(threads) = raw.trim().parse::<usize>() else {
            eprintln!("error: KLDSEL_THREADS must be a nonnegative integer, got {raw:?}");
            return Err(ExitCode::from(1));
        };
        if threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .expect("thread pool is configured once at startup");
        }
    }
    Ok(())
}

fn family(model: cli::ModelArg) -> ModelFamily {
    match model {
        cli::ModelArg::Poisson => ModelFamily::Poisson,
        cli::ModelArg::Geometric => ModelFamily::Geometric,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let started = now();
    let (name, common, outcome): (&str, &CommonArgs, commands::CmdOutcome) = match &cli.command {
        Command::Density { input, bandwidth, grid, common } => (
            "density",
            common,
            commands::density_cmd(input, bandwidth, *grid, common.format)?,
        ),
        Command::Bandwidth { input, objective, common } => (
            "bandwidth",
            common,
            commands::bandwidth_cmd(input, objective, common.format)?,
        ),
        Command::Kld { input, model, bandwidth, common } => (
            "kld",
            common,
            commands::kld_cmd(input, family(*model), bandwidth)?,
        ),
        Command::Gof { input, model, bandwidth, alpha, resamples, scale, common } => (
            "gof",
            common,
            commands::gof_cmd(input, family(*model), bandwidth, *alpha, *resamples, common.seed, *scale)?,
        ),
        Command::Select { input, bandwidth, alpha, resamples, scale, common } => (
            "select",
            common,
            commands::select_cmd(input, bandwidth, *alpha, *resamples, common.seed, *scale)?,
        ),
        Command::Simulate { pi, n, reps, alpha, policy, resamples, common } => (
            "simulate",
            common,
            commands::simulate_cmd(*pi, *n, *reps, *alpha, common.seed, policy, *resamples)?,
        ),
        Command::Rate { sizes, reps, x0, kind, common } => (
            "rate",
            common,
            commands::rate_cmd(sizes, *reps, *x0, common.seed, *kind, common.format)?,
        ),
        Command::Hist { input, pi, n, models, common } => (
            "hist",
            common,
            commands::hist_cmd(input.as_deref(), *pi, *n, common.seed, *models, common.format)?,
        ),
    };

    let (envelope, csv) = outcome;
    let text = match (common.format, csv) {
        (FormatArg::Csv, Some(csv)) => csv,
        // Commands without a tabular shape render key,value rows.
        (FormatArg::Csv, None) => {
            io::kv_csv(envelope.get("results").unwrap_or(&Value::Null))
        }
        (FormatArg::Json, _) => {
            let timestamps = if common.no_timestamp {
                None
            } else {
                Some((started, now()))
            };
            let config = envelope.get("config").cloned().unwrap_or(Value::Null);
            let results = envelope.get("results").cloned().unwrap_or(Value::Null);
            let report = io::report(
                name,
                Some(common.seed),
                common.out.as_deref(),
                timestamps,
                config,
                results,
            );
            io::to_json_string(&report)
        }
    };
    io::emit(common.out.as_deref(), &text)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
