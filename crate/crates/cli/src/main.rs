//! `benson`: solve a convex vector optimization problem from a problem file
//! and write the result bundle.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use benson_core::duality::DualFrame;
use benson_core::engine::{
    certify_with_seed, run, BreakMode, EngineError, EpsilonSolution, Granularity, RunConfig, Variant,
};
use benson_core::io::{load_problem, ResultBundle};
use benson_core::model::CvopProblem;
use benson_core::solver::Backend;
use clap::{Parser, ValueEnum};
use serde_json::json;

/// Exit code for errors reported by the solver or the loader.
const EXIT_FAILURE: u8 = 1;
/// Exit code when the iteration limit stopped the run; partial results
/// are written.
const EXIT_PARTIAL: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algorithm {
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Fine,
    Alt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Lifted,
    Bundle,
}

#[derive(Debug, Parser)]
#[command(name = "benson", version, about = "Primal and dual Benson-type solver for convex vector optimization")]
struct Args {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Approximation error ε > 0.
    #[arg(long, value_parser = positive_float, allow_negative_numbers = true)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "primal")]
    algorithm: Algorithm,
    /// Update the outer approximation at the first vertex outside the
    /// tolerance.
    #[arg(long = "break", value_enum, default_value = "on")]
    break_mode: OnOff,
    #[arg(long, value_enum, default_value = "fine")]
    variant: VariantArg,
    /// Output directory for the result bundle.
    #[arg(long, default_value = "benson_out")]
    out: PathBuf,
    /// Seed of the sampling used by the certification.
    #[arg(long, default_value_t = benson_core::engine::DEFAULT_SAMPLE_SEED)]
    seed: u64,
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Scalar solver backend.
    #[arg(long, value_enum, default_value = "lifted")]
    backend: BackendArg,
    /// Solve every vertex again even if it was accepted before.
    #[arg(long = "no-cache")]
    no_cache: bool,
    /// Skip the certification of the result.
    #[arg(long = "no-certify")]
    no_certify: bool,
}

fn positive_float(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("epsilon must be positive and finite, got {s}"))
    }
}

fn config(args: &Args) -> RunConfig {
    let variant = match args.algorithm {
        Algorithm::Primal => Variant::Primal,
        Algorithm::Dual => Variant::Dual,
    };
    let mut cfg = RunConfig::new(args.epsilon, variant);
    cfg.break_mode = match args.break_mode {
        OnOff::On => BreakMode::Break,
        OnOff::Off => BreakMode::NoBreak,
    };
    cfg.granularity = match args.variant {
        VariantArg::Fine => Granularity::Fine,
        VariantArg::Alt => Granularity::Alternative,
    };
    cfg.max_iterations = args.max_iter;
    cfg.cache = !args.no_cache;
    cfg.solver.backend = match args.backend {
        BackendArg::Lifted => Backend::Lifted,
        BackendArg::Bundle => Backend::Bundle,
    };
    cfg
}

fn error_json(kind: &str, message: &str, partial: bool) -> serde_json::Value {
    json!({ "error": kind, "message": message, "partial": partial })
}

/// Prints the error document on stderr and stores it next to the bundle.
fn report_error(out: &Path, doc: &serde_json::Value) {
    let text = serde_json::to_string_pretty(doc).expect("error document serializes");
    eprintln!("{text}");
    if std::fs::create_dir_all(out).is_ok() {
        if let Err(e) = std::fs::write(out.join("error.json"), &text) {
            log::warn!("cannot write error.json: {e}");
        }
    }
}

fn write_bundle(
    args: &Args,
    sol: &EpsilonSolution,
    prob: &CvopProblem,
    frame: &DualFrame,
    prob_name: String,
) -> Result<ResultBundle, String> {
    let report = (!args.no_certify).then(|| certify_with_seed(sol, prob, frame, sol.config.epsilon, args.seed));
    let bundle = ResultBundle::from_solution(sol, Some(prob_name), report);
    bundle.write_dir(&args.out).map_err(|e| e.to_string())?;
    Ok(bundle)
}

fn print_summary(format: Format, bundle: &ResultBundle, out: &Path) {
    match format {
        Format::Json => {
            let doc = json!({
                "stats": bundle.stats_row,
                "complete": bundle.complete,
                "achieved_epsilon": bundle.achieved_epsilon,
                "certified": bundle.certification.as_ref().map(|r| r.all_passed),
                "out": out.display().to_string(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("summary serializes"));
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            if w.serialize(&bundle.stats_row).and_then(|_| Ok(w.flush()?)).is_err() {
                log::warn!("cannot write the summary");
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BENSON_LOG", "warn")).init();
    let args = Args::parse();
    let prob = match load_problem(&args.problem) {
        Ok(p) => p,
        Err(e) => {
            report_error(&args.out, &error_json(e.kind(), &e.to_string(), false));
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let frame = match DualFrame::for_problem(&prob) {
        Ok(f) => f,
        Err(e) => {
            report_error(&args.out, &error_json("ConeError", &e.to_string(), false));
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let cfg = config(&args);
    let name = args.problem.display().to_string();
    match run(&prob, &frame, &cfg) {
        Ok(sol) => match write_bundle(&args, &sol, &prob, &frame, name) {
            Ok(bundle) => {
                print_summary(args.format, &bundle, &args.out);
                ExitCode::SUCCESS
            }
            Err(msg) => {
                report_error(&args.out, &error_json("IoError", &msg, false));
                ExitCode::from(EXIT_FAILURE)
            }
        },
        Err(EngineError::MaxIterations(sol)) => {
            let msg = format!("iteration limit reached; achieved epsilon {}", sol.achieved_epsilon);
            if let Err(e) = write_bundle(&args, &sol, &prob, &frame, name) {
                log::warn!("cannot write the partial bundle: {e}");
            }
            report_error(&args.out, &error_json("MaxIterations", &msg, true));
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            report_error(&args.out, &error_json(e.kind(), &e.to_string(), false));
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
