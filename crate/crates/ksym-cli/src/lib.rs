//! `ksym`: load a chart presentation from JSON, run the verification
//! suites, and emit a deterministic JSON report.
//!
//! Exit codes: `0` when every executed check passes, `1` when any check
//! fails, `2` on usage or spec errors.

mod report;
mod specfile;
mod suites;

use std::path::PathBuf;
use std::sync::Once;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use ksym_core::normalform::Region;
use ksym_core::structures::{CheckRecord, SamplingPlan};

use report::ReportFile;
use specfile::load_spec;
use suites::SuiteContext;

pub use report::residual_string;
pub use specfile::{LoadedSpec, SpecError};

#[derive(Debug, Parser)]
#[command(
    name = "ksym",
    version,
    about = "Verification suites for k-symplectic chart presentations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the hypothesis checks C1..C7.
    Validate(RunArgs),
    /// Connection coefficients: uniqueness, structure, parallel forms, torsion.
    Connection(RunArgs),
    /// Curvature: oracle equivalence, leafwise vanishing, rigidity.
    Curvature(RunArgs),
    /// Parallel transport along vertical, leafwise, and horizontal curves.
    Transport(RunArgs),
    /// Geodesics: straight leaves, convergence, leaf preservation.
    Geodesic(RunArgs),
    /// The Ehresmann rectangle construction and its axioms.
    Rectangle(RunArgs),
    /// The flat normal-form chart and its verification.
    NormalForm(RunArgs),
    /// Almost k-Kaehler tensors and their identities.
    Kaehler(RunArgs),
    /// Curvature 2-form, wedge powers, and trace-power vanishing.
    Charclass(RunArgs),
    /// Every suite in sequence, one merged report.
    All(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to the spec JSON file.
    spec: PathBuf,
    /// Sample points per check.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Seed of the sampling plan.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the sampling box and region with LO,HI per coordinate.
    #[arg(long = "box", value_parser = parse_box, value_name = "LO,HI")]
    box_bounds: Option<(f64, f64)>,
    /// Tolerance of the sampled hypothesis checks.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Report output path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Grid cells per direction for rectangles and chart verification.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// RK4 steps for the integrators.
    #[arg(long, default_value_t = 512)]
    steps: usize,
}

fn parse_box(text: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err("expected LO,HI".to_string());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| "LO is not a number")?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| "HI is not a number")?;
    if lo >= hi {
        return Err("LO must be strictly below HI".to_string());
    }
    Ok((lo, hi))
}

fn thread_pool_from_env() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(text) = std::env::var("KSYM_THREADS") {
            if let Ok(threads) = text.parse::<usize>() {
                if threads >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build_global();
                }
            }
        }
    });
}

/// Run the CLI on the given argument list and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    thread_pool_from_env();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, args): (&str, &RunArgs) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::Connection(a) => ("connection", a),
        Command::Curvature(a) => ("curvature", a),
        Command::Transport(a) => ("transport", a),
        Command::Geodesic(a) => ("geodesic", a),
        Command::Rectangle(a) => ("rectangle", a),
        Command::NormalForm(a) => ("normal-form", a),
        Command::Kaehler(a) => ("kaehler", a),
        Command::Charclass(a) => ("charclass", a),
        Command::All(a) => ("all", a),
    };
    match execute(name, args) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("ksym: {message}");
            2
        }
    }
}

fn execute(name: &str, args: &RunArgs) -> Result<i32, String> {
    let loaded = load_spec(&args.spec).map_err(|e| e.to_string())?;
    let dim = loaded.spec.dim();

    let region = match args.box_bounds {
        Some((lo, hi)) => Region {
            min: nalgebra::DVector::from_element(dim, lo),
            max: nalgebra::DVector::from_element(dim, hi),
        },
        None => loaded.region.clone(),
    };
    let plan = SamplingPlan {
        sample_count: args.samples,
        seed: args.seed,
        box_min: region.min.as_slice().to_vec(),
        box_max: region.max.as_slice().to_vec(),
        tolerance: args.tol,
    };
    let ctx = SuiteContext {
        spec: &loaded.spec,
        region: &region,
        plan: &plan,
        grid: args.grid,
        steps: args.steps,
    };

    let mut artifacts = Map::new();
    let mut checks: Vec<CheckRecord> = Vec::new();
    let run_suite = |suite: &str,
                         checks: &mut Vec<CheckRecord>,
                         artifacts: &mut Map<String, Value>|
     -> Result<(), String> {
        let records = match suite {
            "validate" => suites::validate_suite(&ctx, artifacts)?,
            "connection" => suites::connection_suite(&ctx, artifacts)?,
            "curvature" => suites::curvature_suite(&ctx, artifacts)?,
            "transport" => suites::transport_suite(&ctx, artifacts)?,
            "geodesic" => suites::geodesic_suite(&ctx, artifacts)?,
            "rectangle" => suites::rectangle_suite(&ctx, artifacts)?,
            "normal-form" => suites::normal_form_suite(&ctx, artifacts, false)?,
            "normal-form-optional" => suites::normal_form_suite(&ctx, artifacts, true)?,
            "kaehler" => suites::kaehler_suite(&ctx, artifacts)?,
            "charclass" => suites::charclass_suite(&ctx, artifacts)?,
            other => return Err(format!("unknown suite {other}")),
        };
        checks.extend(records);
        Ok(())
    };

    if name == "all" {
        for suite in [
            "validate",
            "connection",
            "curvature",
            "transport",
            "geodesic",
            "rectangle",
            "kaehler",
            "charclass",
            "normal-form-optional",
        ] {
            run_suite(suite, &mut checks, &mut artifacts)?;
        }
    } else {
        run_suite(name, &mut checks, &mut artifacts)?;
    }

    let mut report = ReportFile::new(&loaded.raw_bytes, args.seed);
    report.push_records(&checks);
    report.artifacts = artifacts;

    for record in &checks {
        println!(
            "{:<4} {:<7} {:<12} {}",
            record.id,
            report::status_str(record.status),
            residual_string(record.max_residual),
            record.description
        );
    }

    let body = report.to_json();
    std::fs::write(&args.out, body)
        .map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    let failed = checks
        .iter()
        .filter(|c| c.status == ksym_core::structures::CheckStatus::Fail)
        .count();
    println!(
        "wrote {} ({} checks, {failed} failed)",
        args.out.display(),
        checks.len()
    );
    Ok(if report.any_failed() { 1 } else { 0 })
}
