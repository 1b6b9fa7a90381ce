//! Command-line front end for the relucert verifier.
//!
//! Five modes over one model/property pair: `verify` (complete branch and
//! bound), `bound` (anytime lower/upper bounds with an optional wall-clock
//! budget), `attack` (projected gradient falsification only), `oracle`
//! (exhaustive activation-pattern enumeration, small nets only), and
//! `selftest` (internal consistency battery, no files needed).
//!
//! Specification rows are verified sequentially and independently; each row
//! `i` asserts `coeffs_i · f(x) + const_i > 0` on the region and receives its
//! own verdict. Exit code: 0 when every row is verified, 1 when any row is
//! falsified, 2 when any row remains unknown, 3 on file or parse errors, 4
//! when the enumeration oracle's size guard trips. With `--threads 1` all
//! reported timings are written as 0.0, making reports and logs byte-stable
//! across identical runs.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use relucert::bounds::SplitSet;
use relucert::model::{Network, Property};
use relucert::optimizer::OptimizerConfig;
use relucert::oracle::{exact_min, pgd_attack, OracleOutcome};
use relucert::bab::run_bab;
use relucert::{BabConfig, Branching, Status, VerifierError};

const EXIT_VERIFIED: u8 = 0;
const EXIT_FALSIFIED: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_INPUT_ERROR: u8 = 3;
const EXIT_GUARD: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Verify,
    Bound,
    Attack,
    Oracle,
    Selftest,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Verify => "verify",
            Mode::Bound => "bound",
            Mode::Attack => "attack",
            Mode::Oracle => "oracle",
            Mode::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BranchingArg {
    Babsr,
    Fsb,
}

/// Sound and complete robustness verification for ReLU networks.
#[derive(Debug, Parser)]
#[command(name = "relucert", version, disable_help_subcommand = true)]
struct Args {
    /// Network file (JSON).
    #[arg(long)]
    model: Option<PathBuf>,

    /// Property file (JSON): input region plus specification rows.
    #[arg(long)]
    property: Option<PathBuf>,

    /// What to do with the instance.
    #[arg(long, value_enum, default_value_t = Mode::Verify)]
    mode: Mode,

    /// Domains popped per branch-and-bound iteration.
    #[arg(long, default_value_t = 8)]
    batch: usize,

    /// Terminate when the global bound gap falls below this.
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,

    /// Terminate when the live domain queue reaches this size.
    #[arg(long, default_value_t = 1_000_000)]
    eta: usize,

    /// Wall-clock budget in seconds; omitted means run to completion.
    #[arg(long)]
    timeout: Option<f64>,

    /// Branching heuristic.
    #[arg(long, value_enum, default_value_t = BranchingArg::Babsr)]
    branching: BranchingArg,

    /// Ascent iterations per bounded domain.
    #[arg(long, default_value_t = 20)]
    iters: usize,

    /// Learning rate for relaxation slopes α.
    #[arg(long, default_value_t = 0.1)]
    lr_alpha: f64,

    /// Learning rate for split multipliers β.
    #[arg(long, default_value_t = 0.05)]
    lr_beta: f64,

    /// Multiplicative learning-rate decay per iteration.
    #[arg(long, default_value_t = 0.98)]
    decay: f64,

    /// Seed for every stochastic component (attack restarts).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads; defaults to $VERIFIER_THREADS, then 1. One thread is
    /// the deterministic mode.
    #[arg(long)]
    threads: Option<usize>,

    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,

    /// Write a CSV progress log here (one file per specification row).
    #[arg(long)]
    log: Option<PathBuf>,
}

/// Everything the run wants to persist about one specification row.
#[derive(Debug, Serialize)]
struct RowReport {
    row: usize,
    status: String,
    global_lower: Option<f64>,
    global_upper: Option<f64>,
    domains_visited: usize,
    branches: usize,
    wall_seconds: f64,
    /// Falsifying input (verify/bound), best attack point (attack), or exact
    /// minimizer (oracle).
    counterexample: Option<Vec<f64>>,
    /// The witness re-evaluated through the network, independently of the
    /// search that produced it.
    counterexample_value: Option<f64>,
}

/// Top-level JSON report: the configuration echoed back, one entry per
/// specification row, and the exit code implied by the row statuses.
#[derive(Debug, Serialize)]
struct Report {
    mode: String,
    model: String,
    property: String,
    branching: String,
    batch: usize,
    delta: f64,
    eta: usize,
    timeout: Option<f64>,
    iters: usize,
    lr_alpha: f64,
    lr_beta: f64,
    decay: f64,
    seed: u64,
    threads: usize,
    rows: Vec<RowReport>,
    exit_code: u8,
}

/// A failure that already knows its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT_ERROR,
            message: message.into(),
        }
    }

    fn from_error(err: VerifierError) -> Self {
        let code = match err {
            VerifierError::EnumerationGuard { .. } => EXIT_GUARD,
            _ => EXIT_INPUT_ERROR,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if e.use_stderr() => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_INPUT_ERROR);
        }
        // --help / --version go to stdout with a success code.
        Err(e) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(args: &Args) -> Result<u8, Failure> {
    if args.mode == Mode::Selftest {
        return Ok(run_selftest());
    }

    let model_path = args
        .model
        .as_deref()
        .ok_or_else(|| Failure::input("--model is required for this mode"))?;
    let property_path = args
        .property
        .as_deref()
        .ok_or_else(|| Failure::input("--property is required for this mode"))?;
    let net = Network::load(model_path).map_err(Failure::from_error)?;
    let property = Property::load(property_path).map_err(Failure::from_error)?;

    let threads = resolve_threads(args)?;
    if threads > 1 {
        // Size the worker pool to the requested degree; keep going if some
        // other component initialized it first.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let cfg = bab_config(args, threads);
    let num_rows = property.spec.num_rows();
    let mut rows = Vec::with_capacity(num_rows);
    for j in 0..num_rows {
        let (coeffs, constant) = property.spec.row(j);
        let merged = net
            .merge_specification(&coeffs, constant)
            .map_err(Failure::from_error)?;
        let row = match args.mode {
            Mode::Verify | Mode::Bound => {
                run_row_bab(args, &cfg, &merged, &property, j, num_rows)?
            }
            Mode::Attack => run_row_attack(&cfg, &merged, &property, j, threads)?,
            Mode::Oracle => run_row_oracle(&merged, &property, j, threads)?,
            Mode::Selftest => unreachable!("handled above"),
        };
        print_row(&row);
        rows.push(row);
    }

    let code = exit_code_for(&rows);
    if let Some(path) = &args.report {
        let report = Report {
            mode: args.mode.name().to_string(),
            model: model_path.display().to_string(),
            property: property_path.display().to_string(),
            branching: match args.branching {
                BranchingArg::Babsr => "babsr".to_string(),
                BranchingArg::Fsb => "fsb".to_string(),
            },
            batch: args.batch,
            delta: args.delta,
            eta: args.eta,
            timeout: args.timeout,
            iters: args.iters,
            lr_alpha: args.lr_alpha,
            lr_beta: args.lr_beta,
            decay: args.decay,
            seed: args.seed,
            threads,
            rows,
            exit_code: code,
        };
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| Failure::input(format!("report serialization failed: {e}")))?;
        text.push('\n');
        fs::write(path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(code)
}

fn resolve_threads(args: &Args) -> Result<usize, Failure> {
    if let Some(t) = args.threads {
        return Ok(t.max(1));
    }
    match std::env::var("VERIFIER_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|t| t.max(1))
            .map_err(|_| Failure::input(format!("VERIFIER_THREADS is not a thread count: {v:?}"))),
        Err(_) => Ok(1),
    }
}

fn bab_config(args: &Args, threads: usize) -> BabConfig {
    BabConfig {
        batch: args.batch.max(1),
        delta: args.delta,
        eta: args.eta,
        timeout: args.timeout,
        branching: match args.branching {
            BranchingArg::Babsr => Branching::BabSr,
            BranchingArg::Fsb => Branching::Fsb,
        },
        incomplete: args.mode == Mode::Bound,
        optimizer: OptimizerConfig {
            iters: args.iters,
            lr_alpha: args.lr_alpha,
            lr_beta: args.lr_beta,
            decay: args.decay,
            ..OptimizerConfig::default()
        },
        seed: args.seed,
        threads,
        ..BabConfig::default()
    }
}

/// Per-row log file: the given path for a single-row specification, otherwise
/// the path with `.row{j}` spliced in before the extension.
fn row_log_path(base: &Path, row: usize, num_rows: usize) -> PathBuf {
    if num_rows == 1 {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.row{row}.{}", ext.to_string_lossy()),
        None => format!("{stem}.row{row}"),
    };
    base.with_file_name(name)
}

fn run_row_bab(
    args: &Args,
    cfg: &BabConfig,
    merged: &Network,
    property: &Property,
    row: usize,
    num_rows: usize,
) -> Result<RowReport, Failure> {
    let mut log_file = match &args.log {
        Some(base) => {
            let path = row_log_path(base, row, num_rows);
            Some(File::create(&path).map_err(|e| {
                Failure::input(format!("cannot create log {}: {e}", path.display()))
            })?)
        }
        None => None,
    };
    let verdict = run_bab(
        merged,
        &property.region,
        cfg,
        log_file.as_mut().map(|f| f as &mut dyn Write),
    )
    .map_err(Failure::from_error)?;

    let counterexample_value = match &verdict.counterexample {
        Some(x) => Some(merged.forward_eval(x).map_err(Failure::from_error)?),
        None => None,
    };
    Ok(RowReport {
        row,
        status: verdict.status.to_string(),
        global_lower: Some(verdict.global_lower),
        global_upper: Some(verdict.global_upper),
        domains_visited: verdict.stats.domains_visited,
        branches: verdict.stats.branches,
        wall_seconds: verdict.stats.wall_seconds,
        counterexample: verdict.counterexample.map(|x| x.to_vec()),
        counterexample_value,
    })
}

fn run_row_attack(
    cfg: &BabConfig,
    merged: &Network,
    property: &Property,
    row: usize,
    threads: usize,
) -> Result<RowReport, Failure> {
    let start = Instant::now();
    // A standalone attack gets a larger budget than the in-search one.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(row as u64));
    let (best, x) = pgd_attack(merged, &property.region, 200, 30, &mut rng)
        .map_err(Failure::from_error)?;
    let value = merged.forward_eval(&x).map_err(Failure::from_error)?;
    let status = if best < 0.0 {
        Status::Falsified
    } else {
        Status::Unknown
    };
    Ok(RowReport {
        row,
        status: status.to_string(),
        global_lower: None,
        global_upper: Some(best),
        domains_visited: 0,
        branches: 0,
        wall_seconds: elapsed(start, threads),
        counterexample: Some(x.to_vec()),
        counterexample_value: Some(value),
    })
}

fn run_row_oracle(
    merged: &Network,
    property: &Property,
    row: usize,
    threads: usize,
) -> Result<RowReport, Failure> {
    let start = Instant::now();
    let splits = SplitSet::all_free(&merged.hidden_dims());
    let outcome = exact_min(merged, &property.region, &splits).map_err(Failure::from_error)?;
    let (status, value, argmin) = match outcome {
        OracleOutcome::Min { value, argmin } => {
            let status = if value < 0.0 {
                Status::Falsified
            } else {
                Status::Verified
            };
            (status, Some(value), Some(argmin))
        }
        OracleOutcome::Empty => (Status::Unknown, None, None),
    };
    let counterexample_value = match &argmin {
        Some(x) => Some(merged.forward_eval(x).map_err(Failure::from_error)?),
        None => None,
    };
    Ok(RowReport {
        row,
        status: status.to_string(),
        global_lower: value,
        global_upper: value,
        domains_visited: 0,
        branches: 0,
        wall_seconds: elapsed(start, threads),
        counterexample: argmin.map(|x| x.to_vec()),
        counterexample_value,
    })
}

fn elapsed(start: Instant, threads: usize) -> f64 {
    if threads <= 1 {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    }
}

fn print_row(row: &RowReport) {
    let bound = |v: Option<f64>| match v {
        Some(v) => format!("{v:.9}"),
        None => "-".to_string(),
    };
    println!(
        "row {}: {} lower={} upper={} visited={} branches={} wall={:.3}s",
        row.row,
        row.status,
        bound(row.global_lower),
        bound(row.global_upper),
        row.domains_visited,
        row.branches,
        row.wall_seconds,
    );
    if let (Some(x), Some(v)) = (&row.counterexample, row.counterexample_value) {
        let coords: Vec<String> = x.iter().map(|c| format!("{c:.9}")).collect();
        println!("row {}: witness=[{}] value={v:.9}", row.row, coords.join(", "));
    }
}

fn exit_code_for(rows: &[RowReport]) -> u8 {
    let falsified = rows.iter().any(|r| r.status == "falsified");
    let all_verified = rows.iter().all(|r| r.status == "verified");
    if falsified {
        EXIT_FALSIFIED
    } else if all_verified {
        EXIT_VERIFIED
    } else {
        EXIT_UNKNOWN
    }
}

fn run_selftest() -> u8 {
    let results = relucert::run_all();
    let mut clean = true;
    for r in &results {
        let tag = if r.passed { "ok" } else { "FAIL" };
        println!("selftest {}: {} ({})", r.name, tag, r.detail);
        clean &= r.passed;
    }
    if clean {
        println!("selftest: all {} checks passed", results.len());
        EXIT_VERIFIED
    } else {
        EXIT_FALSIFIED
    }
}
