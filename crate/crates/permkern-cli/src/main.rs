//! Batch frontend over the permkern library: kernels or family descriptors
//! in, a pretty-printed JSON report on stdout (and optionally on disk) out.
//!
//! Every run is fully determined by its flags; `PERMKERN_THREADS` only caps
//! sampling workers and never changes report bytes. Exit status: 0 for a
//! definitive verdict or a completed run, 2 when the outcome is
//! Indeterminate/Inconclusive, 1 on any error (printed to stderr).

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand};
use permkern::dichotomy::{
    asymptotic_scan, limit_point_check, AsymptoticVerdict, LimitPointConfig, ScanConfig, ScanSource,
};
use permkern::kernels::family::FamilyDescriptor;
use permkern::kernels::{random_potential, DEFAULT_DOMINANCE};
use permkern::permanental::{lt_report, sample_rational, PermanentalSpec};
use permkern::potential::construct_h;
use permkern::symcheck::{
    check_necessary, pit_equivalence, symmetrizable, SymmetrizabilityVerdict, PIT_TOL,
};
use permkern::{Error, Kernel, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "permkern",
    version,
    about = "Symmetrizability checks, residual scans, weight construction, \
             and permanental sampling for positive kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether a kernel admits a symmetric equivalent
    Check(CheckArgs),
    /// Hunt for cycle-residual witnesses above increasing thresholds
    Scan(ScanArgs),
    /// Run the block-wise weight construction on a potential
    Construct(ConstructArgs),
    /// Sample nonnegative vectors for a kernel and audit their Laplace transform
    Sample(SampleArgs),
    /// Test a claimed symmetric equivalent Q against a kernel K
    Verify(VerifyArgs),
    /// Probe diagonal-plus-constant tails of a kernel near a limit point
    Limitpoint(LimitArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "family"])))]
struct CheckArgs {
    /// Kernel file: CSV grid or {"n":..,"entries":[[..]]} JSON
    #[arg(long)]
    input: Option<PathBuf>,
    /// Family descriptor: inline JSON (starts with '{') or a path to one
    #[arg(long)]
    family: Option<String>,
    /// Truncation size for families indexed by 1, 2, 3, ...
    #[arg(long)]
    n: Option<usize>,
    /// Relative tolerance for the cycle and scaling checks
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also write the report to this path
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "family"])))]
struct ScanArgs {
    /// Kernel file; the scan is then capped at the file's dimension
    #[arg(long)]
    input: Option<PathBuf>,
    /// Family descriptor: inline JSON or a path to one
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated increasing tail-start thresholds
    #[arg(long, default_value = "1,10,100,1000")]
    schedule: String,
    /// How far past each threshold triples are searched
    #[arg(long, default_value_t = 64)]
    window: usize,
    /// Floor on the normalized residual for a witness
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also write the report to this path
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "n"])))]
struct ConstructArgs {
    /// Potential file (symmetric, strictly positive, diagonally dominated)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generate a random chain potential of this size instead
    #[arg(long)]
    n: Option<usize>,
    /// Off-diagonal dominance margin for the generated potential
    #[arg(long, default_value_t = DEFAULT_DOMINANCE)]
    dominance: f64,
    /// Floor on |F| for blocks the construction must leave nonzero
    #[arg(long, default_value_t = 1e-9)]
    floor: f64,
    /// Seed for potential generation and the perturbation search
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to this path
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "family"])))]
struct SampleArgs {
    /// Kernel file: CSV grid or JSON
    #[arg(long)]
    input: Option<PathBuf>,
    /// Family descriptor: inline JSON or a path to one
    #[arg(long)]
    family: Option<String>,
    /// Truncation size for families indexed by 1, 2, 3, ...
    #[arg(long)]
    n: Option<usize>,
    /// Index alpha as M/N (2M/N must be a positive integer), or a bare integer
    #[arg(long, default_value = "1/2")]
    alpha: String,
    /// Number of sample vectors to draw
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random Laplace-transform probe vectors to audit
    #[arg(long, default_value_t = 5)]
    probes: usize,
    /// Skip sampling; report exact transform values only
    #[arg(long)]
    exact_only: bool,
    /// Write the sample grid as CSV (one row per sample)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the JSON report to this path
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Kernel K: CSV grid or JSON
    #[arg(long)]
    input: PathBuf,
    /// Claimed symmetric equivalent Q
    #[arg(long)]
    second: PathBuf,
    /// Relative tolerance for the necessary conditions
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Trials for the randomized determinant-identity test
    #[arg(long, default_value_t = 256)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to this path
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LimitArgs {
    /// Decay rate of the built-in kernel e^(-lambda |x-y|) on points 1/k
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// How many sequence points 1/k to generate
    #[arg(long, default_value_t = 80)]
    points_count: usize,
    /// Candidate tail starts 1..=n0-max are each tested
    #[arg(long, default_value_t = 50)]
    n0_max: usize,
    /// Points sampled past each candidate start
    #[arg(long, default_value_t = 16)]
    window: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Also write the report to this path
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        // Usage mistakes are errors (1), not "don't know" (2).
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Check(a) => run_check(a),
        Cmd::Scan(a) => run_scan(a),
        Cmd::Construct(a) => run_construct(a),
        Cmd::Sample(a) => run_sample(a),
        Cmd::Verify(a) => run_verify(a),
        Cmd::Limitpoint(a) => run_limitpoint(a),
    }
}

fn run_check(a: CheckArgs) -> Result<u8> {
    let (k, source) = load_kernel(a.input.as_deref(), a.family.as_deref(), a.n)?;
    let verdict = symmetrizable(&k, a.tol);
    let code = match verdict {
        SymmetrizabilityVerdict::Indeterminate { .. } => 2,
        _ => 0,
    };
    let report = json!({
        "command": "check",
        "source": source,
        "n": k.n(),
        "tol": a.tol,
        "result": to_json(&verdict),
    });
    emit(&report, a.output.as_deref())?;
    Ok(code)
}

fn run_scan(a: ScanArgs) -> Result<u8> {
    let (src, source, caveat) = scan_source(a.input.as_deref(), a.family.as_deref())?;
    let cfg = ScanConfig {
        schedule: parse_schedule(&a.schedule)?,
        window: a.window,
        tol: a.tol,
    };
    let verdict = asymptotic_scan(&src, &cfg)?;
    let code = match verdict {
        AsymptoticVerdict::Inconclusive { .. } => 2,
        _ => 0,
    };
    let report = json!({
        "command": "scan",
        "source": source,
        "schedule": cfg.schedule,
        "window": cfg.window,
        "tol": cfg.tol,
        "caveat": caveat,
        "result": to_json(&verdict),
    });
    emit(&report, a.output.as_deref())?;
    Ok(code)
}

fn run_construct(a: ConstructArgs) -> Result<u8> {
    let (u, source) = match (&a.input, a.n) {
        (Some(p), _) => (Kernel::read_path(p)?, path_source(p)),
        (None, Some(n)) => (
            random_potential(n, a.seed, a.dominance)?.into_kernel(),
            json!({"random_potential": {"n": n, "seed": a.seed, "dominance": a.dominance}}),
        ),
        (None, None) => unreachable!("clap group requires a source"),
    };
    let hstar = vec![1.0; u.n()];
    let built = construct_h(&u, &hstar, a.floor, a.seed)?;
    let report = json!({
        "command": "construct",
        "source": source,
        "floor": a.floor,
        "seed": a.seed,
        "result": to_json(&built),
    });
    emit(&report, a.output.as_deref())?;
    Ok(0)
}

fn run_sample(a: SampleArgs) -> Result<u8> {
    let (k, source) = load_kernel(a.input.as_deref(), a.family.as_deref(), a.n)?;
    let (m, n2) = parse_alpha(&a.alpha)?;
    let spec = PermanentalSpec::new(k.clone(), m, n2)?;
    let count = if a.exact_only { 0 } else { a.count };
    let s_points = random_probes(&k, a.probes, a.seed);
    let lt = lt_report(&spec, &s_points, count, a.seed)?;

    let mut report = json!({
        "command": "sample",
        "source": source,
        "alpha": {"num": m, "den": n2, "value": spec.alpha()},
        "count": count,
        "seed": a.seed,
        "flagged": lt.any_flagged(),
        "lt": to_json(&lt),
    });
    if count > 0 {
        let grid = sample_rational(&k, m, n2, count, a.seed)?;
        let stats = grid.marginal_stats();
        report["marginals"] = json!({
            "mean": stats.iter().map(|s| s.0).collect::<Vec<_>>(),
            "std_err": stats.iter().map(|s| s.1).collect::<Vec<_>>(),
            "expected": (1..=k.n()).map(|i| spec.alpha() * k.entry(i, i)).collect::<Vec<_>>(),
        });
        if let Some(p) = &a.output {
            std::fs::write(p, grid.to_csv_string())?;
        }
    }
    emit(&report, a.report.as_deref())?;
    Ok(0)
}

fn run_verify(a: VerifyArgs) -> Result<u8> {
    let k = Kernel::read_path(&a.input)?;
    let q = Kernel::read_path(&a.second)?;
    let necessary = check_necessary(&k, &q, a.tol)?;
    let pit = pit_equivalence(&k, &q, a.trials, a.seed, PIT_TOL)?;
    // The two tests agreeing either way is definitive; a split means the
    // violation sits at tolerance scale, and that is a "don't know".
    let (verdict, code) = match (necessary.all_ok(), pit) {
        (true, true) => ("equivalent", 0),
        (false, false) => ("not_equivalent", 0),
        _ => ("indeterminate", 2),
    };
    let report = json!({
        "command": "verify",
        "input": a.input.display().to_string(),
        "second": a.second.display().to_string(),
        "tol": a.tol,
        "trials": a.trials,
        "seed": a.seed,
        "verdict": verdict,
        "necessary": to_json(&necessary),
        "pit_equal": pit,
    });
    emit(&report, a.output.as_deref())?;
    Ok(code)
}

fn run_limitpoint(a: LimitArgs) -> Result<u8> {
    if !a.lambda.is_finite() || a.lambda <= 0.0 {
        return Err(Error::InvalidDecayRate);
    }
    let points: Vec<f64> = (1..=a.points_count).map(|j| 1.0 / j as f64).collect();
    let u = |x: f64, y: f64| (-a.lambda * (x - y).abs()).exp();
    let cfg = LimitPointConfig {
        n0_max: a.n0_max,
        window: a.window,
        tol: a.tol,
    };
    let rep = limit_point_check(&points, 0.0, &u, &cfg)?;
    let code = if rep.all_fail { 0 } else { 2 };
    let report = json!({
        "command": "limitpoint",
        "lambda": a.lambda,
        "points_count": a.points_count,
        "n0_max": a.n0_max,
        "window": a.window,
        "tol": a.tol,
        "result": to_json(&rep),
    });
    emit(&report, a.output.as_deref())?;
    Ok(code)
}

/// Kernel plus a JSON echo of where it came from.
fn load_kernel(
    input: Option<&Path>,
    family: Option<&str>,
    n: Option<usize>,
) -> Result<(Kernel, Value)> {
    match (input, family) {
        (Some(p), _) => Ok((Kernel::read_path(p)?, path_source(p))),
        (None, Some(raw)) => {
            let fd = family_descriptor(raw)?;
            let k = fd.materialize(n)?;
            Ok((k, to_json(&fd)))
        }
        (None, None) => unreachable!("clap group requires a source"),
    }
}

fn scan_source(
    input: Option<&Path>,
    family: Option<&str>,
) -> Result<(ScanSource, Value, Option<String>)> {
    match (input, family) {
        (Some(p), _) => Ok((
            ScanSource::Kernel(Kernel::read_path(p)?),
            path_source(p),
            None,
        )),
        (None, Some(raw)) => {
            let fd = family_descriptor(raw)?;
            let src = fd.scan_source()?;
            let caveat = fd.caveat();
            Ok((src, to_json(&fd), caveat))
        }
        (None, None) => unreachable!("clap group requires a source"),
    }
}

fn family_descriptor(raw: &str) -> Result<FamilyDescriptor> {
    let text = if raw.trim_start().starts_with('{') {
        raw.to_string()
    } else {
        std::fs::read_to_string(raw)?
    };
    FamilyDescriptor::from_json_str(&text)
}

fn path_source(p: &Path) -> Value {
    json!({"input": p.display().to_string()})
}

fn parse_schedule(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("schedule entry {part:?}: {e}")))
        })
        .collect()
}

fn parse_alpha(s: &str) -> Result<(u32, u32)> {
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let m = num
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("alpha numerator {num:?}: {e}")))?;
    let n2 = den
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("alpha denominator {den:?}: {e}")))?;
    Ok((m, n2))
}

/// Probe vectors kept small enough that I + K diag(s) stays strictly
/// diagonally dominant, so the transform is defined for any probe drawn here.
fn random_probes(k: &Kernel, probes: usize, seed: u64) -> Vec<Vec<f64>> {
    let cap = 0.9 / (k.n() as f64 * k.scale().max(f64::MIN_POSITIVE));
    // Stream 0; the sampler's substreams start at 1, so probes never reuse one.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..probes)
        .map(|_| (0..k.n()).map(|_| rng.random_range(0.0..cap)).collect())
        .collect()
}

fn to_json<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize cleanly")
}

fn emit(report: &Value, output: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report types serialize cleanly");
    text.push('\n');
    print!("{text}");
    if let Some(p) = output {
        std::fs::write(p, &text)?;
    }
    Ok(())
}
