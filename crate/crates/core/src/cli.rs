//! Command-line front end. [`run_command`] parses `argv`, runs one
//! factorization or utility, and returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::cx::{cx, DEFAULT_POWER_ITERS, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::io::{read_csv, read_matrix, read_matrix_partitioned, write_csv, write_matrix};
use crate::kernels::multiply_gramian;
use crate::linalg::DenseMatrix;
use crate::nmf::nmf;
use crate::pca::{pca, PcaOptions};
use crate::report::{emit_report, predict_scheduler_delay, ReportFormat, RunReport};
use crate::rng::{gaussian_matrix, mix};
use crate::runtime::{write_task_csv, write_task_jsonl, DelayInjection, DistMatrix, ExecContext, RunConfig, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "tsfact", version, about = "Tall-and-skinny matrix factorizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank-k PCA (columns centered by default)
    Pca(SpectralArgs),
    /// Rank-k truncated SVD (no centering by default)
    Svd(SpectralArgs),
    /// Separable NMF by TSQR and extreme-column selection
    Nmf(NmfArgs),
    /// CX decomposition by leverage-score column sampling
    Cx(CxArgs),
    /// Repeated Gramian passes with optional injected delays
    Bench(BenchArgs),
    /// Convert between CSV and TSMA
    Convert(ConvertArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 8, value_parser = positive)]
    partitions: u64,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    executors: u64,
    /// Task slots per executor
    #[arg(long, default_value_t = 4, value_parser = positive)]
    slots: u64,
    #[arg(long, default_value_t = 2, value_parser = fanout)]
    tree_fanout: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory for factor files and task metrics
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Report path; defaults to `report.<format>` in the output directory
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Report and task-metrics format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Field delimiter for CSV input
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args, Debug)]
struct SpectralArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = positive)]
    k: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 300, value_parser = positive)]
    max_iters: u64,
    /// Subtract column means first [default: true for pca, false for svd]
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    center: Option<bool>,
    /// Run exactly --max-iters eigensolver restarts without a convergence test
    #[arg(long)]
    fixed_iterations: bool,
    /// Lanczos basis size per restart
    #[arg(long)]
    basis_size: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct NmfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = positive)]
    k: u64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct CxArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = positive)]
    k: u64,
    #[arg(long, default_value_t = DEFAULT_SLACK as u64)]
    slack: u64,
    #[arg(long, default_value_t = DEFAULT_POWER_ITERS as u64, value_parser = positive)]
    power_iters: u64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Input matrix; a seeded Gaussian matrix of --rows x --cols otherwise
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 20000)]
    rows: usize,
    #[arg(long, default_value_t = 32)]
    cols: usize,
    /// Number of Gramian passes (one stage each)
    #[arg(long, default_value_t = 10, value_parser = positive)]
    iterations: u64,
    /// Extra compute time of a straggling task, in milliseconds
    #[arg(long, value_name = "MS")]
    inject_straggler: Option<f64>,
    /// Probability that a task straggles
    #[arg(long, default_value_t = 0.1)]
    straggler_probability: f64,
    /// Partition that straggles in every stage (repeatable)
    #[arg(long = "straggler-partition", value_name = "ID")]
    straggler_partitions: Vec<usize>,
    /// Latency between dispatch and executor receipt, in milliseconds
    #[arg(long, value_name = "MS")]
    inject_dispatch_latency: Option<f64>,
    /// Cap on the driver's serial dispatch rate
    #[arg(long)]
    tasks_per_second: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

fn positive(s: &str) -> std::result::Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn fanout(s: &str) -> std::result::Result<u64, String> {
    match s.parse::<u64>() {
        Ok(v) if v < 2 => Err("must be at least 2".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Pca(a) => run_spectral("pca", a, true),
        Command::Svd(a) => run_spectral("svd", a, false),
        Command::Nmf(a) => run_nmf(a),
        Command::Cx(a) => run_cx(a),
        Command::Bench(a) => run_bench(a),
        Command::Convert(a) => run_convert(a),
    }
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::Config(format!("delimiter must be a single ASCII character, got {c:?}")))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("txt"))
}

fn config_of(run: &RunArgs) -> Result<RunConfig> {
    let to_usize = |v: u64, name: &str| {
        usize::try_from(v).map_err(|_| Error::Config(format!("--{name} is too large")))
    };
    let cfg = RunConfig {
        executors: to_usize(run.executors, "executors")?,
        slots_per_executor: to_usize(run.slots, "slots")?,
        partitions: to_usize(run.partitions, "partitions")?,
        tree_fanout: to_usize(run.tree_fanout, "tree-fanout")?,
        seed: run.seed,
        tasks_per_second: None,
        delay_injection: None,
    };
    Ok(cfg)
}

/// Loads `path` as `partitions` row blocks. TSMA files are streamed block
/// by block; CSV is parsed whole and then split.
fn load(path: &Path, partitions: usize, delimiter: char) -> Result<DistMatrix> {
    if is_csv(path) {
        let m = read_csv(path, delimiter_byte(delimiter)?)?;
        DistMatrix::partition(&m, partitions)
    } else {
        read_matrix_partitioned(path, partitions)
    }
}

/// Everything a verb leaves behind besides its factor files.
struct Session {
    ctx: ExecContext,
    run: RunArgs,
    started: Instant,
}

impl Session {
    fn start(run: &RunArgs, config: RunConfig) -> Result<Session> {
        fs::create_dir_all(&run.out_dir).map_err(|e| Error::io(&run.out_dir, e))?;
        Ok(Session {
            ctx: ExecContext::new(config)?,
            run: run.clone(),
            started: Instant::now(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.run.out_dir.join(name)
    }

    fn finish(&self, algo: &str, shape: (usize, usize)) -> Result<RunReport> {
        let wall_ns = self.started.elapsed().as_nanos() as u64;
        let stages = self.ctx.stage_log();
        let report = RunReport::new(algo, shape, self.ctx.config(), &stages, wall_ns);
        let format: ReportFormat = self.run.format.into();
        let (ext, tasks_name) = match format {
            ReportFormat::Json => ("json", "tasks.jsonl"),
            ReportFormat::Csv => ("csv", "tasks.csv"),
        };
        let report_path = self
            .run
            .report_out
            .clone()
            .unwrap_or_else(|| self.path(&format!("report.{ext}")));
        write_bytes(&report_path, &emit_report(&report, format)?)?;

        let tasks_path = self.path(tasks_name);
        let mut buf = Vec::new();
        match format {
            ReportFormat::Json => write_task_jsonl(&stages, &mut buf)?,
            ReportFormat::Csv => write_task_csv(&stages, &mut buf)?,
        }
        write_bytes(&tasks_path, &buf)?;
        Ok(report)
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn run_spectral(algo: &str, args: SpectralArgs, center_default: bool) -> Result<()> {
    let cfg = config_of(&args.run)?;
    let a = load(&args.input, cfg.partitions, args.run.delimiter)?;
    let session = Session::start(&args.run, cfg)?;
    let opts = PcaOptions {
        k: args.k as usize,
        center: args.center.unwrap_or(center_default),
        tol: args.tol,
        max_iters: args.max_iters as usize,
        fixed_iterations: args.fixed_iterations,
        basis_size: args.basis_size,
    };
    let res = pca(&session.ctx, &a, &opts)?;
    let f = &res.factors;
    write_matrix(session.path("U.tsma"), &f.u)?;
    write_matrix(session.path("S.tsma"), &DenseMatrix::column_vector(&f.sigma))?;
    write_matrix(session.path("V.tsma"), &f.v)?;
    write_json(
        &session.path("summary.json"),
        &json!({
            "algo": algo,
            "rows": a.rows(),
            "cols": a.cols(),
            "k": opts.k,
            "centered": res.centered,
            "column_means": res.column_means,
            "sigma": f.sigma,
            "iterations_used": res.iterations_used,
            "matvecs": res.matvecs,
        }),
    )?;
    let mut log = Vec::new();
    for entry in &res.eig_log {
        serde_json::to_writer(&mut log, entry)?;
        log.push(b'\n');
    }
    write_bytes(&session.path("iterations.jsonl"), &log)?;
    session.finish(algo, (a.rows(), a.cols()))?;
    Ok(())
}

fn run_nmf(args: NmfArgs) -> Result<()> {
    let cfg = config_of(&args.run)?;
    let a = load(&args.input, cfg.partitions, args.run.delimiter)?;
    let session = Session::start(&args.run, cfg)?;
    let res = nmf(&session.ctx, &a, args.k as usize)?;
    write_matrix(session.path("W.tsma"), &res.w)?;
    write_matrix(session.path("H.tsma"), &res.h)?;
    write_json(
        &session.path("K.json"),
        &json!({
            "rows": a.rows(),
            "cols": a.cols(),
            "k": res.selected.len(),
            "selected": res.selected,
            "relative_residual": res.relative_residual,
        }),
    )?;
    session.finish("nmf", (a.rows(), a.cols()))?;
    Ok(())
}

fn run_cx(args: CxArgs) -> Result<()> {
    let cfg = config_of(&args.run)?;
    let a = load(&args.input, cfg.partitions, args.run.delimiter)?;
    let session = Session::start(&args.run, cfg)?;
    let res = cx(
        &session.ctx,
        &a,
        args.k as usize,
        args.slack as usize,
        args.power_iters as usize,
        args.run.seed,
    )?;
    write_matrix(session.path("C.tsma"), &res.c)?;
    write_matrix(session.path("X.tsma"), &res.x)?;
    write_json(
        &session.path("cx.json"),
        &json!({
            "rows": a.rows(),
            "cols": a.cols(),
            "k": args.k,
            "slack": args.slack,
            "power_iters": args.power_iters,
            "seed": res.seed,
            "indices": res.indices,
            "leverage": res.leverage,
            "probabilities": res.probabilities,
        }),
    )?;
    session.finish("cx", (a.rows(), a.cols()))?;
    Ok(())
}

fn ms_to_ns(ms: f64, flag: &str) -> Result<u64> {
    if !(ms >= 0.0) || !ms.is_finite() {
        return Err(Error::Config(format!("--{flag} must be a nonnegative number of milliseconds")));
    }
    Ok((ms * 1e6).round() as u64)
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let mut cfg = config_of(&args.run)?;
    cfg.tasks_per_second = args.tasks_per_second;
    if args.inject_straggler.is_some() || args.inject_dispatch_latency.is_some() {
        cfg.delay_injection = Some(DelayInjection {
            dispatch_latency_ns: ms_to_ns(args.inject_dispatch_latency.unwrap_or(0.0), "inject-dispatch-latency")?,
            straggler_probability: if args.inject_straggler.is_some() {
                args.straggler_probability
            } else {
                0.0
            },
            straggler_ns: ms_to_ns(args.inject_straggler.unwrap_or(0.0), "inject-straggler")?,
            forced_stragglers: if args.inject_straggler.is_some() {
                args.straggler_partitions.clone()
            } else {
                Vec::new()
            },
        });
    }
    let a = match &args.input {
        Some(p) => load(p, cfg.partitions, args.run.delimiter)?,
        None => {
            let m = gaussian_matrix(args.rows, args.cols, mix(cfg.seed), 0);
            DistMatrix::partition(&m, cfg.partitions)?
        }
    };
    let partitions = cfg.partitions;
    let rate = cfg.tasks_per_second;
    let session = Session::start(&args.run, cfg)?;
    let mut b = DenseMatrix::identity(a.cols()).leading_columns(1.min(a.cols()))?;
    for _ in 0..args.iterations {
        let g = multiply_gramian(&session.ctx, &a, &b)?;
        let norm = g.frobenius_norm();
        b = if norm > 0.0 { g.scale(1.0 / norm) } else { g };
    }
    let report = session.finish("bench", (a.rows(), a.cols()))?;
    let stages = session.ctx.stage_log();
    let launch_ns: u64 = stages.iter().map(|s| s.max_task_start_delay()).sum();
    let predicted = match rate {
        Some(r) => Some(predict_scheduler_delay(partitions as u64, args.iterations, r)?),
        None => None,
    };
    write_json(
        &session.path("bench.json"),
        &json!({
            "partitions": partitions,
            "iterations": args.iterations,
            "tasks_per_second": rate,
            "predicted_scheduler_delay_s": predicted,
            "measured_launch_delay_s": launch_ns as f64 * 1e-9,
            "summed_bins_ns": report.summed_bins,
            "wall_ns": report.wall_ns,
        }),
    )?;
    Ok(())
}

fn run_convert(args: ConvertArgs) -> Result<()> {
    let delim = delimiter_byte(args.delimiter)?;
    let m = if is_csv(&args.input) {
        read_csv(&args.input, delim)?
    } else {
        read_matrix(&args.input)?
    };
    if is_csv(&args.output) {
        write_csv(&args.output, &m, delim)
    } else {
        write_matrix(&args.output, &m)
    }
}
