//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for usage and input errors, 2 when a
//! verification fails or nothing is feasible.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::blockmat::{Matrix, PartitionScheme};
use crate::ffield::PrimeModulus;
use crate::optimizer::{
    tradeoff_curve, write_tradeoff_csv, Budget, LatencyCache, SimTemplate, TradeoffTemplate,
};
use crate::overheads::{compute_overheads, to_f64, OverheadReport, Rational};
use crate::runtime::{run_job, Assignment, DelayModel, JobSpec};
use crate::schemes::{Scheme, SchemeKind};
use crate::straggler::{estimate_mean_latency, SimConfig, StragglerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "polycodes",
    version,
    about = "Polynomial codes for distributed matrix multiplication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recovery threshold, upload counts and overheads for a partition.
    Overheads {
        /// epc, bi0, bi2, tri or all
        #[arg(long)]
        scheme: String,
        #[command(flatten)]
        partition: PartitionArgs,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Coded multiplication of two matrix files.
    Multiply {
        #[arg(long)]
        scheme: SchemeKind,
        #[command(flatten)]
        partition: PartitionArgs,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Expected field modulus; must match both files.
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Recompute the product directly and require exact equality.
        #[arg(long)]
        verify: bool,
    },
    /// Monte Carlo mean latency for one partition.
    Simulate {
        #[arg(long)]
        scheme: SchemeKind,
        #[command(flatten)]
        partition: PartitionArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Best partition per scheme and overhead budget, as CSV.
    Tradeoff {
        /// Comma-separated scheme names.
        #[arg(long, value_delimiter = ',', required = true)]
        schemes: Vec<SchemeKind>,
        /// Comma-separated budgets, applied to all three overheads.
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<Budget>,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long = "p0-cap")]
        p0_cap: usize,
        #[arg(long = "p2-cap")]
        p2_cap: usize,
        /// Only needed for an unbounded budget.
        #[arg(long = "p1-cap")]
        p1_cap: Option<usize>,
        /// Restrict every search to p1 = 1.
        #[arg(long = "force-p1-1")]
        force_p1_one: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a coded multiplication on local worker threads.
    Run {
        #[arg(long)]
        scheme: SchemeKind,
        #[command(flatten)]
        partition: PartitionArgs,
        #[arg(long)]
        workers: usize,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Shift of the injected full-task delay, in milliseconds.
        #[arg(long = "inject-t0", default_value_t = 0.0)]
        inject_t0: f64,
        /// Mean of the exponential part of the injected delay, in milliseconds.
        #[arg(long = "inject-lambda-inv", default_value_t = 0.0)]
        inject_lambda_inv: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[arg(long)]
    p0: usize,
    #[arg(long)]
    p1: usize,
    #[arg(long)]
    p2: usize,
}

impl PartitionArgs {
    fn scheme(&self) -> Result<PartitionScheme, Failure> {
        PartitionScheme::new(self.p0, self.p1, self.p2).map_err(|e| Failure::usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    workers: usize,
    /// Mean 1/lambda of the exponential part of the full task.
    #[arg(long = "lambda-inv")]
    lambda_inv: f64,
    #[arg(long)]
    t0: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl clap::builder::ValueParserFactory for SchemeKind {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| {
            s.parse::<SchemeKind>().map_err(|e| e.to_string())
        })
    }
}

impl clap::builder::ValueParserFactory for Budget {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Budget>().map_err(|e| e.to_string()))
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn check(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::usage(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Overheads {
            scheme,
            partition,
            format,
        } => {
            let p = partition.scheme()?;
            let kinds = if scheme.eq_ignore_ascii_case("all") {
                SchemeKind::ALL.to_vec()
            } else {
                vec![scheme.parse::<SchemeKind>()?]
            };
            let reports: Vec<OverheadReport> =
                kinds.iter().map(|&k| compute_overheads(k, p)).collect();
            render_overheads(&reports, format, out)?;
        }
        Command::Multiply {
            scheme,
            partition,
            a,
            b,
            q,
            out: out_path,
            verify,
        } => {
            let p = partition.scheme()?;
            let (m0, m1) = load_pair(&a, &b, q)?;
            let product = Scheme::new(scheme, p).multiply(&m0, &m1)?;
            if verify {
                let direct = m0.multiply(&m1)?;
                if direct != product {
                    return Err(Failure::check(
                        "decoded product differs from the direct product",
                    ));
                }
            }
            write_matrix(&product, out_path.as_deref(), out)?;
        }
        Command::Simulate {
            scheme,
            partition,
            sim,
            format,
        } => {
            let p = partition.scheme()?;
            let cfg = SimConfig {
                workers: sim.workers,
                recovery_threshold: scheme.recovery_threshold(p),
                model: StragglerModel::with_mean_exponential(
                    sim.t0,
                    sim.lambda_inv,
                    p.level() as u64,
                )?,
                trials: sim.trials,
                seed: sim.seed,
            };
            let est = estimate_mean_latency(&cfg)?;
            let row = SimulationRow {
                scheme,
                p0: p.p0,
                p1: p.p1,
                p2: p.p2,
                level: p.level(),
                recovery_threshold: cfg.recovery_threshold,
                workers: cfg.workers,
                mean_latency: est.mean,
                stderr: est.stderr,
                trials: est.trials,
            };
            match format {
                OutputFormat::Table => writeln!(
                    out,
                    "{scheme} {p}: K={} R_th={} N={} mean latency {} ± {} ({} trials)",
                    row.level,
                    row.recovery_threshold,
                    row.workers,
                    est.mean,
                    est.stderr,
                    est.trials
                )?,
                OutputFormat::Csv => {
                    writeln!(
                        out,
                        "scheme,p0,p1,p2,K,R_th,workers,mean_latency,stderr,trials"
                    )?;
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{:?},{:?},{}",
                        scheme,
                        p.p0,
                        p.p1,
                        p.p2,
                        row.level,
                        row.recovery_threshold,
                        row.workers,
                        est.mean,
                        est.stderr,
                        est.trials
                    )?;
                }
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut *out, &row)?;
                    writeln!(out)?;
                }
            }
        }
        Command::Tradeoff {
            schemes,
            budgets,
            sim,
            p0_cap,
            p2_cap,
            p1_cap,
            force_p1_one,
            out: out_path,
        } => {
            if !(sim.lambda_inv.is_finite() && sim.lambda_inv > 0.0) {
                return Err(Failure::usage("--lambda-inv must be positive"));
            }
            let template = TradeoffTemplate {
                p0_cap,
                p2_cap,
                p1_cap,
                sim: SimTemplate {
                    workers: sim.workers,
                    t0: sim.t0,
                    lambda: 1.0 / sim.lambda_inv,
                    trials: sim.trials,
                    seed: sim.seed,
                },
            };
            let cache = LatencyCache::new();
            let rows = tradeoff_curve(&schemes, &budgets, &template, force_p1_one, &cache)?;
            match out_path {
                Some(path) => write_tradeoff_csv(&rows, BufWriter::new(File::create(path)?))?,
                None => write_tradeoff_csv(&rows, &mut *out)?,
            }
            if rows.iter().all(|r| r.result.is_none()) {
                return Err(Failure::check("no scheme is feasible at any budget"));
            }
        }
        Command::Run {
            scheme,
            partition,
            workers,
            a,
            b,
            inject_t0,
            inject_lambda_inv,
            seed,
            trace,
            out: out_path,
        } => {
            let p = partition.scheme()?;
            let (m0, m1) = load_pair(&a, &b, None)?;
            let mut spec = JobSpec::new(scheme, p, m0, m1);
            spec.workers = workers;
            spec.seed = seed;
            spec.assignment = Assignment::Dynamic;
            spec.delay = DelayModel {
                t0_ms: inject_t0,
                lambda_inv_ms: inject_lambda_inv,
                slowdown: Vec::new(),
            };
            let (product, job_trace) = run_job(&spec)?;
            if let Some(path) = trace {
                job_trace.write_csv(BufWriter::new(File::create(path)?))?;
            }
            let direct = spec.m0.multiply(&spec.m1)?;
            writeln!(
                out,
                "{scheme} {p}: {} tasks on {workers} workers in {:.3} ms; encoded {} + {} shares; per-worker {:?}",
                job_trace.records.len(),
                job_trace.wall_ms,
                job_trace.encoded.0,
                job_trace.encoded.1,
                job_trace.per_worker
            )?;
            if let Some(path) = out_path {
                write_matrix(&product, Some(&path), out)?;
            }
            if direct != product {
                return Err(Failure::check(
                    "decoded product differs from the direct product",
                ));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationRow {
    scheme: SchemeKind,
    p0: usize,
    p1: usize,
    p2: usize,
    #[serde(rename = "K")]
    level: usize,
    #[serde(rename = "R_th")]
    recovery_threshold: usize,
    workers: usize,
    mean_latency: f64,
    stderr: f64,
    trials: usize,
}

fn load_matrix(path: &Path) -> Result<Matrix, Failure> {
    let file = File::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Matrix::read_from(BufReader::new(file))
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_pair(a: &Path, b: &Path, q: Option<u64>) -> Result<(Matrix, Matrix), Failure> {
    let (m0, m1) = (load_matrix(a)?, load_matrix(b)?);
    if m0.modulus() != m1.modulus() {
        return Err(Failure::usage(format!(
            "matrices live in different fields (q = {} vs q = {})",
            m0.modulus(),
            m1.modulus()
        )));
    }
    if let Some(q) = q {
        let q = PrimeModulus::new(q)?;
        if q != m0.modulus() {
            return Err(Failure::usage(format!(
                "--q {q} does not match the matrix files (q = {})",
                m0.modulus()
            )));
        }
    }
    Ok((m0, m1))
}

fn write_matrix(m: &Matrix, path: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            m.write_to(&mut w)?;
            w.flush()?;
        }
        None => m.write_to(out)?,
    }
    Ok(())
}

fn fraction(r: Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub const OVERHEADS_CSV_HEADER: &str =
    "scheme,p0,p1,p2,K,R_th,R0,R1,delta,delta_u0,delta_u1,delta_d";

fn render_overheads(
    reports: &[OverheadReport],
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{OVERHEADS_CSV_HEADER}")?;
            for r in reports {
                let p = r.partition;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{:?},{:?},{:?},{:?}",
                    r.scheme,
                    p.p0,
                    p.p1,
                    p.p2,
                    p.level(),
                    r.recovery_threshold,
                    r.uploads_left,
                    r.uploads_right,
                    to_f64(r.delta),
                    to_f64(r.delta_u0),
                    to_f64(r.delta_u1),
                    to_f64(r.delta_d)
                )?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, reports)?;
            writeln!(out)?;
        }
        OutputFormat::Table => {
            writeln!(
                out,
                "{:<6} {:<10} {:>6} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10}",
                "scheme",
                "(p0,p1,p2)",
                "R_th",
                "R0",
                "R1",
                "delta",
                "delta_u0",
                "delta_u1",
                "delta_d"
            )?;
            for r in reports {
                writeln!(
                    out,
                    "{:<6} {:<10} {:>6} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10}",
                    r.scheme.to_string(),
                    r.partition.to_string(),
                    r.recovery_threshold,
                    r.uploads_left,
                    r.uploads_right,
                    fraction(r.delta),
                    fraction(r.delta_u0),
                    fraction(r.delta_u1),
                    fraction(r.delta_d)
                )?;
            }
        }
    }
    Ok(())
}
