use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rbt_core::bit_metrics::{BitMetric, BitStatistics};
use rbt_core::{LshIndex, LshParams, LshVariant, RbtForest, RbtParams};

use crate::bench::{run_benchmark, BenchConfig, BenchError};
use crate::config::SweepConfig;
use crate::datagen::{self, PerPoint, SynthParams};
use crate::method::{BitBias, Method};
use crate::report;

/// Exit status 1.
pub const EXIT_RUNTIME: i32 = 1;
/// Exit status 2, also what clap uses for bad flags.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn bench_error(e: BenchError) -> CliError {
    match e {
        BenchError::Config(_) => CliError::Usage(e.to_string()),
        BenchError::Index(
            rbt_core::Error::InvalidParams(_) | rbt_core::Error::InvalidWeights(_),
        ) => CliError::Usage(e.to_string()),
        _ => runtime(e),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rbt",
    version,
    about = "Random binary tree forests and LSH baselines for binary descriptors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset as a BDSC file.
    Gen(GenArgs),
    /// Benchmark one index configuration.
    Bench(BenchArgs),
    /// Benchmark every configuration of a parameter grid.
    Sweep(SweepArgs),
    /// Dump per-bit entropy, conditional entropy and stability as CSV.
    Metrics(MetricsArgs),
    /// Build an index over a dataset and write its snapshot.
    Build(BuildArgs),
}

/// Descriptors per point: `N` or an inclusive range `MIN..MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerPointArg(pub PerPoint);

impl FromStr for PerPointArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        match s.split_once("..") {
            None => Ok(Self(PerPoint::Fixed(parse(s)?))),
            Some((lo, hi)) => {
                let (min, max) = (parse(lo)?, parse(hi.trim_start_matches('='))?);
                if min > max {
                    return Err(format!("empty range {s}"));
                }
                Ok(Self(PerPoint::Range { min, max }))
            }
        }
    }
}

/// A query count or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueriesArg(pub Option<usize>);

impl FromStr for QueriesArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            Ok(Self(None))
        } else {
            s.parse()
                .map(|n| Self(Some(n)))
                .map_err(|e| format!("{s:?}: {e}"))
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value = "10")]
    pub per_point: PerPointArg,
    #[arg(long, default_value_t = rbt_core::DEFAULT_DIM)]
    pub dim: usize,
    /// Per-bit flip probability around each point's center.
    #[arg(long, default_value_t = 0.05)]
    pub flip: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Rbt,
    Lsh,
    UniformLsh,
    MultiprobeLsh,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricName {
    Entropy,
    CondEntropy,
    Stability,
}

impl From<MetricName> for BitMetric {
    fn from(m: MetricName) -> Self {
        match m {
            MetricName::Entropy => Self::Entropy,
            MetricName::CondEntropy => Self::ConditionalEntropy,
            MetricName::Stability => Self::Stability,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value = "rbt")]
    pub method: MethodName,
    /// Trees in the forest.
    #[arg(long, default_value_t = 6)]
    pub trees: usize,
    /// Depth of every leaf.
    #[arg(long, default_value_t = 40)]
    pub depth: usize,
    /// Bits each tree may test.
    #[arg(long, default_value_t = 256)]
    pub bits: usize,
    /// Bias node bit selection by a per-bit metric.
    #[arg(long, value_enum)]
    pub bit_metric: Option<MetricName>,
    #[arg(long, default_value_t = 1.0, requires = "bit_metric")]
    pub sharpening: f64,
    /// Hash tables (LSH methods).
    #[arg(long, default_value_t = 4)]
    pub tables: usize,
    /// Key length; defaults to 56, or 28 for multi-probe.
    #[arg(long)]
    pub hash_length: Option<usize>,
    /// Single-bit probes per table (multi-probe); defaults to the key length.
    #[arg(long)]
    pub probes: Option<usize>,
}

impl MethodArgs {
    pub fn to_method(&self) -> Result<Method, CliError> {
        let lsh = |variant: LshVariant| {
            let hash_length = self.hash_length.unwrap_or(variant.default_hash_length());
            let probes = match variant {
                LshVariant::MultiProbe => self.probes.unwrap_or(hash_length),
                _ if self.probes.is_some() => {
                    return Err(CliError::Usage(
                        "--probes only applies to multiprobe-lsh".into(),
                    ))
                }
                _ => 0,
            };
            Ok(Method::Lsh(LshParams {
                num_tables: self.tables,
                hash_length,
                variant,
                probes,
                rng_seed: 0,
            }))
        };
        match self.method {
            MethodName::Rbt => Ok(Method::Rbt {
                params: RbtParams::new(self.trees, self.depth, self.bits),
                bias: self.bit_metric.map(|m| BitBias {
                    metric: m.into(),
                    sharpening: self.sharpening,
                }),
            }),
            MethodName::Lsh => lsh(LshVariant::Classic),
            MethodName::UniformLsh => lsh(LshVariant::Uniform),
            MethodName::MultiprobeLsh => lsh(LshVariant::MultiProbe),
            MethodName::Oracle => Ok(Method::Oracle),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(short = 'i', long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Neighbours retrieved per query.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Descriptors indexed per run (default: the whole dataset).
    #[arg(long)]
    pub subset: Option<usize>,
    /// Queries per run, or `all`.
    #[arg(long, default_value = "1000")]
    pub queries: QueriesArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add a matches_oracle column comparing every result with the exact top-n.
    #[arg(long)]
    pub compare_oracle: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    #[arg(short = 'i', long)]
    pub dataset: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub queries: Option<QueriesArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(short = 'i', long)]
    pub dataset: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(short = 'i', long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<rbt_core::LabeledDataset, CliError> {
    datagen::load_descriptors(path, None).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Build(a) => cmd_build(&a),
    }
}

pub fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let params = SynthParams {
        num_points: a.points,
        per_point: a.per_point.0,
        dim: a.dim,
        flip_prob: a.flip,
        rng_seed: a.seed,
    };
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = datagen::generate(&params).map_err(runtime)?;
    datagen::save_descriptors(&ds, &a.output)
        .map_err(|e| runtime(format!("{}: {e}", a.output.display())))
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let method = a.method.to_method()?;
    let config = BenchConfig {
        subset: a.subset,
        queries: a.queries.0,
        runs: a.runs,
        n: a.n,
        seed: a.seed,
        compare_oracle: a.compare_oracle,
    };
    if config.runs == 0 || config.n == 0 {
        return Err(CliError::Usage("--runs and --n must be at least 1".into()));
    }
    let ds = load(&a.dataset)?;
    method
        .validate(ds.dim())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_benchmark(&ds, &method, &config).map_err(bench_error)?;
    let out = open_output(a.output.as_deref())?;
    match a.format {
        Format::Csv => report::write_csv(&report, a.compare_oracle, out),
        Format::Json => report::write_json(&report, out),
    }
    .map_err(runtime)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    let mut cfg = SweepConfig::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(d) = &a.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(o) = &a.output {
        cfg.output = Some(o.clone());
    }
    let b = &mut cfg.bench;
    b.runs = a.runs.unwrap_or(b.runs);
    b.subset = a.subset.or(b.subset);
    b.queries = a.queries.map_or(b.queries, |q| q.0);
    b.n = a.n.unwrap_or(b.n);
    b.seed = a.seed.unwrap_or(b.seed);
    if b.runs == 0 || b.n == 0 {
        return Err(CliError::Usage("runs and n must be at least 1".into()));
    }
    let path = cfg
        .dataset
        .clone()
        .ok_or_else(|| CliError::Usage("no dataset given (config or --dataset)".into()))?;
    let ds = load(&path)?;
    for m in &cfg.methods {
        m.validate(ds.dim())
            .map_err(|e| CliError::Usage(format!("{m}: {e}")))?;
    }
    let mut out = open_output(cfg.output.as_deref())?;
    writeln!(out, "{}", report::csv_header(cfg.bench.n, false)).map_err(runtime)?;
    out.flush().map_err(runtime)?;
    for m in &cfg.methods {
        let report = run_benchmark(&ds, m, &cfg.bench).map_err(bench_error)?;
        writeln!(out, "{}", report::aggregate_row(&report, false)).map_err(runtime)?;
        out.flush().map_err(runtime)?;
    }
    Ok(())
}

pub fn cmd_metrics(a: &MetricsArgs) -> Result<(), CliError> {
    let ds = load(&a.dataset)?;
    let stats = BitStatistics::compute(&ds).map_err(runtime)?;
    let mut out = open_output(a.output.as_deref())?;
    write_metrics_csv(&stats, &mut out).map_err(runtime)
}

pub fn write_metrics_csv<W: Write>(stats: &BitStatistics, mut out: W) -> io::Result<()> {
    writeln!(out, "bit_pos,entropy,cond_entropy,stability")?;
    for j in 0..stats.dim() {
        writeln!(
            out,
            "{j},{:.12},{:.12},{:.12}",
            stats.entropy[j], stats.cond_entropy[j], stats.stability[j]
        )?;
    }
    out.flush()
}

pub fn cmd_build(a: &BuildArgs) -> Result<(), CliError> {
    let method = a.method.to_method()?;
    let ds = load(&a.dataset)?;
    method
        .validate(ds.dim())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let bytes = match &method {
        Method::Oracle => return Err(CliError::Usage("the oracle has no index to build".into())),
        Method::Rbt { params, bias } => {
            let weights = match bias {
                None => None,
                Some(b) => Some(
                    b.metric
                        .weights(&BitStatistics::compute(&ds).map_err(runtime)?, b.sharpening)
                        .map_err(|e| CliError::Usage(e.to_string()))?,
                ),
            };
            let params = RbtParams {
                rng_seed: a.seed,
                ..*params
            };
            RbtForest::build(&ds, params, weights.as_deref())
                .map_err(runtime)?
                .to_snapshot()
        }
        Method::Lsh(p) => LshIndex::build(
            &ds,
            LshParams {
                rng_seed: a.seed,
                ..*p
            },
        )
        .map_err(runtime)?
        .to_snapshot(),
    };
    std::fs::write(&a.output, bytes).map_err(|e| runtime(format!("{}: {e}", a.output.display())))
}
