//! Sweep configuration files (TOML).
//!
//! ```toml
//! dataset = "data.bdsc"
//! output = "sweep.csv"
//! subset = 10000          # descriptors per run; default: whole dataset
//! queries = 1000          # or "all"
//! runs = 10
//! n = 10
//! seed = 1
//! methods = ["rbt", "lsh"]  # default: every method section present
//!
//! [rbt]
//! trees = [1, 3, 6, 9, 12]
//! depth = [20, 30, 40, 50]
//! bits = [64, 128, 256, 512]
//!
//! [lsh]
//! tables = [1, 2, 4, 8, 16]
//! hash_length = [56]
//! ```
//!
//! Method sections are `rbt`, `lsh`, `uniform-lsh`, `multiprobe-lsh` and
//! `oracle`. A grid key left out takes its default; an empty grid is an error.

use std::path::PathBuf;

use rbt_core::bit_metrics::BitMetric;
use rbt_core::{LshParams, LshVariant, RbtParams};
use serde::Deserialize;

use crate::bench::BenchConfig;
use crate::method::{BitBias, Method};

pub const DEFAULT_TREES: &[usize] = &[1, 3, 6, 9, 12];
pub const DEFAULT_DEPTHS: &[usize] = &[20, 30, 40, 50];
pub const DEFAULT_BITS: &[usize] = &[64, 128, 256, 512];
pub const DEFAULT_TABLES: &[usize] = &[1, 2, 4, 8, 16];

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
enum Queries {
    Count(usize),
    All(AllKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AllKeyword {
    All,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: Option<PathBuf>,
    output: Option<PathBuf>,
    subset: Option<usize>,
    queries: Option<Queries>,
    runs: Option<usize>,
    n: Option<usize>,
    seed: Option<u64>,
    methods: Option<Vec<String>>,
    rbt: Option<RbtGrid>,
    lsh: Option<LshGrid>,
    #[serde(rename = "uniform-lsh")]
    uniform_lsh: Option<LshGrid>,
    #[serde(rename = "multiprobe-lsh")]
    multiprobe_lsh: Option<LshGrid>,
    oracle: Option<OracleSection>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleSection {}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RbtGrid {
    trees: Option<Vec<usize>>,
    depth: Option<Vec<usize>>,
    bits: Option<Vec<usize>>,
    metric: Option<String>,
    sharpening: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LshGrid {
    tables: Option<Vec<usize>>,
    hash_length: Option<Vec<usize>>,
    probes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub bench: BenchConfig,
    pub methods: Vec<Method>,
}

pub fn parse_metric(name: &str) -> Result<BitMetric, ConfigError> {
    match name {
        "entropy" => Ok(BitMetric::Entropy),
        "cond-entropy" => Ok(BitMetric::ConditionalEntropy),
        "stability" => Ok(BitMetric::Stability),
        other => Err(ConfigError(format!(
            "unknown bit metric {other:?} (entropy, cond-entropy, stability)"
        ))),
    }
}

fn grid<'a>(
    name: &str,
    values: &'a Option<Vec<usize>>,
    default: &'a [usize],
) -> Result<&'a [usize], ConfigError> {
    match values {
        Some(v) if v.is_empty() => Err(ConfigError(format!("grid {name} is empty"))),
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("malformed config: {e}")))?;
        let defaults = BenchConfig::default();
        let bench = BenchConfig {
            subset: raw.subset,
            queries: match raw.queries {
                None => defaults.queries,
                Some(Queries::Count(q)) => Some(q),
                Some(Queries::All(_)) => None,
            },
            runs: raw.runs.unwrap_or(defaults.runs),
            n: raw.n.unwrap_or(defaults.n),
            seed: raw.seed.unwrap_or(defaults.seed),
            compare_oracle: false,
        };
        if bench.runs == 0 || bench.n == 0 {
            return Err(ConfigError("runs and n must be at least 1".into()));
        }

        let mut names: Vec<String> = match &raw.methods {
            Some(m) if m.is_empty() => return Err(ConfigError("methods list is empty".into())),
            Some(m) => m.clone(),
            None => [
                ("rbt", raw.rbt.is_some()),
                ("lsh", raw.lsh.is_some()),
                ("uniform-lsh", raw.uniform_lsh.is_some()),
                ("multiprobe-lsh", raw.multiprobe_lsh.is_some()),
                ("oracle", raw.oracle.is_some()),
            ]
            .into_iter()
            .filter(|(_, present)| *present)
            .map(|(n, _)| n.to_string())
            .collect(),
        };
        if names.is_empty() {
            names.push("rbt".into());
        }

        let mut methods = Vec::new();
        for name in &names {
            match name.as_str() {
                "rbt" => methods.extend(expand_rbt(&raw.rbt.clone().unwrap_or_default())?),
                "lsh" => methods.extend(expand_lsh(
                    LshVariant::Classic,
                    &raw.lsh.clone().unwrap_or_default(),
                )?),
                "uniform-lsh" => methods.extend(expand_lsh(
                    LshVariant::Uniform,
                    &raw.uniform_lsh.clone().unwrap_or_default(),
                )?),
                "multiprobe-lsh" => methods.extend(expand_lsh(
                    LshVariant::MultiProbe,
                    &raw.multiprobe_lsh.clone().unwrap_or_default(),
                )?),
                "oracle" => methods.push(Method::Oracle),
                other => return Err(ConfigError(format!("unknown method {other:?}"))),
            }
        }
        Ok(Self {
            dataset: raw.dataset,
            output: raw.output,
            bench,
            methods,
        })
    }
}

fn expand_rbt(g: &RbtGrid) -> Result<Vec<Method>, ConfigError> {
    let bias = match &g.metric {
        None => None,
        Some(m) => Some(BitBias {
            metric: parse_metric(m)?,
            sharpening: g.sharpening.unwrap_or(1.0),
        }),
    };
    if bias.is_none() && g.sharpening.is_some() {
        return Err(ConfigError("sharpening needs a metric".into()));
    }
    let mut out = Vec::new();
    for &trees in grid("rbt.trees", &g.trees, DEFAULT_TREES)? {
        for &depth in grid("rbt.depth", &g.depth, DEFAULT_DEPTHS)? {
            for &bits in grid("rbt.bits", &g.bits, DEFAULT_BITS)? {
                out.push(Method::Rbt {
                    params: RbtParams::new(trees, depth, bits),
                    bias,
                });
            }
        }
    }
    Ok(out)
}

fn expand_lsh(variant: LshVariant, g: &LshGrid) -> Result<Vec<Method>, ConfigError> {
    let default_len = [variant.default_hash_length()];
    let prefix = variant.name();
    let lengths = grid(
        &format!("{prefix}.hash_length"),
        &g.hash_length,
        &default_len,
    )?;
    if variant != LshVariant::MultiProbe && g.probes.is_some() {
        return Err(ConfigError(format!("{prefix} does not take probes")));
    }
    let mut out = Vec::new();
    for &tables in grid(&format!("{prefix}.tables"), &g.tables, DEFAULT_TABLES)? {
        for &hash_length in lengths {
            let probe_default = [if variant == LshVariant::MultiProbe {
                hash_length
            } else {
                0
            }];
            for &probes in grid(&format!("{prefix}.probes"), &g.probes, &probe_default)? {
                out.push(Method::Lsh(LshParams {
                    num_tables: tables,
                    hash_length,
                    variant,
                    probes,
                    rng_seed: 0,
                }));
            }
        }
    }
    Ok(out)
}
