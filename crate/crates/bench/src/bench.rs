//! Timed benchmark runs.
//!
//! Each run draws its own subset of the dataset and its own leave-one-out
//! queries from a seed derived from `(seed, run)`, rebuilds the index on the
//! subset and times every query on the calling thread. Build time is not
//! measured. Scoring happens after the timed call.

use std::time::{Duration, Instant};

use rand::Rng;
use rbt_core::eval::{exact_top_n, MetricMeans, Scorer};
use rbt_core::rng::{derive_seed, stream_rng};
use rbt_core::{DescriptorId, LabeledDataset};
use serde::Serialize;

use crate::method::{Method, ParamColumns};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    /// Descriptors indexed per run; `None` indexes the whole dataset.
    pub subset: Option<usize>,
    /// Leave-one-out queries per run; `None` queries every indexed descriptor.
    pub queries: Option<usize>,
    pub runs: usize,
    pub n: usize,
    pub seed: u64,
    /// Also compare every result list against the exact top-n.
    pub compare_oracle: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            subset: None,
            queries: Some(1000),
            runs: 10,
            n: 10,
            seed: 0,
            compare_oracle: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("dataset has {len} descriptors, fewer than the subset size {subset}")]
    SubsetTooLarge { subset: usize, len: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid benchmark settings: {0}")]
    Config(String),
    #[error(transparent)]
    Index(#[from] rbt_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub precision: f64,
    pub recall: f64,
    pub avg_query_us: f64,
    pub memory_bytes: usize,
    pub mean_candidates: f64,
    pub queries: usize,
    pub recall_skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches_oracle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub method: String,
    pub params: ParamColumns,
    pub n: usize,
    pub precision_at_n: f64,
    pub recall_at_n: f64,
    pub avg_query_us: f64,
    pub memory_bytes: f64,
    pub mean_candidates: f64,
    pub runs: Vec<RunRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches_oracle: Option<bool>,
}

impl BenchReport {
    fn aggregate(method: &Method, n: usize, runs: Vec<RunRecord>) -> Self {
        let k = runs.len() as f64;
        let mean = |f: fn(&RunRecord) -> f64| runs.iter().map(f).sum::<f64>() / k;
        let matches_oracle = runs
            .iter()
            .map(|r| r.matches_oracle)
            .try_fold(true, |acc, m| m.map(|m| acc && m));
        Self {
            method: method.name().to_string(),
            params: method.columns(),
            n,
            precision_at_n: mean(|r| r.precision),
            recall_at_n: mean(|r| r.recall),
            avg_query_us: mean(|r| r.avg_query_us),
            memory_bytes: mean(|r| r.memory_bytes as f64),
            mean_candidates: mean(|r| r.mean_candidates),
            matches_oracle,
            runs,
        }
    }
}

/// Runs `config.runs` independent runs of `method` over `dataset`.
pub fn run_benchmark(
    dataset: &LabeledDataset,
    method: &Method,
    config: &BenchConfig,
) -> Result<BenchReport, BenchError> {
    if config.runs == 0 {
        return Err(BenchError::Config("runs must be at least 1".into()));
    }
    if config.n == 0 {
        return Err(BenchError::Config("n must be at least 1".into()));
    }
    if dataset.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    let subset = config.subset.unwrap_or(dataset.len());
    if subset > dataset.len() {
        return Err(BenchError::SubsetTooLarge {
            subset,
            len: dataset.len(),
        });
    }
    if subset == 0 {
        return Err(BenchError::Config("subset must be at least 1".into()));
    }
    method.validate(dataset.dim())?;
    let runs = (0..config.runs)
        .map(|run| run_once(dataset, method, config, subset, run))
        .collect::<Result<_, _>>()?;
    Ok(BenchReport::aggregate(method, config.n, runs))
}

/// The ids a run indexes and the ids (within the subset) it queries.
pub fn run_sample(
    dataset_len: usize,
    subset: usize,
    queries: Option<usize>,
    seed: u64,
    run: usize,
) -> (Vec<DescriptorId>, Vec<DescriptorId>) {
    let run_seed = derive_seed(seed, run as u64);
    let ids: Vec<DescriptorId> = if subset == dataset_len {
        (0..dataset_len as u32).map(DescriptorId).collect()
    } else {
        let mut ids = partial_shuffle(dataset_len, subset, &mut stream_rng(run_seed, 0));
        ids.sort_unstable();
        ids
    };
    let nq = queries.map_or(subset, |q| q.min(subset));
    let mut queries = partial_shuffle(subset, nq, &mut stream_rng(run_seed, 1));
    queries.sort_unstable();
    (ids, queries)
}

fn partial_shuffle<R: Rng>(len: usize, k: usize, rng: &mut R) -> Vec<DescriptorId> {
    let mut pool: Vec<DescriptorId> = (0..len as u32).map(DescriptorId).collect();
    for i in 0..k {
        let j = rng.random_range(i..len);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn run_once(
    dataset: &LabeledDataset,
    method: &Method,
    config: &BenchConfig,
    subset: usize,
    run: usize,
) -> Result<RunRecord, BenchError> {
    let (ids, queries) = run_sample(dataset.len(), subset, config.queries, config.seed, run);
    let data = if ids.len() == dataset.len() {
        dataset.clone()
    } else {
        dataset.subset(&ids)?
    };
    let index = method.build(&data, derive_seed(config.seed, run as u64))?;

    let mut results = Vec::with_capacity(queries.len());
    let mut elapsed = Duration::ZERO;
    for &qid in &queries {
        let q = data.descriptor(qid)?;
        let start = Instant::now();
        let out = index.query_with_stats(q, config.n, Some(qid));
        elapsed += start.elapsed();
        results.push(out?);
    }

    let scorer = Scorer::new(&data);
    let mut means = MetricMeans::default();
    let mut matches = config.compare_oracle.then_some(true);
    for (&qid, (top, stats)) in queries.iter().zip(&results) {
        // distance_evals counts the candidates other than the query itself
        means.add(scorer.score(qid, top, config.n)?, stats.distance_evals);
        if let Some(m) = matches.as_mut() {
            *m &= *top == exact_top_n(&data, data.descriptor(qid)?, config.n, Some(qid))?;
        }
    }
    let avg_query_us = if queries.is_empty() {
        0.0
    } else {
        elapsed.as_secs_f64() * 1e6 / queries.len() as f64
    };
    Ok(RunRecord {
        run,
        precision: means.precision(),
        recall: means.recall(),
        avg_query_us,
        memory_bytes: index.memory_bytes(),
        mean_candidates: means.candidates(),
        queries: means.queries(),
        recall_skipped: means.recall_skipped(),
        matches_oracle: matches,
    })
}
