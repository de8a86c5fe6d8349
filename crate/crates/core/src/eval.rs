//! Ground truth and retrieval metrics.
//!
//! Queries are leave-one-out: a dataset descriptor is used as the query and
//! its own id is excluded from the results. Precision@N always divides by
//! `n`, so short result lists are penalized. Recall@N divides by the number
//! of other descriptors sharing the query's label; queries whose label has no
//! other descriptor have no recall.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::{BinaryDescriptor, DescriptorId, Error, LabeledDataset, Neighbour, PointLabel, Result};

/// Brute-force top `n` by `(distance, id)`, optionally skipping one id.
pub fn exact_top_n(
    dataset: &LabeledDataset,
    q: &BinaryDescriptor,
    n: usize,
    exclude: Option<DescriptorId>,
) -> Result<Vec<Neighbour>> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    dataset.check_query(q)?;
    let mut all: Vec<Neighbour> = dataset
        .ids()
        .zip(dataset.descriptors())
        .filter(|(id, _)| Some(*id) != exclude)
        .map(|(id, d)| Neighbour::new(id, q.distance_unchecked(d)))
        .collect();
    all.sort();
    all.truncate(n);
    Ok(all)
}

fn same_label_hits(
    retrieved: &[Neighbour],
    query_label: PointLabel,
    dataset: &LabeledDataset,
    n: usize,
) -> usize {
    let labels = dataset.labels();
    retrieved
        .iter()
        .take(n)
        .filter(|nb| labels.get(nb.id.index()) == Some(&query_label))
        .count()
}

/// Share of the first `n` slots holding a descriptor of `query_label`.
pub fn precision_at_n(
    retrieved: &[Neighbour],
    query_label: PointLabel,
    dataset: &LabeledDataset,
    n: usize,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    same_label_hits(retrieved, query_label, dataset, n) as f64 / n as f64
}

/// Same-label hits in the first `n` results over all other descriptors of
/// `query_label`. `None` when the query's label has no other descriptor.
pub fn recall_at_n(
    retrieved: &[Neighbour],
    query_label: PointLabel,
    dataset: &LabeledDataset,
    n: usize,
    query_id: DescriptorId,
) -> Option<f64> {
    let relevant = dataset
        .ids()
        .zip(dataset.labels())
        .filter(|&(id, &l)| l == query_label && id != query_id)
        .count();
    recall_with_relevant(retrieved, query_label, dataset, n, relevant)
}

fn recall_with_relevant(
    retrieved: &[Neighbour],
    query_label: PointLabel,
    dataset: &LabeledDataset,
    n: usize,
    relevant: usize,
) -> Option<f64> {
    if relevant == 0 {
        return None;
    }
    Some(same_label_hits(retrieved, query_label, dataset, n) as f64 / relevant as f64)
}

/// Label sizes of a dataset, for scoring many leave-one-out queries without
/// rescanning the labels each time.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    dataset: &'a LabeledDataset,
    label_sizes: BTreeMap<PointLabel, usize>,
}

/// Metrics of one leave-one-out query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryScore {
    pub precision: f64,
    pub recall: Option<f64>,
}

impl<'a> Scorer<'a> {
    pub fn new(dataset: &'a LabeledDataset) -> Self {
        let mut label_sizes = BTreeMap::new();
        for &l in dataset.labels() {
            *label_sizes.entry(l).or_insert(0) += 1;
        }
        Self {
            dataset,
            label_sizes,
        }
    }

    /// Scores `retrieved` for the leave-one-out query `query_id`.
    pub fn score(
        &self,
        query_id: DescriptorId,
        retrieved: &[Neighbour],
        n: usize,
    ) -> Result<QueryScore> {
        let label = self.dataset.label(query_id)?;
        let relevant = self
            .label_sizes
            .get(&label)
            .copied()
            .unwrap_or(0)
            .saturating_sub(1);
        Ok(QueryScore {
            precision: precision_at_n(retrieved, label, self.dataset, n),
            recall: recall_with_relevant(retrieved, label, self.dataset, n, relevant),
        })
    }
}

/// Running means of per-query metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricMeans {
    precision_sum: f64,
    recall_sum: f64,
    candidate_sum: f64,
    queries: usize,
    recall_queries: usize,
}

impl MetricMeans {
    pub fn add(&mut self, score: QueryScore, candidates: usize) {
        self.precision_sum += score.precision;
        self.candidate_sum += candidates as f64;
        self.queries += 1;
        if let Some(r) = score.recall {
            self.recall_sum += r;
            self.recall_queries += 1;
        }
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    /// Queries skipped for recall because their label was a singleton.
    pub fn recall_skipped(&self) -> usize {
        self.queries - self.recall_queries
    }

    pub fn precision(&self) -> f64 {
        mean(self.precision_sum, self.queries)
    }

    pub fn recall(&self) -> f64 {
        mean(self.recall_sum, self.recall_queries)
    }

    pub fn candidates(&self) -> f64 {
        mean(self.candidate_sum, self.queries)
    }
}

fn mean(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
