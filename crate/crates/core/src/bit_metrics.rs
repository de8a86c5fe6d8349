//! Per-bit statistics used to bias bit selection in the trees.
//!
//! * Shannon entropy of each bit over the whole dataset.
//! * Conditional entropy of each bit given the descriptor's point label.
//! * Empirical stability: per label, the share of the label's descriptors that
//!   agree with the majority value of the bit, averaged over labels weighted
//!   by descriptor count.
//!
//! All three lie in `[0, 1]`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::{BinaryDescriptor, Error, LabeledDataset, PointLabel, Result};

/// Offset added to every metric value before sharpening.
pub const WEIGHT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BitStatistics {
    pub entropy: Vec<f64>,
    pub cond_entropy: Vec<f64>,
    pub stability: Vec<f64>,
}

impl BitStatistics {
    pub fn compute(dataset: &LabeledDataset) -> Result<Self> {
        let groups = LabelCounts::new(dataset)?;
        Ok(Self {
            entropy: groups.entropy(),
            cond_entropy: groups.conditional_entropy(),
            stability: groups.stability(),
        })
    }

    pub fn dim(&self) -> usize {
        self.entropy.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitMetric {
    Entropy,
    ConditionalEntropy,
    Stability,
}

impl BitMetric {
    pub fn values(self, stats: &BitStatistics) -> &[f64] {
        match self {
            Self::Entropy => &stats.entropy,
            Self::ConditionalEntropy => &stats.cond_entropy,
            Self::Stability => &stats.stability,
        }
    }

    /// Sampling weights for this metric. Stability is shifted down by its
    /// 0.5 floor first.
    pub fn weights(self, stats: &BitStatistics, sharpening: f64) -> Result<Vec<f64>> {
        let values = self.values(stats);
        match self {
            Self::Stability => {
                let shifted: Vec<f64> = values.iter().map(|v| (v - 0.5).max(0.0)).collect();
                weights_from_metric(&shifted, sharpening)
            }
            _ => weights_from_metric(values, sharpening),
        }
    }
}

/// Binary entropy in bits; `0 log 0` is taken as 0.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * libm::log2(x) };
    term(p) + term(1.0 - p)
}

pub fn shannon_entropy(dataset: &LabeledDataset) -> Result<Vec<f64>> {
    Ok(LabelCounts::new(dataset)?.entropy())
}

pub fn conditional_entropy(dataset: &LabeledDataset) -> Result<Vec<f64>> {
    Ok(LabelCounts::new(dataset)?.conditional_entropy())
}

pub fn empirical_stability(dataset: &LabeledDataset) -> Result<Vec<f64>> {
    Ok(LabelCounts::new(dataset)?.stability())
}

/// Turns metric values into sampling probabilities:
/// `w_j ∝ (v_j + ε)^sharpening`, normalized to sum to 1.
pub fn weights_from_metric(values: &[f64], sharpening: f64) -> Result<Vec<f64>> {
    if !sharpening.is_finite() || sharpening < 0.0 {
        return Err(Error::InvalidWeights(alloc::format!(
            "sharpening must be finite and >= 0, got {sharpening}"
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidWeights(alloc::format!(
            "metric value {v} is negative or not finite"
        )));
    }
    let raw: Vec<f64> = values
        .iter()
        .map(|v| libm::pow(v + WEIGHT_EPSILON, sharpening))
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidWeights(
            "weights vanish after sharpening".into(),
        ));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Per-label descriptor counts and per-bit set counts.
struct LabelCounts {
    dim: usize,
    total: usize,
    ones: Vec<u64>,
    groups: BTreeMap<PointLabel, (usize, Vec<u64>)>,
}

impl LabelCounts {
    fn new(dataset: &LabeledDataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = dataset.dim();
        let mut ones = vec![0u64; dim];
        let mut groups: BTreeMap<PointLabel, (usize, Vec<u64>)> = BTreeMap::new();
        for (d, label) in dataset.iter() {
            let (count, per_bit) = groups.entry(label).or_insert_with(|| (0, vec![0; dim]));
            *count += 1;
            for_each_set_bit(d, |j| {
                per_bit[j] += 1;
                ones[j] += 1;
            });
        }
        Ok(Self {
            dim,
            total: dataset.len(),
            ones,
            groups,
        })
    }

    fn entropy(&self) -> Vec<f64> {
        self.ones
            .iter()
            .map(|&c| binary_entropy(c as f64 / self.total as f64))
            .collect()
    }

    fn conditional_entropy(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (count, per_bit) in self.groups.values() {
            let weight = *count as f64 / self.total as f64;
            for (o, &c) in out.iter_mut().zip(per_bit) {
                *o += weight * binary_entropy(c as f64 / *count as f64);
            }
        }
        out
    }

    fn stability(&self) -> Vec<f64> {
        // sum over labels of count * (majority / count) = sum of majority counts
        let mut agree = vec![0u64; self.dim];
        for (count, per_bit) in self.groups.values() {
            for (a, &c) in agree.iter_mut().zip(per_bit) {
                *a += c.max(*count as u64 - c);
            }
        }
        agree
            .into_iter()
            .map(|a| a as f64 / self.total as f64)
            .collect()
    }
}

fn for_each_set_bit(d: &BinaryDescriptor, mut f: impl FnMut(usize)) {
    for (w, &word) in d.words().iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            f(w * 64 + bits.trailing_zeros() as usize);
            bits &= bits - 1;
        }
    }
}
