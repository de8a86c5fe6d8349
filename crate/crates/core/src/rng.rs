//! Seeded random streams and the weighted samplers used by the indexes.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Generator for stream `stream` of `seed`. Streams of one seed are
/// independent, so per-tree or per-run randomness does not depend on the
/// order in which work is done.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes `index` into `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Checks a weight vector over `dim` bit positions.
pub(crate) fn validate_weights(weights: &[f64], dim: usize) -> Result<()> {
    if weights.len() != dim {
        return Err(Error::InvalidWeights(alloc::format!(
            "expected {dim} weights, got {}",
            weights.len()
        )));
    }
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !w.is_finite() || **w < 0.0)
    {
        return Err(Error::InvalidWeights(alloc::format!("weight {i} is {w}")));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidWeights("weights sum to zero".into()));
    }
    Ok(())
}

/// Draws `k` distinct positions from `0..dim`, uniformly or proportionally to
/// `weights` (successive draws without replacement).
pub(crate) fn sample_distinct<R: Rng>(
    rng: &mut R,
    dim: usize,
    k: usize,
    weights: Option<&[f64]>,
) -> Result<Vec<u32>> {
    if k > dim {
        return Err(Error::InvalidParams(alloc::format!(
            "cannot draw {k} distinct bits out of {dim}"
        )));
    }
    match weights {
        None => {
            let mut pool: Vec<u32> = (0..dim as u32).collect();
            for i in 0..k {
                let j = rng.random_range(i..dim);
                pool.swap(i, j);
            }
            pool.truncate(k);
            Ok(pool)
        }
        Some(w) => {
            let mut remaining: Vec<f64> = w.to_vec();
            let mut out = Vec::with_capacity(k);
            for _ in 0..k {
                let total: f64 = remaining.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidWeights(alloc::format!(
                        "only {} bits have positive weight, {k} required",
                        out.len()
                    )));
                }
                let j = pick_weighted(&remaining, rng.random::<f64>() * total);
                remaining[j] = 0.0;
                out.push(j as u32);
            }
            Ok(out)
        }
    }
}

/// Index of the first positive entry whose running sum exceeds `target`.
fn pick_weighted(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = j;
            if target < acc {
                return j;
            }
        }
    }
    last
}

/// Picks entries of a fixed pool, optionally weighted, skipping excluded ones.
#[derive(Debug, Clone)]
pub(crate) struct PoolSampler {
    /// Running sums of the pool weights; `None` means uniform.
    cumulative: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    len: usize,
}

const MAX_REJECTIONS: usize = 64;

impl PoolSampler {
    pub(crate) fn new(len: usize, weights: Option<Vec<f64>>) -> Self {
        let cumulative = weights.as_ref().map(|w| {
            let mut acc = 0.0;
            w.iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect()
        });
        Self {
            cumulative,
            weights,
            len,
        }
    }

    /// Draws a pool index for which `excluded` is false. Returns `None` when
    /// every index with positive weight is excluded.
    pub(crate) fn draw<R: Rng>(
        &self,
        rng: &mut R,
        excluded: impl Fn(usize) -> bool,
    ) -> Option<usize> {
        if self.len == 0 {
            return None;
        }
        for _ in 0..MAX_REJECTIONS {
            let j = match &self.cumulative {
                None => rng.random_range(0..self.len),
                Some(c) => {
                    let total = c[self.len - 1];
                    if total <= 0.0 {
                        return None;
                    }
                    let t = rng.random::<f64>() * total;
                    c.partition_point(|&x| x <= t).min(self.len - 1)
                }
            };
            if !excluded(j) && self.weight(j) > 0.0 {
                return Some(j);
            }
        }
        // Dense exclusion: draw exactly from what is left.
        let open: Vec<usize> = (0..self.len)
            .filter(|&j| !excluded(j) && self.weight(j) > 0.0)
            .collect();
        if open.is_empty() {
            return None;
        }
        match &self.weights {
            None => Some(open[rng.random_range(0..open.len())]),
            Some(w) => {
                let masked: Vec<f64> = open.iter().map(|&j| w[j]).collect();
                let total: f64 = masked.iter().sum();
                Some(open[pick_weighted(&masked, rng.random::<f64>() * total)])
            }
        }
    }

    fn weight(&self, j: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream_rng(5, 0).random();
        let b: u64 = stream_rng(5, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(5, 0).random::<u64>());
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn distinct_sampling() {
        let mut rng = stream_rng(1, 0);
        let s = sample_distinct(&mut rng, 100, 100, None).unwrap();
        let mut sorted = s.clone();
        sorted.sort();
        assert_eq!(sorted, (0..100).collect::<Vec<u32>>());
        assert!(sample_distinct(&mut rng, 10, 11, None).is_err());

        let mut w = alloc::vec![0.0; 10];
        w[3] = 1.0;
        w[8] = 2.0;
        let mut s = sample_distinct(&mut rng, 10, 2, Some(&w)).unwrap();
        s.sort();
        assert_eq!(s, alloc::vec![3, 8]);
        assert!(sample_distinct(&mut rng, 10, 3, Some(&w)).is_err());
    }

    #[test]
    fn weighted_frequencies_follow_weights() {
        let mut rng = stream_rng(2, 0);
        let sampler = PoolSampler::new(3, Some(alloc::vec![1.0, 0.0, 3.0]));
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            counts[sampler.draw(&mut rng, |_| false).unwrap()] += 1;
        }
        assert_eq!(counts[1], 0);
        let frac = counts[2] as f64 / 40_000.0;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
    }

    #[test]
    fn exclusion_falls_back_to_exact_draw() {
        let mut rng = stream_rng(3, 0);
        let sampler = PoolSampler::new(512, None);
        for _ in 0..100 {
            assert_eq!(sampler.draw(&mut rng, |j| j != 77), Some(77));
        }
        assert_eq!(sampler.draw(&mut rng, |_| true), None);
    }
}
