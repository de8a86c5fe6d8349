//! Synthetic labeled descriptors.
//!
//! Each point gets a uniformly random center; its descriptors are copies of
//! the center with every bit flipped independently with probability
//! `flip_prob`. Point `l` draws from stream `l` of the seed, so the output
//! does not depend on generation order.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::stream_rng;
use crate::{BinaryDescriptor, Error, LabeledDataset, PointLabel, Result, DEFAULT_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerPoint {
    Fixed(usize),
    /// Uniform in `min..=max`.
    Range {
        min: usize,
        max: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub num_points: usize,
    pub per_point: PerPoint,
    pub dim: usize,
    pub flip_prob: f64,
    pub rng_seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            num_points: 1000,
            per_point: PerPoint::Fixed(10),
            dim: DEFAULT_DIM,
            flip_prob: 0.05,
            rng_seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.flip_prob) {
            return Err(Error::InvalidParams(format!(
                "flip_prob must be in [0, 0.5), got {}",
                self.flip_prob
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParams("dim must be at least 1".into()));
        }
        let max_per_point = match self.per_point {
            PerPoint::Fixed(n) => n,
            PerPoint::Range { min, max } => {
                if min > max {
                    return Err(Error::InvalidParams(format!(
                        "empty per-point range {min}..={max}"
                    )));
                }
                max
            }
        };
        let too_many = self
            .num_points
            .checked_mul(max_per_point)
            .is_none_or(|n| n > u32::MAX as usize)
            || self.num_points > u32::MAX as usize;
        if too_many {
            return Err(Error::InvalidParams(
                "dataset would exceed u32::MAX descriptors".into(),
            ));
        }
        Ok(())
    }
}

pub fn generate(params: &SynthParams) -> Result<LabeledDataset> {
    params.validate()?;
    let mut descriptors = Vec::new();
    let mut labels = Vec::new();
    for point in 0..params.num_points {
        let mut rng = stream_rng(params.rng_seed, point as u64);
        let count = match params.per_point {
            PerPoint::Fixed(n) => n,
            PerPoint::Range { min, max } => rng.random_range(min..=max),
        };
        let center = random_descriptor(&mut rng, params.dim);
        for _ in 0..count {
            let mut d = center.clone();
            if params.flip_prob > 0.0 {
                for pos in 0..params.dim {
                    if rng.random::<f64>() < params.flip_prob {
                        d.flip_bit(pos)?;
                    }
                }
            }
            descriptors.push(d);
            labels.push(PointLabel(point as u32));
        }
    }
    LabeledDataset::new(params.dim, descriptors, labels)
}

/// The centers `generate` uses, in point order.
pub fn centers(params: &SynthParams) -> Result<Vec<BinaryDescriptor>> {
    params.validate()?;
    Ok((0..params.num_points)
        .map(|point| {
            let mut rng = stream_rng(params.rng_seed, point as u64);
            if let PerPoint::Range { min, max } = params.per_point {
                let _ = rng.random_range(min..=max);
            }
            random_descriptor(&mut rng, params.dim)
        })
        .collect())
}

pub fn random_descriptor<R: Rng>(rng: &mut R, dim: usize) -> BinaryDescriptor {
    let words = (0..dim.div_ceil(64)).map(|_| rng.random::<u64>()).collect();
    BinaryDescriptor::from_words(dim, words).expect("word count matches dim")
}
