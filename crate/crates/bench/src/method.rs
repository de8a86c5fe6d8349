use std::fmt;

use rbt_core::bit_metrics::{BitMetric, BitStatistics};
use rbt_core::{
    AnnIndex, ExactIndex, LabeledDataset, LshIndex, LshParams, LshVariant, RbtForest, RbtParams,
};
use serde::Serialize;

/// Per-bit metric used to weight the forest's bit selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitBias {
    pub metric: BitMetric,
    pub sharpening: f64,
}

/// An index configuration the harness can build and query.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Oracle,
    Rbt {
        params: RbtParams,
        bias: Option<BitBias>,
    },
    Lsh(LshParams),
}

/// Parameter columns of a report row; unused ones stay empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParamColumns {
    pub trees: Option<usize>,
    pub depth: Option<usize>,
    pub bits: Option<usize>,
    pub tables: Option<usize>,
    pub hash_length: Option<usize>,
    pub probes: Option<usize>,
}

impl Method {
    pub fn rbt(params: RbtParams) -> Self {
        Self::Rbt { params, bias: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Rbt { .. } => "rbt",
            Self::Lsh(p) => p.variant.name(),
        }
    }

    pub fn columns(&self) -> ParamColumns {
        match self {
            Self::Oracle => ParamColumns::default(),
            Self::Rbt { params, .. } => ParamColumns {
                trees: Some(params.num_trees),
                depth: Some(params.max_depth),
                bits: Some(params.max_bits),
                ..Default::default()
            },
            Self::Lsh(p) => ParamColumns {
                tables: Some(p.num_tables),
                hash_length: Some(p.hash_length),
                probes: (p.variant == LshVariant::MultiProbe).then_some(p.probes),
                ..Default::default()
            },
        }
    }

    /// Checks the parameters against a descriptor width without building.
    pub fn validate(&self, dim: usize) -> rbt_core::Result<()> {
        match self {
            Self::Oracle => Ok(()),
            Self::Rbt { params, .. } => params.validate(dim),
            Self::Lsh(p) => p.validate(dim),
        }
    }

    /// Builds the index over `dataset`, seeding it with `seed`.
    pub fn build<'a>(
        &self,
        dataset: &'a LabeledDataset,
        seed: u64,
    ) -> rbt_core::Result<Box<dyn AnnIndex + 'a>> {
        Ok(match self {
            Self::Oracle => Box::new(ExactIndex::new(dataset)),
            Self::Rbt { params, bias } => {
                let params = RbtParams {
                    rng_seed: seed,
                    ..*params
                };
                let weights = match bias {
                    None => None,
                    Some(b) => Some(
                        b.metric
                            .weights(&BitStatistics::compute(dataset)?, b.sharpening)?,
                    ),
                };
                Box::new(RbtForest::build(dataset, params, weights.as_deref())?)
            }
            Self::Lsh(p) => Box::new(LshIndex::build(
                dataset,
                LshParams {
                    rng_seed: seed,
                    ..*p
                },
            )?),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.columns();
        write!(f, "{}", self.name())?;
        for (k, v) in [
            ("trees", c.trees),
            ("depth", c.depth),
            ("bits", c.bits),
            ("tables", c.tables),
            ("hash_length", c.hash_length),
            ("probes", c.probes),
        ] {
            if let Some(v) = v {
                write!(f, " {k}={v}")?;
            }
        }
        Ok(())
    }
}
