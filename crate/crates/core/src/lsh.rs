//! Bit-sampling LSH baselines.
//!
//! A table hashes a descriptor by concatenating its bits at `hash_length`
//! sampled positions into a key (position `i` of the key is bit `i` of the
//! `u64`). Classic LSH samples positions with replacement, Uniform LSH
//! without. Multi-probe LSH samples like Uniform and additionally probes the
//! buckets one key-bit flip away, flipping key bits `0..probes` in order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::index::sort_dedup_from;
use crate::rng::{sample_distinct, stream_rng};
use crate::snapshot::{corrupt, Reader, SnapshotError, Writer, LSH_MAGIC};
use crate::{AnnIndex, BinaryDescriptor, DescriptorId, Error, LabeledDataset, Result};

/// Modelled size of one non-empty bucket.
pub const BUCKET_BYTES: usize = 32;
/// Modelled fixed cost of one table.
pub const TABLE_BYTES: usize = 64;
/// Modelled size of one stored id.
pub const ID_BYTES: usize = 4;

/// Longest key that packs into one machine word.
pub const MAX_HASH_LENGTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LshVariant {
    Classic,
    Uniform,
    MultiProbe,
}

impl LshVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Classic => "lsh",
            Self::Uniform => "uniform-lsh",
            Self::MultiProbe => "multiprobe-lsh",
        }
    }

    pub fn default_hash_length(self) -> usize {
        match self {
            Self::Classic | Self::Uniform => 56,
            Self::MultiProbe => 28,
        }
    }

    fn code(self) -> u8 {
        match self {
            Self::Classic => 0,
            Self::Uniform => 1,
            Self::MultiProbe => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        [Self::Classic, Self::Uniform, Self::MultiProbe]
            .into_iter()
            .find(|v| v.code() == code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LshParams {
    pub num_tables: usize,
    pub hash_length: usize,
    pub variant: LshVariant,
    /// Single-bit probes per table; only meaningful for [`LshVariant::MultiProbe`].
    pub probes: usize,
    pub rng_seed: u64,
}

impl LshParams {
    /// Defaults for a variant: key lengths 56 (Classic, Uniform) and 28
    /// (MultiProbe), with the full single-flip neighbourhood probed.
    pub fn new(variant: LshVariant, num_tables: usize) -> Self {
        let hash_length = variant.default_hash_length();
        let probes = if variant == LshVariant::MultiProbe {
            hash_length
        } else {
            0
        };
        Self {
            num_tables,
            hash_length,
            variant,
            probes,
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.num_tables == 0 {
            return Err(Error::InvalidParams("num_tables must be at least 1".into()));
        }
        if self.hash_length > MAX_HASH_LENGTH {
            return Err(Error::InvalidParams(format!(
                "hash_length {} exceeds {MAX_HASH_LENGTH}",
                self.hash_length
            )));
        }
        match self.variant {
            LshVariant::Classic => {
                if self.hash_length > 0 && dim == 0 {
                    return Err(Error::InvalidParams(
                        "cannot sample bits of a 0-bit descriptor".into(),
                    ));
                }
            }
            LshVariant::Uniform | LshVariant::MultiProbe => {
                if self.hash_length > dim {
                    return Err(Error::InvalidParams(format!(
                        "hash_length {} exceeds descriptor width {dim}",
                        self.hash_length
                    )));
                }
            }
        }
        if self.variant != LshVariant::MultiProbe && self.probes != 0 {
            return Err(Error::InvalidParams(
                "probes only apply to multi-probe LSH".into(),
            ));
        }
        if self.probes > self.hash_length {
            return Err(Error::InvalidParams(format!(
                "probes {} exceeds hash_length {}",
                self.probes, self.hash_length
            )));
        }
        if self.num_tables > u32::MAX as usize {
            return Err(Error::InvalidParams("num_tables exceeds u32 range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashTable {
    bit_positions: Vec<u32>,
    buckets: BTreeMap<u64, Vec<DescriptorId>>,
}

impl HashTable {
    pub fn bit_positions(&self) -> &[u32] {
        &self.bit_positions
    }

    pub fn buckets(&self) -> &BTreeMap<u64, Vec<DescriptorId>> {
        &self.buckets
    }

    pub fn key(&self, d: &BinaryDescriptor) -> u64 {
        self.bit_positions
            .iter()
            .enumerate()
            .fold(0u64, |key, (i, &p)| {
                key | (u64::from(d.bit(p as usize)) << i)
            })
    }

    pub fn bucket(&self, key: u64) -> &[DescriptorId] {
        self.buckets.get(&key).map_or(&[], Vec::as_slice)
    }
}

/// One of the three LSH variants over a borrowed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LshIndex<'a> {
    dataset: &'a LabeledDataset,
    params: LshParams,
    tables: Vec<HashTable>,
}

impl<'a> LshIndex<'a> {
    pub fn build(dataset: &'a LabeledDataset, params: LshParams) -> Result<Self> {
        params.validate(dataset.dim())?;
        let dim = dataset.dim();
        let tables = (0..params.num_tables)
            .map(|t| {
                let mut rng = stream_rng(params.rng_seed, t as u64);
                let bit_positions = match params.variant {
                    LshVariant::Classic => (0..params.hash_length)
                        .map(|_| rng.random_range(0..dim as u32))
                        .collect(),
                    LshVariant::Uniform | LshVariant::MultiProbe => {
                        sample_distinct(&mut rng, dim, params.hash_length, None)?
                    }
                };
                let mut table = HashTable {
                    bit_positions,
                    buckets: BTreeMap::new(),
                };
                for (id, d) in dataset.ids().zip(dataset.descriptors()) {
                    let key = table.key(d);
                    table.buckets.entry(key).or_default().push(id);
                }
                Ok(table)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dataset,
            params,
            tables,
        })
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn tables(&self) -> &[HashTable] {
        &self.tables
    }

    /// Serializes the tables (not the dataset).
    ///
    /// Layout, little-endian: `"LSHF" | version u32 | dim u32 | num_ids u64 |
    /// variant u8 (0 classic, 1 uniform, 2 multi-probe) | num_tables u32 |
    /// hash_length u32 | probes u32 | rng_seed u64`, then per table
    /// `hash_length` positions as `u32`, `bucket_count u64` and the buckets in
    /// ascending key order as `key u64 | count u32 | count × id u32`.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut w = Writer::with_header(LSH_MAGIC);
        let p = &self.params;
        w.u32(self.dataset.dim() as u32);
        w.u64(self.dataset.len() as u64);
        w.u8(p.variant.code());
        w.u32(p.num_tables as u32);
        w.u32(p.hash_length as u32);
        w.u32(p.probes as u32);
        w.u64(p.rng_seed);
        for table in &self.tables {
            for &b in &table.bit_positions {
                w.u32(b);
            }
            w.u64(table.buckets.len() as u64);
            for (&key, ids) in &table.buckets {
                w.u64(key);
                w.u32(ids.len() as u32);
                for id in ids {
                    w.u32(id.0);
                }
            }
        }
        w.finish()
    }

    pub fn from_snapshot(dataset: &'a LabeledDataset, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, LSH_MAGIC)?;
        let dim = r.u32()? as usize;
        let num_ids = r.u64()?;
        if dim != dataset.dim() {
            return Err(Error::DimMismatch {
                expected: dataset.dim(),
                actual: dim,
            });
        }
        if num_ids != dataset.len() as u64 {
            return Err(Error::DatasetMismatch {
                expected: num_ids as usize,
                actual: dataset.len(),
            });
        }
        let variant = r.u8()?;
        let variant = LshVariant::from_code(variant)
            .ok_or_else(|| corrupt(format!("unknown variant {variant}")))?;
        let params = LshParams {
            variant,
            num_tables: r.u32()? as usize,
            hash_length: r.u32()? as usize,
            probes: r.u32()? as usize,
            rng_seed: r.u64()?,
        };
        params.validate(dim).map_err(|e| corrupt(format!("{e}")))?;
        let mut tables = Vec::with_capacity(params.num_tables.min(r.remaining()));
        for _ in 0..params.num_tables {
            let mut bit_positions = Vec::with_capacity(params.hash_length);
            for _ in 0..params.hash_length {
                bit_positions.push(r.u32()?);
            }
            let count = r.u64()?;
            let mut buckets = BTreeMap::new();
            for _ in 0..count {
                let key = r.u64()?;
                let len = r.u32()? as usize;
                if len > r.remaining() / 4 {
                    return Err(SnapshotError::Truncated(r.remaining()).into());
                }
                let ids = (0..len)
                    .map(|_| r.u32().map(DescriptorId))
                    .collect::<Result<Vec<_>, _>>()?;
                if buckets.insert(key, ids).is_some() {
                    return Err(corrupt(format!("duplicate bucket key {key:#x}")).into());
                }
            }
            let table = HashTable {
                bit_positions,
                buckets,
            };
            check_table(&table, dataset, variant)?;
            tables.push(table);
        }
        r.finish()?;
        Ok(Self {
            dataset,
            params,
            tables,
        })
    }
}

/// Every id sits in exactly one bucket, under its own key.
fn check_table(
    table: &HashTable,
    dataset: &LabeledDataset,
    variant: LshVariant,
) -> Result<(), SnapshotError> {
    let dim = dataset.dim();
    if table.bit_positions.iter().any(|&b| b as usize >= dim) {
        return Err(corrupt("bit position out of range"));
    }
    if variant != LshVariant::Classic {
        let mut sorted = table.bit_positions.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(corrupt(
                "repeated bit position in a without-replacement table",
            ));
        }
    }
    let mut seen = alloc::vec![false; dataset.len()];
    for (&key, ids) in &table.buckets {
        if ids.is_empty() {
            return Err(corrupt("empty bucket"));
        }
        for id in ids {
            let slot = seen
                .get_mut(id.index())
                .ok_or_else(|| corrupt(format!("id {id} out of range")))?;
            if *slot {
                return Err(corrupt(format!("id {id} stored twice")));
            }
            *slot = true;
            if table.key(&dataset.descriptors()[id.index()]) != key {
                return Err(corrupt(format!("id {id} filed under the wrong key")));
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(corrupt("table does not cover every id"));
    }
    Ok(())
}

impl AnnIndex for LshIndex<'_> {
    fn dataset(&self) -> &LabeledDataset {
        self.dataset
    }

    fn candidates(&self, q: &BinaryDescriptor, out: &mut Vec<DescriptorId>) -> Result<()> {
        self.dataset.check_query(q)?;
        let start = out.len();
        let mut lookups = 0;
        for table in &self.tables {
            let key = table.key(q);
            out.extend_from_slice(table.bucket(key));
            for i in 0..self.params.probes {
                out.extend_from_slice(table.bucket(key ^ (1u64 << i)));
            }
            lookups += 1 + self.params.probes;
        }
        if lookups > 1 {
            sort_dedup_from(out, start);
        }
        Ok(())
    }

    /// Modelled bytes: non-empty buckets × [`BUCKET_BYTES`] + stored ids ×
    /// [`ID_BYTES`] + tables × [`TABLE_BYTES`].
    fn memory_bytes(&self) -> usize {
        self.tables
            .iter()
            .map(|t| {
                TABLE_BYTES
                    + t.buckets.len() * BUCKET_BYTES
                    + t.buckets.values().map(Vec::len).sum::<usize>() * ID_BYTES
            })
            .sum()
    }
}
