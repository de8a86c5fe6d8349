use alloc::vec::Vec;

use crate::{
    select_top_n_counted, BinaryDescriptor, DescriptorId, LabeledDataset, Neighbour, Result,
};

/// Per-query bookkeeping: how many candidates the index produced and how
/// many Hamming distances the re-ranking computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub candidates: usize,
    pub distance_evals: usize,
}

/// Common query interface of every index over a [`LabeledDataset`].
///
/// Implementors only gather candidates; ranking is shared.
pub trait AnnIndex {
    fn dataset(&self) -> &LabeledDataset;

    /// Appends the deduplicated candidate ids for `q` to `out`, without
    /// computing any distances.
    fn candidates(&self, q: &BinaryDescriptor, out: &mut Vec<DescriptorId>) -> Result<()>;

    /// Bytes used by the index structures, excluding the descriptors.
    fn memory_bytes(&self) -> usize;

    fn query(&self, q: &BinaryDescriptor, n: usize) -> Result<Vec<Neighbour>> {
        self.query_with_stats(q, n, None).map(|(v, _)| v)
    }

    fn query_excluding(
        &self,
        q: &BinaryDescriptor,
        n: usize,
        exclude: Option<DescriptorId>,
    ) -> Result<Vec<Neighbour>> {
        self.query_with_stats(q, n, exclude).map(|(v, _)| v)
    }

    fn query_with_stats(
        &self,
        q: &BinaryDescriptor,
        n: usize,
        exclude: Option<DescriptorId>,
    ) -> Result<(Vec<Neighbour>, QueryStats)> {
        let mut ids = Vec::new();
        self.candidates(q, &mut ids)?;
        let (top, distance_evals) = select_top_n_counted(&ids, q, self.dataset(), n, exclude)?;
        Ok((
            top,
            QueryStats {
                candidates: ids.len(),
                distance_evals,
            },
        ))
    }
}

/// Sorts `out[start..]` and drops repeated ids.
pub(crate) fn sort_dedup_from(out: &mut Vec<DescriptorId>, start: usize) {
    let tail = &mut out[start..];
    tail.sort_unstable();
    let mut keep = 0;
    for i in 0..tail.len() {
        if keep == 0 || tail[i] != tail[keep - 1] {
            tail[keep] = tail[i];
            keep += 1;
        }
    }
    out.truncate(start + keep);
}

/// Linear scan over the whole dataset, exposed through [`AnnIndex`].
#[derive(Debug, Clone, Copy)]
pub struct ExactIndex<'a> {
    dataset: &'a LabeledDataset,
}

impl<'a> ExactIndex<'a> {
    pub fn new(dataset: &'a LabeledDataset) -> Self {
        Self { dataset }
    }
}

impl AnnIndex for ExactIndex<'_> {
    fn dataset(&self) -> &LabeledDataset {
        self.dataset
    }

    fn candidates(&self, q: &BinaryDescriptor, out: &mut Vec<DescriptorId>) -> Result<()> {
        self.dataset.check_query(q)?;
        out.extend(self.dataset.ids());
        Ok(())
    }

    fn memory_bytes(&self) -> usize {
        0
    }
}
