use alloc::vec::Vec;
use core::fmt;

use crate::{BinaryDescriptor, Error, Result};

/// Dense index of a descriptor inside its dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DescriptorId(pub u32);

impl DescriptorId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Identifier of the 3D point a descriptor was observed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointLabel(pub u32);

/// Descriptors of one common width, each tagged with its ground-truth point.
#[derive(Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    dim: usize,
    descriptors: Vec<BinaryDescriptor>,
    labels: Vec<PointLabel>,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        descriptors: Vec<BinaryDescriptor>,
        labels: Vec<PointLabel>,
    ) -> Result<Self> {
        if descriptors.len() != labels.len() {
            return Err(Error::LengthMismatch {
                descriptors: descriptors.len(),
                labels: labels.len(),
            });
        }
        if descriptors.len() > u32::MAX as usize {
            return Err(Error::InvalidParams(
                "datasets are limited to u32::MAX descriptors".into(),
            ));
        }
        if let Some(d) = descriptors.iter().find(|d| d.dim() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: d.dim(),
            });
        }
        Ok(Self {
            dim,
            descriptors,
            labels,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            descriptors: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[BinaryDescriptor] {
        &self.descriptors
    }

    pub fn labels(&self) -> &[PointLabel] {
        &self.labels
    }

    pub fn descriptor(&self, id: DescriptorId) -> Result<&BinaryDescriptor> {
        self.descriptors.get(id.index()).ok_or(Error::InvalidId {
            id: id.0,
            len: self.len(),
        })
    }

    pub fn label(&self, id: DescriptorId) -> Result<PointLabel> {
        self.labels
            .get(id.index())
            .copied()
            .ok_or(Error::InvalidId {
                id: id.0,
                len: self.len(),
            })
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = DescriptorId> + '_ {
        (0..self.len() as u32).map(DescriptorId)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&BinaryDescriptor, PointLabel)> + '_ {
        self.descriptors.iter().zip(self.labels.iter().copied())
    }

    /// Number of descriptors carrying `label`.
    pub fn label_count(&self, label: PointLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Copies the given rows into a new dataset; ids are renumbered densely
    /// in the order given.
    pub fn subset(&self, ids: &[DescriptorId]) -> Result<Self> {
        let mut descriptors = Vec::with_capacity(ids.len());
        let mut labels = Vec::with_capacity(ids.len());
        for &id in ids {
            descriptors.push(self.descriptor(id)?.clone());
            labels.push(self.labels[id.index()]);
        }
        Ok(Self {
            dim: self.dim,
            descriptors,
            labels,
        })
    }

    pub(crate) fn check_query(&self, q: &BinaryDescriptor) -> Result<()> {
        if q.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: q.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for LabeledDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LabeledDataset")
            .field("dim", &self.dim)
            .field("len", &self.len())
            .finish()
    }
}
