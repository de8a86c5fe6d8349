use alloc::vec::Vec;

use crate::{BinaryDescriptor, DescriptorId, Error, LabeledDataset, Result};

/// A retrieved descriptor and its Hamming distance to the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Neighbour {
    pub distance: u32,
    pub id: DescriptorId,
}

impl Neighbour {
    pub fn new(id: DescriptorId, distance: u32) -> Self {
        Self { distance, id }
    }
}

/// Ranks a candidate set by Hamming distance to `query` and keeps the best `n`.
///
/// `candidates` must not contain duplicates. The result is ordered by
/// `(distance, id)`. `exclude` drops one id from consideration, which is how
/// leave-one-out queries skip themselves.
pub fn select_top_n(
    candidates: &[DescriptorId],
    query: &BinaryDescriptor,
    dataset: &LabeledDataset,
    n: usize,
    exclude: Option<DescriptorId>,
) -> Result<Vec<Neighbour>> {
    select_top_n_counted(candidates, query, dataset, n, exclude).map(|(v, _)| v)
}

/// [`select_top_n`] that also reports how many distances were computed.
pub fn select_top_n_counted(
    candidates: &[DescriptorId],
    query: &BinaryDescriptor,
    dataset: &LabeledDataset,
    n: usize,
    exclude: Option<DescriptorId>,
) -> Result<(Vec<Neighbour>, usize)> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    dataset.check_query(query)?;
    let descriptors = dataset.descriptors();
    let mut scored = Vec::with_capacity(candidates.len());
    for &id in candidates {
        if Some(id) == exclude {
            continue;
        }
        let d = descriptors.get(id.index()).ok_or(Error::InvalidId {
            id: id.0,
            len: dataset.len(),
        })?;
        scored.push(Neighbour::new(id, query.distance_unchecked(d)));
    }
    let evaluated = scored.len();
    if scored.len() > n {
        scored.select_nth_unstable(n - 1);
        scored.truncate(n);
    }
    scored.sort_unstable();
    Ok((scored, evaluated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PointLabel;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(seed: u64, len: usize, dim: usize) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let descriptors = (0..len)
            .map(|_| {
                let bits: Vec<bool> = (0..dim).map(|_| rng.random()).collect();
                BinaryDescriptor::from_bits(&bits)
            })
            .collect();
        LabeledDataset::new(dim, descriptors, vec![PointLabel(0); len]).unwrap()
    }

    #[test]
    fn self_hit_and_empty() {
        let ds = random_dataset(1, 20, 512);
        let q = ds.descriptors()[7].clone();
        assert_eq!(
            select_top_n(&[DescriptorId(7)], &q, &ds, 10, None).unwrap(),
            vec![Neighbour::new(DescriptorId(7), 0)]
        );
        assert!(select_top_n(&[], &q, &ds, 10, None).unwrap().is_empty());
    }

    #[test]
    fn matches_full_sort() {
        // Small dim so distance ties actually occur.
        let ds = random_dataset(2, 300, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let q = ds.descriptors()[rng.random_range(0..300)].clone();
            let mut ids: Vec<DescriptorId> = (0..300).map(DescriptorId).collect();
            for i in (1..ids.len()).rev() {
                ids.swap(i, rng.random_range(0..=i));
            }
            ids.truncate(100);
            let mut oracle: Vec<(u32, u32)> = ids
                .iter()
                .map(|&id| (hamming_loop(&q, &ds.descriptors()[id.index()]), id.0))
                .collect();
            oracle.sort();
            oracle.truncate(10);
            let got: Vec<(u32, u32)> = select_top_n(&ids, &q, &ds, 10, None)
                .unwrap()
                .iter()
                .map(|n| (n.distance, n.id.0))
                .collect();
            assert_eq!(got, oracle);
        }
    }

    fn hamming_loop(a: &BinaryDescriptor, b: &BinaryDescriptor) -> u32 {
        (0..a.dim())
            .filter(|&i| a.test_bit(i).unwrap() != b.test_bit(i).unwrap())
            .count() as u32
    }

    #[test]
    fn exclude_and_errors() {
        let ds = random_dataset(3, 5, 64);
        let q = ds.descriptors()[0].clone();
        let all: Vec<_> = ds.ids().collect();
        let (got, evaluated) =
            select_top_n_counted(&all, &q, &ds, 3, Some(DescriptorId(0))).unwrap();
        assert_eq!(evaluated, 4);
        assert_eq!(got.len(), 3);
        assert!(got.iter().all(|n| n.id != DescriptorId(0)));
        assert!(select_top_n(&all, &q, &ds, 0, None).is_err());
        assert!(matches!(
            select_top_n(&[DescriptorId(5)], &q, &ds, 1, None),
            Err(Error::InvalidId { id: 5, .. })
        ));
        assert!(select_top_n(&all, &BinaryDescriptor::zeros(32), &ds, 1, None).is_err());
    }
}
