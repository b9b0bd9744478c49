use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::Dataset;
use crate::error::{Error, Result};

/// Disjoint train/calibration index sets covering a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub calib: Vec<usize>,
}

/// Uniformly random partition with `floor(n * calib_fraction)` calibration
/// indices. Each index set is returned in ascending order.
pub fn split_dataset(data: &Dataset, calib_fraction: f64, seed: u64) -> Result<SplitIndices> {
    let n = data.len();
    if !(calib_fraction > 0.0 && calib_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "calibration fraction {calib_fraction} must lie in (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("cannot split {n} records")));
    }
    let n_calib = (n as f64 * calib_fraction).floor() as usize;
    if n_calib == 0 || n_calib == n {
        return Err(Error::InvalidInput(format!(
            "fraction {calib_fraction} of {n} records leaves an empty side"
        )));
    }
    let mut parts = random_partition(n, &[n - n_calib, n_calib], seed)?;
    let calib = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(SplitIndices { train, calib })
}

/// Random partition of `0..n` into consecutive blocks of the given sizes
/// (which must sum to `n`), each sorted ascending.
pub fn random_partition(n: usize, sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    if sizes.iter().sum::<usize>() != n {
        return Err(Error::InvalidInput(format!(
            "partition sizes {sizes:?} do not sum to {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &size in sizes {
        let mut block = perm[start..start + size].to_vec();
        block.sort_unstable();
        out.push(block);
        start += size;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::ObservedRecord;
    use proptest::prelude::*;

    fn dummy(n: usize) -> Dataset {
        Dataset::new(
            0,
            (0..n)
                .map(|i| ObservedRecord::new(vec![], 1.0 + i as f64, true).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn sizes_follow_floor_rule() {
        let s = split_dataset(&dummy(10), 0.5, 7).unwrap();
        assert_eq!(s.train.len(), 5);
        assert_eq!(s.calib.len(), 5);
        let s = split_dataset(&dummy(3), 0.5, 7).unwrap();
        assert_eq!(s.calib.len(), 1);
        assert_eq!(s.train.len(), 2);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = split_dataset(&dummy(50), 0.3, 11).unwrap();
        let b = split_dataset(&dummy(50), 0.3, 11).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&dummy(50), 0.3, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(split_dataset(&dummy(1), 0.5, 0).is_err());
        assert!(split_dataset(&dummy(10), 0.0, 0).is_err());
        assert!(split_dataset(&dummy(10), 1.0, 0).is_err());
        assert!(split_dataset(&dummy(3), 0.2, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let data = dummy(n);
            if let Ok(s) = split_dataset(&data, frac, seed) {
                let mut all: Vec<usize> = s.train.iter().chain(&s.calib).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert!(!s.train.is_empty() && !s.calib.is_empty());
            }
        }
    }
}
