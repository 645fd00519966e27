//! Brute-force check that summing a random scalar encoding of a finite
//! domain separates all multisets up to a given size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest enumeration [`sum_encoding_injectivity`] accepts.
pub const ENUMERATION_BUDGET: u128 = 100_000;
/// Two sums closer than this count as a collision.
pub const COLLISION_TOL: f64 = 1e-12;

/// Number of multisets of size `0..=max_card` over `domain_size` symbols,
/// `C(domain_size + max_card, max_card)`.
pub fn multiset_count(domain_size: usize, max_card: usize) -> u128 {
    let (n, k) = ((domain_size + max_card) as u128, max_card as u128);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
        if c > u128::MAX / 1024 {
            return u128::MAX;
        }
    }
    c
}

/// All multisets of size `0..=max_card` as nondecreasing index lists.
pub fn enumerate_multisets(domain_size: usize, max_card: usize) -> Result<Vec<Vec<usize>>> {
    let needed = multiset_count(domain_size, max_card);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::Budget {
            needed,
            budget: ENUMERATION_BUDGET,
        });
    }
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_card {
        let mut next = Vec::new();
        for ms in &frontier {
            let from = ms.last().copied().unwrap_or(0);
            for sym in from..domain_size {
                let mut grown: Vec<usize> = ms.clone();
                grown.push(sym);
                next.push(grown);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// True iff every pair of distinct multisets gets sums farther apart than
/// [`COLLISION_TOL`] under `encoding[symbol]`.
pub fn sums_are_distinct(encoding: &[f64], max_card: usize) -> Result<bool> {
    let multisets = enumerate_multisets(encoding.len(), max_card)?;
    let mut sums: Vec<f64> = multisets
        .iter()
        .map(|ms| ms.iter().map(|&s| encoding[s]).sum())
        .collect();
    sums.sort_by(f64::total_cmp);
    Ok(sums.windows(2).all(|w| w[1] - w[0] > COLLISION_TOL))
}

/// Draws `φ(symbol) ~ Uniform[0, 1]` and checks that sum aggregation is
/// injective on all multisets of size at most `max_card`.
pub fn sum_encoding_injectivity(domain_size: usize, max_card: usize, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoding: Vec<f64> = (0..domain_size).map(|_| rng.random::<f64>()).collect();
    sums_are_distinct(&encoding, max_card)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(multiset_count(6, 4), 210);
        assert_eq!(enumerate_multisets(6, 4).unwrap().len(), 210);
        assert_eq!(enumerate_multisets(1, 3).unwrap().len(), 4);
        assert_eq!(enumerate_multisets(3, 0).unwrap(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn enumeration_has_no_duplicates() {
        let mut all = enumerate_multisets(4, 3).unwrap();
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }

    #[test]
    fn single_symbol() {
        assert!(sums_are_distinct(&[0.37], 3).unwrap());
    }

    #[test]
    fn constructed_collision() {
        // {1} and {0, 0} collide when φ(1) = 2·φ(0).
        assert!(!sums_are_distinct(&[0.2, 0.4, 0.77], 2).unwrap());
    }

    #[test]
    fn budget() {
        assert!(matches!(
            sum_encoding_injectivity(50, 10, 0),
            Err(Error::Budget { .. })
        ));
    }
}
