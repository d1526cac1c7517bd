//! Small combinatorial helpers shared by the network and physical layers.

use itertools::Itertools;

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
///
/// Exact in `u128`; overflow is not a concern for the network sizes the
/// constructions are run on.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1) at this point
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `C(n, k)` as a float, for load and rate formulas.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial(n, k) as f64
}

/// All `k`-subsets of `{0, .., n-1}` as sorted vectors, in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n).combinations(k).collect()
}

/// Whether a sorted, duplicate-free index vector is a subset of `{0, .., n-1}`.
pub fn is_canonical_subset(set: &[usize], n: usize) -> bool {
    set.windows(2).all(|w| w[0] < w[1]) && set.last().is_none_or(|&x| x < n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(100, 50), 100891344545564193334812497256);
    }

    #[test]
    fn subsets_match_binomial() {
        for n in 0..7 {
            for k in 0..=n {
                let s = subsets(n, k);
                assert_eq!(s.len() as u128, binomial(n, k));
                assert!(s.iter().all(|x| is_canonical_subset(x, n) && x.len() == k));
            }
        }
    }

    #[test]
    fn canonical_subset_rejects_duplicates_and_range() {
        assert!(is_canonical_subset(&[], 0));
        assert!(is_canonical_subset(&[0, 2], 3));
        assert!(!is_canonical_subset(&[2, 0], 3));
        assert!(!is_canonical_subset(&[1, 1], 3));
        assert!(!is_canonical_subset(&[0, 3], 3));
    }
}
