//! Top-k selection via the standard library's introselect
//! (`select_nth_unstable_by`): O(n) average, with ties broken toward the
//! lower index so runs are deterministic.

use super::SparseError;
use crate::Real;

/// Indices of the `k` largest values in rank order (best first), same
/// tie-break as [`select_top_k`].
pub(crate) fn rank_top_k(values: &[Real], k: usize) -> Result<Vec<usize>, SparseError> {
    if k > values.len() {
        return Err(SparseError::SelectionBounds {
            k,
            len: values.len(),
        });
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then_with(|| a.cmp(b));
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < values.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    Ok(idx)
}

/// Indices of the `k` largest values. Equal values are ranked by ascending
/// index; the returned indices are sorted ascending.
pub fn select_top_k(values: &[Real], k: usize) -> Result<Vec<usize>, SparseError> {
    if k > values.len() {
        return Err(SparseError::SelectionBounds {
            k,
            len: values.len(),
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if k < values.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            values[b].total_cmp(&values[a]).then_with(|| a.cmp(&b))
        });
        idx.truncate(k);
    }
    idx.sort_unstable();
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Full-sort oracle with the same tie-break rule.
    fn top_k_by_sort(values: &[Real], k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then_with(|| a.cmp(&b)));
        idx.truncate(k);
        idx.sort_unstable();
        idx
    }

    #[test]
    fn basic_case() {
        assert_eq!(select_top_k(&[3.0, 1.0, 2.0], 2).unwrap(), vec![0, 2]);
    }

    #[test]
    fn k_zero_is_empty() {
        assert!(select_top_k(&[1.0, 2.0], 0).unwrap().is_empty());
    }

    #[test]
    fn k_beyond_len_is_an_error() {
        assert!(matches!(
            select_top_k(&[1.0], 2),
            Err(SparseError::SelectionBounds { k: 2, len: 1 })
        ));
    }

    #[test]
    fn ties_break_toward_lower_index() {
        assert_eq!(select_top_k(&[5.0, 5.0, 5.0, 5.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(select_top_k(&[1.0, 5.0, 5.0, 0.0], 1).unwrap(), vec![1]);
    }

    #[test]
    fn matches_sort_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let n = rng.gen_range(1..=10_000);
            // coarse values force plenty of ties
            let values: Vec<Real> = (0..n).map(|_| rng.gen_range(0..64) as Real).collect();
            let k = rng.gen_range(0..=n);
            assert_eq!(select_top_k(&values, k).unwrap(), top_k_by_sort(&values, k));
        }
    }
}
