//! Sparse topology initialization: Erdős–Rényi per-layer connection counts,
//! uniform-without-replacement pattern sampling, and the model-level sparsity
//! solve for epsilon.

use rand::Rng;

use super::DstError;
use crate::sparse::{ConnectionIndex, ConnectionSet};
use crate::Real;

/// How the global sparsity budget is assigned across layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityAssignment {
    /// Per-layer count `ceil(epsilon * (n_in + n_out))`: active connections
    /// scale linearly with layer width.
    ErdosRenyi,
    /// Every layer keeps the same density.
    Uniform,
}

/// Active-connection count of an Erdős–Rényi layer, before clamping.
pub fn erdos_renyi_count(n_in: usize, n_out: usize, epsilon: f64) -> usize {
    (epsilon * (n_in + n_out) as f64).ceil() as usize
}

/// Sample `count` distinct connections uniformly from the `n_in * n_out`
/// grid (Floyd's algorithm, O(count) expected), returned in canonical order.
pub fn sample_connection_pattern<R: Rng + ?Sized>(
    n_in: usize,
    n_out: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<ConnectionIndex>, DstError> {
    let total = n_in * n_out;
    if count > total {
        return Err(DstError::InfeasibleSparsity(format!(
            "{count} connections requested from a {n_in}x{n_out} layer"
        )));
    }
    let mut chosen: std::collections::HashSet<usize> =
        std::collections::HashSet::with_capacity(count);
    for j in (total - count)..total {
        let pick = rng.gen_range(0..=j);
        if !chosen.insert(pick) {
            chosen.insert(j);
        }
    }
    let mut linear: Vec<usize> = chosen.into_iter().collect();
    linear.sort_unstable();
    Ok(linear
        .into_iter()
        .map(|lin| ConnectionIndex::new(lin % n_in, lin / n_in))
        .collect())
}

/// Erdős–Rényi layer initialization: exactly `ceil(epsilon * (n_in + n_out))`
/// distinct connections sampled uniformly without replacement. Weights are
/// left unset (zero).
pub fn erdos_renyi_init<R: Rng + ?Sized>(
    n_in: usize,
    n_out: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<ConnectionSet, DstError> {
    let count = erdos_renyi_count(n_in, n_out, epsilon);
    let pattern = sample_connection_pattern(n_in, n_out, count, rng)?;
    Ok(ConnectionSet::from_connections(n_in, n_out, pattern)?)
}

fn er_total(dims: &[(usize, usize)], epsilon: f64) -> usize {
    dims.iter()
        .map(|&(n, m)| erdos_renyi_count(n, m, epsilon).min(n * m))
        .sum()
}

/// Solve for the epsilon whose per-layer Erdős–Rényi counts (clamped at each
/// layer's dense size) meet the global sparsity target as closely as the
/// count's step structure allows, normally within one connection.
pub fn solve_epsilon(dims: &[(usize, usize)], target_sparsity: Real) -> Result<f64, DstError> {
    if dims.is_empty() {
        return Err(DstError::InfeasibleSparsity("model has no sparse layers".into()));
    }
    if !(0.0..1.0).contains(&target_sparsity) {
        return Err(DstError::InfeasibleSparsity(format!(
            "target sparsity {target_sparsity} outside [0, 1)"
        )));
    }
    let dense_total: usize = dims.iter().map(|&(n, m)| n * m).sum();
    let target = ((1.0 - target_sparsity as f64) * dense_total as f64).round() as usize;
    if target < dims.len() {
        return Err(DstError::InfeasibleSparsity(format!(
            "target of {target} active connections cannot cover {} layers",
            dims.len()
        )));
    }

    let mut lo = 0.0f64;
    let mut hi = dims
        .iter()
        .map(|&(n, m)| n as f64 * m as f64 / (n + m) as f64)
        .fold(0.0, f64::max);
    if er_total(dims, hi) < target {
        return Err(DstError::InfeasibleSparsity(format!(
            "target {target} exceeds the dense total {dense_total}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if er_total(dims, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // hi is the smallest bracketed epsilon reaching the target; lo sits one
    // count step below. Return whichever lands closer.
    let hi_miss = er_total(dims, hi).abs_diff(target);
    let lo_miss = er_total(dims, lo).abs_diff(target);
    Ok(if lo_miss < hi_miss { lo } else { hi })
}

/// Per-layer active counts for a sparsity target under the chosen assignment,
/// clamped to each layer's dense size with a floor of one connection.
pub fn layer_counts(
    dims: &[(usize, usize)],
    target_sparsity: Real,
    assignment: SparsityAssignment,
) -> Result<Vec<usize>, DstError> {
    match assignment {
        SparsityAssignment::ErdosRenyi => {
            let epsilon = solve_epsilon(dims, target_sparsity)?;
            Ok(dims
                .iter()
                .map(|&(n, m)| erdos_renyi_count(n, m, epsilon).min(n * m))
                .collect())
        }
        SparsityAssignment::Uniform => {
            let density = 1.0 - target_sparsity as f64;
            Ok(dims
                .iter()
                .map(|&(n, m)| {
                    let dense = n * m;
                    ((density * dense as f64).round() as usize).clamp(1, dense)
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn four_connections_on_a_three_by_three_layer() {
        // epsilon 2/3 on a 3x3 layer: ceil(2/3 * 6) = 4 active connections
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = erdos_renyi_init(3, 3, 2.0 / 3.0, &mut rng).unwrap();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn saturated_epsilon_gives_dense_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // epsilon * (n + m) = n * m  =>  fully dense
        let set = erdos_renyi_init(4, 4, 2.0, &mut rng).unwrap();
        assert_eq!(set.len(), 16);
    }

    #[test]
    fn oversubscription_is_infeasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            erdos_renyi_init(2, 2, 2.0, &mut rng),
            Err(DstError::InfeasibleSparsity(_))
        ));
    }

    #[test]
    fn inclusion_frequencies_are_uniform() {
        // 100x100 at epsilon=1: 200 of 10000 cells per draw. Over many seeds
        // each cell's inclusion rate should be ~0.02 within 3 standard errors
        // when pooled.
        let (n, m, reps) = (100usize, 100usize, 100usize);
        let mut hits = vec![0u32; n * m];
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let set = erdos_renyi_init(n, m, 1.0, &mut rng).unwrap();
            assert_eq!(set.len(), 200);
            for c in set.connections() {
                hits[c.linear(n)] += 1;
            }
        }
        let p = 200.0 / 10_000.0f64;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        let mean_rate = hits.iter().map(|&h| h as f64 / reps as f64).sum::<f64>() / (n * m) as f64;
        assert!((mean_rate - p).abs() < 1e-12, "counts must be exact");
        // per-cell: allow the usual few outliers beyond 3 SE, but not many
        let outliers = hits
            .iter()
            .filter(|&&h| ((h as f64 / reps as f64) - p).abs() > 3.0 * se)
            .count();
        assert!(
            outliers < (n * m) / 100,
            "{outliers} of {} cells beyond 3 standard errors",
            n * m
        );
    }

    #[test]
    fn epsilon_arithmetic_forced_case() {
        // single 10x10 layer, target sparsity 0.8: 20 active = epsilon 1.0
        let eps = solve_epsilon(&[(10, 10)], 0.8).unwrap();
        assert_eq!(erdos_renyi_count(10, 10, eps), 20);
    }

    #[test]
    fn zero_target_saturates_all_layers() {
        let dims = [(10, 10), (4, 6)];
        let eps = solve_epsilon(&dims, 0.0).unwrap();
        for (n, m) in dims {
            assert_eq!(erdos_renyi_count(n, m, eps).min(n * m), n * m);
        }
    }

    #[test]
    fn mlp_sparsity_targets_are_met() {
        let dims = [(784, 256), (256, 256), (256, 10)];
        let dense: usize = dims.iter().map(|&(n, m)| n * m).sum();
        for target in [0.90, 0.95, 0.98] {
            let eps = solve_epsilon(&dims, target).unwrap();
            let active = er_total(&dims, eps);
            let achieved = 1.0 - active as f64 / dense as f64;
            assert!(
                (achieved - target as f64).abs() <= 2e-4,
                "target {target}: achieved {achieved}"
            );
        }
    }

    #[test]
    fn uniform_assignment_keeps_per_layer_density() {
        let dims = [(100, 100), (50, 20)];
        let counts = layer_counts(&dims, 0.9, SparsityAssignment::Uniform).unwrap();
        assert_eq!(counts, vec![1000, 100]);
    }

    #[test]
    fn pattern_is_deterministic_per_seed() {
        let a = sample_connection_pattern(30, 20, 100, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_connection_pattern(30, 20, 100, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
