//! Per-layer active connections, their weights and momentum buffers.
//!
//! A layer's weights exist only here: one entry per active connection, kept
//! sorted by (out_unit, in_unit) so the CSR view (rows = output units) is
//! rebuildable in a single pass.

use std::cmp::Ordering;
use std::collections::HashSet;

use super::guard::assert_sparse_alloc;
use super::matrix::CsrMatrix;
use super::SparseError;
use crate::{Mat, Real};

/// A connection between an input unit and an output unit of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConnectionIndex {
    pub in_unit: usize,
    pub out_unit: usize,
}

impl ConnectionIndex {
    pub fn new(in_unit: usize, out_unit: usize) -> Self {
        Self { in_unit, out_unit }
    }

    /// Position in the row-major (out_unit, in_unit) enumeration of the
    /// layer's index space. Doubles as the documented tie-break key for
    /// top-k selection.
    pub fn linear(&self, n_in: usize) -> usize {
        self.out_unit * n_in + self.in_unit
    }
}

impl Ord for ConnectionIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.out_unit, self.in_unit).cmp(&(other.out_unit, other.in_unit))
    }
}

impl PartialOrd for ConnectionIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Active connections of one layer together with their weights and momentum.
///
/// Invariants: connections sorted by (out_unit, in_unit) with no duplicates;
/// `weights` and `momentum` are parallel to `connections`.
#[derive(Debug, Clone)]
pub struct ConnectionSet {
    n_in: usize,
    n_out: usize,
    connections: Vec<ConnectionIndex>,
    weights: Vec<Real>,
    momentum: Vec<Real>,
    csr: Option<CsrMatrix>,
}

impl ConnectionSet {
    pub fn empty(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            connections: Vec::new(),
            weights: Vec::new(),
            momentum: Vec::new(),
            csr: None,
        }
    }

    /// Build from an arbitrary connection list. Sorts into canonical order,
    /// rejects out-of-bounds and duplicate entries. Weights and momentum
    /// start at zero.
    pub fn from_connections(
        n_in: usize,
        n_out: usize,
        mut connections: Vec<ConnectionIndex>,
    ) -> Result<Self, SparseError> {
        assert_sparse_alloc(connections.len(), n_in * n_out);
        for c in &connections {
            if c.in_unit >= n_in || c.out_unit >= n_out {
                return Err(SparseError::ConnectionOutOfBounds {
                    in_unit: c.in_unit,
                    out_unit: c.out_unit,
                    n_in,
                    n_out,
                });
            }
        }
        connections.sort_unstable();
        for pair in connections.windows(2) {
            if pair[0] == pair[1] {
                return Err(SparseError::DuplicateConnection {
                    in_unit: pair[0].in_unit,
                    out_unit: pair[0].out_unit,
                });
            }
        }
        let n = connections.len();
        Ok(Self {
            n_in,
            n_out,
            connections,
            weights: vec![0.0; n],
            momentum: vec![0.0; n],
            csr: None,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn len(&self) -> usize {
        self.connections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.connections.is_empty()
    }

    pub fn dense_len(&self) -> usize {
        self.n_in * self.n_out
    }

    pub fn connections(&self) -> &[ConnectionIndex] {
        &self.connections
    }

    pub fn weights(&self) -> &[Real] {
        &self.weights
    }

    pub fn momentum(&self) -> &[Real] {
        &self.momentum
    }

    /// Mutable access to weights and momentum; invalidates the CSR view.
    pub fn values_mut(&mut self) -> (&mut [Real], &mut [Real]) {
        self.csr = None;
        (&mut self.weights, &mut self.momentum)
    }

    pub fn set_weight(&mut self, position: usize, weight: Real) {
        self.csr = None;
        self.weights[position] = weight;
    }

    pub fn contains(&self, conn: ConnectionIndex) -> bool {
        self.connections.binary_search(&conn).is_ok()
    }

    pub fn position(&self, conn: ConnectionIndex) -> Option<usize> {
        self.connections.binary_search(&conn).ok()
    }

    /// Number of active connections into each output unit.
    pub fn fan_in_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_out];
        for c in &self.connections {
            counts[c.out_unit] += 1;
        }
        counts
    }

    /// CSR view with rows = output units, columns = input units. Built on
    /// first use after any mutation, cached until the next one.
    pub fn csr(&mut self) -> &CsrMatrix {
        if self.csr.is_none() {
            let mut row_offsets = vec![0usize; self.n_out + 1];
            for c in &self.connections {
                row_offsets[c.out_unit + 1] += 1;
            }
            for r in 0..self.n_out {
                row_offsets[r + 1] += row_offsets[r];
            }
            let col_indices = self.connections.iter().map(|c| c.in_unit).collect();
            let csr = CsrMatrix::new(
                self.n_out,
                self.n_in,
                row_offsets,
                col_indices,
                self.weights.clone(),
            )
            .expect("canonical connection order yields valid CSR");
            self.csr = Some(csr);
        }
        self.csr.as_ref().unwrap()
    }

    /// Remove the connections at `prune_positions` (sorted, unique indices
    /// into the current list) and insert `grown` (canonically sorted, unique,
    /// disjoint from the surviving set) with weight and momentum zero.
    /// The CSR view is invalidated.
    pub fn apply_prune_grow(
        &mut self,
        prune_positions: &[usize],
        grown: &[ConnectionIndex],
    ) -> Result<(), SparseError> {
        for w in prune_positions.windows(2) {
            if w[0] >= w[1] {
                return Err(SparseError::InvalidMutation(
                    "prune positions must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = prune_positions.last() {
            if last >= self.connections.len() {
                return Err(SparseError::InvalidMutation(format!(
                    "prune position {last} out of range"
                )));
            }
        }
        for w in grown.windows(2) {
            if w[0] >= w[1] {
                return Err(SparseError::InvalidMutation(
                    "grown connections must be sorted and unique".into(),
                ));
            }
        }
        for g in grown {
            if g.in_unit >= self.n_in || g.out_unit >= self.n_out {
                return Err(SparseError::ConnectionOutOfBounds {
                    in_unit: g.in_unit,
                    out_unit: g.out_unit,
                    n_in: self.n_in,
                    n_out: self.n_out,
                });
            }
        }

        let new_len = self.connections.len() - prune_positions.len() + grown.len();
        let mut connections = Vec::with_capacity(new_len);
        let mut weights = Vec::with_capacity(new_len);
        let mut momentum = Vec::with_capacity(new_len);

        let mut prune_iter = prune_positions.iter().copied().peekable();
        let mut grow_iter = grown.iter().copied().peekable();
        for (pos, &conn) in self.connections.iter().enumerate() {
            if prune_iter.peek() == Some(&pos) {
                prune_iter.next();
                continue;
            }
            // merge grown connections that sort before the kept one
            while let Some(&g) = grow_iter.peek() {
                if g < conn {
                    grow_iter.next();
                    connections.push(g);
                    weights.push(0.0);
                    momentum.push(0.0);
                } else if g == conn {
                    return Err(SparseError::DuplicateConnection {
                        in_unit: g.in_unit,
                        out_unit: g.out_unit,
                    });
                } else {
                    break;
                }
            }
            connections.push(conn);
            weights.push(self.weights[pos]);
            momentum.push(self.momentum[pos]);
        }
        for g in grow_iter {
            connections.push(g);
            weights.push(0.0);
            momentum.push(0.0);
        }

        self.connections = connections;
        self.weights = weights;
        self.momentum = momentum;
        self.csr = None;
        Ok(())
    }

    /// Dense materialization (n_out x n_in) for oracles and the
    /// dense-gradient baseline. Takes its own dense allowance.
    pub fn to_dense(&self) -> Mat {
        let _allow = super::guard::allow_dense();
        let mut dense = Mat::zeros((self.n_out, self.n_in));
        for (c, &w) in self.connections.iter().zip(&self.weights) {
            dense[[c.out_unit, c.in_unit]] = w;
        }
        dense
    }
}

/// Deduplicate `sampled` and remove every connection already in `active`.
/// The result is in canonical (out_unit, in_unit) order.
pub fn set_difference(sampled: &[ConnectionIndex], active: &ConnectionSet) -> Vec<ConnectionIndex> {
    assert_sparse_alloc(sampled.len(), active.dense_len());
    let mut seen: HashSet<ConnectionIndex> = HashSet::with_capacity(sampled.len());
    let mut out: Vec<ConnectionIndex> = Vec::with_capacity(sampled.len());
    for &c in sampled {
        if seen.insert(c) && !active.contains(c) {
            out.push(c);
        }
    }
    out.sort_unstable();
    out
}

/// Signed gradient of each listed connection: for (a, b), the dot product of
/// input row a with output-gradient row b over the batch. Never touches the
/// layer's full index space.
pub fn gather_connection_grads(pairs: &[ConnectionIndex], h_prev: &Mat, delta: &Mat) -> Vec<Real> {
    debug_assert_eq!(h_prev.ncols(), delta.ncols(), "batch dimensions must agree");
    assert_sparse_alloc(pairs.len(), h_prev.nrows() * delta.nrows());
    pairs
        .iter()
        .map(|c| {
            let h_row = h_prev.row(c.in_unit);
            let d_row = delta.row(c.out_unit);
            h_row.iter().zip(d_row.iter()).map(|(h, d)| h * d).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn conns(pairs: &[(usize, usize)]) -> Vec<ConnectionIndex> {
        pairs.iter().map(|&(a, b)| ConnectionIndex::new(a, b)).collect()
    }

    #[test]
    fn canonical_order_is_by_out_then_in() {
        let set = ConnectionSet::from_connections(3, 3, conns(&[(2, 0), (0, 1), (1, 0)])).unwrap();
        assert_eq!(set.connections(), &conns(&[(1, 0), (2, 0), (0, 1)])[..]);
    }

    #[test]
    fn duplicates_are_rejected() {
        let err = ConnectionSet::from_connections(2, 2, conns(&[(0, 1), (0, 1)])).unwrap_err();
        assert!(matches!(err, SparseError::DuplicateConnection { .. }));
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let err = ConnectionSet::from_connections(2, 2, conns(&[(2, 0)])).unwrap_err();
        assert!(matches!(err, SparseError::ConnectionOutOfBounds { .. }));
    }

    #[test]
    fn set_difference_dedups_and_excludes_active() {
        let active = ConnectionSet::from_connections(3, 3, conns(&[(2, 0)])).unwrap();
        let sampled = conns(&[(0, 1), (0, 1), (2, 0)]);
        assert_eq!(set_difference(&sampled, &active), conns(&[(0, 1)]));
    }

    #[test]
    fn set_difference_of_active_with_itself_is_empty() {
        let active = ConnectionSet::from_connections(3, 3, conns(&[(0, 0), (1, 2)])).unwrap();
        let sampled = active.connections().to_vec();
        assert!(set_difference(&sampled, &active).is_empty());
    }

    #[test]
    fn set_difference_matches_quadratic_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 24;
        let active_conns: Vec<ConnectionIndex> = (0..n)
            .flat_map(|a| (0..n).map(move |b| ConnectionIndex::new(a, b)))
            .filter(|_| rng.gen_bool(0.2))
            .collect();
        let active = ConnectionSet::from_connections(n, n, active_conns.clone()).unwrap();
        let sampled: Vec<ConnectionIndex> = (0..1000)
            .map(|_| ConnectionIndex::new(rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();

        let got = set_difference(&sampled, &active);

        // naive: unique sampled pairs minus linear scan of active
        let mut expected: Vec<ConnectionIndex> = Vec::new();
        for &s in &sampled {
            if !expected.contains(&s) && !active_conns.iter().any(|&a| a == s) {
                expected.push(s);
            }
        }
        expected.sort_unstable();
        assert_eq!(got, expected);
        assert!(got.len() <= sampled.len());
    }

    #[test]
    fn gather_grads_scalar_case() {
        let h = array![[2.0]];
        let d = array![[3.0]];
        let grads = gather_connection_grads(&conns(&[(0, 0)]), &h, &d);
        assert_eq!(grads, vec![6.0]);
    }

    #[test]
    fn gather_grads_zero_row_is_zero() {
        let h = array![[0.0, 0.0], [1.0, 2.0]];
        let d = array![[4.0, 5.0]];
        let grads = gather_connection_grads(&conns(&[(0, 0)]), &h, &d);
        assert_eq!(grads, vec![0.0]);
    }

    #[test]
    fn gather_grads_matches_dense_outer_product() {
        use ndarray::Array2;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (n_in, n_out, b) = (12, 9, 5);
        let h = Array2::from_shape_fn((n_in, b), |_| rng.gen_range(-1.0..1.0));
        let d = Array2::from_shape_fn((n_out, b), |_| rng.gen_range(-1.0..1.0));
        let pairs: Vec<ConnectionIndex> = (0..50)
            .map(|_| ConnectionIndex::new(rng.gen_range(0..n_in), rng.gen_range(0..n_out)))
            .collect();

        let got = gather_connection_grads(&pairs, &h, &d);
        let full = h.dot(&d.t()); // n_in x n_out oracle
        for (pair, g) in pairs.iter().zip(&got) {
            let want = full[[pair.in_unit, pair.out_unit]];
            assert!((g - want).abs() <= 1e-6 * want.abs().max(1.0));
        }
    }

    #[test]
    fn apply_prune_grow_merges_in_order() {
        let mut set =
            ConnectionSet::from_connections(3, 3, conns(&[(1, 0), (2, 0), (0, 1), (1, 2)])).unwrap();
        {
            let (w, _) = set.values_mut();
            w.copy_from_slice(&[0.73, -0.2, -0.48, -0.46]);
        }
        // prune (2,0) at position 1; grow (2,1)
        set.apply_prune_grow(&[1], &conns(&[(2, 1)])).unwrap();
        assert_eq!(set.connections(), &conns(&[(1, 0), (0, 1), (2, 1), (1, 2)])[..]);
        assert_eq!(set.weights(), &[0.73, -0.48, 0.0, -0.46]);
        assert_eq!(set.momentum(), &[0.0; 4]);
    }

    #[test]
    fn apply_prune_grow_rejects_regrowing_active() {
        let mut set = ConnectionSet::from_connections(3, 3, conns(&[(1, 0)])).unwrap();
        let err = set.apply_prune_grow(&[], &conns(&[(1, 0)])).unwrap_err();
        assert!(matches!(err, SparseError::DuplicateConnection { .. }));
    }

    #[test]
    fn csr_view_tracks_mutations() {
        let mut set = ConnectionSet::from_connections(2, 2, conns(&[(0, 0), (1, 1)])).unwrap();
        set.set_weight(0, 5.0);
        assert_eq!(set.csr().values, vec![5.0, 0.0]);
        set.apply_prune_grow(&[0], &conns(&[(1, 0)])).unwrap();
        let csr = set.csr();
        assert_eq!(csr.row_offsets, vec![0, 1, 2]);
        assert_eq!(csr.col_indices, vec![1, 1]);
    }
}
