//! COO/CSR sparse matrix storage and sparse-times-dense multiply kernels,
//! plus the cache-blocked dense baseline used by the kernel benchmark.

use rayon::prelude::*;

use super::SparseError;
use crate::{Mat, Real};

/// Compressed sparse row matrix. `row_offsets` has length `n_rows + 1` with
/// `row_offsets[0] == 0`; column indices are strictly increasing within each
/// row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<Real>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<Real>,
    ) -> Result<Self, SparseError> {
        if row_offsets.len() != n_rows + 1 {
            return Err(SparseError::InvalidCsr(format!(
                "row_offsets length {} for {} rows",
                row_offsets.len(),
                n_rows
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != col_indices.len() {
            return Err(SparseError::InvalidCsr(
                "row_offsets endpoints must be 0 and nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(SparseError::InvalidCsr(
                "col_indices and values lengths differ".into(),
            ));
        }
        for r in 0..n_rows {
            if row_offsets[r] > row_offsets[r + 1] || row_offsets[r + 1] > col_indices.len() {
                return Err(SparseError::InvalidCsr(format!(
                    "row_offsets inconsistent at row {r}"
                )));
            }
        }
        for r in 0..n_rows {
            let row = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            for pair in row.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(SparseError::InvalidCsr(format!(
                        "columns not strictly increasing in row {r}"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last >= n_cols {
                    return Err(SparseError::InvalidCsr(format!(
                        "column {last} out of bounds in row {r}"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn to_coo(&self) -> CooMatrix {
        let mut rows = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for _ in self.row_offsets[r]..self.row_offsets[r + 1] {
                rows.push(r);
            }
        }
        CooMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            rows,
            cols: self.col_indices.clone(),
            values: self.values.clone(),
        }
    }
}

/// Coordinate-format sparse matrix; entries need not be sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<Real>,
}

impl CooMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_csr(&self) -> Result<CsrMatrix, SparseError> {
        let mut order: Vec<usize> = (0..self.nnz()).collect();
        order.sort_unstable_by_key(|&e| (self.rows[e], self.cols[e]));
        let mut row_offsets = vec![0usize; self.n_rows + 1];
        for &r in &self.rows {
            if r >= self.n_rows {
                return Err(SparseError::InvalidCsr(format!("row {r} out of bounds")));
            }
            row_offsets[r + 1] += 1;
        }
        for r in 0..self.n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        let col_indices = order.iter().map(|&e| self.cols[e]).collect();
        let values = order.iter().map(|&e| self.values[e]).collect();
        CsrMatrix::new(self.n_rows, self.n_cols, row_offsets, col_indices, values)
    }
}

fn check_spmm_shapes(rows_needed: usize, dense: &Mat, side: &str) -> Result<(), SparseError> {
    if dense.nrows() != rows_needed {
        return Err(SparseError::ShapeMismatch(format!(
            "{side}: sparse expects dense with {rows_needed} rows, got {}",
            dense.nrows()
        )));
    }
    Ok(())
}

/// Sparse times dense: `out[r, j] = sum over (r, c) of value * dense[c, j]`.
/// Cost is O(nnz * B).
pub fn spmm(m: &CsrMatrix, dense: &Mat) -> Result<Mat, SparseError> {
    check_spmm_shapes(m.n_cols, dense, "spmm")?;
    let b = dense.ncols();
    let dense = dense.as_standard_layout();
    let dense_s = dense.as_slice().unwrap();
    let mut out = Mat::zeros((m.n_rows, b));
    let out_s = out.as_slice_mut().unwrap();
    for r in 0..m.n_rows {
        let acc = &mut out_s[r * b..(r + 1) * b];
        for e in m.row_offsets[r]..m.row_offsets[r + 1] {
            let v = m.values[e];
            let src = &dense_s[m.col_indices[e] * b..m.col_indices[e] * b + b];
            for (a, s) in acc.iter_mut().zip(src) {
                *a += v * s;
            }
        }
    }
    Ok(out)
}

/// Row-parallel variant of [`spmm`]. Each output row is an independent
/// reduction, so results are bitwise identical to the sequential kernel.
pub fn spmm_parallel(m: &CsrMatrix, dense: &Mat) -> Result<Mat, SparseError> {
    check_spmm_shapes(m.n_cols, dense, "spmm")?;
    let b = dense.ncols();
    let dense = dense.as_standard_layout();
    let dense_s = dense.as_slice().unwrap();
    let mut out = Mat::zeros((m.n_rows, b));
    out.as_slice_mut()
        .unwrap()
        .par_chunks_mut(b)
        .enumerate()
        .for_each(|(r, acc)| {
            for e in m.row_offsets[r]..m.row_offsets[r + 1] {
                let v = m.values[e];
                let src = &dense_s[m.col_indices[e] * b..m.col_indices[e] * b + b];
                for (a, s) in acc.iter_mut().zip(src) {
                    *a += v * s;
                }
            }
        });
    Ok(out)
}

/// Transposed product: `out[c, j] = sum over (r, c) of value * dense[r, j]`,
/// i.e. the same sparse matrix applied from the transposed side.
pub fn spmm_transposed(m: &CsrMatrix, dense: &Mat) -> Result<Mat, SparseError> {
    check_spmm_shapes(m.n_rows, dense, "spmm_transposed")?;
    let b = dense.ncols();
    let dense = dense.as_standard_layout();
    let dense_s = dense.as_slice().unwrap();
    let mut out = Mat::zeros((m.n_cols, b));
    let out_s = out.as_slice_mut().unwrap();
    for r in 0..m.n_rows {
        let src = &dense_s[r * b..(r + 1) * b];
        for e in m.row_offsets[r]..m.row_offsets[r + 1] {
            let v = m.values[e];
            let acc = &mut out_s[m.col_indices[e] * b..m.col_indices[e] * b + b];
            for (a, s) in acc.iter_mut().zip(src) {
                *a += v * s;
            }
        }
    }
    Ok(out)
}

/// COO times dense, used for the format comparison benchmark.
pub fn spmm_coo(m: &CooMatrix, dense: &Mat) -> Result<Mat, SparseError> {
    check_spmm_shapes(m.n_cols, dense, "spmm_coo")?;
    let b = dense.ncols();
    let dense = dense.as_standard_layout();
    let dense_s = dense.as_slice().unwrap();
    let mut out = Mat::zeros((m.n_rows, b));
    let out_s = out.as_slice_mut().unwrap();
    for e in 0..m.nnz() {
        let v = m.values[e];
        let src = &dense_s[m.cols[e] * b..m.cols[e] * b + b];
        let acc = &mut out_s[m.rows[e] * b..m.rows[e] * b + b];
        for (a, s) in acc.iter_mut().zip(src) {
            *a += v * s;
        }
    }
    Ok(out)
}

/// Dense matmul baseline: straightforward kernel with blocking over the
/// shared dimension so the streamed panel of `b` stays cache resident.
pub fn dense_matmul_blocked(a: &Mat, b: &Mat) -> Result<Mat, SparseError> {
    if a.ncols() != b.nrows() {
        return Err(SparseError::ShapeMismatch(format!(
            "dense matmul: {}x{} times {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    const K_BLOCK: usize = 256;
    let (n, m) = (a.nrows(), a.ncols());
    let width = b.ncols();
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let a_s = a.as_slice().unwrap();
    let b_s = b.as_slice().unwrap();
    let mut out = Mat::zeros((n, width));
    let out_s = out.as_slice_mut().unwrap();
    let mut k0 = 0;
    while k0 < m {
        let k1 = (k0 + K_BLOCK).min(m);
        for i in 0..n {
            let a_row = &a_s[i * m..(i + 1) * m];
            let acc = &mut out_s[i * width..(i + 1) * width];
            for k in k0..k1 {
                let v = a_row[k];
                let src = &b_s[k * width..k * width + width];
                for (o, s) in acc.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        k0 = k1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{ConnectionIndex, ConnectionSet};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, rng: &mut ChaCha8Rng) -> ConnectionSet {
        let conns: Vec<ConnectionIndex> = (0..n)
            .flat_map(|a| (0..n).map(move |b| ConnectionIndex::new(a, b)))
            .filter(|_| rng.gen_bool(density))
            .collect();
        let mut set = ConnectionSet::from_connections(n, n, conns).unwrap();
        let k = set.len();
        let (w, _) = set.values_mut();
        for v in w.iter_mut().take(k) {
            *v = rng.gen_range(-1.0..1.0);
        }
        set
    }

    #[test]
    fn identity_pattern_reproduces_input() {
        let conns: Vec<ConnectionIndex> = (0..4).map(|i| ConnectionIndex::new(i, i)).collect();
        let mut set = ConnectionSet::from_connections(4, 4, conns).unwrap();
        {
            let (w, _) = set.values_mut();
            w.fill(1.0);
        }
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as Real);
        let y = spmm(set.csr(), &x).unwrap();
        assert_eq!(y, x);
        let yt = spmm_transposed(set.csr(), &x).unwrap();
        assert_eq!(yt, x);
    }

    #[test]
    fn empty_pattern_gives_zero_output() {
        let mut set = ConnectionSet::empty(5, 4);
        let x = Array2::from_elem((5, 2), 1.5);
        let y = spmm(set.csr(), &x).unwrap();
        assert_eq!(y, Array2::zeros((4, 2)));
    }

    #[test]
    fn spmm_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut set = random_sparse(16, 0.1, &mut rng);
        let x = Array2::from_shape_fn((16, 4), |_| rng.gen_range(-1.0..1.0));
        let got = spmm(set.csr(), &x).unwrap();
        let dense = set.to_dense();
        let want = dense.dot(&x);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0));
        }
    }

    #[test]
    fn spmm_transposed_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut set = random_sparse(16, 0.1, &mut rng);
        let x = Array2::from_shape_fn((16, 4), |_| rng.gen_range(-1.0..1.0));
        let got = spmm_transposed(set.csr(), &x).unwrap();
        let want = set.to_dense().t().dot(&x);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0));
        }
    }

    #[test]
    fn all_kernels_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut set = random_sparse(24, 0.2, &mut rng);
        let x = Array2::from_shape_fn((24, 8), |_| rng.gen_range(-1.0..1.0));
        let a = spmm(set.csr(), &x).unwrap();
        let b = spmm_parallel(set.csr(), &x).unwrap();
        let coo = set.csr().to_coo();
        let c = spmm_coo(&coo, &x).unwrap();
        let d = dense_matmul_blocked(&set.to_dense(), &x).unwrap();
        assert_eq!(a, b, "parallel kernel must be bitwise identical");
        for ((ga, gc), gd) in a.iter().zip(c.iter()).zip(d.iter()) {
            assert!((ga - gc).abs() <= 1e-9);
            assert!((ga - gd).abs() <= 1e-6 * gd.abs().max(1.0));
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut set = ConnectionSet::empty(3, 2);
        let x = Array2::zeros((4, 2));
        assert!(matches!(spmm(set.csr(), &x), Err(SparseError::ShapeMismatch(_))));
    }

    #[test]
    fn coo_csr_round_trip_preserves_entries() {
        let coo = CooMatrix {
            n_rows: 3,
            n_cols: 4,
            rows: vec![2, 0, 1, 0],
            cols: vec![3, 1, 0, 0],
            values: vec![4.0, 2.0, 3.0, 1.0],
        };
        let csr = coo.to_csr().unwrap();
        let back = csr.to_coo();
        assert_eq!(back.rows, vec![0, 0, 1, 2]);
        assert_eq!(back.cols, vec![0, 1, 0, 3]);
        assert_eq!(back.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(csr.to_coo().to_csr().unwrap(), csr);
    }

    #[test]
    fn invalid_csr_is_rejected() {
        let err = CsrMatrix::new(2, 2, vec![0, 2, 1], vec![0], vec![1.0]).unwrap_err();
        assert!(matches!(err, SparseError::InvalidCsr(_)));
        let err = CsrMatrix::new(1, 2, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, SparseError::InvalidCsr(_)));
    }

    #[test]
    fn blocked_dense_matmul_matches_ndarray() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = Array2::from_shape_fn((33, 50), |_| rng.gen_range(-1.0..1.0));
        let b = Array2::from_shape_fn((50, 7), |_| rng.gen_range(-1.0..1.0));
        let got = dense_matmul_blocked(&a, &b).unwrap();
        let want = a.dot(&b);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0));
        }
    }

    #[test]
    fn spmm_mini_example() {
        // 2x3 pattern {(0,0)->2, (2,0)->1, (1,1)->-1} applied to 3x2 input
        let csr = CsrMatrix::new(2, 3, vec![0, 2, 3], vec![0, 2, 1], vec![2.0, 1.0, -1.0]).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let y = spmm(&csr, &x).unwrap();
        assert_eq!(y, array![[7.0, 10.0], [-3.0, -4.0]]);
    }
}
