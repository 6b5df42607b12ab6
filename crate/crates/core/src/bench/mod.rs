//! Kernel benchmark: sparse-times-dense matmul across dense, COO, and CSR
//! formats, sparsities, and sizes. Correctness precedes timing; every timed
//! kernel is checked against the dense oracle first.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dst::sample_connection_pattern;
use crate::sparse::{
    allow_dense, dense_matmul_blocked, spmm, spmm_coo, spmm_parallel, CooMatrix, CsrMatrix,
    SparseError,
};
use crate::{Mat, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatrixFormat {
    Dense,
    Coo,
    Csr,
}

impl MatrixFormat {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "dense" => Some(Self::Dense),
            "coo" => Some(Self::Coo),
            "csr" => Some(Self::Csr),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Dense => "dense",
            Self::Coo => "coo",
            Self::Csr => "csr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchCase {
    pub format: MatrixFormat,
    pub n_units: usize,
    pub batch: usize,
    pub sparsity: Real,
    pub repeats: usize,
}

impl BenchCase {
    pub fn validate(&self) -> Result<(), SparseError> {
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(SparseError::InvalidDistribution(format!(
                "sparsity {} outside [0, 1)",
                self.sparsity
            )));
        }
        if self.repeats < 3 {
            return Err(SparseError::InvalidDistribution(format!(
                "{} repeats; at least 3 required",
                self.repeats
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub case: BenchCase,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    /// Useful FLOPs (2 * nnz * batch) per mean second.
    pub flops_effective: f64,
}

struct ProblemInstance {
    csr: CsrMatrix,
    coo: CooMatrix,
    dense: Mat,
    input: Mat,
    nnz: usize,
}

fn build_instance(n_units: usize, batch: usize, sparsity: Real, seed: u64) -> ProblemInstance {
    let _dense_ok = allow_dense();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nnz = (((1.0 - sparsity) as f64) * (n_units * n_units) as f64).round() as usize;
    let pattern = sample_connection_pattern(n_units, n_units, nnz, &mut rng)
        .expect("nnz bounded by the dense size");
    let mut row_offsets = vec![0usize; n_units + 1];
    for c in &pattern {
        row_offsets[c.out_unit + 1] += 1;
    }
    for r in 0..n_units {
        row_offsets[r + 1] += row_offsets[r];
    }
    let col_indices: Vec<usize> = pattern.iter().map(|c| c.in_unit).collect();
    let values: Vec<Real> = (0..pattern.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let csr = CsrMatrix::new(n_units, n_units, row_offsets, col_indices, values)
        .expect("canonical pattern yields valid CSR");
    let coo = csr.to_coo();
    let mut dense = Mat::zeros((n_units, n_units));
    for ((&r, &c), &v) in coo.rows.iter().zip(&coo.cols).zip(&coo.values) {
        dense[[r, c]] = v;
    }
    let input = Array2::from_shape_fn((n_units, batch), |_| rng.gen_range(-1.0..1.0));
    ProblemInstance {
        csr,
        coo,
        dense,
        input,
        nnz,
    }
}

fn max_rel_deviation(got: &Mat, want: &Mat) -> Real {
    got.iter()
        .zip(want.iter())
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, Real::max)
}

/// Time the requested cases. Cases sharing (n_units, batch, sparsity) reuse
/// one seeded problem instance; all formats are verified against the dense
/// oracle before any timing. One warmup run per case is excluded.
pub fn run_bench(
    cases: &[BenchCase],
    seed: u64,
    parallel_csr: bool,
) -> Result<Vec<BenchResult>, SparseError> {
    for case in cases {
        case.validate()?;
    }
    let mut results = Vec::with_capacity(cases.len());
    let mut groups: Vec<(usize, usize, Real)> = cases
        .iter()
        .map(|c| (c.n_units, c.batch, c.sparsity))
        .collect();
    groups.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    groups.dedup();

    for (n_units, batch, sparsity) in groups {
        let instance = build_instance(n_units, batch, sparsity, seed);
        let oracle = dense_matmul_blocked(&instance.dense, &instance.input)?;
        let check = |m: &Mat| -> Result<(), SparseError> {
            let dev = max_rel_deviation(m, &oracle);
            if dev > 1e-6 {
                return Err(SparseError::ShapeMismatch(format!(
                    "kernel deviates from the dense oracle by {dev}"
                )));
            }
            Ok(())
        };
        check(&spmm(&instance.csr, &instance.input)?)?;
        check(&spmm_coo(&instance.coo, &instance.input)?)?;
        if parallel_csr {
            check(&spmm_parallel(&instance.csr, &instance.input)?)?;
        }

        for case in cases.iter().filter(|c| {
            c.n_units == n_units && c.batch == batch && c.sparsity == sparsity
        }) {
            let run = || -> Result<Mat, SparseError> {
                match case.format {
                    MatrixFormat::Dense => dense_matmul_blocked(&instance.dense, &instance.input),
                    MatrixFormat::Coo => spmm_coo(&instance.coo, &instance.input),
                    MatrixFormat::Csr => {
                        if parallel_csr {
                            spmm_parallel(&instance.csr, &instance.input)
                        } else {
                            spmm(&instance.csr, &instance.input)
                        }
                    }
                }
            };
            std::hint::black_box(run()?); // warmup, excluded from timing
            let mut times = Vec::with_capacity(case.repeats);
            for _ in 0..case.repeats {
                let start = Instant::now();
                let out = run()?;
                times.push(start.elapsed().as_secs_f64());
                std::hint::black_box(out);
            }
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
                / (times.len() as f64 - 1.0).max(1.0);
            let useful = match case.format {
                MatrixFormat::Dense => 2.0 * (n_units * n_units) as f64 * batch as f64,
                _ => 2.0 * instance.nnz as f64 * batch as f64,
            };
            results.push(BenchResult {
                case: *case,
                mean_seconds: mean,
                std_seconds: var.sqrt(),
                flops_effective: useful / mean,
            });
        }
    }
    results.sort_by(|a, b| {
        (a.case.format, a.case.n_units)
            .cmp(&(b.case.format, b.case.n_units))
            .then(a.case.sparsity.total_cmp(&b.case.sparsity))
    });
    Ok(results)
}

/// Per-size sparsity threshold where the CSR kernel starts beating the dense
/// one, by linear interpolation of the time-ratio curve's crossing of 1.0.
/// `None` means the ratio never reaches 1.0 in the sweep; a curve already
/// below 1.0 at the smallest measured sparsity reports that sparsity.
pub fn crossover_report(results: &[BenchResult]) -> Vec<(usize, Option<Real>)> {
    let mut sizes: Vec<usize> = results.iter().map(|r| r.case.n_units).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut report = Vec::new();
    for n in sizes {
        let mut curve: Vec<(Real, Real)> = Vec::new(); // (sparsity, csr/dense)
        let csr: Vec<&BenchResult> = results
            .iter()
            .filter(|r| r.case.n_units == n && r.case.format == MatrixFormat::Csr)
            .collect();
        for c in csr {
            if let Some(d) = results.iter().find(|r| {
                r.case.n_units == n
                    && r.case.format == MatrixFormat::Dense
                    && r.case.sparsity == c.case.sparsity
            }) {
                curve.push((c.case.sparsity, (c.mean_seconds / d.mean_seconds) as Real));
            }
        }
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        if curve.is_empty() {
            continue;
        }
        report.push((n, crossing(&curve)));
    }
    report
}

fn crossing(curve: &[(Real, Real)]) -> Option<Real> {
    if curve[0].1 <= 1.0 {
        return Some(curve[0].0);
    }
    for pair in curve.windows(2) {
        let (s1, r1) = pair[0];
        let (s2, r2) = pair[1];
        if r2 == 1.0 {
            return Some(s2);
        }
        if r1 > 1.0 && r2 < 1.0 {
            return Some(s1 + (r1 - 1.0) / (r1 - r2) * (s2 - s1));
        }
    }
    None
}

/// CSV rows in the `format,n_units,batch,sparsity,mean_s,std_s` schema.
pub fn bench_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("format,n_units,batch,sparsity,mean_s,std_s\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{:.9},{:.9}\n",
            r.case.format.tag(),
            r.case.n_units,
            r.case.batch,
            r.case.sparsity,
            r.mean_seconds,
            r.std_seconds
        ));
    }
    out
}
