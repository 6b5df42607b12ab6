//! Candidate-connection sampling: growth strategy tags, the per-unit input
//! and output distributions, and pair sampling through alias tables.
//!
//! Sampling units independently induces a joint distribution over all
//! connections of a layer without ever representing it; memory stays linear
//! in the layer width.

use log::warn;
use rand::Rng;

use super::DstError;
use crate::sparse::{set_difference, AliasTable, ConnectionIndex, ConnectionSet};
use crate::{Mat, Real};

/// Growth strategy for the prune-grow rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthStrategy {
    /// Fixed topology; no rounds at all.
    Static,
    /// Magnitude pruning, uniformly random growth.
    SetRandom,
    /// Guided stochastic exploration with uniform candidate sampling.
    GseUniform,
    /// Candidates biased by the gradient-magnitude upper bound.
    GseGrabo,
    /// Candidates biased by the sign-sketch gradient estimate.
    GseGraest,
    /// Dense-gradient baseline: the candidate set is every inactive
    /// connection.
    RiglDense,
}

impl GrowthStrategy {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "static" => Some(Self::Static),
            "set_random" => Some(Self::SetRandom),
            "gse_uniform" => Some(Self::GseUniform),
            "gse_grabo" => Some(Self::GseGrabo),
            "gse_graest" => Some(Self::GseGraest),
            "rigl_dense" => Some(Self::RiglDense),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::SetRandom => "set_random",
            Self::GseUniform => "gse_uniform",
            Self::GseGrabo => "gse_grabo",
            Self::GseGraest => "gse_graest",
            Self::RiglDense => "rigl_dense",
        }
    }

    pub fn is_gse(&self) -> bool {
        matches!(self, Self::GseUniform | Self::GseGrabo | Self::GseGraest)
    }

    pub fn needs_signs(&self) -> bool {
        matches!(self, Self::GseGraest)
    }

    /// Whether the strategy runs prune-grow rounds at all.
    pub fn rewires(&self) -> bool {
        !matches!(self, Self::Static)
    }
}

/// Normalized sampling distributions over the input units (`f`) and output
/// units (`g`) of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDistributions {
    pub f: Vec<Real>,
    pub g: Vec<Real>,
}

impl UnitDistributions {
    pub fn uniform(n_in: usize, n_out: usize) -> Self {
        Self {
            f: vec![1.0 / n_in as Real; n_in],
            g: vec![1.0 / n_out as Real; n_out],
        }
    }

    /// Both vectors non-negative and summing to one.
    pub fn validate(&self) -> Result<(), DstError> {
        for (name, v) in [("f", &self.f), ("g", &self.g)] {
            if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(DstError::Sparse(
                    crate::sparse::SparseError::InvalidDistribution(format!(
                        "{name} contains negative or non-finite entries"
                    )),
                ));
            }
            let sum: Real = v.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(DstError::Sparse(
                    crate::sparse::SparseError::InvalidDistribution(format!(
                        "{name} sums to {sum}"
                    )),
                ));
            }
        }
        Ok(())
    }
}

/// Fresh random signs in {-1, +1}, one per effective batch column.
#[derive(Debug, Clone)]
pub struct SignVector(Vec<Real>);

impl SignVector {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        Self((0..len).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Real] {
        &self.0
    }
}

fn normalize_or_uniform(mut weights: Vec<Real>, side: &str) -> Vec<Real> {
    let sum: Real = weights.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        for w in &mut weights {
            *w /= sum;
        }
        weights
    } else {
        warn!("{side} normalizer is zero; falling back to uniform");
        let n = weights.len();
        vec![1.0 / n as Real; n]
    }
}

/// Build the unit distributions for a layer from its cached effective input
/// `h_prev` (n_in x B_eff) and output gradient `delta` (n_out x B_eff).
///
/// Uniform ignores the cache. The gradient-bound variant uses row-wise L1
/// norms of |h| and |delta|; the estimate variant projects rows onto the
/// random signs first, making the induced joint proportional to the gradient
/// magnitude in expectation.
pub fn build_distribution(
    strategy: GrowthStrategy,
    h_prev: &Mat,
    delta: &Mat,
    signs: Option<&SignVector>,
) -> Result<UnitDistributions, DstError> {
    let n_in = h_prev.nrows();
    let n_out = delta.nrows();
    match strategy {
        GrowthStrategy::GseGrabo => {
            let f: Vec<Real> = h_prev
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum())
                .collect();
            let g: Vec<Real> = delta
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum())
                .collect();
            Ok(UnitDistributions {
                f: normalize_or_uniform(f, "input-unit"),
                g: normalize_or_uniform(g, "output-unit"),
            })
        }
        GrowthStrategy::GseGraest => {
            let b_eff = h_prev.ncols();
            let signs = signs.ok_or(DstError::SignLength { got: 0, want: b_eff })?;
            if signs.len() != b_eff || delta.ncols() != b_eff {
                return Err(DstError::SignLength {
                    got: signs.len(),
                    want: b_eff,
                });
            }
            let s = signs.values();
            let project = |row: ndarray::ArrayView1<Real>| -> Real {
                row.iter().zip(s).map(|(v, sign)| v * sign).sum::<Real>().abs()
            };
            let f: Vec<Real> = h_prev.rows().into_iter().map(project).collect();
            let g: Vec<Real> = delta.rows().into_iter().map(project).collect();
            Ok(UnitDistributions {
                f: normalize_or_uniform(f, "input-unit"),
                g: normalize_or_uniform(g, "output-unit"),
            })
        }
        // uniform candidates for GSE-uniform; other strategies have no use
        // for a biased distribution
        _ => Ok(UnitDistributions::uniform(n_in, n_out)),
    }
}

/// Draw `count` connection pairs (input unit ~ f, output unit ~ g) through
/// two alias tables, then drop duplicates and already-active connections.
/// The result is canonically sorted and no larger than `count`.
pub fn sample_candidates<R: Rng + ?Sized>(
    dist: &UnitDistributions,
    active: &ConnectionSet,
    count: usize,
    rng: &mut R,
) -> Result<Vec<ConnectionIndex>, DstError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let in_table = AliasTable::new(&dist.f)?;
    let out_table = AliasTable::new(&dist.g)?;
    crate::sparse::assert_sparse_alloc(count, active.dense_len());
    let mut draws = Vec::with_capacity(count);
    for _ in 0..count {
        let a = in_table.sample(rng);
        let b = out_table.sample(rng);
        draws.push(ConnectionIndex::new(a, b));
    }
    Ok(set_difference(&draws, active))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_ignores_cache() {
        let h = array![[5.0, 1.0], [0.0, 0.0], [2.0, 2.0]];
        let d = array![[1.0, 7.0], [3.0, 0.0]];
        let dist = build_distribution(GrowthStrategy::GseUniform, &h, &d, None).unwrap();
        assert_eq!(dist.f, vec![1.0 / 3.0; 3]);
        assert_eq!(dist.g, vec![0.5; 2]);
        dist.validate().unwrap();
    }

    #[test]
    fn gradient_bound_uses_row_l1_norms() {
        let h = array![[1.0, -2.0], [0.0, 0.0], [3.0, 1.0]];
        let d = array![[-1.0, 1.0], [2.0, 2.0]];
        let dist = build_distribution(GrowthStrategy::GseGrabo, &h, &d, None).unwrap();
        assert_eq!(dist.f, vec![3.0 / 7.0, 0.0, 4.0 / 7.0]);
        assert_eq!(dist.g, vec![2.0 / 6.0, 4.0 / 6.0]);
        dist.validate().unwrap();
    }

    #[test]
    fn batch_of_one_bound_is_proportional_to_gradient_magnitude() {
        // with B = 1 the joint f(a) * g(b) is exactly proportional to
        // |h(a) * delta(b)| = |grad(a, b)|
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        use rand::Rng as _;
        let h = Array2::from_shape_fn((6, 1), |_| rng.gen_range(-2.0..2.0));
        let d = Array2::from_shape_fn((4, 1), |_| rng.gen_range(-2.0..2.0));
        let dist = build_distribution(GrowthStrategy::GseGrabo, &h, &d, None).unwrap();
        let total: Real = h.iter().map(|v| v.abs()).sum::<Real>()
            * d.iter().map(|v| v.abs()).sum::<Real>();
        for a in 0..6 {
            for b in 0..4 {
                let joint = dist.f[a] * dist.g[b];
                let want = (h[[a, 0]] * d[[b, 0]]).abs() / total;
                assert!(
                    (joint - want).abs() <= 1e-9 * want.max(1e-12),
                    "joint {joint} vs {want}"
                );
            }
        }
    }

    #[test]
    fn gradient_estimate_projects_onto_signs() {
        let h = array![[1.0, -1.0], [2.0, 2.0]];
        let d = array![[0.5, 0.5]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let signs = SignVector::sample(&mut rng, 2);
        let dist =
            build_distribution(GrowthStrategy::GseGraest, &h, &d, Some(&signs)).unwrap();
        let s = signs.values();
        let f0 = (h[[0, 0]] * s[0] + h[[0, 1]] * s[1]).abs();
        let f1 = (h[[1, 0]] * s[0] + h[[1, 1]] * s[1]).abs();
        assert!((dist.f[0] - f0 / (f0 + f1)).abs() < 1e-12);
        assert!((dist.f[1] - f1 / (f0 + f1)).abs() < 1e-12);
    }

    #[test]
    fn missing_or_short_signs_are_rejected() {
        let h = Array2::zeros((2, 4));
        let d = Array2::zeros((2, 4));
        assert!(matches!(
            build_distribution(GrowthStrategy::GseGraest, &h, &d, None),
            Err(DstError::SignLength { .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let short = SignVector::sample(&mut rng, 3);
        assert!(matches!(
            build_distribution(GrowthStrategy::GseGraest, &h, &d, Some(&short)),
            Err(DstError::SignLength { got: 3, want: 4 })
        ));
    }

    #[test]
    fn all_zero_cache_falls_back_to_uniform() {
        let h = Array2::zeros((3, 2));
        let d = Array2::zeros((2, 2));
        let dist = build_distribution(GrowthStrategy::GseGrabo, &h, &d, None).unwrap();
        assert_eq!(dist.f, vec![1.0 / 3.0; 3]);
        assert_eq!(dist.g, vec![0.5; 2]);
    }

    #[test]
    fn saturated_layer_yields_no_candidates() {
        let conns: Vec<ConnectionIndex> = (0..3)
            .flat_map(|a| (0..3).map(move |b| ConnectionIndex::new(a, b)))
            .collect();
        let active = ConnectionSet::from_connections(3, 3, conns).unwrap();
        let dist = UnitDistributions::uniform(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_candidates(&dist, &active, 100, &mut rng).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn candidates_stay_within_the_inactive_set() {
        // the 3x3 layer of the worked prune-grow example: candidates must be
        // among the five inactive connections
        let active_pairs = [(0, 1), (1, 1), (1, 2), (2, 0)];
        let conns: Vec<ConnectionIndex> = active_pairs
            .iter()
            .map(|&(a, b)| ConnectionIndex::new(a, b))
            .collect();
        let active = ConnectionSet::from_connections(3, 3, conns).unwrap();
        let dist = UnitDistributions::uniform(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let s = sample_candidates(&dist, &active, 6, &mut rng).unwrap();
            assert!(s.len() <= 6);
            for c in &s {
                assert!(!active.contains(*c));
            }
        }
    }

    #[test]
    fn pair_frequencies_follow_the_product_distribution() {
        // 5x5 layer, skewed f and g; empirical pair frequencies over inactive
        // cells should match f(a) * g(b) restricted to the complement
        let f = vec![0.1, 0.1, 0.2, 0.3, 0.3];
        let g = vec![0.4, 0.1, 0.1, 0.2, 0.2];
        let dist = UnitDistributions { f: f.clone(), g: g.clone() };
        let active =
            ConnectionSet::from_connections(5, 5, vec![ConnectionIndex::new(0, 0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0usize; 25];
        let rounds = 40_000usize;
        let mut total = 0usize;
        for _ in 0..rounds {
            // count=1 so dedup never interferes with per-draw frequencies
            for c in sample_candidates(&dist, &active, 1, &mut rng).unwrap() {
                counts[c.linear(5)] += 1;
                total += 1;
            }
        }
        let kept: Real = (0..25)
            .filter(|&lin| lin != 0)
            .map(|lin| f[lin % 5] * g[lin / 5])
            .sum();
        let mut chi2 = 0.0;
        for lin in 1..25 {
            let expect = total as Real * f[lin % 5] * g[lin / 5] / kept;
            chi2 += (counts[lin] as Real - expect).powi(2) / expect;
        }
        // df = 23, significance 0.01
        assert!(chi2 < 41.64, "chi-squared {chi2}");
    }
}
