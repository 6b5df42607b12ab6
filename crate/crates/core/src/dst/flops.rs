//! Analytic training-FLOPs accounting.
//!
//! Multiply-accumulate counts as 2 FLOPs; selection, sampling, and other
//! prune-grow bookkeeping count as 0. Per training step a sparse model costs
//! one forward pass (2|A|B per layer, times spatial positions for conv) plus
//! two backward products (input gradients and active-weight gradients).
//! Strategy overhead lands once per round: candidate gradient gathering for
//! the guided strategies, a dense weight-gradient product for the
//! dense-gradient baseline, nothing for random growth.

use super::sampling::GrowthStrategy;
use super::schedule::PruneGrowSchedule;
use super::topology::{erdos_renyi_count, solve_epsilon};
use super::DstError;
use crate::nn::{LayerSpec, ModelSpec};
use crate::Real;

/// One sparse weight matrix in the FLOPs model: `positions` is the number of
/// spatial output positions its weights are reused over (1 for feedforward).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub positions: usize,
}

impl FlopsLayer {
    fn dense(&self) -> usize {
        self.n_in * self.n_out
    }
}

/// Architecture description for the FLOPs model.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopsArch {
    pub name: String,
    pub layers: Vec<FlopsLayer>,
}

impl FlopsArch {
    pub fn from_model(name: &str, spec: &ModelSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .filter_map(|layer| match layer {
                LayerSpec::Feedforward { n_in, n_out, .. } => Some(FlopsLayer {
                    n_in: *n_in,
                    n_out: *n_out,
                    positions: 1,
                }),
                LayerSpec::Conv2d { geom, .. } => Some(FlopsLayer {
                    n_in: geom.patch_len(),
                    n_out: geom.out_channels,
                    positions: geom.n_patches(),
                }),
                _ => None,
            })
            .collect();
        Self {
            name: name.to_string(),
            layers,
        }
    }

    /// Bottleneck-residual classifier at ImageNet scale (224x224 inputs),
    /// conv weights in the flattened patch view.
    pub fn resnet50() -> Self {
        // (in_channels, kernel, out_channels, output spatial side)
        let mut convs: Vec<(usize, usize, usize, usize)> = vec![(3, 7, 64, 112)];
        let stages: [(usize, usize, usize, usize); 4] = [
            // (blocks, bottleneck width, stage output channels, spatial side)
            (3, 64, 256, 56),
            (4, 128, 512, 28),
            (6, 256, 1024, 14),
            (3, 512, 2048, 7),
        ];
        let mut in_ch = 64;
        for (stage, &(blocks, width, out_ch, side)) in stages.iter().enumerate() {
            for block in 0..blocks {
                // stride-2 blocks keep the previous side on their first 1x1
                let first_side = if stage > 0 && block == 0 { side * 2 } else { side };
                convs.push((in_ch, 1, width, first_side));
                convs.push((width, 3, width, side));
                convs.push((width, 1, out_ch, side));
                if block == 0 {
                    convs.push((in_ch, 1, out_ch, side)); // projection shortcut
                }
                in_ch = out_ch;
            }
        }
        let mut layers: Vec<FlopsLayer> = convs
            .into_iter()
            .map(|(c_in, k, c_out, side)| FlopsLayer {
                n_in: c_in * k * k,
                n_out: c_out,
                positions: side * side,
            })
            .collect();
        layers.push(FlopsLayer {
            n_in: 2048,
            n_out: 1000,
            positions: 1,
        });
        Self {
            name: "resnet50".to_string(),
            layers,
        }
    }

    pub fn weight_dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.n_in, l.n_out)).collect()
    }

    pub fn dense_weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.dense()).sum()
    }

    /// Forward FLOPs for one batch given per-layer active counts.
    pub fn forward_flops(&self, counts: &[usize], batch: usize) -> f64 {
        self.layers
            .iter()
            .zip(counts)
            .map(|(l, &a)| 2.0 * a as f64 * batch as f64 * l.positions as f64)
            .sum()
    }

    pub fn dense_forward_flops(&self, batch: usize) -> f64 {
        self.layers
            .iter()
            .map(|l| 2.0 * l.dense() as f64 * batch as f64 * l.positions as f64)
            .sum()
    }

    /// Per-layer Erdős–Rényi active counts at a model sparsity.
    pub fn er_counts(&self, sparsity: Real) -> Result<Vec<usize>, DstError> {
        let dims = self.weight_dims();
        let epsilon = solve_epsilon(&dims, sparsity)?;
        Ok(dims
            .iter()
            .map(|&(n, m)| erdos_renyi_count(n, m, epsilon).min(n * m))
            .collect())
    }
}

/// FLOPs accounting for one training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopsBreakdown {
    /// Total FLOPs over `steps` training steps, rounds included.
    pub train_total: f64,
    /// Forward + backward cost of one step, without round overhead.
    pub base_per_step: f64,
    /// Extra FLOPs of one prune-grow round for this strategy.
    pub overhead_per_round: f64,
    /// Number of rounds within `steps`.
    pub rounds: usize,
    /// Forward cost of one batch.
    pub inference_per_batch: f64,
}

/// Analytic FLOPs for training `steps` steps at the given sparsity.
///
/// Per step: forward `2|A|B` and backward `4|A|B` (input gradients plus
/// active-weight gradients). Per round: the guided strategies add candidate
/// gradients for `ceil(gamma |A|)` samples plus the distribution statistics;
/// the dense-gradient baseline adds a full `2 n_in n_out B` product per
/// layer; random growth adds nothing that counts.
pub fn flops_estimate(
    arch: &FlopsArch,
    strategy: GrowthStrategy,
    schedule: &PruneGrowSchedule,
    sparsity: Real,
    steps: usize,
    batch: usize,
) -> Result<FlopsBreakdown, DstError> {
    let counts = arch.er_counts(sparsity)?;
    let sparse_fwd = arch.forward_flops(&counts, batch);
    let base_per_step = 3.0 * sparse_fwd;
    let stat_flops = |per_element: f64| -> f64 {
        arch.layers
            .iter()
            .map(|l| per_element * (l.n_in + l.n_out) as f64 * (batch * l.positions) as f64)
            .sum()
    };
    let overhead_per_round = match strategy {
        GrowthStrategy::Static => 0.0,
        GrowthStrategy::SetRandom => 0.0,
        GrowthStrategy::GseUniform => schedule.gamma as f64 * sparse_fwd,
        // gradient-bound statistics: one abs-accumulate per cached element
        GrowthStrategy::GseGrabo => schedule.gamma as f64 * sparse_fwd + stat_flops(1.0),
        // sign projection: multiply-accumulate per cached element
        GrowthStrategy::GseGraest => schedule.gamma as f64 * sparse_fwd + stat_flops(2.0),
        GrowthStrategy::RiglDense => arch.dense_forward_flops(batch),
    };
    let rounds = if strategy.rewires() {
        steps.min(schedule.t_end) / schedule.period
    } else {
        0
    };
    Ok(FlopsBreakdown {
        train_total: base_per_step * steps as f64 + overhead_per_round * rounds as f64,
        base_per_step,
        overhead_per_round,
        rounds,
        inference_per_batch: sparse_fwd,
    })
}
