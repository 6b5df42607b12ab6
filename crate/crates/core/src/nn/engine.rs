//! Forward and backward passes. All weight use goes through the sparse
//! kernels; gradients are produced only for active connections.

use super::conv::{col2im, fold_conv_output, im2col, unfold_conv_delta};
use super::loss::cross_entropy;
use super::model::{LayerSpec, ModelSpec};
use super::params::ModelParams;
use super::NnError;
use crate::sparse::{gather_connection_grads, spmm, spmm_transposed};
use crate::{Mat, Real};

/// Per-layer activations from the forward pass and gradients from the
/// backward pass, for one batch.
#[derive(Debug)]
pub struct ActivationCache {
    batch: usize,
    /// `activations[0]` is the input; `activations[l + 1]` is layer l's output.
    activations: Vec<Mat>,
    /// Patch matrices of conv layers (their effective inputs).
    conv_patches: Vec<Option<Mat>>,
    /// Loss gradient at each layer's output units, filled by [`backward`].
    deltas: Vec<Option<Mat>>,
    /// Patch-major loss gradient of conv layers, filled by [`backward`].
    conv_deltas: Vec<Option<Mat>>,
}

impl ActivationCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn logits(&self) -> &Mat {
        self.activations.last().unwrap()
    }

    /// Input to layer `l`.
    pub fn layer_input(&self, l: usize) -> &Mat {
        &self.activations[l]
    }

    /// Output of layer `l`.
    pub fn layer_output(&self, l: usize) -> &Mat {
        &self.activations[l + 1]
    }

    pub fn delta(&self, l: usize) -> Option<&Mat> {
        self.deltas[l].as_ref()
    }

    /// Effective (input, output-gradient) matrices for connection-level
    /// gradient work on parametric layer `l`. For conv layers these are the
    /// patch-major views, so spatial positions count as extra batch columns.
    pub fn conn_pair(&self, l: usize) -> Result<(&Mat, &Mat), NnError> {
        if let Some(patches) = self.conv_patches[l].as_ref() {
            let delta = self.conv_deltas[l]
                .as_ref()
                .ok_or_else(|| NnError::MissingCache(format!("layer {l}: run backward first")))?;
            Ok((patches, delta))
        } else {
            let delta = self.deltas[l]
                .as_ref()
                .ok_or_else(|| NnError::MissingCache(format!("layer {l}: run backward first")))?;
            Ok((&self.activations[l], delta))
        }
    }
}

/// Gradients aligned with each parametric layer's active connections and
/// dense bias; `None` for non-parametric layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weight: Vec<Option<Vec<Real>>>,
    pub bias: Vec<Option<Vec<Real>>>,
}

impl Gradients {
    pub fn empty(n_layers: usize) -> Self {
        Self {
            weight: vec![None; n_layers],
            bias: vec![None; n_layers],
        }
    }
}

fn layer_params<'a>(
    params: &'a mut ModelParams,
    l: usize,
) -> Result<&'a mut super::params::LayerParams, NnError> {
    params.layers[l]
        .as_mut()
        .ok_or_else(|| NnError::MissingCache(format!("layer {l} has no parameters")))
}

/// Run the model on a batch (input units x B), caching every activation the
/// prune-grow distributions and gradients need.
pub fn forward(
    spec: &ModelSpec,
    params: &mut ModelParams,
    input: &Mat,
) -> Result<ActivationCache, NnError> {
    let shapes = spec.shapes()?;
    if input.nrows() != spec.input_units() {
        return Err(NnError::Shape(format!(
            "forward: batch has {} rows, model expects {}",
            input.nrows(),
            spec.input_units()
        )));
    }
    if params.layers.len() != spec.layers.len() {
        return Err(NnError::InvalidModel(
            "parameter list does not match layer list".into(),
        ));
    }
    let batch = input.ncols();
    let n_layers = spec.layers.len();
    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(input.clone());
    let mut conv_patches: Vec<Option<Mat>> = vec![None; n_layers];

    for (l, layer) in spec.layers.iter().enumerate() {
        let h = activations.last().unwrap();
        let out = match layer {
            LayerSpec::Feedforward { .. } => {
                let p = layer_params(params, l)?;
                let mut y = spmm(p.conn.csr(), h)?;
                if !p.bias.is_empty() {
                    for (r, mut row) in y.rows_mut().into_iter().enumerate() {
                        row += p.bias[r];
                    }
                }
                y
            }
            LayerSpec::Conv2d { geom, .. } => {
                let patches = im2col(h, geom)?;
                let p = layer_params(params, l)?;
                let out_eff = spmm(p.conn.csr(), &patches)?;
                let y = fold_conv_output(&out_eff, &p.bias, geom.n_patches());
                conv_patches[l] = Some(patches);
                y
            }
            LayerSpec::Relu => h.mapv(|v| if v > 0.0 { v } else { 0.0 }),
            LayerSpec::AvgPool { pool } => avg_pool_forward(h, shapes[l].in_shape, *pool),
            LayerSpec::Flatten => h.clone(),
        };
        debug_assert_eq!(out.nrows(), shapes[l].out_units());
        activations.push(out);
    }

    Ok(ActivationCache {
        batch,
        activations,
        conv_patches,
        deltas: vec![None; n_layers],
        conv_deltas: vec![None; n_layers],
    })
}

/// Backpropagate the smoothed cross-entropy loss. Weight gradients are
/// gathered per active connection; input gradients propagate through the
/// transposed sparse product. Returns the gradients and the batch-mean loss.
pub fn backward(
    spec: &ModelSpec,
    params: &mut ModelParams,
    cache: &mut ActivationCache,
    labels: &[usize],
) -> Result<(Gradients, Real), NnError> {
    let shapes = spec.shapes()?;
    let n_layers = spec.layers.len();
    if cache.activations.len() != n_layers + 1 {
        return Err(NnError::MissingCache("forward cache incomplete".into()));
    }
    let (loss, dlogits) = cross_entropy(cache.logits(), labels, spec.label_smoothing)?;
    let mut grads = Gradients::empty(n_layers);
    let mut delta = dlogits;

    for l in (0..n_layers).rev() {
        cache.deltas[l] = Some(delta.clone());
        delta = match &spec.layers[l] {
            LayerSpec::Feedforward { .. } => {
                let h_prev = &cache.activations[l];
                let p = params.layers[l]
                    .as_mut()
                    .ok_or_else(|| NnError::MissingCache(format!("layer {l} has no parameters")))?;
                grads.weight[l] =
                    Some(gather_connection_grads(p.conn.connections(), h_prev, &delta));
                grads.bias[l] = Some(if p.bias.is_empty() {
                    Vec::new()
                } else {
                    delta.rows().into_iter().map(|r| r.sum()).collect()
                });
                spmm_transposed(p.conn.csr(), &delta)?
            }
            LayerSpec::Conv2d { geom, .. } => {
                let eff = unfold_conv_delta(&delta, geom.out_channels, geom.n_patches());
                let patches = cache.conv_patches[l]
                    .as_ref()
                    .ok_or_else(|| NnError::MissingCache(format!("layer {l}: no patch cache")))?;
                let p = params.layers[l]
                    .as_mut()
                    .ok_or_else(|| NnError::MissingCache(format!("layer {l} has no parameters")))?;
                grads.weight[l] =
                    Some(gather_connection_grads(p.conn.connections(), patches, &eff));
                grads.bias[l] = Some(if p.bias.is_empty() {
                    Vec::new()
                } else {
                    eff.rows().into_iter().map(|r| r.sum()).collect()
                });
                let cols_grad = spmm_transposed(p.conn.csr(), &eff)?;
                cache.conv_deltas[l] = Some(eff);
                col2im(&cols_grad, geom)?
            }
            LayerSpec::Relu => {
                let out = &cache.activations[l + 1];
                let mut masked = delta;
                masked.zip_mut_with(out, |d, &o| {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                });
                masked
            }
            LayerSpec::AvgPool { pool } => avg_pool_backward(&delta, shapes[l].in_shape, *pool),
            LayerSpec::Flatten => delta,
        };
    }
    Ok((grads, loss))
}

fn avg_pool_forward(h: &Mat, in_shape: (usize, usize, usize), pool: usize) -> Mat {
    let (c, hh, ww) = in_shape;
    let (oh, ow) = (hh / pool, ww / pool);
    let batch = h.ncols();
    let area = (pool * pool) as Real;
    let mut out = Mat::zeros((c * oh * ow, batch));
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let out_row = (ch * oh + oy) * ow + ox;
                for py in 0..pool {
                    for px in 0..pool {
                        let in_row = (ch * hh + oy * pool + py) * ww + ox * pool + px;
                        for j in 0..batch {
                            out[[out_row, j]] += h[[in_row, j]];
                        }
                    }
                }
                for j in 0..batch {
                    out[[out_row, j]] /= area;
                }
            }
        }
    }
    out
}

fn avg_pool_backward(delta: &Mat, in_shape: (usize, usize, usize), pool: usize) -> Mat {
    let (c, hh, ww) = in_shape;
    let (oh, ow) = (hh / pool, ww / pool);
    let batch = delta.ncols();
    let area = (pool * pool) as Real;
    let mut out = Mat::zeros((c * hh * ww, batch));
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let out_row = (ch * oh + oy) * ow + ox;
                for py in 0..pool {
                    for px in 0..pool {
                        let in_row = (ch * hh + oy * pool + py) * ww + ox * pool + px;
                        for j in 0..batch {
                            out[[in_row, j]] = delta[[out_row, j]] / area;
                        }
                    }
                }
            }
        }
    }
    out
}
