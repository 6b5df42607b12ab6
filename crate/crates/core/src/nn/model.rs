//! Layer and model descriptions plus shape validation.

use super::conv::ConvGeometry;
use super::NnError;
use crate::Real;

/// One layer of the network. Unit counts follow the flattened
/// channels-by-spatial layout; only feedforward and conv layers carry weights.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Feedforward {
        n_in: usize,
        n_out: usize,
        has_bias: bool,
    },
    Conv2d {
        geom: ConvGeometry,
        has_bias: bool,
    },
    Relu,
    AvgPool {
        pool: usize,
    },
    Flatten,
}

impl LayerSpec {
    pub fn is_parametric(&self) -> bool {
        matches!(self, LayerSpec::Feedforward { .. } | LayerSpec::Conv2d { .. })
    }

    /// Dimensions of the sparse weight matrix, when the layer has one.
    /// Convolutions use the flattened patch view: in = channels x kernel area,
    /// out = output channels.
    pub fn weight_dims(&self) -> Option<(usize, usize)> {
        match self {
            LayerSpec::Feedforward { n_in, n_out, .. } => Some((*n_in, *n_out)),
            LayerSpec::Conv2d { geom, .. } => Some((geom.patch_len(), geom.out_channels)),
            _ => None,
        }
    }

    pub fn has_bias(&self) -> bool {
        match self {
            LayerSpec::Feedforward { has_bias, .. } | LayerSpec::Conv2d { has_bias, .. } => {
                *has_bias
            }
            _ => false,
        }
    }

    /// Length of the dense bias vector: one per output unit for feedforward,
    /// one per output channel for conv.
    pub fn bias_len(&self) -> usize {
        match self {
            LayerSpec::Feedforward { n_out, has_bias, .. } if *has_bias => *n_out,
            LayerSpec::Conv2d { geom, has_bias } if *has_bias => geom.out_channels,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    CrossEntropy,
}

/// Resolved input/output geometry of a layer within a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub in_shape: (usize, usize, usize),
    pub out_shape: (usize, usize, usize),
}

impl LayerShape {
    pub fn in_units(&self) -> usize {
        self.in_shape.0 * self.in_shape.1 * self.in_shape.2
    }

    pub fn out_units(&self) -> usize {
        self.out_shape.0 * self.out_shape.1 * self.out_shape.2
    }
}

/// Ordered layers with the loss; structurally validated by [`ModelSpec::shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub loss: Loss,
    pub label_smoothing: Real,
}

impl ModelSpec {
    pub fn new(input_shape: (usize, usize, usize), layers: Vec<LayerSpec>) -> Self {
        Self {
            input_shape,
            layers,
            loss: Loss::CrossEntropy,
            label_smoothing: 0.0,
        }
    }

    pub fn with_label_smoothing(mut self, smoothing: Real) -> Self {
        self.label_smoothing = smoothing;
        self
    }

    /// Walk the layer chain, checking that adjacent shapes compose; returns
    /// the resolved per-layer shapes.
    pub fn shapes(&self) -> Result<Vec<LayerShape>, NnError> {
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(NnError::InvalidModel(format!(
                "label smoothing {} outside [0, 1)",
                self.label_smoothing
            )));
        }
        let mut cur = self.input_shape;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let flat = cur.0 * cur.1 * cur.2;
            let next = match layer {
                LayerSpec::Feedforward { n_in, n_out, .. } => {
                    if *n_in == 0 || *n_out == 0 {
                        return Err(NnError::InvalidModel(format!(
                            "layer {l}: zero-sized feedforward"
                        )));
                    }
                    if *n_in != flat {
                        return Err(NnError::InvalidModel(format!(
                            "layer {l}: feedforward expects {n_in} inputs, previous layer provides {flat}"
                        )));
                    }
                    (*n_out, 1, 1)
                }
                LayerSpec::Conv2d { geom, .. } => {
                    geom.validate()
                        .map_err(|e| NnError::InvalidModel(format!("layer {l}: {e}")))?;
                    if (geom.in_channels, geom.in_h, geom.in_w) != cur {
                        return Err(NnError::InvalidModel(format!(
                            "layer {l}: conv expects input {:?}, previous layer provides {cur:?}",
                            (geom.in_channels, geom.in_h, geom.in_w)
                        )));
                    }
                    (geom.out_channels, geom.out_h(), geom.out_w())
                }
                LayerSpec::Relu => cur,
                LayerSpec::AvgPool { pool } => {
                    if *pool == 0 || cur.1 % pool != 0 || cur.2 % pool != 0 {
                        return Err(NnError::InvalidModel(format!(
                            "layer {l}: pool {pool} does not divide {}x{}",
                            cur.1, cur.2
                        )));
                    }
                    (cur.0, cur.1 / pool, cur.2 / pool)
                }
                LayerSpec::Flatten => (flat, 1, 1),
            };
            shapes.push(LayerShape {
                in_shape: cur,
                out_shape: next,
            });
            cur = next;
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        self.shapes().map(|_| ())
    }

    /// Number of input units the model consumes.
    pub fn input_units(&self) -> usize {
        self.input_shape.0 * self.input_shape.1 * self.input_shape.2
    }

    /// Weight-matrix dimensions of every parametric layer, in layer order.
    pub fn parametric_dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().filter_map(|l| l.weight_dims()).collect()
    }

    /// Total dense weight count over all parametric layers.
    pub fn dense_weight_count(&self) -> usize {
        self.parametric_dims().iter().map(|(a, b)| a * b).sum()
    }
}
