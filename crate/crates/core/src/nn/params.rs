//! Model parameters: one connection set per parametric layer plus dense
//! biases, and the sparse He-style weight initialization.

use rand::Rng;
use rand_distr::StandardNormal;

use super::model::ModelSpec;
use super::NnError;
use crate::sparse::ConnectionSet;
use crate::Real;

/// Parameters of one parametric layer.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub conn: ConnectionSet,
    pub bias: Vec<Real>,
    pub bias_momentum: Vec<Real>,
}

/// Parameters for a whole model; `layers` is parallel to the spec's layer
/// list, with `None` for non-parametric layers.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub layers: Vec<Option<LayerParams>>,
}

impl ModelParams {
    /// Assemble parameters from connection sets given in parametric-layer
    /// order. Biases start at zero.
    pub fn from_connection_sets(
        spec: &ModelSpec,
        mut sets: Vec<ConnectionSet>,
    ) -> Result<Self, NnError> {
        sets.reverse();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (l, layer) in spec.layers.iter().enumerate() {
            match layer.weight_dims() {
                Some((n_in, n_out)) => {
                    let conn = sets.pop().ok_or_else(|| {
                        NnError::InvalidModel("fewer connection sets than parametric layers".into())
                    })?;
                    if conn.n_in() != n_in || conn.n_out() != n_out {
                        return Err(NnError::Shape(format!(
                            "layer {l}: connection set is {}x{}, spec wants {n_in}x{n_out}",
                            conn.n_in(),
                            conn.n_out()
                        )));
                    }
                    let bias_len = layer.bias_len();
                    layers.push(Some(LayerParams {
                        conn,
                        bias: vec![0.0; bias_len],
                        bias_momentum: vec![0.0; bias_len],
                    }));
                }
                None => layers.push(None),
            }
        }
        if !sets.is_empty() {
            return Err(NnError::InvalidModel(
                "more connection sets than parametric layers".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Total number of active connections across all layers.
    pub fn total_active(&self) -> usize {
        self.layers
            .iter()
            .flatten()
            .map(|l| l.conn.len())
            .sum()
    }

    /// Parametric layers with their spec indices.
    pub fn parametric_layers(&self) -> impl Iterator<Item = (usize, &LayerParams)> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(l, p)| p.as_ref().map(|p| (l, p)))
    }
}

/// Fill a connection set's weights with zero-mean normals whose standard
/// deviation is sqrt(2 / fan_in_active(out_unit)), the sparse analogue of
/// He initialization; output units with no inbound connections draw nothing.
/// Momentum is zeroed.
pub fn init_weights<R: Rng + ?Sized>(conn: &mut ConnectionSet, rng: &mut R) {
    let fan_in = conn.fan_in_counts();
    let stds: Vec<Real> = conn
        .connections()
        .iter()
        .map(|c| (2.0 / fan_in[c.out_unit].max(1) as Real).sqrt())
        .collect();
    let (weights, momentum) = conn.values_mut();
    for (w, std) in weights.iter_mut().zip(&stds) {
        let z: f64 = rng.sample(StandardNormal);
        *w = z as Real * std;
    }
    momentum.fill(0.0);
}
