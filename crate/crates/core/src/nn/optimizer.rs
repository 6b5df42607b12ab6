//! SGD with momentum and L2 regularization; piecewise-constant learning rate.

use super::engine::Gradients;
use super::params::ModelParams;
use super::NnError;
use crate::Real;

/// Optimizer settings. The learning rate starts at `initial_lr` and is
/// divided by `drop_factor` at each epoch listed in `drop_epochs`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub initial_lr: Real,
    pub drop_factor: Real,
    pub drop_epochs: Vec<usize>,
    pub momentum: Real,
    pub l2: Real,
}

impl OptimizerState {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.initial_lr <= 0.0 {
            return Err(NnError::InvalidModel("learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::InvalidModel("momentum must be in [0, 1)".into()));
        }
        if self.l2 < 0.0 {
            return Err(NnError::InvalidModel("L2 coefficient must be >= 0".into()));
        }
        if self.drop_factor <= 0.0 {
            return Err(NnError::InvalidModel("drop factor must be > 0".into()));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> Real {
        let drops = self.drop_epochs.iter().filter(|&&e| epoch >= e).count();
        self.initial_lr / self.drop_factor.powi(drops as i32)
    }
}

/// One SGD update over all active weights and dense biases:
/// `v <- mu * v + (g + l2 * w); w <- w - lr * v`.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &Gradients,
    opt: &OptimizerState,
    epoch: usize,
) -> Result<(), NnError> {
    let lr = opt.learning_rate(epoch);
    for (l, slot) in params.layers.iter_mut().enumerate() {
        let Some(layer) = slot else { continue };
        let g = grads.weight[l].as_ref().ok_or_else(|| {
            NnError::MissingCache(format!("no weight gradients for layer {l}"))
        })?;
        if g.len() != layer.conn.len() {
            return Err(NnError::Shape(format!(
                "layer {l}: {} gradients for {} active connections",
                g.len(),
                layer.conn.len()
            )));
        }
        let (w, v) = layer.conn.values_mut();
        for i in 0..w.len() {
            let vel = opt.momentum * v[i] + (g[i] + opt.l2 * w[i]);
            v[i] = vel;
            w[i] -= lr * vel;
        }
        if !layer.bias.is_empty() {
            let gb = grads.bias[l].as_ref().ok_or_else(|| {
                NnError::MissingCache(format!("no bias gradients for layer {l}"))
            })?;
            for i in 0..layer.bias.len() {
                let vel = opt.momentum * layer.bias_momentum[i] + (gb[i] + opt.l2 * layer.bias[i]);
                layer.bias_momentum[i] = vel;
                layer.bias[i] -= lr * vel;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, ModelSpec};
    use crate::sparse::{ConnectionIndex, ConnectionSet};

    fn single_layer_params(weights: &[Real]) -> (ModelSpec, ModelParams) {
        let spec = ModelSpec::new(
            (weights.len(), 1, 1),
            vec![LayerSpec::Feedforward {
                n_in: weights.len(),
                n_out: 1,
                has_bias: false,
            }],
        );
        let conns: Vec<ConnectionIndex> = (0..weights.len())
            .map(|i| ConnectionIndex::new(i, 0))
            .collect();
        let mut conn = ConnectionSet::from_connections(weights.len(), 1, conns).unwrap();
        {
            let (w, _) = conn.values_mut();
            w.copy_from_slice(weights);
        }
        let params = ModelParams::from_connection_sets(&spec, vec![conn]).unwrap();
        (spec, params)
    }

    fn grads_for(params: &ModelParams, g: &[Real]) -> Gradients {
        let mut grads = Gradients::empty(params.layers.len());
        grads.weight[0] = Some(g.to_vec());
        grads.bias[0] = Some(vec![]);
        grads
    }

    #[test]
    fn plain_gradient_descent_when_momentum_and_l2_are_zero() {
        let (_, mut params) = single_layer_params(&[1.0, -2.0]);
        let opt = OptimizerState {
            initial_lr: 0.5,
            drop_factor: 10.0,
            drop_epochs: vec![],
            momentum: 0.0,
            l2: 0.0,
        };
        let grads = grads_for(&params, &[0.2, -0.4]);
        sgd_step(&mut params, &grads, &opt, 0).unwrap();
        let w = params.layers[0].as_ref().unwrap().conn.weights();
        assert!((w[0] - 0.9).abs() < 1e-12);
        assert!((w[1] + 1.8).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_weights_unchanged() {
        let (_, mut params) = single_layer_params(&[0.3, 0.7]);
        let opt = OptimizerState {
            initial_lr: 0.1,
            drop_factor: 10.0,
            drop_epochs: vec![],
            momentum: 0.9,
            l2: 0.0,
        };
        let grads = grads_for(&params, &[0.0, 0.0]);
        sgd_step(&mut params, &grads, &opt, 0).unwrap();
        let w = params.layers[0].as_ref().unwrap().conn.weights();
        assert_eq!(w, &[0.3, 0.7]);
    }

    #[test]
    fn momentum_trace_matches_hand_unrolled_recurrence() {
        let (mu, l2, lr) = (0.9, 0.01, 0.1);
        let (_, mut params) = single_layer_params(&[1.0]);
        let opt = OptimizerState {
            initial_lr: lr,
            drop_factor: 10.0,
            drop_epochs: vec![],
            momentum: mu,
            l2,
        };
        let gs = [0.5, -0.25, 0.125];
        let (mut w, mut v) = (1.0, 0.0);
        for g in gs {
            let grads = grads_for(&params, &[g]);
            sgd_step(&mut params, &grads, &opt, 0).unwrap();
            v = mu * v + (g + l2 * w);
            w -= lr * v;
            let got = params.layers[0].as_ref().unwrap().conn.weights()[0];
            assert!((got - w).abs() < 1e-15, "got {got}, want {w}");
        }
    }

    #[test]
    fn learning_rate_drops_at_listed_epochs() {
        let opt = OptimizerState {
            initial_lr: 0.1,
            drop_factor: 10.0,
            drop_epochs: vec![80, 120],
            momentum: 0.9,
            l2: 1e-4,
        };
        assert!((opt.learning_rate(0) - 0.1).abs() < 1e-12);
        assert!((opt.learning_rate(79) - 0.1).abs() < 1e-12);
        assert!((opt.learning_rate(80) - 0.01).abs() < 1e-12);
        assert!((opt.learning_rate(120) - 0.001).abs() < 1e-12);
        assert!((opt.learning_rate(199) - 0.001).abs() < 1e-12);
    }
}
