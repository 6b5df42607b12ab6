//! Experiment configuration: a flat, typed key-value text format with
//! line-referenced errors and unknown-key rejection.

use std::path::{Path, PathBuf};

use super::ExpError;
use crate::dst::{GrowthStrategy, PruneGrowSchedule, SparsityAssignment};
use crate::nn::{ConvGeometry, LayerSpec, ModelSpec, OptimizerState};
use crate::Real;

/// Environment variable that overrides the config seed.
pub const SEED_ENV: &str = "SPARSEGROW_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub data_dir: PathBuf,
    pub model: String,
    pub strategy: GrowthStrategy,
    pub sparsity: Real,
    pub seed: u64,
    pub gamma: Real,
    pub alpha: Real,
    pub update_period: usize,
    pub t_end: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: Real,
    pub momentum: Real,
    pub l2: Real,
    pub lr_drop_factor: Real,
    pub lr_drops: Option<Vec<usize>>,
    pub label_smoothing: Real,
    pub assignment: SparsityAssignment,
    pub augment: bool,
    pub deterministic: bool,
    pub output_dir: PathBuf,
    pub synthetic_n: usize,
    pub synthetic_classes: usize,
    pub synthetic_separation: Real,
}

struct Raw {
    dataset: Option<String>,
    model: Option<String>,
    strategy: Option<String>,
    sparsity: Option<Real>,
    seed: Option<u64>,
    out: ExperimentConfig,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, ExpError> {
    value.parse().map_err(|_| {
        ExpError::Config(format!(
            "line {line}: value `{value}` for key `{key}` has the wrong type"
        ))
    })
}

/// Parse the flat key-value config text. Every key is typed, required keys
/// must be present, and unknown keys are rejected with their line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExpError> {
    let mut raw = Raw {
        dataset: None,
        model: None,
        strategy: None,
        sparsity: None,
        seed: None,
        out: ExperimentConfig {
            dataset: String::new(),
            data_dir: PathBuf::from("data"),
            model: String::new(),
            strategy: GrowthStrategy::Static,
            sparsity: 0.0,
            seed: 0,
            gamma: 1.0,
            alpha: 0.2,
            update_period: 1000,
            t_end: None,
            epochs: 5,
            batch_size: 128,
            lr: 0.1,
            momentum: 0.9,
            l2: 1e-4,
            lr_drop_factor: 10.0,
            lr_drops: None,
            label_smoothing: 0.0,
            assignment: SparsityAssignment::ErdosRenyi,
            augment: false,
            deterministic: true,
            output_dir: PathBuf::from("out"),
            synthetic_n: 512,
            synthetic_classes: 4,
            synthetic_separation: 3.0,
        },
    };

    for (idx, full_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = full_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ExpError::Config(format!(
                "line {line}: expected `key = value`, got `{content}`"
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(ExpError::Config(format!("line {line}: key `{key}` has no value")));
        }
        match key {
            "dataset" => raw.dataset = Some(value.to_string()),
            "data_dir" => raw.out.data_dir = PathBuf::from(value),
            "model" => raw.model = Some(value.to_string()),
            "strategy" => raw.strategy = Some(value.to_string()),
            "sparsity" => raw.sparsity = Some(parse_value(key, value, line)?),
            "seed" => raw.seed = Some(parse_value(key, value, line)?),
            "gamma" => raw.out.gamma = parse_value(key, value, line)?,
            "alpha" => raw.out.alpha = parse_value(key, value, line)?,
            "update_period" => raw.out.update_period = parse_value(key, value, line)?,
            "t_end" => raw.out.t_end = Some(parse_value(key, value, line)?),
            "epochs" => raw.out.epochs = parse_value(key, value, line)?,
            "batch_size" => raw.out.batch_size = parse_value(key, value, line)?,
            "lr" => raw.out.lr = parse_value(key, value, line)?,
            "momentum" => raw.out.momentum = parse_value(key, value, line)?,
            "l2" => raw.out.l2 = parse_value(key, value, line)?,
            "lr_drop_factor" => raw.out.lr_drop_factor = parse_value(key, value, line)?,
            "lr_drops" => {
                let mut drops = Vec::new();
                for part in value.split(',') {
                    drops.push(parse_value::<usize>(key, part.trim(), line)?);
                }
                raw.out.lr_drops = Some(drops);
            }
            "label_smoothing" => raw.out.label_smoothing = parse_value(key, value, line)?,
            "assignment" => {
                raw.out.assignment = match value {
                    "er" => SparsityAssignment::ErdosRenyi,
                    "uniform" => SparsityAssignment::Uniform,
                    _ => {
                        return Err(ExpError::Config(format!(
                            "line {line}: assignment must be `er` or `uniform`, got `{value}`"
                        )))
                    }
                }
            }
            "augment" => raw.out.augment = parse_value(key, value, line)?,
            "deterministic" => raw.out.deterministic = parse_value(key, value, line)?,
            "output_dir" => raw.out.output_dir = PathBuf::from(value),
            "synthetic_n" => raw.out.synthetic_n = parse_value(key, value, line)?,
            "synthetic_classes" => raw.out.synthetic_classes = parse_value(key, value, line)?,
            "synthetic_separation" => {
                raw.out.synthetic_separation = parse_value(key, value, line)?
            }
            _ => {
                return Err(ExpError::Config(format!("line {line}: unknown key `{key}`")));
            }
        }
    }

    let mut config = raw.out;
    config.dataset = raw
        .dataset
        .ok_or_else(|| ExpError::Config("missing required key `dataset`".into()))?;
    config.model = raw
        .model
        .ok_or_else(|| ExpError::Config("missing required key `model`".into()))?;
    let strategy_tag = raw
        .strategy
        .ok_or_else(|| ExpError::Config("missing required key `strategy`".into()))?;
    config.strategy = GrowthStrategy::parse(&strategy_tag)
        .ok_or_else(|| ExpError::Config(format!("unknown strategy `{strategy_tag}`")))?;
    config.sparsity = raw
        .sparsity
        .ok_or_else(|| ExpError::Config("missing required key `sparsity`".into()))?;
    config.seed = raw
        .seed
        .ok_or_else(|| ExpError::Config("missing required key `seed` (no wall-clock default)".into()))?;
    config.validate()?;
    Ok(config)
}

/// Read and parse a config file, then apply the seed override from
/// `SPARSEGROW_SEED` when set.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExpError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExpError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        config.seed = seed
            .parse()
            .map_err(|_| ExpError::Config(format!("{SEED_ENV}=`{seed}` is not an integer")))?;
    }
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExpError> {
        if !matches!(self.dataset.as_str(), "mnist" | "cifar10" | "cifar100" | "synthetic") {
            return Err(ExpError::Config(format!("unknown dataset `{}`", self.dataset)));
        }
        if !matches!(self.model.as_str(), "mlp" | "cnn" | "mlp_tiny") {
            return Err(ExpError::Config(format!("unknown model `{}`", self.model)));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(ExpError::Config(format!(
                "sparsity {} outside [0, 1)",
                self.sparsity
            )));
        }
        if self.gamma <= 0.0 {
            return Err(ExpError::Config(format!("gamma {} must be > 0", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ExpError::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.update_period == 0 {
            return Err(ExpError::Config("update_period must be >= 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ExpError::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(ExpError::Config(format!(
                "label_smoothing {} outside [0, 1)",
                self.label_smoothing
            )));
        }
        let opt = self.optimizer();
        opt.validate().map_err(|e| ExpError::Config(e.to_string()))?;
        Ok(())
    }

    /// Learning-rate drops default to 40% and 60% of the configured epochs,
    /// the proportions of the paper-scale protocol.
    pub fn optimizer(&self) -> OptimizerState {
        let drops = self.lr_drops.clone().unwrap_or_else(|| {
            vec![(self.epochs * 2) / 5, (self.epochs * 3) / 5]
                .into_iter()
                .filter(|&e| e > 0)
                .collect()
        });
        OptimizerState {
            initial_lr: self.lr,
            drop_factor: self.lr_drop_factor,
            drop_epochs: drops,
            momentum: self.momentum,
            l2: self.l2,
        }
    }

    /// Prune-grow schedule for a run of `total_steps`. The rewiring horizon
    /// defaults to the step of the second learning-rate drop, i.e. 60% of
    /// training.
    pub fn schedule(&self, total_steps: usize) -> PruneGrowSchedule {
        let t_end = self
            .t_end
            .unwrap_or_else(|| (total_steps * 3) / 5)
            .max(self.update_period);
        PruneGrowSchedule {
            period: self.update_period,
            t_end,
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    /// Resolve the named reference architecture against the dataset shape.
    pub fn model_spec(
        &self,
        input_shape: (usize, usize, usize),
        classes: usize,
    ) -> Result<ModelSpec, ExpError> {
        let units = input_shape.0 * input_shape.1 * input_shape.2;
        let layers = match self.model.as_str() {
            "mlp" => vec![
                LayerSpec::Feedforward { n_in: units, n_out: 256, has_bias: true },
                LayerSpec::Relu,
                LayerSpec::Feedforward { n_in: 256, n_out: 256, has_bias: true },
                LayerSpec::Relu,
                LayerSpec::Feedforward { n_in: 256, n_out: classes, has_bias: true },
            ],
            "mlp_tiny" => vec![
                LayerSpec::Feedforward { n_in: units, n_out: 32, has_bias: true },
                LayerSpec::Relu,
                LayerSpec::Feedforward { n_in: 32, n_out: classes, has_bias: true },
            ],
            "cnn" => {
                let (c, h, w) = input_shape;
                let conv1 = ConvGeometry {
                    in_channels: c,
                    in_h: h,
                    in_w: w,
                    out_channels: 32,
                    kernel_h: 3,
                    kernel_w: 3,
                    stride: 1,
                    padding: 1,
                };
                let conv2 = ConvGeometry {
                    in_channels: 32,
                    in_h: h / 2,
                    in_w: w / 2,
                    out_channels: 64,
                    kernel_h: 3,
                    kernel_w: 3,
                    stride: 1,
                    padding: 1,
                };
                let flat = 64 * (h / 4) * (w / 4);
                vec![
                    LayerSpec::Conv2d { geom: conv1, has_bias: true },
                    LayerSpec::Relu,
                    LayerSpec::AvgPool { pool: 2 },
                    LayerSpec::Conv2d { geom: conv2, has_bias: true },
                    LayerSpec::Relu,
                    LayerSpec::AvgPool { pool: 2 },
                    LayerSpec::Flatten,
                    LayerSpec::Feedforward { n_in: flat, n_out: classes, has_bias: true },
                ]
            }
            other => return Err(ExpError::Config(format!("unknown model `{other}`"))),
        };
        let spec =
            ModelSpec::new(input_shape, layers).with_label_smoothing(self.label_smoothing);
        spec.validate().map_err(ExpError::from)?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
dataset = synthetic
model = mlp_tiny
strategy = gse_uniform
sparsity = 0.9
seed = 1
";

    #[test]
    fn minimal_config_fills_paper_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.momentum, 0.9);
        assert_eq!(c.l2, 1e-4);
        assert_eq!(c.lr, 0.1);
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.alpha, 0.2);
        assert_eq!(c.update_period, 1000);
        assert_eq!(c.gamma, 1.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}gamm = 1\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("gamm"), "{err}");
        assert!(err.to_string().contains("line 6"), "{err}");
    }

    #[test]
    fn zero_gamma_is_rejected() {
        let text = format!("{MINIMAL}gamma = 0\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn missing_seed_is_rejected() {
        let text = "dataset = mnist\nmodel = mlp\nstrategy = static\nsparsity = 0.5\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let text = format!("{MINIMAL}epochs = soon\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("epochs"), "{err}");
        assert!(err.to_string().contains("line 6"), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = format!("# experiment\n\n{MINIMAL}  # trailing\nepochs = 2 # inline\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.epochs, 2);
    }

    #[test]
    fn schedule_anchors_t_end_at_sixty_percent() {
        let c = parse_config(MINIMAL).unwrap();
        let s = c.schedule(10_000);
        assert_eq!(s.t_end, 6_000);
        assert_eq!(s.period, 1000);
    }

    #[test]
    fn lr_drops_default_to_paper_proportions() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.epochs = 200;
        let opt = c.optimizer();
        assert_eq!(opt.drop_epochs, vec![80, 120]);
    }

    #[test]
    fn reference_models_resolve() {
        let c = parse_config(MINIMAL).unwrap();
        let mlp = {
            let mut c = c.clone();
            c.model = "mlp".into();
            c.model_spec((1, 28, 28), 10).unwrap()
        };
        assert_eq!(mlp.parametric_dims(), vec![(784, 256), (256, 256), (256, 10)]);
        let cnn = {
            let mut c = c.clone();
            c.model = "cnn".into();
            c.model_spec((3, 32, 32), 10).unwrap()
        };
        assert_eq!(
            cnn.parametric_dims(),
            vec![(27, 32), (288, 64), (4096, 10)]
        );
    }
}
