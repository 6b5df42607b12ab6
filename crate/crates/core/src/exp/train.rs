//! Seeded end-to-end training runs: batching, SGD, prune-grow rounds on the
//! current batch's cache, per-epoch metrics, and file outputs.

use std::path::Path;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::sidecar;
use super::ExpError;
use crate::data::{
    augment_batch, batch_matrix, epoch_order, gather_batch, load_cifar10, load_cifar100,
    load_mnist, normalize, synthetic_pair, AugmentationPolicy, Dataset, NormalizeConstants,
    Split,
};
use crate::dst::{
    global_grow_prune_round, layer_counts, sample_connection_pattern, LayerRoundInput,
    PruneGrowSchedule, RoundReport,
};
use crate::nn::{
    backward, forward, init_weights, sgd_step, ActivationCache, ModelParams, ModelSpec,
};
use crate::sparse::ConnectionSet;
use crate::{Mat, Real};

// ChaCha stream ids; epoch shuffles use streams 1..=epochs on the same seed.
const LAYER_STREAM_BASE: u64 = 0x10_0000;
const ROUND_STREAM: u64 = 0x20_0000;
const AUGMENT_STREAM: u64 = 0x30_0000;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One row of metrics.csv, written once per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: Real,
    pub train_acc: Real,
    pub test_acc: Real,
    pub current_lr: Real,
    pub active_connections_total: usize,
    pub prune_grow_rounds_done: usize,
    /// Realized candidate-set sizes of this epoch's rounds, `;`-joined
    /// (`-` when the epoch had none).
    pub realized_subset_sizes: String,
}

pub const METRICS_HEADER: &str = "epoch,step,train_loss,train_acc,test_acc,current_lr,active_connections_total,prune_grow_rounds_done,realized_subset_sizes";

impl MetricsRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.epoch,
            self.step,
            self.train_loss,
            self.train_acc,
            self.test_acc,
            self.current_lr,
            self.active_connections_total,
            self.prune_grow_rounds_done,
            self.realized_subset_sizes
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<MetricsRecord>,
    pub final_test_acc: Real,
    pub metrics_csv: String,
    pub total_rounds: usize,
}

fn load_datasets(config: &ExperimentConfig) -> Result<(Dataset, Dataset), ExpError> {
    Ok(match config.dataset.as_str() {
        "mnist" => (
            load_mnist(&config.data_dir, Split::Train)?,
            load_mnist(&config.data_dir, Split::Test)?,
        ),
        "cifar10" => (
            load_cifar10(&config.data_dir, Split::Train)?,
            load_cifar10(&config.data_dir, Split::Test)?,
        ),
        "cifar100" => (
            load_cifar100(&config.data_dir, Split::Train)?,
            load_cifar100(&config.data_dir, Split::Test)?,
        ),
        "synthetic" => synthetic_pair(
            config.synthetic_n,
            (config.synthetic_n / 4).max(32),
            config.synthetic_classes,
            config.synthetic_separation,
            config.seed,
        ),
        other => return Err(ExpError::Config(format!("unknown dataset `{other}`"))),
    })
}

fn normalize_buffer(
    buf: &mut [Real],
    shape: (usize, usize, usize),
    constants: &NormalizeConstants,
) {
    let (c, h, w) = shape;
    let plane = h * w;
    let image_len = c * plane;
    for image in buf.chunks_mut(image_len) {
        for ch in 0..c {
            let (m, s) = (constants.mean[ch], constants.std[ch]);
            for v in &mut image[ch * plane..(ch + 1) * plane] {
                *v = (*v - m) / s;
            }
        }
    }
}

fn count_correct(logits: &Mat, labels: &[usize]) -> usize {
    let mut correct = 0;
    for (j, &label) in labels.iter().enumerate() {
        let col = logits.column(j);
        let mut best = 0;
        for c in 1..col.len() {
            if col[c] > col[best] {
                best = c;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    correct
}

/// Accuracy of the model on a (pre-normalized) dataset.
pub fn evaluate(
    spec: &ModelSpec,
    params: &mut ModelParams,
    ds: &Dataset,
    batch_size: usize,
) -> Result<Real, ExpError> {
    let units = spec.input_units();
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..ds.len()).collect();
    for chunk in indices.chunks(batch_size) {
        let (buf, labels) = gather_batch(ds, chunk);
        let input = batch_matrix(&buf, units);
        let cache = forward(spec, params, &input)?;
        correct += count_correct(cache.logits(), &labels);
    }
    Ok(correct as Real / ds.len() as Real)
}

/// Initialize every parametric layer's topology and weights from the run
/// seed (one ChaCha stream per layer).
pub fn init_params(
    spec: &ModelSpec,
    sparsity: Real,
    assignment: crate::dst::SparsityAssignment,
    seed: u64,
) -> Result<ModelParams, ExpError> {
    let dims = spec.parametric_dims();
    let counts = layer_counts(&dims, sparsity, assignment)?;
    let mut sets = Vec::with_capacity(dims.len());
    for (l, (&(n_in, n_out), &count)) in dims.iter().zip(&counts).enumerate() {
        let mut rng = stream_rng(seed, LAYER_STREAM_BASE + l as u64);
        let pattern = sample_connection_pattern(n_in, n_out, count, &mut rng)
            .map_err(ExpError::from)?;
        let mut set = ConnectionSet::from_connections(n_in, n_out, pattern)
            .map_err(crate::dst::DstError::from)?;
        init_weights(&mut set, &mut rng);
        sets.push(set);
    }
    Ok(ModelParams::from_connection_sets(spec, sets)?)
}

fn run_round(
    spec: &ModelSpec,
    params: &mut ModelParams,
    cache: &ActivationCache,
    schedule: &PruneGrowSchedule,
    strategy: crate::dst::GrowthStrategy,
    t: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<RoundReport>, ExpError> {
    let mut inputs: Vec<LayerRoundInput> = Vec::new();
    for (l, slot) in params.layers.iter_mut().enumerate() {
        if let Some(p) = slot {
            let (h_prev, delta) = cache.conn_pair(l)?;
            inputs.push(LayerRoundInput {
                conn: &mut p.conn,
                h_prev,
                delta,
            });
        }
    }
    let _ = spec;
    Ok(global_grow_prune_round(&mut inputs, schedule, strategy, t, rng)?)
}

/// Run one full training experiment and write `metrics.csv` and `model.bin`
/// into the config's output directory.
pub fn run_training(config: &ExperimentConfig) -> Result<TrainOutcome, ExpError> {
    config.validate()?;
    let (train, test_raw) = load_datasets(config)?;
    let constants = NormalizeConstants::for_dataset(&config.dataset);
    let mut test = test_raw;
    normalize(&mut test, &constants)?;

    let spec = config.model_spec(train.shape, train.num_classes)?;
    let mut params = init_params(&spec, config.sparsity, config.assignment, config.seed)?;
    let initial_active = params.total_active();

    let steps_per_epoch = train.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let schedule = config.schedule(total_steps);
    if config.strategy.rewires() {
        schedule.validate()?;
    }
    let opt = config.optimizer();
    let policy = AugmentationPolicy::cifar();
    if config.augment {
        policy
            .validate(train.shape)
            .map_err(ExpError::Data)?;
    }

    let mut round_rng = stream_rng(config.seed, ROUND_STREAM);
    let mut augment_rng = stream_rng(config.seed, AUGMENT_STREAM);
    let units = spec.input_units();
    let mut t = 0usize;
    let mut rounds_done = 0usize;
    let mut records: Vec<MetricsRecord> = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let order = epoch_order(train.len(), config.seed, epoch);
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;
        let mut seen = 0usize;
        let mut subset_sizes: Vec<usize> = Vec::new();

        for chunk in order.chunks(config.batch_size) {
            let (mut buf, labels) = gather_batch(&train, chunk);
            if config.augment {
                augment_batch(&mut buf, train.shape, &policy, &mut augment_rng);
            }
            normalize_buffer(&mut buf, train.shape, &constants);
            let input = batch_matrix(&buf, units);
            let mut cache = forward(&spec, &mut params, &input)?;
            let (grads, loss) = backward(&spec, &mut params, &mut cache, &labels)?;
            if !loss.is_finite() {
                return Err(ExpError::NumericFailure(format!(
                    "loss became {loss} at step {t} (epoch {epoch}); \
                     last lr {}, batch of {}",
                    opt.learning_rate(epoch),
                    labels.len()
                )));
            }
            epoch_loss += loss * labels.len() as Real;
            epoch_correct += count_correct(cache.logits(), &labels);
            seen += labels.len();
            sgd_step(&mut params, &grads, &opt, epoch)?;
            t += 1;

            if config.strategy.rewires() && schedule.is_round_step(t) {
                let report = run_round(
                    &spec,
                    &mut params,
                    &cache,
                    &schedule,
                    config.strategy,
                    t,
                    &mut round_rng,
                )?;
                if let Some(report) = report {
                    subset_sizes.push(report.per_layer.iter().map(|s| s.candidates).sum());
                    rounds_done += 1;
                    assert_eq!(
                        report.total_active, initial_active,
                        "sparsity conservation violated at step {t}"
                    );
                }
            }
        }
        assert_eq!(
            params.total_active(),
            initial_active,
            "sparsity conservation violated after epoch {epoch}"
        );

        let test_acc = evaluate(&spec, &mut params, &test, config.batch_size)?;
        let record = MetricsRecord {
            epoch,
            step: t,
            train_loss: epoch_loss / seen as Real,
            train_acc: epoch_correct as Real / seen as Real,
            test_acc,
            current_lr: opt.learning_rate(epoch),
            active_connections_total: params.total_active(),
            prune_grow_rounds_done: rounds_done,
            realized_subset_sizes: if subset_sizes.is_empty() {
                "-".to_string()
            } else {
                subset_sizes
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(";")
            },
        };
        info!(
            "epoch {epoch}: loss {:.4} train {:.4} test {:.4} rounds {rounds_done}",
            record.train_loss, record.train_acc, record.test_acc
        );
        records.push(record);
    }

    let mut metrics_csv = String::from(METRICS_HEADER);
    metrics_csv.push('\n');
    for r in &records {
        metrics_csv.push_str(&r.csv_row());
        metrics_csv.push('\n');
    }

    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| ExpError::Io(format!("cannot create {}: {e}", config.output_dir.display())))?;
    write_text(&config.output_dir.join("metrics.csv"), &metrics_csv)?;
    sidecar::write_model(&config.output_dir.join("model.bin"), &spec, &params)?;

    let final_test_acc = records.last().map(|r| r.test_acc).unwrap_or(0.0);
    Ok(TrainOutcome {
        records,
        final_test_acc,
        metrics_csv,
        total_rounds: rounds_done,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), ExpError> {
    std::fs::write(path, text)
        .map_err(|e| ExpError::Io(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::config::parse_config;

    fn synthetic_config(extra: &str) -> ExperimentConfig {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "dataset = synthetic\nmodel = mlp_tiny\nstrategy = gse_uniform\n\
             sparsity = 0.8\nseed = 7\nepochs = 2\nbatch_size = 32\n\
             update_period = 4\nsynthetic_n = 128\noutput_dir = {}\n{extra}",
            dir.path().join("out").display()
        );
        std::mem::forget(dir); // keep the tempdir alive for the test run
        parse_config(&text).unwrap()
    }

    #[test]
    fn training_runs_and_writes_outputs() {
        let config = synthetic_config("");
        let out = run_training(&config).unwrap();
        assert_eq!(out.records.len(), 2);
        assert!(out.total_rounds > 0, "rounds must have happened");
        assert!(config.output_dir.join("metrics.csv").exists());
        assert!(config.output_dir.join("model.bin").exists());
        let (_, params) = sidecar::read_model(&config.output_dir.join("model.bin")).unwrap();
        assert_eq!(
            params.total_active(),
            out.records[0].active_connections_total
        );
    }

    #[test]
    fn static_strategy_keeps_the_initial_topology() {
        let mut config = synthetic_config("");
        config.strategy = crate::dst::GrowthStrategy::Static;
        let out = run_training(&config).unwrap();
        assert_eq!(out.total_rounds, 0);
        // end topology equals the seeded initialization
        let (spec, params) = sidecar::read_model(&config.output_dir.join("model.bin")).unwrap();
        let fresh = init_params(&spec, config.sparsity, config.assignment, config.seed).unwrap();
        for (a, b) in params.layers.iter().zip(&fresh.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                assert_eq!(a.conn.connections(), b.conn.connections());
            }
        }
    }

    #[test]
    fn active_connection_count_is_constant_across_records() {
        let config = synthetic_config("");
        let out = run_training(&config).unwrap();
        let first = out.records[0].active_connections_total;
        assert!(out.records.iter().all(|r| r.active_connections_total == first));
    }

    #[test]
    fn same_seed_gives_byte_identical_metrics() {
        let config = synthetic_config("");
        let a = run_training(&config).unwrap();
        let b = run_training(&config).unwrap();
        assert_eq!(a.metrics_csv, b.metrics_csv);
    }

    #[test]
    fn separable_blobs_reach_full_training_accuracy_quickly() {
        // well-separated blobs: full train accuracy within 200 steps
        let mut config = synthetic_config("synthetic_separation = 8.0\n");
        config.strategy = crate::dst::GrowthStrategy::Static;
        config.sparsity = 0.5;
        config.epochs = 8; // 4 steps per epoch at n=128, batch=32
        let out = run_training(&config).unwrap();
        assert!(
            out.records.iter().any(|r| r.train_acc == 1.0),
            "never reached full training accuracy: {:?}",
            out.records.last()
        );
        assert!(out.records.last().unwrap().step <= 200);
    }

    #[test]
    fn exploding_learning_rate_is_a_numeric_failure() {
        let mut config = synthetic_config("lr = 1e18\n");
        config.epochs = 3;
        let err = run_training(&config).unwrap_err();
        assert!(matches!(err, ExpError::NumericFailure(_)), "{err}");
    }

    #[test]
    fn missing_dataset_directory_is_a_data_error() {
        let mut config = synthetic_config("");
        config.dataset = "mnist".into();
        config.data_dir = std::path::PathBuf::from("/nonexistent/mnist");
        let err = run_training(&config).unwrap_err();
        assert!(matches!(err, ExpError::Data(_)), "{err}");
    }
}
