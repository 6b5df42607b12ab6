//! Analytic FLOPs report: per-sparsity training-cost ratios of the guided
//! strategy against the dense-gradient baseline, for the configured
//! architecture and the built-in ImageNet-scale residual network table.

use super::config::ExperimentConfig;
use super::ExpError;
use crate::dst::{flops_estimate, FlopsArch, GrowthStrategy, PruneGrowSchedule};
use crate::Real;

pub const REPORT_SPARSITIES: [Real; 4] = [0.90, 0.95, 0.98, 0.99];

/// Update period used for the built-in ImageNet-scale table, matching the
/// dense-gradient baseline's published accounting.
pub const RESNET_REPORT_PERIOD: usize = 100;

/// Nominal step count for amortizing round overhead in the report.
const REPORT_STEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FlopsRow {
    pub arch: String,
    pub sparsity: Real,
    pub strategy: GrowthStrategy,
    pub train_flops: f64,
    pub inference_flops: f64,
    pub overhead_per_round: f64,
    pub ratio_vs_rigl: f64,
}

/// Input shape and class count implied by the dataset name; the report is
/// analytic and never touches data files.
pub fn dataset_shape(config: &ExperimentConfig) -> ((usize, usize, usize), usize) {
    match config.dataset.as_str() {
        "mnist" => ((1, 28, 28), 10),
        "cifar10" => ((3, 32, 32), 10),
        "cifar100" => ((3, 32, 32), 100),
        _ => ((1, 4, 4), config.synthetic_classes),
    }
}

fn rows_for_arch(
    arch: &FlopsArch,
    schedule: &PruneGrowSchedule,
    batch: usize,
    rows: &mut Vec<FlopsRow>,
) -> Result<(), ExpError> {
    for &sparsity in &REPORT_SPARSITIES {
        let rigl = flops_estimate(
            arch,
            GrowthStrategy::RiglDense,
            schedule,
            sparsity,
            REPORT_STEPS,
            batch,
        )?;
        for strategy in [
            GrowthStrategy::GseUniform,
            GrowthStrategy::RiglDense,
            GrowthStrategy::SetRandom,
        ] {
            let est = flops_estimate(arch, strategy, schedule, sparsity, REPORT_STEPS, batch)?;
            rows.push(FlopsRow {
                arch: arch.name.clone(),
                sparsity,
                strategy,
                train_flops: est.train_total,
                inference_flops: est.inference_per_batch,
                overhead_per_round: est.overhead_per_round,
                ratio_vs_rigl: est.train_total / rigl.train_total,
            });
        }
    }
    Ok(())
}

/// Build the report rows: the configured model first, then the built-in
/// table. Round overhead is amortized over the whole run (one round every
/// `update_period` steps; period 100 for the built-in table).
pub fn flops_rows(config: &ExperimentConfig) -> Result<Vec<FlopsRow>, ExpError> {
    let (shape, classes) = dataset_shape(config);
    let spec = config.model_spec(shape, classes)?;
    let desk = FlopsArch::from_model(&config.model, &spec);
    let desk_schedule = PruneGrowSchedule {
        period: config.update_period,
        t_end: REPORT_STEPS,
        alpha: config.alpha,
        gamma: config.gamma,
    };
    let resnet_schedule = PruneGrowSchedule {
        period: RESNET_REPORT_PERIOD,
        t_end: REPORT_STEPS,
        alpha: config.alpha,
        gamma: 1.0,
    };
    let mut rows = Vec::new();
    rows_for_arch(&desk, &desk_schedule, config.batch_size, &mut rows)?;
    rows_for_arch(&FlopsArch::resnet50(), &resnet_schedule, config.batch_size, &mut rows)?;
    Ok(rows)
}

pub fn flops_csv(rows: &[FlopsRow]) -> String {
    let mut out = String::from(
        "arch,sparsity,strategy,train_flops,inference_flops,overhead_per_round,ratio_vs_rigl\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6e},{:.6e},{:.6e},{:.6}\n",
            r.arch,
            r.sparsity,
            r.strategy.tag(),
            r.train_flops,
            r.inference_flops,
            r.overhead_per_round,
            r.ratio_vs_rigl
        ));
    }
    out
}

/// Run the report and write `flops.csv` into the output directory.
pub fn run_flops_report(config: &ExperimentConfig) -> Result<Vec<FlopsRow>, ExpError> {
    let rows = flops_rows(config)?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| ExpError::Io(format!("cannot create {}: {e}", config.output_dir.display())))?;
    super::train::write_text(&config.output_dir.join("flops.csv"), &flops_csv(&rows))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::config::parse_config;

    fn config() -> ExperimentConfig {
        parse_config(
            "dataset = mnist\nmodel = mlp\nstrategy = gse_uniform\nsparsity = 0.98\nseed = 1\n",
        )
        .unwrap()
    }

    #[test]
    fn ratio_improves_with_sparsity_for_both_arches() {
        let rows = flops_rows(&config()).unwrap();
        for arch in ["mlp", "resnet50"] {
            let ratios: Vec<f64> = REPORT_SPARSITIES
                .iter()
                .map(|&s| {
                    rows.iter()
                        .find(|r| {
                            r.arch == arch
                                && r.sparsity == s
                                && r.strategy == GrowthStrategy::GseUniform
                        })
                        .unwrap()
                        .ratio_vs_rigl
                })
                .collect();
            for pair in ratios.windows(2) {
                assert!(pair[1] < pair[0], "{arch}: {ratios:?}");
            }
        }
    }

    #[test]
    fn random_growth_has_zero_overhead() {
        let rows = flops_rows(&config()).unwrap();
        for r in rows.iter().filter(|r| r.strategy == GrowthStrategy::SetRandom) {
            assert_eq!(r.overhead_per_round, 0.0);
        }
    }

    #[test]
    fn csv_row_count_and_header() {
        let rows = flops_rows(&config()).unwrap();
        let csv = flops_csv(&rows);
        // two arches x four sparsities x three strategies + header
        assert_eq!(csv.lines().count(), 1 + 2 * 4 * 3);
        assert!(csv.starts_with("arch,sparsity,strategy"));
    }
}
