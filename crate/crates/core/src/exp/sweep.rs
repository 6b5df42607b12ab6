//! Subset-factor sweep: one training run per (gamma, seed), with mean and
//! 95th-percentile accuracy aggregated per gamma.

use super::config::ExperimentConfig;
use super::train::run_training;
use super::ExpError;
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: Real,
    pub seed: u64,
    pub test_acc: Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub gamma: Real,
    pub mean_acc: Real,
    pub p95_acc: Real,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
    pub sweep_csv: String,
    pub summary_csv: String,
}

/// Nearest-rank 95th percentile.
fn percentile95(values: &[Real]) -> Real {
    let mut sorted = values.to_vec();
    sorted.sort_by(Real::total_cmp);
    let rank = ((0.95 * sorted.len() as Real).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Run the sweep. Each run writes its own outputs under
/// `<output_dir>/gamma<g>_seed<s>/`; the comparative CSVs land in
/// `<output_dir>` itself.
pub fn run_gamma_sweep(
    config: &ExperimentConfig,
    gammas: &[Real],
    seeds: &[u64],
) -> Result<SweepOutcome, ExpError> {
    if gammas.len() < 2 {
        return Err(ExpError::Config(format!(
            "gamma sweep needs at least two gammas, got {}",
            gammas.len()
        )));
    }
    if seeds.is_empty() {
        return Err(ExpError::Config("gamma sweep needs at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(gammas.len() * seeds.len());
    for &gamma in gammas {
        for &seed in seeds {
            let mut run = config.clone();
            run.gamma = gamma;
            run.seed = seed;
            run.output_dir = config.output_dir.join(format!("gamma{gamma}_seed{seed}"));
            let outcome = run_training(&run)?;
            rows.push(SweepRow {
                gamma,
                seed,
                test_acc: outcome.final_test_acc,
            });
        }
    }

    let mut summaries = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let accs: Vec<Real> = rows
            .iter()
            .filter(|r| r.gamma == gamma)
            .map(|r| r.test_acc)
            .collect();
        summaries.push(SweepSummary {
            gamma,
            mean_acc: accs.iter().sum::<Real>() / accs.len() as Real,
            p95_acc: percentile95(&accs),
        });
    }

    let mut sweep_csv = String::from("gamma,seed,test_acc\n");
    for r in &rows {
        sweep_csv.push_str(&format!("{},{},{:.6}\n", r.gamma, r.seed, r.test_acc));
    }
    let mut summary_csv = String::from("gamma,mean_acc,p95_acc\n");
    for s in &summaries {
        summary_csv.push_str(&format!("{},{:.6},{:.6}\n", s.gamma, s.mean_acc, s.p95_acc));
    }
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| ExpError::Io(format!("cannot create {}: {e}", config.output_dir.display())))?;
    super::train::write_text(&config.output_dir.join("sweep.csv"), &sweep_csv)?;
    super::train::write_text(&config.output_dir.join("sweep_summary.csv"), &summary_csv)?;

    Ok(SweepOutcome {
        rows,
        summaries,
        sweep_csv,
        summary_csv,
    })
}
