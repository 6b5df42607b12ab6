//! Experiment runner: config parsing, training runs, the subset-factor
//! sweep, the FLOPs report, and the model sidecar.

mod config;
mod report;
mod sidecar;
mod sweep;
mod train;

pub use config::{load_config, parse_config, ExperimentConfig, SEED_ENV};
pub use report::{
    dataset_shape, flops_csv, flops_rows, run_flops_report, FlopsRow, REPORT_SPARSITIES,
    RESNET_REPORT_PERIOD,
};
pub use sidecar::{decode_model, encode_model, read_model, write_model};
pub use sweep::{run_gamma_sweep, SweepOutcome, SweepRow, SweepSummary};
pub use train::{
    evaluate, init_params, run_training, MetricsRecord, TrainOutcome, METRICS_HEADER,
};

use thiserror::Error;

use crate::data::DataError;
use crate::dst::DstError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Dst(#[from] DstError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("{0}")]
    Io(String),
}

impl ExpError {
    /// Process exit code: 0 ok, 2 missing data, 3 infeasible sparsity,
    /// 4 numeric failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Data(DataError::Io { .. }) => 2,
            ExpError::Dst(DstError::InfeasibleSparsity(_)) => 3,
            ExpError::NumericFailure(_) => 4,
            _ => 1,
        }
    }
}

impl From<crate::sparse::SparseError> for ExpError {
    fn from(e: crate::sparse::SparseError) -> Self {
        ExpError::Dst(DstError::Sparse(e))
    }
}
