//! Experiment harness behind the `spikeq` CLI: configuration, training,
//! validation, BER sweeps and curve comparison.

mod commands;
pub mod config;
pub mod files;
mod sweep;

pub use commands::{
    build_untrained, checkpoint_path, cmd_compare, cmd_sweep, cmd_train, cmd_validate, curve_path, load_neural,
    load_receiver, validate_checkpoint, Comparison, CurveFile, CurveSource, OrderingFlag, PairOrdering, TrainReport,
    ValidationReport,
};
pub use config::{ExperimentConfig, Profile, SweepConfig, PRESETS};
pub use files::Metadata;
pub use sweep::{point_seeds, simulate_point, sweep, wilson_interval, CurvePoint, CurveRow, Receiver, StopReason};

use crate::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_MAP_INFEASIBLE: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;
pub const EXIT_MISSING_CHECKPOINT: u8 = 5;

/// Process exit code for a failed command.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::MapInfeasible { .. } => EXIT_MAP_INFEASIBLE,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::MissingCheckpoint(_) => EXIT_MISSING_CHECKPOINT,
        _ => EXIT_FAILURE,
    }
}
