//! Run configuration and the commands behind the `dplp` binary.

pub mod config;
pub mod grid;
pub mod run;
pub mod sweep;

pub use config::{DataSource, LossName, MethodOverrides, RunConfig, Splits, DEFAULT_DELTA};
pub use grid::{cmd_grid, grid_on, holdout, log_grid, GridResult, GridRow, GridSpec};
pub use run::{cmd_calibrate, cmd_synth, cmd_train, run_on, write_json, Calibration, RunOutcome, SynthOutput};
pub use sweep::{cmd_sweep, mean_std, sweep_on, CellFailure, SweepResult, SweepRow};
