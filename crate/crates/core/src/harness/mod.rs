//! Configuration files, policy evaluation, sweeps and plots.

mod config_file;
mod metrics;
mod plot;
pub mod registry;
mod sweep;

pub use config_file::RunConfig;
pub use metrics::{evaluate_policy, RunMetrics};
pub use plot::{emit_plot, write_plot};
pub use registry::{make_policy, POLICY_NAMES};
pub use sweep::{run_sweep, sweep_csv, SweepParameter, SweepRow, SweepSpec, MAX_SCALED_DISCONNECT, SWEEP_HEADER};
