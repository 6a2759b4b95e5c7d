//! Experiment harness: accuracy-vs-epsilon sweeps, closed-loop report
//! bundles with CDFs, and the per-stage timing breakdown.

mod config;
mod live;
mod report;
mod sweep;
mod timing;

pub use config::{KvConfig, RunMode};
pub use live::{run_live_timing, LiveRunConfig};
pub use report::{
    ks_distance, recount_trace_csv, run_closed_loop, ClosedLoopConfig, ClosedLoopReport,
    Condition, TraceRecount,
};
pub use sweep::{accuracy, accuracy_sweep, sweep_to_csv, SweepRow};
pub use timing::{timing_report, timing_table, TimingBreakdown};
