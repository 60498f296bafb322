//! Configuration, persistence, metrics and mode dispatch.

pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod metrics;
pub mod run;

pub use checkpoint::{read_checkpoint, read_replay, write_checkpoint, write_replay};
pub use config::{GradCheckConfig, Mode, RunConfig};
pub use gradcheck::{run_battery, GradCheckReport};
pub use metrics::{read_metrics, MetricsRow, MetricsWriter, METRICS_HEADER};
pub use run::{run, RunSummary};
