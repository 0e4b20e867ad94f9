//! Scenario configuration, the end-to-end tracking loop, trajectory
//! logging, and RMSE reporting.

mod config;
mod engine;
mod log;
mod metrics;

pub use config::{
    load_config, ConfigError, CustomReference, ScenarioConfig, ScenarioKind, ScenarioSection,
    SolverSettings,
};
pub use engine::{run_tracking, SimError, TrackingOutput};
pub use log::{LogError, LogRow, TrajectoryLog, CSV_HEADER};
pub use metrics::{rmse, segment_series, ChannelKind, SegmentSeries};
