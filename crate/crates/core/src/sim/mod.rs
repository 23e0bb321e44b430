//! Scenario orchestration: configuration, the epoch loop, baselines, the
//! constraint validator, metrics and traces.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod scenario;
pub mod trace;
pub mod validate;

pub use config::{HopPolicy, PolicyConfig, ScenarioConfig, SharePolicy};
pub use engine::{
    baseline_greedy_share, baseline_load_balance, cluster_loads, run, run_to_dir, run_with, EpochReport, Simulation,
};
pub use metrics::{metrics_summary, MetricsFrame, MetricsSummary};
pub use trace::{read_trace, validate_trace, TraceRecord, TraceWriter};
pub use validate::{validate_decision, Constraint, EpochDecision, ValidationContext, Violation};
