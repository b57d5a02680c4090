//! End-to-end simulation, Monte Carlo batches and result files.

pub mod config;
pub mod export;
pub mod metrics;
pub mod monte_carlo;
pub mod plot;
pub mod sim;

pub use config::{Mode, NoisePolicy, RunConfig};
pub use export::{export_events, export_metrics, export_trace, load_metrics};
pub use metrics::{analyze, AnalysisReport, Metrics};
pub use monte_carlo::{run_batch, run_monte_carlo, RunSummary};
pub use plot::emit_plots;
pub use sim::{crash_count, run_step, simulate, Trace, World};
