//! Benchmark harness for the edge platform.
//!
//! A [`Scenario`] names the worker nodes of one deployment (on premises,
//! remote site, cloud, or all of them) and the delay profile of every link
//! between sites and the tester. The drivers replay the latency probe, the
//! function sweeps, the pub/sub matrix and the percolator on a virtual
//! clock, so a run with a given seed always produces the same samples.

mod error;
pub mod faas;
pub mod latency;
pub mod percolate;
pub mod pubsub;
pub mod report;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
pub use report::{emit_report, read_report, BenchReport, ReportFormat};
pub use scenario::{load_scenario, parse_scenario, LinkPreset, Scenario};
pub use stats::{summarize, Summary};
