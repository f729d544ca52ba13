//! Evaluation toolkit for pedestrian behavior prediction benchmarks.
//!
//! Annotated pedestrian tracks are cut into fixed-length observation windows
//! for three tasks (intention estimation, action prediction and event-risk
//! assessment), joined with model prediction logs and scored with base,
//! weighted and instance-level metric suites, scenario slices and an
//! intention/action agreement table.

pub mod annotation;
pub mod config;
pub mod error;
pub mod json;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod predlog;
pub mod report;
pub mod risk_grid;
pub mod sampler;
pub mod scenario;
pub mod synth;

pub use error::{Error, Result};
