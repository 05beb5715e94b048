//! Config-driven twin experiment: prior, truth, observations, surrogate
//! training, inversion, metrics and plot data, each stage reading and writing
//! files under one run directory tracked by a manifest.

pub mod config;
pub mod forward;
pub mod io;
pub mod manifest;
mod stages;

pub use config::{ForwardMode, PipelineConfig};
pub use forward::{data_layout, extract_data, synthesize_observations, ForwardModel};
pub use manifest::{Manifest, STAGES};
pub use stages::{read_run_field, read_toml, InversionSummary, MetricsSummary, Run};
