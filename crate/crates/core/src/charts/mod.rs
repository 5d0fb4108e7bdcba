//! Chart planning and Vega-Lite rendering for results documents.

use std::path::PathBuf;

use thiserror::Error;

use crate::metrics::MetricId;

mod filter;
mod geo;
mod plan;
mod render;

pub use filter::{filter_units, UnitPattern};
pub use geo::{Geometry, DEFAULT_PROPERTY};
pub use plan::{
    plan_charts, signature, ChartPlan, ChartType, Channel, Field, UnitWidget, MAX_DIMENSIONS,
};
pub use render::{
    metric_table, render_chart, visualize, write_chart, OutputFormat, RenderedChart, Shapes,
    VisualizeReport, VisualizerArgs, VEGA_LITE_SCHEMA,
};

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("unsupported variable combination {signature}: {remediation}")]
    UnsupportedCombination { signature: String, remediation: String },
    #[error("invalid unit pattern {pattern:?}: {reason}")]
    InvalidPattern { pattern: String, reason: String },
    #[error("no units left to chart for {metric} ({chart})")]
    EmptySlice { metric: MetricId, chart: ChartType },
    #[error("metric {0} is not in the results document")]
    MissingMetric(MetricId),
    #[error("cannot use geometry file {}: {reason}", path.display())]
    Geometry { path: PathBuf, reason: String },
    #[error("invalid visualizer arguments: {0}")]
    InvalidArgs(String),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
