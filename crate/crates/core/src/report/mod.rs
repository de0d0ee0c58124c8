//! Pipeline orchestration and report outputs.

mod choropleth;
mod emit;
mod pipeline;
mod svg;

use std::path::PathBuf;

use chrono_tz::Tz;
use serde::Serialize;

pub use choropleth::{emit_choropleth, quantile_classes, TractClass};
pub use emit::{
    emit_report, format_number, indexes_csv, ranks_csv, report_json, tags_csv, to_rounded_json,
    tracts_csv, OutputFormat, JSON_SIGNIFICANT_DIGITS,
};
pub use pipeline::{
    analyze, run_pipeline, Analysis, CensusIndicatorReport, CohortReport, ConfigEcho,
    IngestReport, MeasureReport, PipelineInputs, Report, SpatialReport, TemporalReport,
    TractRow, UserCounts,
};
pub use svg::{emit_lorenz_svg, LabeledCurve};

use crate::aggregate::{AggregateError, CohortGroup};
use crate::cohort::{YearMonth, DEFAULT_WINDOW_DAYS};
use crate::geo::GeoError;
use crate::ingest::{EventFormat, IngestError};
use crate::metrics::MetricError;

pub const DEFAULT_TIMEZONE: Tz = Tz::America__New_York;
pub const DEFAULT_BREAKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    PerKm2,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "per-km2" | "per_km2" => Ok(Normalization::PerKm2),
            other => Err(format!("unknown normalization {other:?} (raw or per-km2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub events_path: PathBuf,
    /// Inferred from the file extension when `None`.
    pub events_format: Option<EventFormat>,
    pub tracts_path: PathBuf,
    pub census_path: Option<PathBuf>,
    pub timezone: Tz,
    pub window_days: u32,
    pub normalization: Normalization,
    pub cohorts: Vec<CohortGroup>,
    /// Collection span used for the super-local rule; derived from the
    /// events when `None`.
    pub collection_months: Option<(YearMonth, YearMonth)>,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
    /// Number of independent partitions the event stream is split into.
    pub partitions: usize,
    pub choropleth_breaks: usize,
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            events_path: PathBuf::new(),
            events_format: None,
            tracts_path: PathBuf::new(),
            census_path: None,
            timezone: DEFAULT_TIMEZONE,
            window_days: DEFAULT_WINDOW_DAYS,
            normalization: Normalization::PerKm2,
            cohorts: CohortGroup::EVERY.to_vec(),
            collection_months: None,
            out_dir: None,
            format: OutputFormat::All,
            partitions: 1,
            choropleth_breaks: DEFAULT_BREAKS,
            seed: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("missing input file {0}")]
    MissingInput(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Ingest {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
    #[error("{path}: {source}")]
    Geo {
        path: PathBuf,
        #[source]
        source: GeoError,
    },
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no Lorenz curves to draw")]
    EmptyCurveList,
    #[error("choropleth needs at least 2 classes, got {0}")]
    BadBreakCount(usize),
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

impl ReportError {
    /// Process exit code: 1 for input problems, 2 for broken invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::InvariantViolation(_) => 2,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(ReportError::InvariantViolation("dropped".into()).exit_code(), 2);
        assert_eq!(ReportError::MissingInput("e.csv".into()).exit_code(), 1);
        assert_eq!(ReportError::BadBreakCount(1).exit_code(), 1);
    }
}
