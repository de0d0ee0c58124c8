//! Spatial and temporal inequality of geo-tagged social media activity.
//!
//! The pipeline reads time-stamped, geo-tagged events and census tract
//! polygons, assigns every event to a tract, splits users into visitors and
//! locals by how long they were active, and measures how unevenly images,
//! hashtags and census indicators are spread over tracts and time.

pub mod aggregate;
pub mod cohort;
pub mod geo;
pub mod ingest;
pub mod metrics;
pub mod numeric;
pub mod report;
pub mod synth;
