//! Event, tract and census parsing plus hashtag extraction.
//!
//! Event parsing is skip-and-count: a bad record is tallied in the
//! [`IngestSummary`] and never aborts the stream. Tract and census files are
//! small and curated, so any problem in them is fatal.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::io::Read;
use std::ops::Range;

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::Value;

use crate::geo::{Coord, Polygon, Ring};

/// How many record errors are kept verbatim in a summary.
const MAX_ERROR_SAMPLES: usize = 20;

/// One shared post.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoEvent {
    pub user_id: String,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl EventFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> EventFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordErrorKind {
    MalformedRecord,
    OutOfRangeCoordinate,
    BadTimestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordError {
    pub line: u64,
    pub kind: RecordErrorKind,
    pub message: String,
}

/// Record accounting for one event stream (or a partition of one).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestSummary {
    pub records_total: u64,
    pub records_ok: u64,
    pub records_skipped: u64,
    pub malformed_record: u64,
    pub out_of_range_coordinate: u64,
    pub bad_timestamp: u64,
    pub error_samples: Vec<RecordError>,
}

impl IngestSummary {
    fn record_error(&mut self, error: RecordError) {
        self.records_total += 1;
        self.records_skipped += 1;
        match error.kind {
            RecordErrorKind::MalformedRecord => self.malformed_record += 1,
            RecordErrorKind::OutOfRangeCoordinate => self.out_of_range_coordinate += 1,
            RecordErrorKind::BadTimestamp => self.bad_timestamp += 1,
        }
        if self.error_samples.len() < MAX_ERROR_SAMPLES {
            self.error_samples.push(error);
        }
    }

    fn record_ok(&mut self) {
        self.records_total += 1;
        self.records_ok += 1;
    }

    /// Combines summaries of consecutive partitions, `self` first.
    pub fn merge(&mut self, other: &IngestSummary) {
        self.records_total += other.records_total;
        self.records_ok += other.records_ok;
        self.records_skipped += other.records_skipped;
        self.malformed_record += other.malformed_record;
        self.out_of_range_coordinate += other.out_of_range_coordinate;
        self.bad_timestamp += other.bad_timestamp;
        for e in &other.error_samples {
            if self.error_samples.len() >= MAX_ERROR_SAMPLES {
                break;
            }
            self.error_samples.push(e.clone());
        }
    }
}

/// Parsed events of one stream or partition, in input order.
#[derive(Debug, Clone, Default)]
pub struct EventBatch {
    pub events: Vec<GeoEvent>,
    pub summary: IngestSummary,
}

/// Fatal input problems, as opposed to per-record errors.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("header is missing required column `{0}`")]
    MissingColumn(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("invalid GeoJSON: {0}")]
    InvalidGeoJson(String),
    #[error("feature {feature}: missing `tract_id` property")]
    MissingTractId { feature: usize },
    #[error("feature {feature} ({tract_id}): geometry is not a Polygon or MultiPolygon")]
    NonPolygonGeometry { feature: usize, tract_id: String },
    #[error("duplicate tract id `{tract_id}` (line/feature {location})")]
    DuplicateTractId { tract_id: String, location: usize },
    #[error("feature {feature} ({tract_id}): ring is not closed or has fewer than 4 positions")]
    UnclosedRing { feature: usize, tract_id: String },
    #[error("line {line}: column `{column}` value {value:?} is not numeric")]
    NonNumericValue { line: u64, column: String, value: String },
    #[error("line {line}: rate column `{column}` value {value} is outside [0, 1]")]
    RateOutOfRange { line: u64, column: String, value: f64 },
    #[error("line {line}: column `{column}` value {value} is negative")]
    NegativeValue { line: u64, column: String, value: f64 },
}

// ---------------------------------------------------------------------------
// Events

/// Column positions of the event fields within a CSV record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CsvLayout {
    user_id: usize,
    lat: usize,
    lon: usize,
    timestamp: usize,
    text: Option<usize>,
    width: usize,
}

impl CsvLayout {
    fn from_header(header: &csv::StringRecord) -> Result<CsvLayout, IngestError> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let require =
            |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()));
        Ok(CsvLayout {
            user_id: require("user_id")?,
            lat: require("lat")?,
            lon: require("lon")?,
            timestamp: require("timestamp")?,
            text: find("text"),
            width: header.len(),
        })
    }
}

/// A slice of an event file holding whole records only.
#[derive(Debug, Clone)]
pub struct EventChunk<'a> {
    bytes: &'a [u8],
    first_line: u64,
    format: EventFormat,
    layout: Option<CsvLayout>,
}

impl EventChunk<'_> {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Offsets just past every record-terminating newline, quote-aware for CSV.
fn record_boundaries(data: &[u8], quoted: bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut in_quotes = false;
    for (i, &b) in data.iter().enumerate() {
        match b {
            b'"' if quoted => in_quotes = !in_quotes,
            b'\n' if !in_quotes => out.push(i + 1),
            _ => {}
        }
    }
    out
}

fn split_ranges(len: usize, boundaries: &[usize], parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let mut ranges = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 1..parts {
        let target = len * p / parts;
        let cut = match boundaries.binary_search(&target) {
            Ok(i) => boundaries[i],
            Err(i) => boundaries.get(i).copied().unwrap_or(len),
        };
        let cut = cut.max(start);
        ranges.push(start..cut);
        start = cut;
    }
    ranges.push(start..len);
    ranges
}

/// Splits an event file into `parts` chunks at record boundaries.
///
/// Every chunk can be parsed independently with [`parse_event_chunk`], and
/// concatenating the chunk results reproduces a single-pass parse. Chunks may
/// be empty when the input has fewer records than parts.
pub fn split_event_bytes(
    data: &[u8],
    format: EventFormat,
    parts: usize,
) -> Result<Vec<EventChunk<'_>>, IngestError> {
    let data = data.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(data);
    let (layout, body, body_line) = match format {
        EventFormat::Jsonl => (None, data, 1),
        EventFormat::Csv => {
            let header_end = record_boundaries(data, true)
                .first()
                .copied()
                .unwrap_or(data.len());
            if data[..header_end].iter().all(u8::is_ascii_whitespace) {
                return Err(IngestError::BadHeader("empty input, no header row".into()));
            }
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(&data[..header_end]);
            let mut header = csv::StringRecord::new();
            reader
                .read_record(&mut header)
                .map_err(|e| IngestError::BadHeader(e.to_string()))?;
            let lines = data[..header_end].iter().filter(|&&b| b == b'\n').count() as u64;
            (
                Some(CsvLayout::from_header(&header)?),
                &data[header_end..],
                1 + lines.max(1),
            )
        }
    };

    let boundaries = record_boundaries(body, format == EventFormat::Csv);
    let ranges = split_ranges(body.len(), &boundaries, parts);
    let mut line = body_line;
    let mut chunks = Vec::with_capacity(ranges.len());
    for r in ranges {
        let bytes = &body[r];
        chunks.push(EventChunk {
            bytes,
            first_line: line,
            format,
            layout,
        });
        line += bytes.iter().filter(|&&b| b == b'\n').count() as u64;
    }
    Ok(chunks)
}

fn parse_coordinate(raw: &str, name: &str, limit: f64) -> Result<f64, (RecordErrorKind, String)> {
    let v: f64 = raw.trim().parse().map_err(|_| {
        (
            RecordErrorKind::MalformedRecord,
            format!("{name} {raw:?} is not a number"),
        )
    })?;
    if !v.is_finite() || v.abs() > limit {
        return Err((
            RecordErrorKind::OutOfRangeCoordinate,
            format!("{name} {v} outside [-{limit}, {limit}]"),
        ));
    }
    Ok(v)
}

fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, (RecordErrorKind, String)> {
    DateTime::parse_from_rfc3339(raw.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| {
            (
                RecordErrorKind::BadTimestamp,
                format!("timestamp {raw:?}: {e}"),
            )
        })
}

fn build_event(
    user_id: &str,
    lat: &str,
    lon: &str,
    timestamp: &str,
    text: &str,
) -> Result<GeoEvent, (RecordErrorKind, String)> {
    if user_id.trim().is_empty() {
        return Err((RecordErrorKind::MalformedRecord, "empty user_id".into()));
    }
    let lat = parse_coordinate(lat, "lat", 90.0)?;
    let lon = parse_coordinate(lon, "lon", 180.0)?;
    let timestamp = parse_timestamp(timestamp)?;
    Ok(GeoEvent {
        user_id: user_id.to_string(),
        lat,
        lon,
        timestamp,
        text: text.to_string(),
    })
}

/// Line numbers from byte offsets; offsets must be non-decreasing.
struct LineCounter<'a> {
    bytes: &'a [u8],
    offset: usize,
    line: u64,
}

impl LineCounter<'_> {
    /// Line of the first byte at or after `offset` that is not a line
    /// terminator; the CSV reader reports a CRLF record starting at its `\n`.
    fn line_at(&mut self, offset: usize) -> u64 {
        let mut offset = offset.min(self.bytes.len());
        while matches!(self.bytes.get(offset), Some(b'\r' | b'\n')) {
            offset += 1;
        }
        if offset > self.offset {
            self.line += self.bytes[self.offset..offset]
                .iter()
                .filter(|&&b| b == b'\n')
                .count() as u64;
            self.offset = offset;
        }
        self.line
    }
}

fn parse_csv_chunk(chunk: &EventChunk<'_>, layout: CsvLayout, batch: &mut EventBatch) {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(chunk.bytes);
    let mut lines = LineCounter {
        bytes: chunk.bytes,
        offset: 0,
        line: chunk.first_line,
    };
    let mut record = csv::ByteRecord::new();
    loop {
        let start = reader.position().byte() as usize;
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                batch.summary.record_error(RecordError {
                    line: lines.line_at(start),
                    kind: RecordErrorKind::MalformedRecord,
                    message: e.to_string(),
                });
                continue;
            }
        }
        let line = lines.line_at(record.position().map_or(start, |p| p.byte() as usize));
        let parsed = if record.len() != layout.width {
            Err((
                RecordErrorKind::MalformedRecord,
                format!("expected {} fields, found {}", layout.width, record.len()),
            ))
        } else {
            let field = |i: usize| std::str::from_utf8(&record[i]);
            match (
                field(layout.user_id),
                field(layout.lat),
                field(layout.lon),
                field(layout.timestamp),
                layout.text.map(field).unwrap_or(Ok("")),
            ) {
                (Ok(u), Ok(la), Ok(lo), Ok(ts), Ok(tx)) => build_event(u, la, lo, ts, tx),
                _ => Err((RecordErrorKind::MalformedRecord, "invalid UTF-8".into())),
            }
        };
        match parsed {
            Ok(event) => {
                batch.summary.record_ok();
                batch.events.push(event);
            }
            Err((kind, message)) => batch.summary.record_error(RecordError {
                line,
                kind,
                message,
            }),
        }
    }
}

fn json_field_str<'v>(value: &'v Value, key: &str) -> Option<Cow<'v, str>> {
    match value.get(key)? {
        Value::String(s) => Some(Cow::Borrowed(s)),
        Value::Number(n) => Some(Cow::Owned(n.to_string())),
        _ => None,
    }
}

fn parse_json_event(line: &[u8]) -> Result<GeoEvent, (RecordErrorKind, String)> {
    let value: Value = serde_json::from_slice(line)
        .map_err(|e| (RecordErrorKind::MalformedRecord, e.to_string()))?;
    if !value.is_object() {
        return Err((RecordErrorKind::MalformedRecord, "not a JSON object".into()));
    }
    let get = |key: &str| {
        json_field_str(&value, key).ok_or_else(|| {
            (
                RecordErrorKind::MalformedRecord,
                format!("missing or non-scalar `{key}`"),
            )
        })
    };
    let text = match value.get("text") {
        None | Some(Value::Null) => Cow::Borrowed(""),
        Some(Value::String(s)) => Cow::Borrowed(s.as_str()),
        Some(_) => {
            return Err((RecordErrorKind::MalformedRecord, "`text` is not a string".into()))
        }
    };
    build_event(
        &get("user_id")?,
        &get("lat")?,
        &get("lon")?,
        &get("timestamp")?,
        &text,
    )
}

fn parse_jsonl_chunk(chunk: &EventChunk<'_>, batch: &mut EventBatch) {
    for (offset, raw) in chunk.bytes.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        if raw.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match parse_json_event(raw) {
            Ok(event) => {
                batch.summary.record_ok();
                batch.events.push(event);
            }
            Err((kind, message)) => batch.summary.record_error(RecordError {
                line: chunk.first_line + offset as u64,
                kind,
                message,
            }),
        }
    }
}

/// Parses one chunk produced by [`split_event_bytes`].
pub fn parse_event_chunk(chunk: &EventChunk<'_>) -> EventBatch {
    let mut batch = EventBatch::default();
    match (chunk.format, chunk.layout) {
        (EventFormat::Csv, Some(layout)) => parse_csv_chunk(chunk, layout, &mut batch),
        _ => parse_jsonl_chunk(chunk, &mut batch),
    }
    batch
}

/// Parses a whole event stream in input order.
pub fn parse_events<R: Read>(mut stream: R, format: EventFormat) -> Result<EventBatch, IngestError> {
    let mut data = Vec::new();
    stream.read_to_end(&mut data)?;
    let chunks = split_event_bytes(&data, format, 1)?;
    Ok(parse_event_chunk(&chunks[0]))
}

// ---------------------------------------------------------------------------
// Tracts

/// A tract as read from GeoJSON, before area and bbox are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTractFeature {
    pub tract_id: String,
    /// One entry per polygon part; a MultiPolygon yields several.
    pub polygons: Vec<Polygon>,
    pub properties: BTreeMap<String, String>,
    /// Geometry exactly as it appeared in the input.
    pub geometry: Value,
}

fn property_string(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_ring(value: &Value) -> Option<Ring> {
    value
        .as_array()?
        .iter()
        .map(|pos| {
            let pos = pos.as_array()?;
            if pos.len() < 2 {
                return None;
            }
            Some([pos[0].as_f64()?, pos[1].as_f64()?])
        })
        .collect::<Option<Vec<Coord>>>()
}

/// Parses polygon rings, returning `Ok(None)` for an unclosed or short ring.
fn parse_polygon(value: &Value) -> Result<Option<Polygon>, String> {
    let rings = value
        .as_array()
        .ok_or_else(|| "polygon coordinates must be an array of rings".to_string())?;
    let mut parsed = Vec::with_capacity(rings.len());
    for ring in rings {
        let ring = parse_ring(ring).ok_or_else(|| "malformed ring positions".to_string())?;
        if ring.len() < 4 || ring.first() != ring.last() {
            return Ok(None);
        }
        parsed.push(ring);
    }
    let mut iter = parsed.into_iter();
    match iter.next() {
        Some(exterior) => Ok(Some(Polygon {
            exterior,
            holes: iter.collect(),
        })),
        None => Ok(None),
    }
}

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon tracts.
pub fn parse_tracts<R: Read>(mut geojson: R) -> Result<Vec<RawTractFeature>, IngestError> {
    let mut data = Vec::new();
    geojson.read_to_end(&mut data)?;
    let root: Value =
        serde_json::from_slice(&data).map_err(|e| IngestError::InvalidGeoJson(e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IngestError::InvalidGeoJson(
            "top-level object is not a FeatureCollection".into(),
        ));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::InvalidGeoJson("`features` is not an array".into()))?;

    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(features.len());
    for (feature, f) in features.iter().enumerate() {
        let props = f.get("properties").and_then(Value::as_object);
        let tract_id = match props.and_then(|p| p.get("tract_id")) {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::Number(n)) if n.is_u64() || n.is_i64() => n.to_string(),
            _ => return Err(IngestError::MissingTractId { feature }),
        };
        let geometry = f.get("geometry").cloned().unwrap_or(Value::Null);
        let non_polygon = || IngestError::NonPolygonGeometry {
            feature,
            tract_id: tract_id.clone(),
        };
        let coordinates = geometry.get("coordinates").ok_or_else(non_polygon)?;
        let parts: Vec<&Value> = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![coordinates],
            Some("MultiPolygon") => coordinates
                .as_array()
                .ok_or_else(|| IngestError::InvalidGeoJson("MultiPolygon coordinates".into()))?
                .iter()
                .collect(),
            _ => return Err(non_polygon()),
        };
        let mut polygons = Vec::with_capacity(parts.len());
        for part in parts {
            match parse_polygon(part).map_err(IngestError::InvalidGeoJson)? {
                Some(p) => polygons.push(p),
                None => {
                    return Err(IngestError::UnclosedRing {
                        feature,
                        tract_id,
                    })
                }
            }
        }
        if polygons.is_empty() {
            return Err(IngestError::UnclosedRing { feature, tract_id });
        }
        if !seen.insert(tract_id.clone()) {
            return Err(IngestError::DuplicateTractId {
                tract_id,
                location: feature,
            });
        }
        let properties = props
            .map(|p| {
                p.iter()
                    .filter(|(k, v)| k.as_str() != "tract_id" && !v.is_null())
                    .map(|(k, v)| (k.clone(), property_string(v)))
                    .collect()
            })
            .unwrap_or_default();
        out.push(RawTractFeature {
            tract_id,
            polygons,
            properties,
            geometry,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Census

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CensusRecord {
    pub tract_id: String,
    pub median_income: Option<f64>,
    pub median_rent: Option<f64>,
    pub unemployment_rate: Option<f64>,
    pub extra: BTreeMap<String, f64>,
}

impl CensusRecord {
    /// Looks up any indicator column by name.
    pub fn indicator(&self, column: &str) -> Option<f64> {
        match column {
            "median_income" => self.median_income,
            "median_rent" => self.median_rent,
            "unemployment_rate" => self.unemployment_rate,
            other => self.extra.get(other).copied(),
        }
    }
}

/// Census indicators keyed by tract id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CensusTable {
    pub records: BTreeMap<String, CensusRecord>,
    /// Indicator column names in header order.
    pub columns: Vec<String>,
}

impl CensusTable {
    /// Census tract ids with no matching tract, in id order.
    pub fn unmatched<'a>(&'a self, tract_ids: &std::collections::BTreeSet<&str>) -> Vec<&'a str> {
        self.records
            .keys()
            .map(String::as_str)
            .filter(|id| !tract_ids.contains(id))
            .collect()
    }
}

fn is_rate_column(name: &str) -> bool {
    name == "unemployment_rate" || name.ends_with("_rate")
}

/// Parses a census CSV with a `tract_id` column and named numeric columns.
///
/// Empty cells (and `NA`) are treated as missing values.
pub fn parse_census<R: Read>(csv_stream: R) -> Result<CensusTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_stream);
    let header = reader
        .headers()
        .map_err(|e| IngestError::BadHeader(e.to_string()))?
        .clone();
    let id_col = header
        .iter()
        .position(|h| h == "tract_id")
        .ok_or_else(|| IngestError::MissingColumn("tract_id".into()))?;
    let columns: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != id_col)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut table = CensusTable {
        records: BTreeMap::new(),
        columns,
    };
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::BadHeader(e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let tract_id = row.get(id_col).unwrap_or("").to_string();
        let mut record = CensusRecord {
            tract_id: tract_id.clone(),
            ..CensusRecord::default()
        };
        for (i, name) in header.iter().enumerate() {
            if i == id_col {
                continue;
            }
            let raw = row.get(i).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                continue;
            }
            let value: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| IngestError::NonNumericValue {
                    line,
                    column: name.to_string(),
                    value: raw.to_string(),
                })?;
            if is_rate_column(name) && !(0.0..=1.0).contains(&value) {
                return Err(IngestError::RateOutOfRange {
                    line,
                    column: name.to_string(),
                    value,
                });
            }
            match name {
                "median_income" | "median_rent" if value < 0.0 => {
                    return Err(IngestError::NegativeValue {
                        line,
                        column: name.to_string(),
                        value,
                    })
                }
                "median_income" => record.median_income = Some(value),
                "median_rent" => record.median_rent = Some(value),
                "unemployment_rate" => record.unemployment_rate = Some(value),
                other => {
                    record.extra.insert(other.to_string(), value);
                }
            }
        }
        if table.records.insert(tract_id.clone(), record).is_some() {
            return Err(IngestError::DuplicateTractId {
                tract_id,
                location: line as usize,
            });
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Hashtags

#[inline]
fn is_tag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Iterates over the hashtags in `text`, lowercase-folded.
///
/// A tag is `#` followed by a maximal run of letters, digits or `_`. Tags
/// that are already lowercase are borrowed from `text`.
pub fn hashtags(text: &str) -> impl Iterator<Item = Cow<'_, str>> {
    let mut rest = text;
    std::iter::from_fn(move || loop {
        let hash = rest.find('#')?;
        let after = &rest[hash + 1..];
        let end = after
            .char_indices()
            .find(|&(_, c)| !is_tag_char(c))
            .map(|(i, _)| i)
            .unwrap_or(after.len());
        rest = &after[end..];
        if end == 0 {
            continue;
        }
        let tag = &after[..end];
        return Some(if tag.chars().any(|c| c.is_uppercase()) {
            Cow::Owned(tag.to_lowercase())
        } else {
            Cow::Borrowed(tag)
        });
    })
}

/// All hashtags of `text` in order, duplicates kept.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    hashtags(text).map(Cow::into_owned).collect()
}
