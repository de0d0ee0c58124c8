use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::{emit_choropleth, emit_lorenz_svg, Analysis, Report, ReportError};
use crate::aggregate::CohortGroup;
use crate::metrics::{IndexSuite, PartialIndexSuite};
use crate::numeric::round_significant;

pub const JSON_SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    All,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "all" => Ok(OutputFormat::All),
            other => Err(format!("unknown format {other:?} (json, csv or all)")),
        }
    }
}

fn round_value(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(0.0), JSON_SIGNIFICANT_DIGITS);
            if let Some(rounded) = serde_json::Number::from_f64(x) {
                *n = rounded;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes `value` with every float rounded to 12 significant digits.
pub fn to_rounded_json<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("report types serialize to JSON");
    round_value(&mut v);
    v
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(&to_rounded_json(report)).expect("valid JSON value");
    s.push('\n');
    s
}

/// CSV cell text for a float: 12 significant digits, shortest form.
pub fn format_number(value: f64) -> String {
    round_significant(value, JSON_SIGNIFICANT_DIGITS).to_string()
}

fn cell(value: Option<f64>) -> String {
    value.map(format_number).unwrap_or_default()
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("UTF-8 cells")
}

/// `index,visitor,local,ratio` rows for images, then tags and unique tags.
pub fn indexes_csv(report: &Report) -> String {
    let empty = PartialIndexSuite::default();
    let suites = |group| {
        report.cohort(group).map(|c| {
            [
                c.spatial.images.indexes,
                c.spatial.tags.indexes,
                c.spatial.unique_tags.indexes,
            ]
        })
    };
    let visitor = suites(CohortGroup::Visitor);
    let local = suites(CohortGroup::Local);
    let ratio = report
        .visitor_local_ratio
        .as_ref()
        .map(|r| [r.images, r.tags, r.unique_tags]);

    let mut rows = vec![vec![
        "index".to_string(),
        "visitor".to_string(),
        "local".to_string(),
        "ratio".to_string(),
    ]];
    for (m, prefix) in ["", "tags_", "unique_tags_"].iter().enumerate() {
        let pick = |s: &Option<[PartialIndexSuite; 3]>| s.map_or(empty, |s| s[m]).values();
        let (v, l, r) = (pick(&visitor), pick(&local), pick(&ratio));
        for (i, name) in IndexSuite::NAMES.iter().enumerate() {
            rows.push(vec![format!("{prefix}{name}"), cell(v[i]), cell(l[i]), cell(r[i])]);
        }
    }
    csv_string(rows)
}

/// One row per tag statistic, one column per reported cohort.
pub fn tags_csv(report: &Report) -> String {
    let mut header = vec!["statistic".to_string()];
    header.extend(report.cohorts.iter().map(|c| c.cohort.label().to_string()));
    let columns: Vec<Option<serde_json::Map<String, Value>>> = report
        .cohorts
        .iter()
        .map(|c| match c.tags.as_ref().map(to_rounded_json) {
            Some(Value::Object(m)) => Some(m),
            _ => None,
        })
        .collect();
    let names: Vec<String> = match serde_json::to_value(crate::aggregate::TagSummary::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    };
    let mut rows = vec![header];
    for name in names {
        let mut row = vec![name.clone()];
        for col in &columns {
            let text = match col.as_ref().and_then(|m| m.get(&name)) {
                Some(Value::Number(n)) if n.is_f64() => cell(n.as_f64()),
                Some(Value::Number(n)) => n.to_string(),
                _ => String::new(),
            };
            row.push(text);
        }
        rows.push(row);
    }
    csv_string(rows)
}

pub fn ranks_csv(report: &Report) -> String {
    let mut rows = vec![[
        "tract_id",
        "day_count",
        "night_count",
        "day_rank",
        "night_rank",
        "income_flag",
    ]
    .map(String::from)
    .to_vec()];
    for r in &report.rank_table {
        rows.push(vec![
            r.tract_id.clone(),
            r.day_count.to_string(),
            r.night_count.to_string(),
            r.day_rank.to_string(),
            r.night_rank.to_string(),
            r.income_flag.label().to_string(),
        ]);
    }
    csv_string(rows)
}

/// Per-tract area and raw counts for every reported cohort.
pub fn tracts_csv(analysis: &Analysis) -> String {
    let mut header = vec!["tract_id".to_string(), "area_km2".to_string()];
    for g in &analysis.report.config.cohorts {
        for m in ["images", "tags", "unique_tags", "day", "night"] {
            header.push(format!("{}_{m}", g.label()));
        }
    }
    let mut rows = vec![header];
    for t in &analysis.tract_rows {
        let mut row = vec![t.tract_id.clone(), format_number(t.area_km2)];
        for (_, c) in &t.counts {
            row.extend(
                [c.images, c.tags, c.unique_tags, c.day, c.night].map(|v| v.to_string()),
            );
        }
        rows.push(row);
    }
    csv_string(rows)
}

/// Writes the files listed in the report manifest into `dir`.
pub fn emit_report(analysis: &Analysis, dir: &Path, format: OutputFormat) -> Result<(), ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let report = &analysis.report;
    for name in &report.files {
        let wanted = match format {
            OutputFormat::All => true,
            OutputFormat::Json => !name.ends_with(".csv"),
            OutputFormat::Csv => name != "report.json",
        };
        if !wanted {
            continue;
        }
        let contents = match name.as_str() {
            "report.json" => report_json(report),
            "indexes.csv" => indexes_csv(report),
            "tags.csv" => tags_csv(report),
            "ranks.csv" => ranks_csv(report),
            "tracts.csv" => tracts_csv(analysis),
            "lorenz.svg" => emit_lorenz_svg(&analysis.lorenz)?,
            "choropleth.geojson" => emit_choropleth(
                &analysis.tract_features,
                &analysis.choropleth_values,
                report.config.choropleth_breaks,
            )?,
            other => {
                return Err(ReportError::InvariantViolation(format!(
                    "unknown manifest entry {other}"
                )))
            }
        };
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io(&path))?;
    }
    Ok(())
}
