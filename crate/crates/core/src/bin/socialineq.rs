use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use chrono_tz::Tz;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use socialineq::aggregate::CohortGroup;
use socialineq::cohort::{YearMonth, DEFAULT_WINDOW_DAYS};
use socialineq::ingest::{parse_events, parse_tracts, EventFormat};
use socialineq::metrics::{lorenz_curve, min_units_for_share, relative_entropy, top_share, PartialIndexSuite};
use socialineq::report::{
    emit_choropleth, emit_lorenz_svg, report_json, run_pipeline, to_rounded_json, LabeledCurve,
    Normalization, OutputFormat, PipelineConfig, ReportError, DEFAULT_BREAKS,
};
use socialineq::synth::{generate_city, SynthParams};

#[derive(Parser)]
#[command(name = "socialineq", version, about = "Spatial and temporal inequality of geotagged posts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an event file and report record counts and errors.
    IngestCheck {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_parser = parse_format)]
        events_format: Option<EventFormat>,
    },
    /// Run the full pipeline and write report files.
    Run(RunArgs),
    /// Inequality indexes over one numeric column of a CSV file.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
    },
    /// Generate a synthetic city with known ground truth.
    Synth(SynthArgs),
    /// Draw Lorenz curves for CSV columns as SVG.
    Lorenz {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated column names, one curve each.
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify tracts by a per-tract value column into quantile classes.
    Choropleth {
        #[arg(long)]
        tracts: PathBuf,
        /// CSV with a `tract_id` column.
        #[arg(long)]
        values: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, default_value_t = DEFAULT_BREAKS)]
        breaks: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, value_parser = parse_format)]
    events_format: Option<EventFormat>,
    #[arg(long)]
    tracts: PathBuf,
    #[arg(long)]
    census: Option<PathBuf>,
    #[arg(long, default_value = "America/New_York")]
    tz: Tz,
    #[arg(long, default_value_t = DEFAULT_WINDOW_DAYS)]
    window_days: u32,
    #[arg(long, default_value = "per-km2")]
    normalize: Normalization,
    #[arg(long, value_delimiter = ',', default_value = "visitor,local,super_local,all")]
    cohorts: Vec<CohortGroup>,
    /// Collection span `YYYY-MM..YYYY-MM`; derived from the events if omitted.
    #[arg(long, value_parser = parse_span)]
    months: Option<(YearMonth, YearMonth)>,
    /// Output directory; without it report.json goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    format: OutputFormat,
    #[arg(long, default_value_t = 1)]
    partitions: usize,
    #[arg(long, default_value_t = DEFAULT_BREAKS)]
    breaks: usize,
    /// Recorded in the report when the inputs came from `synth`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    tracts: usize,
    #[arg(long, default_value_t = 400)]
    locals: usize,
    #[arg(long, default_value_t = 1600)]
    visitors: usize,
    #[arg(long, default_value_t = 100_000)]
    events: usize,
    #[arg(long, default_value_t = 1.0)]
    zipf: f64,
    #[arg(long, default_value = "2014-03-01")]
    start: NaiveDate,
    #[arg(long, default_value_t = 5)]
    months: u32,
}

fn parse_format(s: &str) -> Result<EventFormat, String> {
    match s {
        "csv" => Ok(EventFormat::Csv),
        "jsonl" => Ok(EventFormat::Jsonl),
        other => Err(format!("unknown event format {other:?} (csv or jsonl)")),
    }
}

fn parse_span(s: &str) -> Result<(YearMonth, YearMonth), String> {
    let (a, b) = s.split_once("..").ok_or("expected YYYY-MM..YYYY-MM")?;
    let first: YearMonth = a.parse().map_err(|e| format!("{e}"))?;
    let last: YearMonth = b.parse().map_err(|e| format!("{e}"))?;
    if last < first {
        return Err("span ends before it starts".into());
    }
    Ok((first, last))
}

fn open(path: &Path) -> Result<std::fs::File, ReportError> {
    std::fs::File::open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ReportError::MissingInput(path.to_path_buf())
        } else {
            ReportError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `columns` of a CSV as per-row values keyed by `tract_id` when
/// present, else by row number. Empty cells are skipped.
fn read_columns(path: &Path, columns: &[String]) -> Result<Vec<Vec<(String, f64)>>, ReportError> {
    let bad = |m: String| ReportError::Config(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let id_col = header.iter().position(|h| h == "tract_id");
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| bad(format!("no column {c:?}")))
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for (row_no, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let key = id_col
            .and_then(|i| row.get(i))
            .map_or_else(|| (row_no + 1).to_string(), String::from);
        for (k, &i) in idx.iter().enumerate() {
            let raw = row.get(i).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                continue;
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("line {}: {raw:?} is not a number", row_no + 2)))?;
            out[k].push((key.clone(), v));
        }
    }
    Ok(out)
}

fn run(command: Command) -> Result<(), ReportError> {
    match command {
        Command::IngestCheck {
            events,
            events_format,
        } => {
            let format = events_format.unwrap_or_else(|| EventFormat::from_path(&events));
            let batch = parse_events(open(&events)?, format).map_err(|source| {
                ReportError::Ingest {
                    path: events.clone(),
                    source,
                }
            })?;
            println!("{}", serde_json::to_string_pretty(&batch.summary).expect("serializable"));
        }
        Command::Run(a) => {
            let config = PipelineConfig {
                events_path: a.events,
                events_format: a.events_format,
                tracts_path: a.tracts,
                census_path: a.census,
                timezone: a.tz,
                window_days: a.window_days,
                normalization: a.normalize,
                cohorts: a.cohorts,
                collection_months: a.months,
                out_dir: a.out.clone(),
                format: a.format,
                partitions: a.partitions,
                choropleth_breaks: a.breaks,
                seed: a.seed,
            };
            let analysis = run_pipeline(&config)?;
            let r = &analysis.report;
            if a.out.is_none() {
                print!("{}", report_json(r));
            }
            eprintln!(
                "{} records, {} ok, {} skipped, {} outside tracts; {} users ({} local, {} visitor)",
                r.ingest.records_total,
                r.ingest.records_ok,
                r.ingest.records_skipped,
                r.ingest.dropped_outside_tract,
                r.users.total,
                r.users.local,
                r.users.visitor
            );
        }
        Command::Metrics { input, column } => {
            let values: Vec<f64> = read_columns(&input, &[column.clone()])?
                .remove(0)
                .into_iter()
                .map(|(_, v)| v)
                .collect();
            let out = json!({
                "column": column,
                "units": values.len(),
                "indexes": PartialIndexSuite::compute(&values),
                "relative_entropy": relative_entropy(&values).ok(),
                "top_10pct_share": top_share(&values, 0.1).ok(),
                "min_units_for_half": min_units_for_share(&values, 0.5).ok(),
            });
            println!("{}", serde_json::to_string_pretty(&to_rounded_json(&out)).expect("valid JSON"));
        }
        Command::Synth(a) => {
            let params = SynthParams {
                seed: a.seed,
                n_tracts: a.tracts,
                n_users_local: a.locals,
                n_users_visitor: a.visitors,
                n_events: a.events,
                zipf_exponent: a.zipf,
                start: a.start,
                months: a.months,
                ..SynthParams::default()
            };
            let city = generate_city(&params).map_err(|e| ReportError::Config(e.to_string()))?;
            std::fs::create_dir_all(&a.out).map_err(|source| ReportError::Io {
                path: a.out.clone(),
                source,
            })?;
            write(&a.out.join("tracts.geojson"), &city.tracts_geojson)?;
            write(&a.out.join("events.csv"), &city.events_csv)?;
            write(&a.out.join("ground_truth.json"), city.ground_truth_json())?;
        }
        Command::Lorenz {
            input,
            columns,
            out,
        } => {
            let data = read_columns(&input, &columns)?;
            let curves = columns
                .iter()
                .zip(data)
                .map(|(label, col)| {
                    let values: Vec<f64> = col.into_iter().map(|(_, v)| v).collect();
                    Ok(LabeledCurve {
                        label: label.clone(),
                        curve: lorenz_curve(&values)?,
                    })
                })
                .collect::<Result<Vec<_>, ReportError>>()?;
            write(&out, emit_lorenz_svg(&curves)?)?;
        }
        Command::Choropleth {
            tracts,
            values,
            column,
            breaks,
            out,
        } => {
            let features = parse_tracts(open(&tracts)?).map_err(|source| ReportError::Ingest {
                path: tracts.clone(),
                source,
            })?;
            let values = read_columns(&values, &[column])?.remove(0).into_iter().collect();
            write(&out, emit_choropleth(&features, &values, breaks)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
