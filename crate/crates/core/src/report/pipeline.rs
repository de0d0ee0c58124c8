use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono_tz::Tz;
use serde::Serialize;

use super::{
    emit_report, LabeledCurve, Normalization, OutputFormat, PipelineConfig, ReportError,
};
use crate::aggregate::{
    normalize_density, CohortCounts, CohortGroup, TagSummary, TractAggregate,
};
use crate::cohort::{
    merge_activity_maps, observe_into, observed_months, ActivityMap, Classifier, Cohort,
    YearMonth,
};
use crate::geo::{SpatialIndex, Tract};
use crate::ingest::{
    parse_census, parse_event_chunk, parse_tracts, split_event_bytes, CensusTable, EventChunk,
    EventFormat, GeoEvent, IngestSummary, RawTractFeature, RecordError,
};
use crate::metrics::{
    day_night_rank_table, gini, lorenz_curve, min_units_for_share, relative_entropy, top_share,
    PartialIndexSuite, RankRow,
};

/// Raw input bytes for one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub events: Vec<u8>,
    pub events_format: EventFormat,
    pub tracts: Vec<u8>,
    pub census: Option<Vec<u8>>,
}

fn read_input(path: &Path) -> Result<Vec<u8>, ReportError> {
    std::fs::read(path).map_err(|source| {
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

impl PipelineInputs {
    pub fn load(config: &PipelineConfig) -> Result<PipelineInputs, ReportError> {
        Ok(PipelineInputs {
            tracts: read_input(&config.tracts_path)?,
            events: read_input(&config.events_path)?,
            events_format: config
                .events_format
                .unwrap_or_else(|| EventFormat::from_path(&config.events_path)),
            census: config.census_path.as_deref().map(read_input).transpose()?,
        })
    }
}

/// Configuration values that affect the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub timezone: String,
    pub window_days: u32,
    pub normalization: Normalization,
    pub cohorts: Vec<CohortGroup>,
    pub choropleth_breaks: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub records_total: u64,
    pub records_ok: u64,
    pub records_skipped: u64,
    pub malformed_record: u64,
    pub out_of_range_coordinate: u64,
    pub bad_timestamp: u64,
    pub assigned: u64,
    pub dropped_outside_tract: u64,
    pub tracts: usize,
    pub census_rows: usize,
    pub census_unmatched_tract_ids: Vec<String>,
    pub error_samples: Vec<RecordError>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UserCounts {
    pub total: u64,
    pub visitor: u64,
    pub local: u64,
    pub super_local: u64,
}

impl UserCounts {
    fn of(&self, group: CohortGroup) -> u64 {
        match group {
            CohortGroup::Visitor => self.visitor,
            CohortGroup::Local => self.local,
            CohortGroup::SuperLocal => self.super_local,
            CohortGroup::All => self.total,
        }
    }
}

/// Spatial statistics of one per-tract measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    /// Raw (unnormalized) total over all tracts.
    pub total: u64,
    pub indexes: PartialIndexSuite,
    pub top_10pct_share: Option<f64>,
    pub min_tracts_for_half: Option<usize>,
    pub relative_entropy: Option<f64>,
}

impl MeasureReport {
    fn compute(total: u64, values: &[f64]) -> MeasureReport {
        MeasureReport {
            total,
            indexes: PartialIndexSuite::compute(values),
            top_10pct_share: top_share(values, 0.1).ok(),
            min_tracts_for_half: min_units_for_share(values, 0.5).ok(),
            relative_entropy: relative_entropy(values).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialReport {
    pub images: MeasureReport,
    pub tags: MeasureReport,
    pub unique_tags: MeasureReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialRatio {
    pub images: PartialIndexSuite,
    pub tags: PartialIndexSuite,
    pub unique_tags: PartialIndexSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalReport {
    pub hour_histogram: [u64; 24],
    /// Sunday first.
    pub dow_histogram: [u64; 7],
    pub month_histogram: BTreeMap<String, u64>,
    pub day_count: u64,
    pub night_count: u64,
    pub hour_gini: Option<f64>,
    pub dow_gini: Option<f64>,
    pub hour_relative_entropy: Option<f64>,
    pub dow_relative_entropy: Option<f64>,
}

impl TemporalReport {
    fn compute(counts: &CohortCounts) -> TemporalReport {
        let hours: Vec<f64> = counts.hour_histogram.iter().map(|&c| c as f64).collect();
        let days: Vec<f64> = counts.dow_histogram.iter().map(|&c| c as f64).collect();
        TemporalReport {
            hour_histogram: counts.hour_histogram,
            dow_histogram: counts.dow_histogram,
            month_histogram: counts
                .month_histogram
                .iter()
                .map(|(m, &c)| (m.to_string(), c))
                .collect(),
            day_count: counts.day_count,
            night_count: counts.night_count,
            hour_gini: gini(&hours).ok(),
            dow_gini: gini(&days).ok(),
            hour_relative_entropy: relative_entropy(&hours).ok(),
            dow_relative_entropy: relative_entropy(&days).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    pub cohort: CohortGroup,
    pub users: u64,
    pub images: u64,
    pub spatial: SpatialReport,
    pub temporal: TemporalReport,
    pub tags: Option<TagSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusIndicatorReport {
    pub column: String,
    pub units: usize,
    pub indexes: PartialIndexSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub ingest: IngestReport,
    pub dataset_months: Vec<String>,
    pub users: UserCounts,
    pub cohorts: Vec<CohortReport>,
    pub visitor_local_ratio: Option<SpatialRatio>,
    pub census: Vec<CensusIndicatorReport>,
    pub rank_table: Vec<RankRow>,
    pub files: Vec<String>,
}

impl Report {
    pub fn cohort(&self, group: CohortGroup) -> Option<&CohortReport> {
        self.cohorts.iter().find(|c| c.cohort == group)
    }
}

/// Per-tract counts for one cohort group, as written to `tracts.csv`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TractCounts {
    pub images: u64,
    pub tags: u64,
    pub unique_tags: u64,
    pub day: u64,
    pub night: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TractRow {
    pub tract_id: String,
    pub area_km2: f64,
    pub counts: Vec<(CohortGroup, TractCounts)>,
}

/// Everything one run produces; [`emit_report`] writes it out.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: Report,
    /// Tract features in input order.
    pub tract_features: Vec<RawTractFeature>,
    /// Per-tract aggregates in id order.
    pub aggregates: Vec<TractAggregate>,
    pub tract_rows: Vec<TractRow>,
    pub lorenz: Vec<LabeledCurve>,
    /// Per-tract choropleth values (normalized images of the map cohort).
    pub choropleth_values: BTreeMap<String, f64>,
    pub user_cohorts: BTreeMap<String, Cohort>,
}

struct AssignedEvent {
    tract: u32,
    event: GeoEvent,
}

struct ParsedPartition {
    summary: IngestSummary,
    assigned: Vec<AssignedEvent>,
    dropped_outside: u64,
    activity: ActivityMap,
}

fn parse_partition(chunk: &EventChunk<'_>, index: &SpatialIndex, tz: Tz) -> ParsedPartition {
    let batch = parse_event_chunk(chunk);
    let mut assigned = Vec::with_capacity(batch.events.len());
    let mut dropped_outside = 0;
    let mut activity = ActivityMap::new();
    for event in batch.events {
        match index.assign_index(event.lat, event.lon) {
            Some(tract) => {
                observe_into(&mut activity, &event.user_id, event.timestamp, tz);
                assigned.push(AssignedEvent {
                    tract: tract as u32,
                    event,
                });
            }
            None => dropped_outside += 1,
        }
    }
    ParsedPartition {
        summary: batch.summary,
        assigned,
        dropped_outside,
        activity,
    }
}

fn aggregate_partition(
    events: &[AssignedEvent],
    tracts: &[Tract],
    cohorts: &HashMap<&str, Cohort>,
    tz: Tz,
) -> Vec<TractAggregate> {
    let mut aggs: Vec<TractAggregate> = tracts
        .iter()
        .map(|t| TractAggregate::new(t.tract_id.clone()))
        .collect();
    for a in events {
        let cohort = cohorts[a.event.user_id.as_str()];
        let local = a.event.timestamp.with_timezone(&tz);
        aggs[a.tract as usize].record(cohort, &local, &a.event.text);
    }
    aggs
}

/// Runs `work` over every item, one scoped thread per item beyond the first.
fn fan_out<T: Sync, R: Send>(items: &[T], work: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if items.len() <= 1 {
        return items.iter().map(&work).collect();
    }
    std::thread::scope(|scope| {
        let work = &work;
        let handles: Vec<_> = items[1..]
            .iter()
            .map(|item| scope.spawn(move || work(item)))
            .collect();
        let mut out = vec![work(&items[0])];
        out.extend(
            handles
                .into_iter()
                .map(|h| h.join().expect("partition worker panicked")),
        );
        out
    })
}

fn group_values(
    tracts: &[Tract],
    per_tract: &[u64],
    normalization: Normalization,
) -> Result<Vec<f64>, ReportError> {
    match normalization {
        Normalization::Raw => Ok(per_tract.iter().map(|&c| c as f64).collect()),
        Normalization::PerKm2 => {
            let counts: BTreeMap<String, u64> = tracts
                .iter()
                .zip(per_tract)
                .map(|(t, &c)| (t.tract_id.clone(), c))
                .collect();
            let areas: BTreeMap<String, f64> = tracts
                .iter()
                .map(|t| (t.tract_id.clone(), t.area_km2))
                .collect();
            Ok(normalize_density(&counts, &areas)?.into_values().collect())
        }
    }
}

fn load_tracts(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
) -> Result<(Vec<RawTractFeature>, SpatialIndex), ReportError> {
    let path = &config.tracts_path;
    let features = parse_tracts(inputs.tracts.as_slice()).map_err(|source| ReportError::Ingest {
        path: path.clone(),
        source,
    })?;
    let tracts = features
        .iter()
        .map(Tract::from_raw)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| ReportError::Geo {
            path: path.clone(),
            source,
        })?;
    let index = SpatialIndex::build(tracts).map_err(|source| ReportError::Geo {
        path: path.clone(),
        source,
    })?;
    Ok((features, index))
}

fn load_census(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
) -> Result<Option<CensusTable>, ReportError> {
    let Some(bytes) = &inputs.census else {
        return Ok(None);
    };
    parse_census(bytes.as_slice())
        .map(Some)
        .map_err(|source| ReportError::Ingest {
            path: config.census_path.clone().unwrap_or_default(),
            source,
        })
}

fn files_for(format: OutputFormat, has_curves: bool) -> Vec<String> {
    let mut files = Vec::new();
    if matches!(format, OutputFormat::Json | OutputFormat::All) {
        files.push("report.json");
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::All) {
        files.extend(["indexes.csv", "tags.csv", "ranks.csv", "tracts.csv"]);
    }
    if has_curves {
        files.push("lorenz.svg");
    }
    files.push("choropleth.geojson");
    files.into_iter().map(String::from).collect()
}

/// Runs parse → assign → classify → aggregate → metrics on in-memory inputs.
pub fn analyze(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<Analysis, ReportError> {
    if config.window_days == 0 {
        return Err(ReportError::Config("window_days must be at least 1".into()));
    }
    if config.cohorts.is_empty() {
        return Err(ReportError::Config("no cohorts selected".into()));
    }
    if config.choropleth_breaks < 2 {
        return Err(ReportError::BadBreakCount(config.choropleth_breaks));
    }
    let tz = config.timezone;
    let (features, index) = load_tracts(inputs, config)?;
    let census = load_census(inputs, config)?;
    let tracts = index.tracts();

    let chunks = split_event_bytes(&inputs.events, inputs.events_format, config.partitions.max(1))
        .map_err(|source| ReportError::Ingest {
            path: config.events_path.clone(),
            source,
        })?;
    let parsed = fan_out(&chunks, |chunk| parse_partition(chunk, &index, tz));

    let mut summary = IngestSummary::default();
    let mut activity = ActivityMap::new();
    let mut dropped_outside = 0;
    let mut assigned_total = 0u64;
    for p in &parsed {
        summary.merge(&p.summary);
        dropped_outside += p.dropped_outside;
        assigned_total += p.assigned.len() as u64;
    }
    // Merge order does not matter for activity maps.
    let mut parsed_events = Vec::with_capacity(parsed.len());
    for p in parsed {
        merge_activity_maps(&mut activity, p.activity);
        parsed_events.push(p.assigned);
    }

    let dataset_months = match config.collection_months {
        Some((first, last)) => YearMonth::range(first, last),
        None => observed_months(&activity),
    };
    let mut users = UserCounts::default();
    let mut cohort_of: HashMap<&str, Cohort> = HashMap::with_capacity(activity.len());
    if !activity.is_empty() {
        let classifier = Classifier::new(config.window_days, dataset_months.clone())
            .map_err(|e| ReportError::Config(e.to_string()))?;
        for (user, a) in &activity {
            let cohort = classifier.classify(a);
            users.total += 1;
            match cohort {
                Cohort::Visitor => users.visitor += 1,
                Cohort::Local { super_local } => {
                    users.local += 1;
                    users.super_local += u64::from(super_local);
                }
            }
            cohort_of.insert(user.as_str(), cohort);
        }
    }

    let user_cohorts: BTreeMap<String, Cohort> = cohort_of
        .iter()
        .map(|(&u, &c)| (u.to_string(), c))
        .collect();
    let partials = fan_out(&parsed_events, |events| {
        aggregate_partition(events, tracts, &cohort_of, tz)
    });
    let mut partials = partials.into_iter();
    let mut aggregates = partials.next().unwrap_or_default();
    for part in partials {
        for (into, other) in aggregates.iter_mut().zip(&part) {
            into.merge(other)?;
        }
    }

    let images_visitor: u64 = aggregates.iter().map(|a| a.visitor.event_count).sum();
    let images_local: u64 = aggregates.iter().map(|a| a.local.event_count).sum();
    if summary.records_total != summary.records_ok + summary.records_skipped
        || summary.records_ok != assigned_total + dropped_outside
        || assigned_total != images_visitor + images_local
    {
        return Err(ReportError::InvariantViolation(format!(
            "record accounting: total {} ok {} skipped {} assigned {} dropped {} visitor {} local {}",
            summary.records_total,
            summary.records_ok,
            summary.records_skipped,
            assigned_total,
            dropped_outside,
            images_visitor,
            images_local
        )));
    }

    // Per-group counts, computed once per tract.
    let groups = config.cohorts.clone();
    let group_counts: Vec<Vec<CohortCounts>> = groups
        .iter()
        .map(|&g| aggregates.iter().map(|a| a.group(g).into_owned()).collect())
        .collect();

    let mut cohort_reports = Vec::with_capacity(groups.len());
    let mut lorenz = Vec::new();
    let mut image_values: BTreeMap<CohortGroup, Vec<f64>> = BTreeMap::new();
    let mut suites: BTreeMap<CohortGroup, [PartialIndexSuite; 3]> = BTreeMap::new();
    for (&group, counts) in groups.iter().zip(&group_counts) {
        let images: Vec<u64> = counts.iter().map(|c| c.event_count).collect();
        let tags: Vec<u64> = counts.iter().map(|c| c.tag_count).collect();
        let unique: Vec<u64> = counts.iter().map(|c| c.unique_tag_count()).collect();
        let image_v = group_values(tracts, &images, config.normalization)?;
        let tag_v = group_values(tracts, &tags, config.normalization)?;
        let unique_v = group_values(tracts, &unique, config.normalization)?;
        let spatial = SpatialReport {
            images: MeasureReport::compute(images.iter().sum(), &image_v),
            tags: MeasureReport::compute(tags.iter().sum(), &tag_v),
            unique_tags: MeasureReport::compute(unique.iter().sum(), &unique_v),
        };
        suites.insert(
            group,
            [
                spatial.images.indexes,
                spatial.tags.indexes,
                spatial.unique_tags.indexes,
            ],
        );
        if let Ok(curve) = lorenz_curve(&image_v) {
            lorenz.push(LabeledCurve {
                label: group.label().to_string(),
                curve,
            });
        }

        let mut total = CohortCounts::default();
        for c in counts {
            total.merge(c);
        }
        cohort_reports.push(CohortReport {
            cohort: group,
            users: users.of(group),
            images: total.event_count,
            spatial,
            temporal: TemporalReport::compute(&total),
            tags: TagSummary::from_counts(&total).ok(),
        });
        image_values.insert(group, image_v);
    }

    let visitor_local_ratio = match (
        suites.get(&CohortGroup::Visitor),
        suites.get(&CohortGroup::Local),
    ) {
        (Some(v), Some(l)) => Some(SpatialRatio {
            images: v[0].ratio(&l[0]),
            tags: v[1].ratio(&l[1]),
            unique_tags: v[2].ratio(&l[2]),
        }),
        _ => None,
    };

    let tract_ids: BTreeSet<&str> = tracts.iter().map(|t| t.tract_id.as_str()).collect();
    let mut census_reports = Vec::new();
    let mut incomes = BTreeMap::new();
    let mut unmatched = Vec::new();
    if let Some(table) = &census {
        unmatched = table.unmatched(&tract_ids).into_iter().map(String::from).collect();
        for column in &table.columns {
            let values: Vec<f64> = tracts
                .iter()
                .filter_map(|t| table.records.get(&t.tract_id)?.indicator(column))
                .collect();
            census_reports.push(CensusIndicatorReport {
                column: column.clone(),
                units: values.len(),
                indexes: PartialIndexSuite::compute(&values),
            });
        }
        for t in tracts {
            if let Some(income) = table.records.get(&t.tract_id).and_then(|r| r.median_income) {
                incomes.insert(t.tract_id.clone(), income);
            }
        }
    }

    let mut day_counts = BTreeMap::new();
    let mut night_counts = BTreeMap::new();
    for a in &aggregates {
        day_counts.insert(a.tract_id.clone(), a.visitor.day_count + a.local.day_count);
        night_counts.insert(a.tract_id.clone(), a.visitor.night_count + a.local.night_count);
    }
    let rank_table = day_night_rank_table(&day_counts, &night_counts, &incomes)?;

    let map_group = if groups.contains(&CohortGroup::All) {
        CohortGroup::All
    } else {
        groups[0]
    };
    let choropleth_values: BTreeMap<String, f64> = tracts
        .iter()
        .map(|t| t.tract_id.clone())
        .zip(image_values[&map_group].iter().copied())
        .collect();

    let tract_rows = tracts
        .iter()
        .enumerate()
        .map(|(i, t)| TractRow {
            tract_id: t.tract_id.clone(),
            area_km2: t.area_km2,
            counts: groups
                .iter()
                .zip(&group_counts)
                .map(|(&g, counts)| {
                    let c = &counts[i];
                    (
                        g,
                        TractCounts {
                            images: c.event_count,
                            tags: c.tag_count,
                            unique_tags: c.unique_tag_count(),
                            day: c.day_count,
                            night: c.night_count,
                        },
                    )
                })
                .collect(),
        })
        .collect();

    let report = Report {
        config: ConfigEcho {
            timezone: tz.name().to_string(),
            window_days: config.window_days,
            normalization: config.normalization,
            cohorts: groups,
            choropleth_breaks: config.choropleth_breaks,
            seed: config.seed,
        },
        ingest: IngestReport {
            records_total: summary.records_total,
            records_ok: summary.records_ok,
            records_skipped: summary.records_skipped,
            malformed_record: summary.malformed_record,
            out_of_range_coordinate: summary.out_of_range_coordinate,
            bad_timestamp: summary.bad_timestamp,
            assigned: assigned_total,
            dropped_outside_tract: dropped_outside,
            tracts: tracts.len(),
            census_rows: census.as_ref().map_or(0, |c| c.records.len()),
            census_unmatched_tract_ids: unmatched,
            error_samples: summary.error_samples,
        },
        dataset_months: dataset_months.iter().map(|m| m.to_string()).collect(),
        users,
        cohorts: cohort_reports,
        visitor_local_ratio,
        census: census_reports,
        rank_table,
        files: files_for(config.format, !lorenz.is_empty()),
    };

    Ok(Analysis {
        report,
        tract_features: features,
        aggregates,
        tract_rows,
        lorenz,
        choropleth_values,
        user_cohorts,
    })
}

/// Loads the configured files, analyzes them and, when an output directory
/// is set, writes every report file there.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Analysis, ReportError> {
    let inputs = PipelineInputs::load(config)?;
    let analysis = analyze(&inputs, config)?;
    if let Some(dir) = &config.out_dir {
        emit_report(&analysis, dir, config.format)?;
    }
    Ok(analysis)
}
