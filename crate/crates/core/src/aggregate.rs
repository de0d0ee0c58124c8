//! Per-tract, per-cohort counts and time histograms.
//!
//! Every aggregate is a commutative monoid under [`merge_aggregates`]: counts
//! add, unique-tag sets union. Any partitioning of the event stream therefore
//! reduces to the same result.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Datelike, NaiveTime, Timelike, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, YearMonth};
use crate::ingest::hashtags;

/// First hour (inclusive) of the daytime window, local time.
pub const DAY_START_HOUR: u32 = 7;
/// First hour (inclusive) of the evening night window, local time.
pub const NIGHT_START_HOUR: u32 = 19;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregateError {
    #[error("cannot merge aggregates of tracts {0} and {1}")]
    TractIdMismatch(String, String),
    #[error("tract {0} has no area")]
    MissingArea(String),
    #[error("tract {0} has a non-positive area")]
    DegenerateArea(String),
    #[error("cohort has no images")]
    EmptyCohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DayPart {
    Day,
    Night,
}

/// Day covers 07:00:00 through 18:59:59 inclusive; the rest is night.
pub fn day_night_split(local: NaiveTime) -> DayPart {
    if (DAY_START_HOUR..NIGHT_START_HOUR).contains(&local.hour()) {
        DayPart::Day
    } else {
        DayPart::Night
    }
}

/// Cohort selections that reports are produced for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortGroup {
    Visitor,
    Local,
    SuperLocal,
    All,
}

impl CohortGroup {
    pub const EVERY: [CohortGroup; 4] = [
        CohortGroup::Visitor,
        CohortGroup::Local,
        CohortGroup::SuperLocal,
        CohortGroup::All,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CohortGroup::Visitor => "visitor",
            CohortGroup::Local => "local",
            CohortGroup::SuperLocal => "super_local",
            CohortGroup::All => "all",
        }
    }

    pub fn contains(self, cohort: Cohort) -> bool {
        match self {
            CohortGroup::Visitor => cohort == Cohort::Visitor,
            CohortGroup::Local => cohort.is_local(),
            CohortGroup::SuperLocal => cohort.is_super_local(),
            CohortGroup::All => true,
        }
    }
}

impl std::str::FromStr for CohortGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "visitor" | "visitors" => Ok(CohortGroup::Visitor),
            "local" | "locals" => Ok(CohortGroup::Local),
            "super_local" | "super-local" | "super_locals" => Ok(CohortGroup::SuperLocal),
            "all" => Ok(CohortGroup::All),
            other => Err(format!("unknown cohort {other:?}")),
        }
    }
}

/// Counts for one (tract, cohort) cell.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CohortCounts {
    pub event_count: u64,
    pub tag_count: u64,
    pub unique_tags: HashSet<String>,
    /// Events whose text carries at least one tag.
    pub tagged_events: u64,
    /// Events with six or more tags.
    pub events_gt5_tags: u64,
    /// Events with eleven or more tags.
    pub events_gt10_tags: u64,
    pub hour_histogram: [u64; 24],
    /// Sunday first.
    pub dow_histogram: [u64; 7],
    pub month_histogram: BTreeMap<YearMonth, u64>,
    pub day_count: u64,
    pub night_count: u64,
}

impl CohortCounts {
    pub fn record(&mut self, local: &DateTime<Tz>, text: &str) {
        self.event_count += 1;
        self.hour_histogram[local.hour() as usize] += 1;
        self.dow_histogram[local.weekday().num_days_from_sunday() as usize] += 1;
        *self
            .month_histogram
            .entry(YearMonth {
                year: local.year(),
                month: local.month(),
            })
            .or_insert(0) += 1;
        match day_night_split(local.time()) {
            DayPart::Day => self.day_count += 1,
            DayPart::Night => self.night_count += 1,
        }

        let mut tags = 0u64;
        for tag in hashtags(text) {
            tags += 1;
            if !self.unique_tags.contains(tag.as_ref()) {
                self.unique_tags.insert(tag.into_owned());
            }
        }
        self.tag_count += tags;
        self.tagged_events += u64::from(tags > 0);
        self.events_gt5_tags += u64::from(tags >= 6);
        self.events_gt10_tags += u64::from(tags >= 11);
    }

    pub fn merge(&mut self, other: &CohortCounts) {
        self.event_count += other.event_count;
        self.tag_count += other.tag_count;
        for tag in &other.unique_tags {
            if !self.unique_tags.contains(tag) {
                self.unique_tags.insert(tag.clone());
            }
        }
        self.tagged_events += other.tagged_events;
        self.events_gt5_tags += other.events_gt5_tags;
        self.events_gt10_tags += other.events_gt10_tags;
        for (a, b) in self.hour_histogram.iter_mut().zip(other.hour_histogram) {
            *a += b;
        }
        for (a, b) in self.dow_histogram.iter_mut().zip(other.dow_histogram) {
            *a += b;
        }
        for (m, c) in &other.month_histogram {
            *self.month_histogram.entry(*m).or_insert(0) += c;
        }
        self.day_count += other.day_count;
        self.night_count += other.night_count;
    }

    pub fn unique_tag_count(&self) -> u64 {
        self.unique_tags.len() as u64
    }
}

/// Counts for one tract. `local` includes super-locals; `super_local` holds
/// the subset again so it can be reported on its own.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TractAggregate {
    pub tract_id: String,
    pub visitor: CohortCounts,
    pub local: CohortCounts,
    pub super_local: CohortCounts,
}

impl TractAggregate {
    pub fn new(tract_id: impl Into<String>) -> TractAggregate {
        TractAggregate {
            tract_id: tract_id.into(),
            ..TractAggregate::default()
        }
    }

    pub fn record(&mut self, cohort: Cohort, local: &DateTime<Tz>, text: &str) {
        match cohort {
            Cohort::Visitor => self.visitor.record(local, text),
            Cohort::Local { super_local } => {
                self.local.record(local, text);
                if super_local {
                    self.super_local.record(local, text);
                }
            }
        }
    }

    pub fn merge(&mut self, other: &TractAggregate) -> Result<(), AggregateError> {
        if self.tract_id != other.tract_id {
            return Err(AggregateError::TractIdMismatch(
                self.tract_id.clone(),
                other.tract_id.clone(),
            ));
        }
        self.visitor.merge(&other.visitor);
        self.local.merge(&other.local);
        self.super_local.merge(&other.super_local);
        Ok(())
    }

    /// Counts for a cohort selection; `All` is visitors plus locals.
    pub fn group(&self, group: CohortGroup) -> Cow<'_, CohortCounts> {
        match group {
            CohortGroup::Visitor => Cow::Borrowed(&self.visitor),
            CohortGroup::Local => Cow::Borrowed(&self.local),
            CohortGroup::SuperLocal => Cow::Borrowed(&self.super_local),
            CohortGroup::All => {
                let mut all = self.visitor.clone();
                all.merge(&self.local);
                Cow::Owned(all)
            }
        }
    }
}

pub fn merge_aggregates(
    a: &TractAggregate,
    b: &TractAggregate,
) -> Result<TractAggregate, AggregateError> {
    let mut out = a.clone();
    out.merge(b)?;
    Ok(out)
}

/// One classified, tract-assigned event.
#[derive(Debug, Clone, Copy)]
pub struct LabeledEvent<'a> {
    pub tract_id: &'a str,
    pub cohort: Cohort,
    pub timestamp: DateTime<Utc>,
    pub text: &'a str,
}

/// Folds labeled events into per-tract aggregates, binned in `tz`.
pub fn aggregate_by_tract<'a, I>(events: I, tz: Tz) -> BTreeMap<String, TractAggregate>
where
    I: IntoIterator<Item = LabeledEvent<'a>>,
{
    let mut out: BTreeMap<String, TractAggregate> = BTreeMap::new();
    for e in events {
        let local = e.timestamp.with_timezone(&tz);
        if !out.contains_key(e.tract_id) {
            out.insert(e.tract_id.to_string(), TractAggregate::new(e.tract_id));
        }
        out.get_mut(e.tract_id)
            .expect("inserted above")
            .record(e.cohort, &local, e.text);
    }
    out
}

/// Merges aggregate maps; tracts present on only one side are copied.
pub fn merge_aggregate_maps(
    into: &mut BTreeMap<String, TractAggregate>,
    other: &BTreeMap<String, TractAggregate>,
) -> Result<(), AggregateError> {
    for (id, agg) in other {
        match into.get_mut(id) {
            Some(existing) => existing.merge(agg)?,
            None => {
                into.insert(id.clone(), agg.clone());
            }
        }
    }
    Ok(())
}

/// Per-tract count divided by tract area in km².
///
/// Tracts with a zero count keep a density of zero.
pub fn normalize_density(
    counts: &BTreeMap<String, u64>,
    areas: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, AggregateError> {
    counts
        .iter()
        .map(|(id, &count)| {
            let area = *areas
                .get(id)
                .ok_or_else(|| AggregateError::MissingArea(id.clone()))?;
            if !(area > 0.0) || !area.is_finite() {
                return Err(AggregateError::DegenerateArea(id.clone()));
            }
            Ok((id.clone(), count as f64 / area))
        })
        .collect()
}

/// Hashtag statistics for one cohort of images.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TagSummary {
    pub image_count: u64,
    pub tag_total: u64,
    pub images_with_tags: u64,
    pub images_gt5_tags: u64,
    pub images_gt10_tags: u64,
    pub proportion_with_tags: f64,
    pub proportion_gt5_tags: f64,
    pub proportion_gt10_tags: f64,
    pub mean_tags_per_image: f64,
    /// `None` when no image carries a tag.
    pub mean_tags_per_tagged_image: Option<f64>,
}

impl TagSummary {
    fn from_totals(
        image_count: u64,
        tag_total: u64,
        images_with_tags: u64,
        images_gt5_tags: u64,
        images_gt10_tags: u64,
    ) -> Result<TagSummary, AggregateError> {
        if image_count == 0 {
            return Err(AggregateError::EmptyCohort);
        }
        let n = image_count as f64;
        Ok(TagSummary {
            image_count,
            tag_total,
            images_with_tags,
            images_gt5_tags,
            images_gt10_tags,
            proportion_with_tags: images_with_tags as f64 / n,
            proportion_gt5_tags: images_gt5_tags as f64 / n,
            proportion_gt10_tags: images_gt10_tags as f64 / n,
            mean_tags_per_image: tag_total as f64 / n,
            mean_tags_per_tagged_image: (images_with_tags > 0)
                .then(|| tag_total as f64 / images_with_tags as f64),
        })
    }

    pub fn from_counts(counts: &CohortCounts) -> Result<TagSummary, AggregateError> {
        TagSummary::from_totals(
            counts.event_count,
            counts.tag_count,
            counts.tagged_events,
            counts.events_gt5_tags,
            counts.events_gt10_tags,
        )
    }
}

/// Tag statistics from the per-image tag counts of one cohort.
pub fn tag_summary<I>(tags_per_image: I) -> Result<TagSummary, AggregateError>
where
    I: IntoIterator<Item = u64>,
{
    let (mut images, mut total, mut tagged, mut gt5, mut gt10) = (0, 0, 0, 0, 0);
    for t in tags_per_image {
        images += 1;
        total += t;
        tagged += u64::from(t > 0);
        gt5 += u64::from(t >= 6);
        gt10 += u64::from(t >= 11);
    }
    TagSummary::from_totals(images, total, tagged, gt5, gt10)
}
