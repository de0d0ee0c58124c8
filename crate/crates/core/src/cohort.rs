//! Visitor / local classification from the temporal span of a user's posts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Datelike, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::ingest::GeoEvent;

pub const DEFAULT_WINDOW_DAYS: u32 = 12;

const SECONDS_PER_DAY: i64 = 86_400;

/// Calendar month in the display timezone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<YearMonth> {
        (1..=12).contains(&month).then_some(YearMonth { year, month })
    }

    pub fn of(ts: DateTime<Utc>, tz: Tz) -> YearMonth {
        let local = ts.with_timezone(&tz);
        YearMonth {
            year: local.year(),
            month: local.month(),
        }
    }

    pub fn succ(self) -> YearMonth {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    /// Every month from `first` to `last`, inclusive.
    pub fn range(first: YearMonth, last: YearMonth) -> Vec<YearMonth> {
        let mut out = Vec::new();
        let mut m = first;
        while m <= last {
            out.push(m);
            m = m.succ();
        }
        out
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
        let year = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
        YearMonth::new(year, month).ok_or_else(|| format!("month out of range in {s:?}"))
    }
}

/// Temporal summary of one user's posts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserActivity {
    pub user_id: String,
    pub first_ts: DateTime<Utc>,
    pub last_ts: DateTime<Utc>,
    pub post_count: u64,
    pub months_present: BTreeSet<YearMonth>,
}

impl UserActivity {
    pub fn new(user_id: impl Into<String>, ts: DateTime<Utc>, tz: Tz) -> UserActivity {
        UserActivity {
            user_id: user_id.into(),
            first_ts: ts,
            last_ts: ts,
            post_count: 1,
            months_present: BTreeSet::from([YearMonth::of(ts, tz)]),
        }
    }

    pub fn observe(&mut self, ts: DateTime<Utc>, tz: Tz) {
        self.first_ts = self.first_ts.min(ts);
        self.last_ts = self.last_ts.max(ts);
        self.post_count += 1;
        self.months_present.insert(YearMonth::of(ts, tz));
    }

    /// Associative, commutative merge of two partial summaries of one user.
    pub fn merge(&mut self, other: &UserActivity) {
        self.first_ts = self.first_ts.min(other.first_ts);
        self.last_ts = self.last_ts.max(other.last_ts);
        self.post_count += other.post_count;
        self.months_present.extend(other.months_present.iter().copied());
    }

    pub fn span_seconds(&self) -> i64 {
        (self.last_ts - self.first_ts).num_seconds()
    }
}

pub type ActivityMap = BTreeMap<String, UserActivity>;

/// Per-user summaries of (already tract-filtered) events.
pub fn build_user_activity<'a, I>(events: I, tz: Tz) -> ActivityMap
where
    I: IntoIterator<Item = &'a GeoEvent>,
{
    let mut map = ActivityMap::new();
    for e in events {
        observe_into(&mut map, &e.user_id, e.timestamp, tz);
    }
    map
}

pub fn observe_into(map: &mut ActivityMap, user_id: &str, ts: DateTime<Utc>, tz: Tz) {
    match map.get_mut(user_id) {
        Some(a) => a.observe(ts, tz),
        None => {
            map.insert(user_id.to_string(), UserActivity::new(user_id, ts, tz));
        }
    }
}

/// Merges `other` into `into`; the result does not depend on merge order.
pub fn merge_activity_maps(into: &mut ActivityMap, other: ActivityMap) {
    for (user, activity) in other {
        match into.get_mut(&user) {
            Some(a) => a.merge(&activity),
            None => {
                into.insert(user, activity);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Visitor,
    Local { super_local: bool },
}

impl Cohort {
    pub fn is_local(self) -> bool {
        matches!(self, Cohort::Local { .. })
    }

    pub fn is_super_local(self) -> bool {
        matches!(self, Cohort::Local { super_local: true })
    }

    pub fn label(self) -> &'static str {
        match self {
            Cohort::Visitor => "visitor",
            Cohort::Local { super_local: false } => "local",
            Cohort::Local { super_local: true } => "super_local",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CohortError {
    #[error("dataset month list is empty")]
    EmptyDatasetMonths,
    #[error("window must be at least one day")]
    ZeroWindow,
}

/// Local iff at least two posts span strictly more than `window_days` days
/// (measured in seconds); everyone else is a visitor.
pub fn classify_user(activity: &UserActivity, window_days: u32) -> Cohort {
    let window = i64::from(window_days) * SECONDS_PER_DAY;
    if activity.post_count >= 2 && activity.span_seconds() > window {
        Cohort::Local { super_local: false }
    } else {
        Cohort::Visitor
    }
}

/// True iff the user posted in every month of the collection span.
pub fn is_super_local(
    activity: &UserActivity,
    dataset_months: &[YearMonth],
) -> Result<bool, CohortError> {
    if dataset_months.is_empty() {
        return Err(CohortError::EmptyDatasetMonths);
    }
    Ok(dataset_months
        .iter()
        .all(|m| activity.months_present.contains(m)))
}

/// Full classification with the super-local flag applied to locals.
#[derive(Debug, Clone)]
pub struct Classifier {
    window_days: u32,
    dataset_months: Vec<YearMonth>,
}

impl Classifier {
    pub fn new(window_days: u32, dataset_months: Vec<YearMonth>) -> Result<Classifier, CohortError> {
        if window_days == 0 {
            return Err(CohortError::ZeroWindow);
        }
        if dataset_months.is_empty() {
            return Err(CohortError::EmptyDatasetMonths);
        }
        Ok(Classifier {
            window_days,
            dataset_months,
        })
    }

    pub fn classify(&self, activity: &UserActivity) -> Cohort {
        match classify_user(activity, self.window_days) {
            Cohort::Visitor => Cohort::Visitor,
            Cohort::Local { .. } => Cohort::Local {
                super_local: self
                    .dataset_months
                    .iter()
                    .all(|m| activity.months_present.contains(m)),
            },
        }
    }

    pub fn dataset_months(&self) -> &[YearMonth] {
        &self.dataset_months
    }
}

/// Contiguous month span covered by the activity map, if any.
pub fn observed_months(activities: &ActivityMap) -> Vec<YearMonth> {
    let first = activities
        .values()
        .filter_map(|a| a.months_present.first())
        .min();
    let last = activities
        .values()
        .filter_map(|a| a.months_present.last())
        .max();
    match (first, last) {
        (Some(&f), Some(&l)) => YearMonth::range(f, l),
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn at(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 16, 0, 0).unwrap()
    }

    fn activity(times: &[DateTime<Utc>]) -> UserActivity {
        let mut a = UserActivity::new("u", times[0], Tz::America__New_York);
        for &t in &times[1..] {
            a.observe(t, Tz::America__New_York);
        }
        a
    }

    fn ym(y: i32, m: u32) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    #[test]
    fn activity_aggregation() {
        let tz = Tz::America__New_York;
        let events: Vec<GeoEvent> = [at(2014, 3, 5), at(2014, 3, 1), at(2014, 7, 2)]
            .into_iter()
            .map(|timestamp| GeoEvent {
                user_id: "u1".into(),
                lat: 0.0,
                lon: 0.0,
                timestamp,
                text: String::new(),
            })
            .collect();
        let map = build_user_activity(&events, tz);
        let a = &map["u1"];
        assert_eq!(a.first_ts, at(2014, 3, 1));
        assert_eq!(a.last_ts, at(2014, 7, 2));
        assert_eq!(a.post_count, 3);
        assert_eq!(a.months_present, BTreeSet::from([ym(2014, 3), ym(2014, 7)]));
        assert!(build_user_activity(&[], tz).is_empty());
    }

    #[test]
    fn months_use_display_timezone() {
        // 02:00 UTC on April 1st is still March 31st in New York.
        let ts = Utc.with_ymd_and_hms(2014, 4, 1, 2, 0, 0).unwrap();
        assert_eq!(YearMonth::of(ts, Tz::America__New_York), ym(2014, 3));
        assert_eq!(YearMonth::of(ts, Tz::UTC), ym(2014, 4));
    }

    #[test]
    fn classification_rules() {
        let t0 = at(2014, 3, 1);
        assert_eq!(
            classify_user(&activity(&[t0, t0 + Duration::days(20)]), 12),
            Cohort::Local { super_local: false }
        );
        let inside: Vec<_> = (3..=9).map(|d| t0 + Duration::days(d)).collect();
        assert_eq!(classify_user(&activity(&inside), 12), Cohort::Visitor);
        assert_eq!(classify_user(&activity(&[t0]), 12), Cohort::Visitor);
        assert_eq!(
            classify_user(&activity(&[t0, t0 + Duration::seconds(12 * 86_400)]), 12),
            Cohort::Visitor
        );
        assert!(classify_user(&activity(&[t0, t0 + Duration::seconds(12 * 86_400 + 1)]), 12).is_local());
    }

    #[test]
    fn super_local_rule() {
        let months = YearMonth::range(ym(2014, 3), ym(2014, 7));
        let all: Vec<_> = (3..=7).map(|m| at(2014, m, 10)).collect();
        assert!(is_super_local(&activity(&all), &months).unwrap());
        let missing_june: Vec<_> = [3, 4, 5, 7].iter().map(|&m| at(2014, m, 10)).collect();
        assert!(!is_super_local(&activity(&missing_june), &months).unwrap());
        assert_eq!(
            is_super_local(&activity(&all), &[]),
            Err(CohortError::EmptyDatasetMonths)
        );
        let c = Classifier::new(12, months).unwrap();
        assert!(c.classify(&activity(&all)).is_super_local());
    }

    #[test]
    fn merge_is_order_free() {
        let mut a = activity(&[at(2014, 3, 1), at(2014, 4, 1)]);
        let b = activity(&[at(2014, 6, 1)]);
        let mut b2 = b.clone();
        a.merge(&b);
        b2.merge(&activity(&[at(2014, 3, 1), at(2014, 4, 1)]));
        assert_eq!(a.first_ts, b2.first_ts);
        assert_eq!(a.last_ts, b2.last_ts);
        assert_eq!(a.post_count, 3);
        assert_eq!(a.months_present, b2.months_present);
    }

    #[test]
    fn year_month_parse_and_range() {
        assert_eq!("2014-03".parse::<YearMonth>().unwrap(), ym(2014, 3));
        assert!("2014-13".parse::<YearMonth>().is_err());
        assert_eq!(YearMonth::range(ym(2013, 11), ym(2014, 2)).len(), 4);
    }
}
