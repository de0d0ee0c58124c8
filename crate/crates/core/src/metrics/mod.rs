//! Inequality and diversity indexes over per-unit value distributions.
//!
//! All reductions sort their input and use compensated summation, so results
//! do not depend on unit order and are reproducible bit for bit.

pub mod reference;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::numeric::{sorted_ascending, CompensatedSum};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("distribution is empty")]
    Empty,
    #[error("distribution needs at least {needed} units, has {found}")]
    TooFewUnits { needed: usize, found: usize },
    #[error("all values are zero")]
    AllZero,
    #[error("value {0} is negative or not finite")]
    InvalidValue(f64),
    #[error("unit id and value lists differ in length ({ids} vs {values})")]
    LengthMismatch { ids: usize, values: usize },
    #[error("percentiles must satisfy 0 < lo < hi < 100, got hi={hi} lo={lo}")]
    InvalidPercentiles { hi: f64, lo: f64 },
    #[error("value at the low percentile is zero; ratio undefined")]
    ZeroLowPercentile,
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("count maps have different tract sets")]
    KeyMismatch,
}

pub type Result<T> = std::result::Result<T, MetricError>;

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    match values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        Some(&bad) => Err(MetricError::InvalidValue(bad)),
        None => Ok(()),
    }
}

fn check_units(values: &[f64], needed: usize) -> Result<()> {
    check_values(values)?;
    if values.len() < needed {
        return Err(MetricError::TooFewUnits {
            needed,
            found: values.len(),
        });
    }
    Ok(())
}

/// Sorted copy and its compensated total; errors when every value is zero.
fn sorted_with_total(values: &[f64]) -> Result<(Vec<f64>, f64)> {
    let sorted = sorted_ascending(values);
    let total = sorted.iter().copied().collect::<CompensatedSum>().value();
    if total <= 0.0 {
        return Err(MetricError::AllZero);
    }
    Ok((sorted, total))
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(MetricError::InvalidFraction(fraction))
    }
}

/// Nonnegative values attached to named units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub unit_ids: Vec<String>,
    pub values: Vec<f64>,
    pub label: String,
}

impl Distribution {
    pub fn new(label: impl Into<String>, unit_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if unit_ids.len() != values.len() {
            return Err(MetricError::LengthMismatch {
                ids: unit_ids.len(),
                values: values.len(),
            });
        }
        check_values(&values)?;
        Ok(Distribution {
            unit_ids,
            values,
            label: label.into(),
        })
    }

    /// Distribution over a map's entries in key order.
    pub fn from_map(label: impl Into<String>, map: &BTreeMap<String, f64>) -> Result<Self> {
        Distribution::new(
            label,
            map.keys().cloned().collect(),
            map.values().copied().collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gini(&self) -> Result<f64> {
        gini(&self.values)
    }

    pub fn lorenz_curve(&self) -> Result<LorenzCurve> {
        lorenz_curve(&self.values)
    }

    pub fn index_suite(&self) -> Result<IndexSuite> {
        index_suite(&self.values)
    }
}

/// Cumulative value share (y) against cumulative unit share (x).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorenzCurve {
    pub points: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Trapezoid area under the piecewise-linear curve.
    pub fn area(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for w in self.points.windows(2) {
            acc.add((w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0);
        }
        acc.value()
    }
}

/// Points `(k/n, share of the k smallest values)` for k = 0..=n.
pub fn lorenz_curve(values: &[f64]) -> Result<LorenzCurve> {
    check_values(values)?;
    let (sorted, total) = sorted_with_total(values)?;
    let n = sorted.len() as f64;
    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push((0.0, 0.0));
    let mut cumulative = CompensatedSum::new();
    for (k, &x) in sorted.iter().enumerate() {
        cumulative.add(x);
        points.push(((k + 1) as f64 / n, cumulative.value() / total));
    }
    Ok(LorenzCurve { points })
}

/// Population Gini coefficient, `1 − 2·(area under the Lorenz curve)`.
///
/// Equal to `ΣΣ|x_i − x_j| / (2n²μ)`.
pub fn gini(values: &[f64]) -> Result<f64> {
    check_units(values, 2)?;
    let (sorted, total) = sorted_with_total(values)?;
    let n = sorted.len() as f64;
    // Σ_k (L_{k-1} + L_k); the trapezoid area is this sum over 2n.
    let mut cumulative = CompensatedSum::new();
    let mut heights = CompensatedSum::new();
    let mut previous = 0.0;
    for &x in &sorted {
        cumulative.add(x);
        let share = cumulative.value() / total;
        heights.add(previous + share);
        previous = share;
    }
    Ok((1.0 - heights.value() / n).max(0.0))
}

/// Nearest-rank percentile of ascending `sorted`: the element at 1-based
/// rank `ceil(p/100 · n)`.
pub fn nearest_rank(sorted: &[f64], percent: f64) -> f64 {
    let n = sorted.len();
    let rank = (percent * n as f64 / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Ratio of the value at the `hi` percentile to the value at `lo`.
pub fn percentile_ratio(values: &[f64], hi: f64, lo: f64) -> Result<f64> {
    if !(lo > 0.0 && lo < hi && hi < 100.0) {
        return Err(MetricError::InvalidPercentiles { hi, lo });
    }
    check_values(values)?;
    let sorted = sorted_ascending(values);
    let low = nearest_rank(&sorted, lo);
    if low <= 0.0 {
        return Err(MetricError::ZeroLowPercentile);
    }
    Ok(nearest_rank(&sorted, hi) / low)
}

/// Share of the total that would have to move to equalize all units.
pub fn hoover(values: &[f64]) -> Result<f64> {
    check_units(values, 2)?;
    let (sorted, total) = sorted_with_total(values)?;
    let fair = 1.0 / sorted.len() as f64;
    let deviation: CompensatedSum = sorted.iter().map(|x| (x / total - fair).abs()).collect();
    Ok(deviation.value() / 2.0)
}

/// Theil T index `(1/n) Σ (x/μ) ln(x/μ)` with zero values contributing 0.
pub fn theil(values: &[f64]) -> Result<f64> {
    check_units(values, 2)?;
    let (sorted, total) = sorted_with_total(values)?;
    let n = sorted.len() as f64;
    let mean = total / n;
    let terms: CompensatedSum = sorted
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let r = x / mean;
            r * r.ln()
        })
        .collect();
    Ok((terms.value() / n).clamp(0.0, n.ln()))
}

/// Shannon entropy of the category shares, divided by `ln k` where `k` is
/// the number of nonzero categories. A single category scores 0.
pub fn relative_entropy(category_counts: &[f64]) -> Result<f64> {
    check_values(category_counts)?;
    let (sorted, total) = sorted_with_total(category_counts)?;
    let nonzero: Vec<f64> = sorted.into_iter().filter(|&c| c > 0.0).collect();
    if nonzero.len() == 1 {
        return Ok(0.0);
    }
    let entropy: CompensatedSum = nonzero
        .iter()
        .map(|&c| {
            let p = c / total;
            -p * p.ln()
        })
        .collect();
    Ok((entropy.value() / (nonzero.len() as f64).ln()).clamp(0.0, 1.0))
}

/// Relative entropy of a categorical count map.
pub fn relative_entropy_of<K>(counts: &BTreeMap<K, u64>) -> Result<f64> {
    let values: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    relative_entropy(&values)
}

/// Share of the total held by the `round(fraction·n)` largest units (at
/// least one).
pub fn top_share(values: &[f64], fraction: f64) -> Result<f64> {
    check_fraction(fraction)?;
    check_values(values)?;
    let (mut sorted, total) = sorted_with_total(values)?;
    sorted.reverse();
    let k = ((fraction * sorted.len() as f64).round() as usize).clamp(1, sorted.len());
    let top: CompensatedSum = sorted[..k].iter().copied().collect();
    Ok(top.value() / total)
}

/// Fewest units whose values together reach `share` of the total.
pub fn min_units_for_share(values: &[f64], share: f64) -> Result<usize> {
    check_fraction(share)?;
    check_values(values)?;
    let mut descending = sorted_ascending(values);
    descending.reverse();
    // Total accumulated in the same order as the running sum, so share 1.0
    // terminates exactly at the last nonzero unit.
    let total = descending.iter().copied().collect::<CompensatedSum>().value();
    if total <= 0.0 {
        return Err(MetricError::AllZero);
    }
    let target = share * total;
    let mut running = CompensatedSum::new();
    for (k, &x) in descending.iter().enumerate() {
        running.add(x);
        if running.value() >= target {
            return Ok(k + 1);
        }
    }
    Ok(descending.len())
}

/// The five headline inequality indexes of one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexSuite {
    pub gini: f64,
    pub ratio_80_20: f64,
    pub ratio_90_10: f64,
    pub hoover: f64,
    pub theil: f64,
}

impl IndexSuite {
    pub const NAMES: [&'static str; 5] = ["gini", "ratio_80_20", "ratio_90_10", "hoover", "theil"];

    pub fn values(&self) -> [f64; 5] {
        [
            self.gini,
            self.ratio_80_20,
            self.ratio_90_10,
            self.hoover,
            self.theil,
        ]
    }
}

pub fn index_suite(values: &[f64]) -> Result<IndexSuite> {
    Ok(IndexSuite {
        gini: gini(values)?,
        ratio_80_20: percentile_ratio(values, 80.0, 20.0)?,
        ratio_90_10: percentile_ratio(values, 90.0, 10.0)?,
        hoover: hoover(values)?,
        theil: theil(values)?,
    })
}

/// Componentwise `a / b`, e.g. visitor over local.
pub fn suite_ratio(a: &IndexSuite, b: &IndexSuite) -> IndexSuite {
    IndexSuite {
        gini: a.gini / b.gini,
        ratio_80_20: a.ratio_80_20 / b.ratio_80_20,
        ratio_90_10: a.ratio_90_10 / b.ratio_90_10,
        hoover: a.hoover / b.hoover,
        theil: a.theil / b.theil,
    }
}

/// Index suite where each index that cannot be computed is `None`.
///
/// Report tables use this: a zero 20th percentile should not hide the Gini.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PartialIndexSuite {
    pub gini: Option<f64>,
    pub ratio_80_20: Option<f64>,
    pub ratio_90_10: Option<f64>,
    pub hoover: Option<f64>,
    pub theil: Option<f64>,
}

impl PartialIndexSuite {
    pub fn compute(values: &[f64]) -> PartialIndexSuite {
        PartialIndexSuite {
            gini: gini(values).ok(),
            ratio_80_20: percentile_ratio(values, 80.0, 20.0).ok(),
            ratio_90_10: percentile_ratio(values, 90.0, 10.0).ok(),
            hoover: hoover(values).ok(),
            theil: theil(values).ok(),
        }
    }

    pub fn values(&self) -> [Option<f64>; 5] {
        [
            self.gini,
            self.ratio_80_20,
            self.ratio_90_10,
            self.hoover,
            self.theil,
        ]
    }

    pub fn ratio(&self, other: &PartialIndexSuite) -> PartialIndexSuite {
        let div = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) if b != 0.0 => Some(a / b),
            _ => None,
        };
        PartialIndexSuite {
            gini: div(self.gini, other.gini),
            ratio_80_20: div(self.ratio_80_20, other.ratio_80_20),
            ratio_90_10: div(self.ratio_90_10, other.ratio_90_10),
            hoover: div(self.hoover, other.hoover),
            theil: div(self.theil, other.theil),
        }
    }
}

impl From<IndexSuite> for PartialIndexSuite {
    fn from(s: IndexSuite) -> Self {
        PartialIndexSuite {
            gini: Some(s.gini),
            ratio_80_20: Some(s.ratio_80_20),
            ratio_90_10: Some(s.ratio_90_10),
            hoover: Some(s.hoover),
            theil: Some(s.theil),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IncomeFlag {
    Above,
    Below,
    Unknown,
}

impl IncomeFlag {
    pub fn label(self) -> &'static str {
        match self {
            IncomeFlag::Above => "above",
            IncomeFlag::Below => "below",
            IncomeFlag::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankRow {
    pub tract_id: String,
    pub day_count: u64,
    pub night_count: u64,
    pub day_rank: usize,
    pub night_rank: usize,
    pub income_flag: IncomeFlag,
}

fn ranks(counts: &BTreeMap<String, u64>) -> BTreeMap<&str, usize> {
    let mut order: Vec<(&str, u64)> = counts.iter().map(|(k, &v)| (k.as_str(), v)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order
        .into_iter()
        .enumerate()
        .map(|(i, (id, _))| (id, i + 1))
        .collect()
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Day and night popularity ranks per tract (1 = most images, ties by id)
/// with an above/below-median income flag. Rows come back in id order.
pub fn day_night_rank_table(
    day_counts: &BTreeMap<String, u64>,
    night_counts: &BTreeMap<String, u64>,
    incomes: &BTreeMap<String, f64>,
) -> Result<Vec<RankRow>> {
    if !day_counts.keys().eq(night_counts.keys()) {
        return Err(MetricError::KeyMismatch);
    }
    let ids: BTreeSet<&str> = day_counts.keys().map(String::as_str).collect();
    let mut known: Vec<f64> = incomes
        .iter()
        .filter(|(k, _)| ids.contains(k.as_str()))
        .map(|(_, &v)| v)
        .collect();
    let threshold = median(&mut known);
    let day = ranks(day_counts);
    let night = ranks(night_counts);
    Ok(day_counts
        .iter()
        .map(|(id, &day_count)| {
            let income_flag = match (incomes.get(id), threshold) {
                (Some(&income), Some(t)) if income > t => IncomeFlag::Above,
                (Some(_), Some(_)) => IncomeFlag::Below,
                _ => IncomeFlag::Unknown,
            };
            RankRow {
                tract_id: id.clone(),
                day_count,
                night_count: night_counts[id],
                day_rank: day[id.as_str()],
                night_rank: night[id.as_str()],
                income_flag,
            }
        })
        .collect())
}
