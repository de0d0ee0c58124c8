use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use serde_json::{json, Map, Value};

use super::emit::to_rounded_json;
use super::ReportError;
use crate::ingest::RawTractFeature;

/// Quantile bucket of one tract; `NoData` serializes as `"no-data"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TractClass {
    Class(usize),
    NoData,
}

impl Serialize for TractClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TractClass::Class(c) => s.serialize_u64(*c as u64),
            TractClass::NoData => s.serialize_str("no-data"),
        }
    }
}

/// Buckets values into `breaks` quantile classes.
///
/// The `j`-th threshold is the nearest-rank `j/breaks` quantile; a value's
/// class is the number of thresholds strictly below it, so ties share a
/// class and constant inputs all land in class 0.
pub fn quantile_classes(values: &[Option<f64>], breaks: usize) -> Result<Vec<TractClass>, ReportError> {
    if breaks < 2 {
        return Err(ReportError::BadBreakCount(breaks));
    }
    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let thresholds: Vec<f64> = if n == 0 {
        Vec::new()
    } else {
        (1..breaks)
            .map(|j| {
                let rank = (j * n).div_ceil(breaks).max(1);
                sorted[rank - 1]
            })
            .collect()
    };
    Ok(values
        .iter()
        .map(|v| match v {
            Some(v) => TractClass::Class(thresholds.iter().filter(|&&t| t < *v).count()),
            None => TractClass::NoData,
        })
        .collect())
}

/// FeatureCollection of the input tracts with `value` and `class` added to
/// each feature's properties. Geometry is copied through unchanged.
pub fn emit_choropleth(
    features: &[RawTractFeature],
    values: &BTreeMap<String, f64>,
    breaks: usize,
) -> Result<String, ReportError> {
    let per_feature: Vec<Option<f64>> = features
        .iter()
        .map(|f| values.get(&f.tract_id).copied())
        .collect();
    let classes = quantile_classes(&per_feature, breaks)?;
    let out: Vec<Value> = features
        .iter()
        .zip(per_feature.iter().zip(&classes))
        .map(|(f, (value, class))| {
            let mut properties: Map<String, Value> = f
                .properties
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect();
            properties.insert("tract_id".into(), Value::String(f.tract_id.clone()));
            properties.insert("value".into(), to_rounded_json(value));
            properties.insert("class".into(), to_rounded_json(class));
            json!({
                "type": "Feature",
                "properties": properties,
                "geometry": f.geometry,
            })
        })
        .collect();
    let mut s = serde_json::to_string(&json!({
        "type": "FeatureCollection",
        "features": out,
    }))
    .expect("valid JSON value");
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes(values: &[Option<f64>], k: usize) -> Vec<TractClass> {
        quantile_classes(values, k).unwrap()
    }

    #[test]
    fn one_value_per_bucket() {
        let v: Vec<_> = [1.0, 2.0, 3.0, 4.0].map(Some).to_vec();
        assert_eq!(classes(&v, 4), (0..4).map(TractClass::Class).collect::<Vec<_>>());
    }

    #[test]
    fn equal_values_share_class_zero() {
        let v = vec![Some(5.0); 6];
        assert!(classes(&v, 5).iter().all(|&c| c == TractClass::Class(0)));
    }

    #[test]
    fn missing_is_no_data() {
        let c = classes(&[Some(1.0), None, Some(2.0)], 2);
        assert_eq!(c, vec![TractClass::Class(0), TractClass::NoData, TractClass::Class(1)]);
        assert_eq!(serde_json::to_value(c[1]).unwrap(), json!("no-data"));
    }

    #[test]
    fn classes_are_monotone_and_bounded() {
        let v: Vec<_> = (0..37).map(|i| Some(f64::from(i * i % 11))).collect();
        let c = classes(&v, 5);
        for (a, ca) in v.iter().zip(&c) {
            for (b, cb) in v.iter().zip(&c) {
                if a < b {
                    assert!(matches!((ca, cb), (TractClass::Class(x), TractClass::Class(y)) if x <= y));
                }
            }
            assert!(matches!(ca, TractClass::Class(x) if *x < 5));
        }
    }

    #[test]
    fn rejects_single_class() {
        assert!(matches!(quantile_classes(&[Some(1.0)], 1), Err(ReportError::BadBreakCount(1))));
    }
}
