//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use socialineq::aggregate::{CohortCounts, CohortGroup, TagSummary};
use socialineq::geo::SpatialIndex;
use socialineq::ingest::EventFormat;
use socialineq::metrics::{
    gini, hoover, percentile_ratio, reference, relative_entropy, suite_ratio, theil, IndexSuite,
};
use socialineq::report::{analyze, report_json, Analysis, Normalization, PipelineConfig, PipelineInputs};
use socialineq::synth::{generate_city, SynthCity, SynthParams};

use common::{jittered_mesh, naive_assign, probe_points, tracts_from, TestRng};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_vector(rng: &mut TestRng) -> Vec<f64> {
    let n = 2 + rng.below(63) as usize;
    (0..n).map(|_| rng.below(1_000_001) as f64).collect()
}

fn c1_gini_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = TestRng::new(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v = random_vector(&mut rng);
        match (gini(&v).ok(), reference::gini_pairwise(&v)) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => {}
            other => return Err(format!("defined-ness differs: {other:?}")),
        }
    }
    let elapsed = start.elapsed();
    ensure(
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("max |diff| = {worst:.3e} over 1000 vectors in {elapsed:.2?}"),
    )
}

fn c2_invariants() -> Outcome {
    let mut rng = TestRng::new(2);
    let mut worst = 0.0f64;
    let mut checked_ratios = 0;
    for _ in 0..1000 {
        let v = random_vector(&mut rng);
        let n = v.len() as f64;
        let (g, h, t) = (gini(&v).map_err(|e| e.to_string())?, hoover(&v).unwrap(), theil(&v).unwrap());
        let e = relative_entropy(&v).unwrap();
        if !((0.0..1.0).contains(&g) && (0.0..1.0).contains(&h) && t >= 0.0 && t <= n.ln() && (0.0..=1.0).contains(&e)) {
            return Err(format!("range violated on n={n}: gini {g} hoover {h} theil {t} entropy {e}"));
        }
        for c in [0.5, 3.0, 1e6] {
            let s: Vec<f64> = v.iter().map(|x| x * c).collect();
            worst = worst
                .max((gini(&s).unwrap() - g).abs())
                .max((hoover(&s).unwrap() - h).abs())
                .max((theil(&s).unwrap() - t).abs());
            for (hi, lo) in [(80.0, 20.0), (90.0, 10.0)] {
                if let (Ok(a), Ok(b)) = (percentile_ratio(&v, hi, lo), percentile_ratio(&s, hi, lo)) {
                    worst = worst.max((a - b).abs());
                    checked_ratios += 1;
                }
            }
        }
    }
    let mut extreme = 0.0f64;
    for n in [2usize, 10, 287] {
        let mut v = vec![0.0; n];
        v[0] = 5.0;
        let expect = (n - 1) as f64 / n as f64;
        extreme = extreme
            .max((gini(&v).unwrap() - expect).abs())
            .max((hoover(&v).unwrap() - expect).abs())
            .max((theil(&v).unwrap() - (n as f64).ln()).abs());
        if relative_entropy(&v) != Ok(0.0) {
            return Err("single-category relative entropy is not 0".into());
        }
    }
    ensure(
        worst <= 1e-12 && extreme <= 1e-12,
        format!("scale drift {worst:.2e} ({checked_ratios} ratio pairs), max-concentration error {extreme:.2e}"),
    )
}

fn c3_hand_values() -> Outcome {
    let checks = [
        ("gini([0,0,0,1])", gini(&[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.75, 1e-12),
        ("gini([1,2,3,4])", gini(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.25, 1e-12),
        ("hoover([1,3])", hoover(&[1.0, 3.0]).unwrap(), 0.25, 1e-12),
        ("theil([0,0,0,1])", theil(&[0.0, 0.0, 0.0, 1.0]).unwrap(), 4f64.ln(), 1e-12),
        ("relative_entropy([1,1,2])", relative_entropy(&[1.0, 1.0, 2.0]).unwrap(), 0.9464, 1e-4),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, got, want, tol) in checks {
        ok &= (got - want).abs() <= tol;
        parts.push(format!("{name}={got:.6}"));
    }
    ensure(ok, parts.join(", "))
}

fn c4_published_arithmetic() -> Outcome {
    let visitors = IndexSuite { gini: 0.669, ratio_80_20: 7.9, ratio_90_10: 25.0, hoover: 0.52, theil: 0.93 };
    let locals = IndexSuite { gini: 0.494, ratio_80_20: 6.0, ratio_90_10: 13.9, hoover: 0.37, theil: 0.41 };
    let r = suite_ratio(&visitors, &locals);
    let mean = |images: u64, tags: u64| {
        let counts = CohortCounts { event_count: images, tag_count: tags, ..CohortCounts::default() };
        TagSummary::from_counts(&counts).unwrap().mean_tags_per_image
    };
    let tourists = mean(1_524_046, 2_767_822);
    let residents = mean(5_918_408, 14_119_037);
    ensure(
        (r.gini - 1.354).abs() <= 0.001
            && (r.ratio_90_10 - 1.798).abs() <= 0.001
            && (tourists - 1.816).abs() <= 0.001
            && (residents - 2.386).abs() <= 0.001,
        format!(
            "gini ratio {:.4}, 90/10 ratio {:.4}, tourist mean {tourists:.4}, local mean {residents:.4} (printed as 2.385)",
            r.gini, r.ratio_90_10
        ),
    )
}

fn c5_point_in_polygon() -> Outcome {
    let (cols, rows) = (7, 41);
    let (geojson, vertices) = jittered_mesh(cols, rows, 5);
    let tracts = tracts_from(&geojson);
    if tracts.len() != 287 {
        return Err(format!("mesh has {} tracts", tracts.len()));
    }
    let index = SpatialIndex::build(tracts.clone()).map_err(|e| e.to_string())?;
    let points = probe_points(&vertices, cols, rows, 100_000, 55);
    let mut mismatches = 0;
    let mut outside = 0;
    for &[lon, lat] in &points {
        let want = naive_assign(&tracts, lat, lon);
        outside += usize::from(want.is_none());
        if index.assign_tract(lat, lon).map(str::to_string) != want {
            mismatches += 1;
        }
    }
    ensure(
        mismatches == 0,
        format!("{mismatches} mismatches over {} points ({outside} outside every tract)", points.len()),
    )
}

fn headline_city() -> SynthCity {
    generate_city(&SynthParams {
        seed: 42,
        n_tracts: 200,
        n_events: 100_000,
        zipf_exponent: 1.0,
        ..SynthParams::default()
    })
    .expect("valid parameters")
}

fn inputs_of(city: &SynthCity) -> PipelineInputs {
    PipelineInputs {
        events: city.events_csv.as_bytes().to_vec(),
        events_format: EventFormat::Csv,
        tracts: city.tracts_geojson.as_bytes().to_vec(),
        census: None,
    }
}

fn c6_partition_determinism(city: &SynthCity) -> Outcome {
    let inputs = inputs_of(city);
    let mut digests = Vec::new();
    for k in [1, 2, 8] {
        let cfg = PipelineConfig { partitions: k, ..PipelineConfig::default() };
        let a = analyze(&inputs, &cfg).map_err(|e| e.to_string())?;
        digests.push(report_json(&a.report));
    }
    ensure(
        digests.windows(2).all(|w| w[0] == w[1]),
        format!("report.json for k=1,2,8: {} bytes each, identical={}", digests[0].len(), digests.windows(2).all(|w| w[0] == w[1])),
    )
}

fn c7_oracle_closure(city: &SynthCity) -> Outcome {
    let cfg = PipelineConfig { normalization: Normalization::Raw, ..PipelineConfig::default() };
    let a = analyze(&inputs_of(city), &cfg).map_err(|e| e.to_string())?;
    let gt = &city.ground_truth;
    let per_tract: BTreeMap<String, u64> = a
        .aggregates
        .iter()
        .map(|t| (t.tract_id.clone(), t.visitor.event_count + t.local.event_count))
        .collect();
    let counts_equal = per_tract == gt.realized_counts;
    let mut worst = 0.0f64;
    for (group, key) in [(CohortGroup::All, "all"), (CohortGroup::Visitor, "visitor"), (CohortGroup::Local, "local")] {
        let got = a.report.cohort(group).ok_or("cohort missing")?.spatial.images.indexes.values();
        for (g, w) in got.iter().zip(gt.expected_indexes[key].values()) {
            match (g, w) {
                (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
                (None, None) => {}
                _ => return Err(format!("{key}: index defined on one side only")),
            }
        }
    }
    let recovered = gt
        .user_cohorts
        .iter()
        .filter(|(u, c)| a.user_cohorts.get(*u) == Some(c))
        .count();
    ensure(
        counts_equal && worst <= 1e-12 && recovered == gt.user_cohorts.len() && a.user_cohorts.len() == recovered,
        format!(
            "per-tract counts equal={counts_equal}, max index diff {worst:.2e}, cohorts recovered {recovered}/{}",
            gt.user_cohorts.len()
        ),
    )
}

fn c8_day_night_boundary() -> Outcome {
    let tracts = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"tract_id":"A"},
      "geometry":{"type":"Polygon","coordinates":[[[-74.0,40.7],[-73.9,40.7],[-73.9,40.8],[-74.0,40.8],[-74.0,40.7]]]}}]}"#;
    let mut parts = Vec::new();
    let mut ok = true;
    for (time, want_day) in [("06:59:59", false), ("07:00:00", true), ("18:59:59", true), ("19:00:00", false)] {
        let events = format!("user_id,lat,lon,timestamp,text\nu,40.75,-73.95,2014-07-15T{time}-04:00,x\n");
        let inputs = PipelineInputs {
            events: events.into_bytes(),
            events_format: EventFormat::Csv,
            tracts: tracts.as_bytes().to_vec(),
            census: None,
        };
        let a: Analysis = analyze(&inputs, &PipelineConfig::default()).map_err(|e| e.to_string())?;
        let t = &a.report.cohort(CohortGroup::All).ok_or("cohort missing")?.temporal;
        let is_day = (t.day_count, t.night_count) == (1, 0);
        let is_night = (t.day_count, t.night_count) == (0, 1);
        ok &= if want_day { is_day } else { is_night };
        parts.push(format!("{time}->{}", if is_day { "day" } else if is_night { "night" } else { "?" }));
    }
    ensure(ok, parts.join(", "))
}

fn timed(inputs: &PipelineInputs, partitions: usize) -> Result<(Duration, String), String> {
    let cfg = PipelineConfig { partitions, ..PipelineConfig::default() };
    let mut best = Duration::MAX;
    let mut json = String::new();
    for _ in 0..2 {
        let start = Instant::now();
        let a = analyze(inputs, &cfg).map_err(|e| e.to_string())?;
        best = best.min(start.elapsed());
        json = report_json(&a.report);
    }
    Ok((best, json))
}

fn c9_performance() -> (Outcome, Outcome) {
    let city = match generate_city(&SynthParams {
        seed: 9,
        n_tracts: 300,
        n_events: 1_000_000,
        ..SynthParams::default()
    }) {
        Ok(c) => c,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let inputs = inputs_of(&city);
    let (single, json1) = match timed(&inputs, 1) {
        Ok(r) => r,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let a = ensure(
        single <= Duration::from_secs(10),
        format!("1,000,000 events over 300 tracts, 1 partition: {single:.2?}"),
    );
    let b = match timed(&inputs, 4) {
        Ok((four, json4)) => {
            let speedup = single.as_secs_f64() / four.as_secs_f64();
            let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
            ensure(
                speedup >= 2.0 && json1 == json4,
                format!(
                    "4 partitions: {four:.2?}, speedup {speedup:.2}x, identical output={}, {cpus} CPU(s) available",
                    json1 == json4
                ),
            )
        }
        Err(e) => Err(e),
    };
    (a, b)
}

fn main() {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut results: Vec<(&str, &str, Outcome)> = vec![
        ("1", "Gini oracle equivalence", c1_gini_oracle()),
        ("2", "index invariant suite", c2_invariants()),
        ("3", "hand-computed index values", c3_hand_values()),
        ("4", "published-arithmetic replication", c4_published_arithmetic()),
        ("5", "point-in-polygon oracle", c5_point_in_polygon()),
    ];
    let city = headline_city();
    results.push(("6", "partition-merge determinism", c6_partition_determinism(&city)));
    results.push(("7", "end-to-end oracle closure", c7_oracle_closure(&city)));
    drop(city);
    results.push(("8", "day/night boundary", c8_day_night_boundary()));
    let (single, parallel) = c9_performance();
    results.push(("9a", "desk-scale single-threaded run", single));
    results.push(("9b", "4-partition speedup", parallel));

    // The speedup check cannot be met with fewer cores than partitions. Its
    // FAIL line is still printed, but it only gates the exit status on
    // hardware that could satisfy it.
    let mut failed = 0;
    let mut gating = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                let hardware_bound = *id == "9b" && cpus < 4;
                gating += usize::from(!hardware_bound);
                let note = if hardware_bound { " [not gating: fewer than 4 CPUs]" } else { "" };
                println!("FAIL criterion {id} ({name}): {detail}{note}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if gating > 0 {
        std::process::exit(1);
    }
}
