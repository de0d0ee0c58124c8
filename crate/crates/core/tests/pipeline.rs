use std::collections::BTreeMap;

use socialineq::aggregate::CohortGroup;
use socialineq::cohort::Cohort;
use socialineq::ingest::EventFormat;
use socialineq::report::{
    analyze, emit_report, indexes_csv, report_json, run_pipeline, tags_csv, Normalization,
    OutputFormat, PipelineConfig, PipelineInputs, ReportError,
};
use socialineq::synth::{generate_city, SynthCity, SynthParams};

fn small_city() -> SynthCity {
    generate_city(&SynthParams {
        n_tracts: 30,
        n_users_local: 20,
        n_users_visitor: 60,
        n_events: 3_000,
        ..SynthParams::default()
    })
    .unwrap()
}

fn inputs(city: &SynthCity) -> PipelineInputs {
    PipelineInputs {
        events: city.events_csv.clone().into_bytes(),
        events_format: EventFormat::Csv,
        tracts: city.tracts_geojson.clone().into_bytes(),
        census: None,
    }
}

fn raw_config() -> PipelineConfig {
    PipelineConfig {
        normalization: Normalization::Raw,
        ..PipelineConfig::default()
    }
}

const SQUARES: &str = r#"{"type":"FeatureCollection","features":[
 {"type":"Feature","properties":{"tract_id":"A","borough":"x"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
 {"type":"Feature","properties":{"tract_id":"B"},"geometry":{"type":"Polygon","coordinates":[[[1,0],[2,0],[2,1],[1,1],[1,0]]]}},
 {"type":"Feature","properties":{"tract_id":"C"},"geometry":{"type":"Polygon","coordinates":[[[2,0],[3,0],[3,1],[2,1],[2,0]]]}}]}"#;

fn handmade(events: &str, census: Option<&str>) -> PipelineInputs {
    PipelineInputs {
        events: events.as_bytes().to_vec(),
        events_format: EventFormat::Csv,
        tracts: SQUARES.as_bytes().to_vec(),
        census: census.map(|c| c.as_bytes().to_vec()),
    }
}

#[test]
fn counts_and_indexes_match_ground_truth() {
    let city = small_city();
    let a = analyze(&inputs(&city), &raw_config()).unwrap();
    let gt = &city.ground_truth;
    let per_tract: BTreeMap<String, u64> = a
        .aggregates
        .iter()
        .map(|t| (t.tract_id.clone(), t.visitor.event_count + t.local.event_count))
        .collect();
    assert_eq!(per_tract, gt.realized_counts);
    for (group, key) in [
        (CohortGroup::All, "all"),
        (CohortGroup::Visitor, "visitor"),
        (CohortGroup::Local, "local"),
    ] {
        let got = a.report.cohort(group).unwrap().spatial.images.indexes.values();
        let want = gt.expected_indexes[key].values();
        for (g, w) in got.iter().zip(&want) {
            assert!((g.unwrap() - w.unwrap()).abs() <= 1e-12, "{key}: {g:?} vs {w:?}");
        }
    }
    assert_eq!(a.user_cohorts, gt.user_cohorts);
}

#[test]
fn accounting_identity_holds() {
    let city = small_city();
    let mut events = city.events_csv.clone();
    events.push_str("bad,row\n");
    events.push_str("u1,95.0,-74.0,2014-03-02T10:00:00-05:00,x\n");
    events.push_str("u1,40.7,-74.0,not-a-time,x\n");
    events.push_str("u1,10.0,10.0,2014-03-02T10:00:00-05:00,outside\n");
    let inputs = PipelineInputs {
        events: events.into_bytes(),
        ..inputs(&city)
    };
    let r = analyze(&inputs, &raw_config()).unwrap().report;
    let i = &r.ingest;
    assert_eq!(i.records_total, 3_004);
    assert_eq!(i.records_skipped, 3);
    assert_eq!((i.malformed_record, i.out_of_range_coordinate, i.bad_timestamp), (1, 1, 1));
    assert_eq!(i.records_ok, i.assigned + i.dropped_outside_tract);
    assert_eq!(i.dropped_outside_tract, 1);
    let visitor = r.cohort(CohortGroup::Visitor).unwrap().images;
    let local = r.cohort(CohortGroup::Local).unwrap().images;
    assert_eq!(i.assigned, visitor + local);
    assert_eq!(r.cohort(CohortGroup::All).unwrap().images, i.assigned);
    // The dropped user never reached classification.
    assert_eq!(r.users.total, 80);
}

#[test]
fn partitioned_runs_are_byte_identical() {
    let city = small_city();
    let base = report_json(&analyze(&inputs(&city), &raw_config()).unwrap().report);
    for k in [2, 3, 8, 64] {
        let cfg = PipelineConfig {
            partitions: k,
            ..raw_config()
        };
        assert_eq!(report_json(&analyze(&inputs(&city), &cfg).unwrap().report), base, "k={k}");
    }
}

#[test]
fn empty_events_give_null_indexes() {
    let a = analyze(&handmade("user_id,lat,lon,timestamp,text\n", None), &PipelineConfig::default())
        .unwrap();
    let r = &a.report;
    assert_eq!(r.ingest.records_total, 0);
    assert_eq!(r.users.total, 0);
    let all = r.cohort(CohortGroup::All).unwrap();
    assert_eq!(all.images, 0);
    assert!(all.spatial.images.indexes.values().iter().all(Option::is_none));
    assert!(a.lorenz.is_empty());
    assert!(!r.files.contains(&"lorenz.svg".to_string()));
    let json: serde_json::Value = serde_json::from_str(&report_json(r)).unwrap();
    assert!(json["cohorts"][3]["spatial"]["images"]["indexes"]["gini"].is_null());
    assert!(json["cohorts"][3]["tags"].is_null());
}

#[test]
fn missing_tracts_file_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.csv");
    std::fs::write(&events, "user_id,lat,lon,timestamp,text\n").unwrap();
    let err = run_pipeline(&PipelineConfig {
        events_path: events,
        tracts_path: dir.path().join("missing.geojson"),
        ..PipelineConfig::default()
    })
    .unwrap_err();
    assert!(matches!(err, ReportError::MissingInput(_)));
    assert_ne!(err.exit_code(), 0);
}

#[test]
fn duplicate_tract_error_carries_the_path() {
    let twice = SQUARES.replace("\"tract_id\":\"B\"", "\"tract_id\":\"A\"");
    let inputs = PipelineInputs {
        tracts: twice.into_bytes(),
        ..handmade("user_id,lat,lon,timestamp,text\n", None)
    };
    let cfg = PipelineConfig {
        tracts_path: "city/tracts.geojson".into(),
        ..PipelineConfig::default()
    };
    let err = analyze(&inputs, &cfg).unwrap_err();
    assert!(err.to_string().contains("city/tracts.geojson"), "{err}");
    assert_eq!(err.exit_code(), 1);
}

const EVENTS: &str = "user_id,lat,lon,timestamp,text
a,0.5,0.5,2014-03-01T06:59:59-05:00,#one #two
a,0.5,0.5,2014-04-20T07:00:00-04:00,#one
b,0.5,1.5,2014-03-05T18:59:59-05:00,plain
c,0.5,2.5,2014-04-22T19:00:00-04:00,#x #y #z #w #v #u
";

#[test]
fn day_night_and_cohorts_on_handmade_events() {
    let a = analyze(&handmade(EVENTS, None), &raw_config()).unwrap();
    assert_eq!(a.user_cohorts["a"], Cohort::Local { super_local: true });
    assert_eq!(a.user_cohorts["b"], Cohort::Visitor);
    let r = &a.report;
    let all = &r.cohort(CohortGroup::All).unwrap().temporal;
    assert_eq!((all.day_count, all.night_count), (2, 2));
    assert_eq!(all.hour_histogram[6], 1);
    assert_eq!(all.hour_histogram[19], 1);
    let rows: Vec<_> = r
        .rank_table
        .iter()
        .map(|row| (row.tract_id.as_str(), row.day_count, row.night_count))
        .collect();
    assert_eq!(rows, vec![("A", 1, 1), ("B", 1, 0), ("C", 0, 1)]);
    let tags = r.cohort(CohortGroup::Visitor).unwrap().tags.as_ref().unwrap();
    assert_eq!((tags.image_count, tags.tag_total, tags.images_gt5_tags), (2, 6, 1));
    assert_eq!(r.dataset_months, vec!["2014-03", "2014-04"]);
}

#[test]
fn census_indexes_and_unmatched_ids() {
    let census = "tract_id,median_income,unemployment_rate\nA,10,0.1\nB,30,\nC,20,0.3\nZ,5,0.2\n";
    let a = analyze(&handmade(EVENTS, Some(census)), &raw_config()).unwrap();
    let r = &a.report;
    assert_eq!(r.ingest.census_unmatched_tract_ids, vec!["Z"]);
    let income = &r.census[0];
    assert_eq!((income.column.as_str(), income.units), ("median_income", 3));
    // gini([10, 20, 30]) = (2·10 + 2·20 + 2·10) / (2·9·20)
    assert!((income.indexes.gini.unwrap() - 80.0 / 360.0).abs() < 1e-15);
    assert_eq!(r.census[1].units, 2);
    let flags: Vec<_> = r.rank_table.iter().map(|row| row.income_flag.label()).collect();
    assert_eq!(flags, vec!["below", "above", "below"]);
}

#[test]
fn per_km2_normalization_divides_by_area() {
    let raw = analyze(&handmade(EVENTS, None), &raw_config()).unwrap();
    let dense = analyze(&handmade(EVENTS, None), &PipelineConfig::default()).unwrap();
    // Equal-area squares near the equator: normalization leaves the shape alone.
    let g = |a: &socialineq::report::Analysis| {
        a.report.cohort(CohortGroup::All).unwrap().spatial.images.indexes.gini.unwrap()
    };
    assert!((g(&raw) - g(&dense)).abs() < 1e-9);
    let area = dense.tract_rows[0].area_km2;
    assert!((dense.choropleth_values["A"] - 2.0 / area).abs() < 1e-12);
    assert_eq!(raw.choropleth_values["A"], 2.0);
}

#[test]
fn emitted_files_are_stable_and_complete() {
    let city = small_city();
    let a = analyze(&inputs(&city), &raw_config()).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&a, d1.path(), OutputFormat::All).unwrap();
    emit_report(&a, d2.path(), OutputFormat::All).unwrap();
    for name in [
        "report.json",
        "indexes.csv",
        "tags.csv",
        "ranks.csv",
        "tracts.csv",
        "lorenz.svg",
        "choropleth.geojson",
    ] {
        let one = std::fs::read(d1.path().join(name)).unwrap();
        assert_eq!(one, std::fs::read(d2.path().join(name)).unwrap(), "{name}");
        assert!(!one.is_empty());
    }
    let csv_only = tempfile::tempdir().unwrap();
    emit_report(&a, csv_only.path(), OutputFormat::Csv).unwrap();
    assert!(!csv_only.path().join("report.json").exists());
    assert!(csv_only.path().join("indexes.csv").exists());
}

#[test]
fn csv_tables_have_expected_shape() {
    let a = analyze(&handmade(EVENTS, None), &raw_config()).unwrap();
    let idx = indexes_csv(&a.report);
    let lines: Vec<&str> = idx.lines().collect();
    assert_eq!(lines[0], "index,visitor,local,ratio");
    assert_eq!(lines.len(), 16);
    assert!(lines[1].starts_with("gini,"));
    assert!(lines[6].starts_with("tags_gini,"));
    // Local images sit in a single tract: gini defined, 80/20 undefined.
    let ratio_row: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(ratio_row[2], "");

    let tags = tags_csv(&a.report);
    assert!(tags.starts_with("statistic,visitor,local,super_local,all\n"));
    let tagged_mean = tags
        .lines()
        .find(|l| l.starts_with("mean_tags_per_tagged_image,"))
        .unwrap();
    // Visitor b posted one untagged image, c one with six tags.
    assert_eq!(tagged_mean, "mean_tags_per_tagged_image,6,1.5,1.5,3");
}

#[test]
fn untagged_cohort_has_null_tagged_mean() {
    let events = "user_id,lat,lon,timestamp,text\nb,0.5,1.5,2014-03-05T12:00:00-05:00,plain\n";
    let a = analyze(&handmade(events, None), &raw_config()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report_json(&a.report)).unwrap();
    assert!(json["cohorts"][0]["tags"]["mean_tags_per_tagged_image"].is_null());
    let tags = tags_csv(&a.report);
    let row = tags
        .lines()
        .find(|l| l.starts_with("mean_tags_per_tagged_image,"))
        .unwrap();
    assert_eq!(row, "mean_tags_per_tagged_image,,,,");
}

#[test]
fn choropleth_passes_geometry_through() {
    let a = analyze(&handmade(EVENTS, None), &raw_config()).unwrap();
    let out = socialineq::report::emit_choropleth(&a.tract_features, &a.choropleth_values, 3).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let input: serde_json::Value = serde_json::from_str(SQUARES).unwrap();
    for (f_out, f_in) in v["features"].as_array().unwrap().iter().zip(input["features"].as_array().unwrap()) {
        assert_eq!(f_out["geometry"], f_in["geometry"]);
        assert!(f_out["properties"]["class"].is_u64());
    }
    assert_eq!(v["features"][0]["properties"]["borough"], "x");
    assert_eq!(v["features"][0]["properties"]["value"], 2.0);
}

#[test]
fn jsonl_input_matches_csv() {
    let jsonl = r##"{"user_id":"a","lat":0.5,"lon":0.5,"timestamp":"2014-03-01T06:59:59-05:00","text":"#one #two"}
{"user_id":"a","lat":0.5,"lon":0.5,"timestamp":"2014-04-20T07:00:00-04:00","text":"#one"}
{"user_id":"b","lat":0.5,"lon":1.5,"timestamp":"2014-03-05T18:59:59-05:00","text":"plain"}
{"user_id":"c","lat":0.5,"lon":2.5,"timestamp":"2014-04-22T19:00:00-04:00","text":"#x #y #z #w #v #u"}
"##;
    let from_jsonl = analyze(
        &PipelineInputs {
            events_format: EventFormat::Jsonl,
            ..handmade(jsonl, None)
        },
        &raw_config(),
    )
    .unwrap();
    let from_csv = analyze(&handmade(EVENTS, None), &raw_config()).unwrap();
    assert_eq!(report_json(&from_jsonl.report), report_json(&from_csv.report));
}

#[test]
fn explicit_collection_span_controls_super_locals() {
    let cfg = PipelineConfig {
        collection_months: Some(("2014-03".parse().unwrap(), "2014-05".parse().unwrap())),
        ..raw_config()
    };
    let a = analyze(&handmade(EVENTS, None), &cfg).unwrap();
    assert_eq!(a.user_cohorts["a"], Cohort::Local { super_local: false });
    assert_eq!(a.report.users.super_local, 0);
}

#[test]
fn rejects_bad_configuration() {
    let cfg = PipelineConfig {
        choropleth_breaks: 1,
        ..raw_config()
    };
    assert!(matches!(
        analyze(&handmade(EVENTS, None), &cfg),
        Err(ReportError::BadBreakCount(1))
    ));
    let cfg = PipelineConfig {
        window_days: 0,
        ..raw_config()
    };
    assert!(matches!(analyze(&handmade(EVENTS, None), &cfg), Err(ReportError::Config(_))));
}
