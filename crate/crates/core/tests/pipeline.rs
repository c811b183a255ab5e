use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use logshap::conformance::Metric;
use logshap::features::FeatureId;
use logshap::pipeline::{
    enumerate_configurations, report, resume, resume_with, run, run_with, shapley_stage, RunConfig, RunControl,
    PARALLELISM_ENV,
};
use logshap::Error;

fn tiny() -> RunConfig {
    RunConfig {
        features: vec![FeatureId::Nusa, FeatureId::Tlv],
        values_per_feature: 2,
        k_max: 2,
        miners: vec!["ind".into()],
        metrics: vec![Metric::Fitness, Metric::Size],
        seed: 11,
        generation: logshap::pipeline::GenerationSettings {
            budget: 60,
            epsilon: 0.1,
        },
        ..RunConfig::default()
    }
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

fn without_timing(dir: &Path, name: &str) -> String {
    let text = fs::read_to_string(dir.join(name)).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let t = header.iter().position(|h| h == "exec_time_ms");
    r.records()
        .map(|rec| {
            let mut v: Vec<String> = rec.unwrap().iter().map(String::from).collect();
            if let Some(t) = t {
                v[t].clear();
            }
            v.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn two_feature_study_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    assert_eq!(enumerate_configurations(&cfg).len(), 8);
    let st = run(&cfg, dir.path()).unwrap();
    assert_eq!((st.configurations, st.completed), (8, 8));
    assert!(st.finished);
    assert_eq!(lines(&dir.path().join("generation.csv")), 9);
    assert_eq!(lines(&dir.path().join("measurements.csv")), 9);
    // 4 pair configurations x 2 metrics, 2 players each
    assert_eq!(lines(&dir.path().join("shapley.csv")), 1 + 4 * 2 * 2);
    for f in ["ranking.csv", "correlations.csv", "robustness.csv", "feasibility.csv", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("configurations: 8 enumerated, 8 completed"));
    assert!(summary.contains("Feasible logs by miner"));
}

#[test]
fn rows_follow_enumeration_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    run(&cfg, dir.path()).unwrap();
    let ids: Vec<String> = enumerate_configurations(&cfg).into_iter().map(|c| c.id).collect();
    let text = fs::read_to_string(dir.path().join("generation.csv")).unwrap();
    let got: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(got, ids);
}

#[test]
fn half_done_directory_runs_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let st = run_with(&cfg, dir.path(), &RunControl { stop_after: Some(4) }).unwrap();
    assert_eq!((st.completed, st.finished), (4, false));
    assert_eq!(lines(&dir.path().join("generation.csv")), 5);
    assert!(matches!(report(dir.path()), Err(Error::MissingInputs(_))));

    let st = resume_with(dir.path(), None, &RunControl { stop_after: Some(1) }).unwrap();
    assert_eq!((st.completed, st.processed_now), (5, 1));
    let st = resume(dir.path(), None).unwrap();
    assert_eq!((st.completed, st.processed_now, st.finished), (8, 3, true));

    let fresh = tempfile::tempdir().unwrap();
    run(&cfg, fresh.path()).unwrap();
    for f in ["generation.csv", "features.csv", "measurements.csv", "shapley.csv"] {
        assert_eq!(without_timing(dir.path(), f), without_timing(fresh.path(), f), "{f}");
    }
}

#[test]
fn completed_directory_is_left_alone() {
    let dir = tempfile::tempdir().unwrap();
    run(&tiny(), dir.path()).unwrap();
    let before = fs::read_to_string(dir.path().join("measurements.csv")).unwrap();
    let st = resume(dir.path(), None).unwrap();
    assert_eq!(st.processed_now, 0);
    assert_eq!(fs::read_to_string(dir.path().join("measurements.csv")).unwrap(), before);
}

#[test]
fn snapshot_mismatch_is_refused_with_a_diff() {
    let dir = tempfile::tempdir().unwrap();
    run_with(&tiny(), dir.path(), &RunControl { stop_after: Some(1) }).unwrap();
    let other = RunConfig { seed: 12, ..tiny() };
    let err = resume(dir.path(), Some(&other)).unwrap_err();
    let Error::ConfigMismatch(diff) = &err else { panic!("{err}") };
    assert!(diff.contains("- \"seed\": 11"), "{diff}");
    assert!(diff.contains("+ \"seed\": 12"), "{diff}");
    // parallelism is scheduling only
    let threads = RunConfig { parallelism: Some(3), ..tiny() };
    resume_with(dir.path(), Some(&threads), &RunControl { stop_after: Some(1) }).unwrap();
}

#[test]
fn corrupt_checkpoint_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    run_with(&tiny(), dir.path(), &RunControl { stop_after: Some(2) }).unwrap();
    fs::write(dir.path().join("checkpoint.json"), "{not json").unwrap();
    assert!(matches!(resume(dir.path(), None), Err(Error::Integrity(_))));

    let dir = tempfile::tempdir().unwrap();
    run_with(&tiny(), dir.path(), &RunControl { stop_after: Some(2) }).unwrap();
    fs::write(dir.path().join("generation.csv"), "config_id\n").unwrap();
    assert!(matches!(resume(dir.path(), None), Err(Error::Integrity(_))));

    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(resume(dir.path(), None), Err(Error::MissingInputs(_))));
}

#[test]
fn torn_tail_is_discarded() {
    let dir = tempfile::tempdir().unwrap();
    run_with(&tiny(), dir.path(), &RunControl { stop_after: Some(3) }).unwrap();
    let g = dir.path().join("generation.csv");
    let mut text = fs::read_to_string(&g).unwrap();
    text.push_str("nusa.1,nusa,half a ro");
    fs::write(&g, text).unwrap();
    let st = resume(dir.path(), None).unwrap();
    assert!(st.finished);
    assert_eq!(lines(&g), 9);
}

#[test]
fn zero_complete_games_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    // integer-valued nusa can never hit 2.5 exactly
    let cfg = RunConfig {
        value_grids: BTreeMap::from([(FeatureId::Nusa, vec![2.5]), (FeatureId::Tlv, vec![50.5])]),
        generation: logshap::pipeline::GenerationSettings {
            budget: 3,
            epsilon: 0.0,
        },
        ..tiny()
    };
    let st = run(&cfg, dir.path()).unwrap();
    assert_eq!(st.configurations, 3);
    let shapley = fs::read_to_string(dir.path().join("shapley.csv")).unwrap();
    assert!(shapley.lines().skip(1).all(|l| l.ends_with(",,,false")), "{shapley}");
    let measurements = fs::read_to_string(dir.path().join("measurements.csv")).unwrap();
    assert!(measurements.lines().skip(1).all(|l| l.contains(",generation_failed,")));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("0 complete"), "{summary}");
    assert!(summary.contains("warning: no complete games"));
}

#[test]
fn shapley_and_report_need_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let err = report(dir.path()).unwrap_err();
    assert!(matches!(err, Error::MissingInputs(_)));
    assert!(err.to_string().contains("config.json"), "{err}");
    run(&tiny(), dir.path()).unwrap();
    fs::remove_file(dir.path().join("shapley.csv")).unwrap();
    let err = report(dir.path()).unwrap_err();
    assert!(err.to_string().contains("shapley.csv"), "{err}");
    let rows = shapley_stage(dir.path()).unwrap();
    assert_eq!(rows.len(), 16);
    report(dir.path()).unwrap();
}

#[test]
fn unknown_miner_fails_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        miners: vec!["nope".into()],
        ..tiny()
    };
    assert!(matches!(run(&cfg, dir.path()), Err(Error::Domain(_))));
}

#[test]
fn unwritable_output_fails_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    assert!(run(&tiny(), &file.join("out")).is_err());
    assert!(logshap::pipeline::ensure_writable(&file).is_err());
}

#[test]
fn parallelism_setting_wins_over_environment() {
    std::env::set_var(PARALLELISM_ENV, "3");
    assert_eq!(tiny().worker_count(), 3);
    assert_eq!(RunConfig { parallelism: Some(2), ..tiny() }.worker_count(), 2);
    std::env::remove_var(PARALLELISM_ENV);
    assert!(tiny().worker_count() >= 1);
}

#[test]
fn worker_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&RunConfig { parallelism: Some(1), ..tiny() }, a.path()).unwrap();
    run(&RunConfig { parallelism: Some(4), ..tiny() }, b.path()).unwrap();
    for f in ["generation.csv", "features.csv", "measurements.csv", "shapley.csv", "ranking.csv"] {
        assert_eq!(without_timing(a.path(), f), without_timing(b.path(), f), "{f}");
    }
}
