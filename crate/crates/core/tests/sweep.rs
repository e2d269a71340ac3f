use edca_core::metrics::{Scope, CSV_HEADER};
use edca_core::policy::{AccessCategory, PolicyKind};
use edca_core::runner::{sweep, ScenarioSpec, StationGroup, SUMMARY_HEADER};

fn small_grid() -> Vec<ScenarioSpec> {
    vec![
        ScenarioSpec::new(
            "4BE",
            vec![StationGroup::saturated(AccessCategory::Be, 4).unwrap()],
        )
        .with_duration(2.0, 0.5),
        ScenarioSpec::new(
            "4BE+2VO",
            vec![
                StationGroup::saturated(AccessCategory::Be, 4).unwrap(),
                StationGroup::saturated(AccessCategory::Vo, 2).unwrap(),
            ],
        )
        .with_duration(2.0, 0.5),
    ]
}

#[test]
fn one_row_per_run_and_scope() {
    let report = sweep(&small_grid(), &PolicyKind::ALL, &[1, 2, 3]).unwrap();
    assert!(report.is_success());
    assert_eq!(report.ledgers.len(), 12);

    let mut csv = Vec::new();
    report.write_results_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    // 6 runs with two scopes plus 6 runs with three.
    assert_eq!(lines.count(), 6 * 2 + 6 * 3);

    assert_eq!(report.summary.len(), 2 + 3);
    let mut summary = Vec::new();
    report.write_summary_csv(&mut summary).unwrap();
    let summary = String::from_utf8(summary).unwrap();
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    assert_eq!(summary.lines().count(), 1 + 5);
}

#[test]
fn outputs_do_not_depend_on_scheduling() {
    let grid = small_grid();
    let render = || {
        let report = sweep(&grid, &PolicyKind::ALL, &[7, 8]).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        report.write_results_csv(&mut a).unwrap();
        report.write_summary_csv(&mut b).unwrap();
        (a, b, report.metadata_json())
    };
    assert_eq!(render(), render());
}

#[test]
fn failing_cell_does_not_stop_the_rest() {
    let mut grid = small_grid();
    grid.push(
        ScenarioSpec::new(
            "broken",
            vec![StationGroup::saturated(AccessCategory::Be, 1).unwrap()],
        )
        .with_duration(1.0, 2.0),
    );
    let report = sweep(&grid, &[PolicyKind::Edca], &[1]).unwrap();
    assert!(!report.is_success());
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].scenario_id, "broken");
    assert_eq!(report.ledgers.len(), 2);
    assert!(report.metadata_json().contains("\"broken\""));
}

#[test]
fn summary_deltas_are_adaptive_minus_static() {
    let report = sweep(&small_grid(), &PolicyKind::ALL, &[1, 2]).unwrap();
    for row in &report.summary {
        let d = row.throughput_delta().unwrap();
        let e = row.edca.normalized_throughput.unwrap();
        let q = row.qcaaae.normalized_throughput.unwrap();
        assert!((d - (q - e)).abs() < 1e-12);
    }
    let global = report
        .summary
        .iter()
        .find(|r| r.scenario_id == "4BE+2VO" && r.scope == Scope::Global)
        .unwrap();
    assert!(global.delay_delta().is_some());
}

#[test]
fn empty_sweep_is_rejected() {
    assert!(sweep(&[], &PolicyKind::ALL, &[1]).is_err());
    assert!(sweep(&small_grid(), &PolicyKind::ALL, &[]).is_err());
}

#[test]
fn writes_the_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = sweep(&small_grid(), &PolicyKind::ALL, &[1]).unwrap();
    report.write_dir(dir.path()).unwrap();
    for name in ["results.csv", "summary.csv", "metadata.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["runs"], 4);
    assert_eq!(meta["seeds"], serde_json::json!([1]));
    assert_eq!(meta["scenarios"][0]["duration_s"], 2.0);
}
