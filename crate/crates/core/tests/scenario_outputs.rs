use std::fs;

use crowdprice_core::bonus::{BonusPolicy, PopulationSpec};
use crowdprice_core::scenario::{emit_plot_data, run_scenario, PopulationSource, Scenario, PLOT_FILES};
use crowdprice_core::worker::decide;
use crowdprice_core::Regime;

fn reference() -> Scenario {
    Scenario::reference(1)
}

#[test]
fn reruns_are_byte_identical() {
    let a = run_scenario(&reference()).unwrap();
    let b = run_scenario(&reference()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());

    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let wa = emit_plot_data(&a, da.path()).unwrap();
    emit_plot_data(&b, db.path()).unwrap();
    assert_eq!(wa.len(), 6);
    for name in PLOT_FILES.iter().chain(["result.json"].iter()) {
        let x = fs::read(da.path().join(name)).unwrap();
        let y = fs::read(db.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(da.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([1]));
    assert!(manifest["wall_time_secs"].as_f64().unwrap() >= 0.0);
}

#[test]
fn csv_shapes() {
    let r = run_scenario(&reference()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_plot_data(&r, dir.path()).unwrap();
    let lines = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap().lines().count();
    assert_eq!(lines("cost_quality.csv"), 1 + 12 * 15);
    assert_eq!(lines("acceptance.csv"), 1 + 12 * 15);
    assert_eq!(lines("pricing.csv"), 13);
    assert_eq!(lines("utility.csv"), 13);
}

#[test]
fn reference_sweep_invariants() {
    let r = run_scenario(&reference()).unwrap();
    assert_eq!(r.points.len(), 12);
    for p in &r.points {
        assert!(p.pp.utility_value + 1e-9 >= p.cp.utility_value);
        assert!(p.cp.utility_value + 1e-9 >= p.cp_no_bonus.utility_value);
        let redo: Vec<bool> = p.workers.iter().map(|w| decide(w, &p.cp.policy)).collect();
        assert_eq!(redo, p.cp.accepted);
        if p.regime == Regime::EffortUnresponsive {
            assert_eq!(p.cp.policy.base, 0.0, "{}", p.label);
        }
    }
}

#[test]
fn file_population() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("abilities.csv");
    fs::write(&csv, "id,ability,cost\n1,0.6,0.2\n2,0.7,0.4\n3,0.8,0.7\n4,0.9,0.9\n").unwrap();
    let cfg = dir.path().join("scenario.json");
    fs::write(
        &cfg,
        r#"{"population": {"source": "file", "path": "abilities.csv"},
            "utility": {"kind": "additive"},
            "sweep": [{"kind": "threshold", "m": 3, "M": 5}, {"kind": "linear", "M": 5}],
            "budget": 1.0}"#,
    )
    .unwrap();
    let s = Scenario::from_json_file(&cfg).unwrap();
    assert!(matches!(&s.population, PopulationSource::File { path } if path == &csv));
    let r = run_scenario(&s).unwrap();
    assert!(r.seeds.is_empty());
    assert_eq!(r.points[1].workers[0].quality, 0.6);
}

#[test]
fn oversized_exact_request_is_a_size_error() {
    let mut s = reference();
    s.population = PopulationSource::Generator(PopulationSpec::new(30, 1));
    s.sweep = vec![BonusPolicy::Linear { total: 25 }];
    s.solvers.pp = crowdprice_core::scenario::PpSolver::Exact;
    assert!(matches!(run_scenario(&s), Err(crowdprice_core::Error::Size { .. })));
}
