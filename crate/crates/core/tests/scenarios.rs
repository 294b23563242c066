//! Scenario documents: the shipped files, validation findings and the
//! time-varying design path.

use std::path::Path;

use rol::attackclass::{AttackSignalSpec, DisturbanceSpec};
use rol::mat::Mat;
use rol::model::{
    builtin_example_scenario, load_scenario, parse_scenario, validate_scenario, Interp, IssueKind, MatrixSchedule,
    NetworkGraph, Severity, TransferFunction,
};
use rol::synthesis::{synthesize, CandidateGraph, SynthesisOptions};
use rol::Error;

fn repo_file(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn shipped_example_matches_the_builtin() {
    let s = load_scenario(repo_file("example6.json")).unwrap();
    assert_eq!(s, builtin_example_scenario());
    assert_eq!(std::fs::read_to_string(repo_file("example6.json")).unwrap(), s.to_json());
    assert!(validate_scenario(&s).errors().next().is_none());
}

#[test]
fn shipped_candidates_are_ring_chords_complete() {
    let text = std::fs::read_to_string(repo_file("candidates.json")).unwrap();
    let c = rol::cli::parse_candidates(&text, "candidates.json").unwrap();
    let ids: Vec<_> = c.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, ["ring", "ring+chords", "complete"]);
    let edges: Vec<_> = c.iter().map(|c| c.graph.edges.len()).collect();
    assert_eq!(edges, [6, 9, 30]);
    assert!(c.iter().all(|c: &CandidateGraph| c.graph.is_weakly_connected()));
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&builtin_example_scenario().to_json()).unwrap();
    v["simulation"]["stepsize"] = 1.0.into();
    match parse_scenario(&v.to_string(), "doc") {
        Err(Error::Parse { what, source }) => {
            assert_eq!(what, "doc");
            assert!(source.to_string().contains("stepsize"));
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn singular_sensor_noise_names_the_node() {
    let mut s = builtin_example_scenario();
    s.sensors[3].d = MatrixSchedule::Constant(Mat::zeros(s.sensors[3].c.nrows(), 1));
    let report = validate_scenario(&s);
    let issue = report.errors().next().expect("an error");
    assert_eq!(issue.kind, IssueKind::SingularNoise { node: 4 });
    assert!(matches!(parse_scenario(&s.to_json(), "doc"), Err(Error::SingularNoise { node: 4 })));
}

#[test]
fn disconnected_graph_is_a_warning() {
    let mut s = builtin_example_scenario();
    let e = s.graph.edges[0].clone();
    s.graph = NetworkGraph::from_pairs(6, &[(0, 1), (1, 0), (2, 3), (4, 5)], &e.w, &e.h, &e.hc);
    let report = validate_scenario(&s);
    assert!(report.errors().next().is_none());
    let w = report.warnings().next().expect("a warning");
    assert_eq!(w.kind, IssueKind::Disconnected);
    assert_eq!(w.severity, Severity::Warning);
}

#[test]
fn dimension_and_grid_errors_are_collected() {
    let mut s = builtin_example_scenario();
    s.plant.b = MatrixSchedule::Constant(Mat::zeros(5, 6));
    s.simulation.step = 0.0;
    s.attack_class.0.pop();
    let report = validate_scenario(&s);
    let fields: Vec<_> = report.errors().map(|i| i.field.as_str()).collect();
    assert!(fields.contains(&"plant.b"), "{fields:?}");
    assert!(fields.contains(&"attack_class"), "{fields:?}");
    assert!(fields.iter().any(|f| f.starts_with("simulation")), "{fields:?}");
}

#[test]
fn improper_attack_class_is_rejected() {
    let mut s = builtin_example_scenario();
    s.attack_class.0[0].as_mut().unwrap().g = TransferFunction::new(&[1.0, 0.0, 0.0], &[1.0, 1.0]);
    assert!(validate_scenario(&s).errors().any(|i| i.field.starts_with("attack_class")));
}

#[test]
fn undecaying_masking_is_not_square_integrable() {
    let mut v: serde_json::Value = serde_json::from_str(&builtin_example_scenario().to_json()).unwrap();
    v["simulation"]["attacks"][0]["masking"] = serde_json::json!([{ "kind": "decaying", "amplitude": 1.0, "decay": 0.0, "omega": 2.0 }]);
    let s: rol::model::Scenario = serde_json::from_value(v).unwrap();
    let report = validate_scenario(&s);
    assert!(report.errors().any(|i| i.kind == IssueKind::NotL2), "{:?}", report.issues);
}

#[test]
fn attack_on_a_missing_node_is_rejected() {
    let mut s = builtin_example_scenario();
    s.simulation.attacks = vec![AttackSignalSpec::step(9, 1.0, 0.0, 1.0)];
    assert!(validate_scenario(&s).errors().next().is_some());
}

#[test]
fn disturbance_specs_serialise_with_their_channel() {
    let s = builtin_example_scenario();
    let specs = rol::simcore::burst_suite(&s, 1.0, 0.0, 1.0);
    let text = serde_json::to_string(&specs).unwrap();
    let back: Vec<DisturbanceSpec> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, specs);
    assert!(text.contains("\"channel\""));
}

#[test]
fn time_varying_design_is_horizon_limited() {
    let mut s = builtin_example_scenario();
    let a0 = s.plant.a.initial().clone();
    let times: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let mats = times.iter().map(|t| &a0 * (1.0 + 0.1 * (1.5 * t).sin())).collect();
    s.plant.a = MatrixSchedule::sampled(times, mats, Interp::Linear).unwrap();
    assert!(!s.is_lti());
    s.simulation.t_end = 1.0;
    s.simulation.step = 1e-4;

    let mut opts = SynthesisOptions::from_scenario(&s);
    opts.gamma2 = Some(0.02);
    opts.bar_gamma2 = Some(0.12);
    opts.ltv_horizon = Some(1.0);
    opts.baseline = false;
    let syn = synthesize(&s, &opts).unwrap();
    assert!(syn.report.certificate.contains("horizon"), "{}", syn.report.certificate);
    assert!(syn.report.closed_loop_abscissa.is_none());
    assert!(matches!(syn.gains.observer[0].l, MatrixSchedule::Sampled { .. }));

    // an unreachable detector level makes the Riccati solution blow up
    opts.gamma2 = Some(1e-12);
    assert!(matches!(synthesize(&s, &opts), Err(Error::Infeasible { .. })));
}
