//! Closed-loop simulation behaviour on the six-node example, at a coarser step
//! than the reference runs to keep the suite quick.

use std::sync::OnceLock;

use rol::analysis::{detect_attacked_nodes, tracking_error_energy, verify_performance_bound, weighted_error_energy, DetectionOptions};
use rol::attackclass::AttackSignalSpec;
use rol::mat::Mat;
use rol::model::{builtin_example_scenario, Scenario};
use rol::simcore::{assemble_closed_loop, run_baseline, run_simulation, Mode, Trajectory};
use rol::synthesis::{performance_weight, synthesize, Synthesis, SynthesisOptions};
use rol::Error;

fn example() -> &'static (Scenario, Synthesis) {
    static CELL: OnceLock<(Scenario, Synthesis)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut s = builtin_example_scenario();
        s.simulation.step = 1e-4;
        s.simulation.record_every = 10;
        let syn = synthesize(&s, &SynthesisOptions::from_scenario(&s)).expect("example is feasible");
        (s, syn)
    })
}

fn quiet(t_end: f64) -> Scenario {
    let mut s = example().0.clone();
    s.simulation.t_end = t_end;
    s.simulation.attacks.clear();
    s
}

fn run(s: &Scenario) -> Trajectory {
    let sys = assemble_closed_loop(s, &example().1.gains, Mode::Resilient).expect("gains match");
    run_simulation(&sys, &s.simulation).expect("stable run")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn exact_initialisation_without_inputs_keeps_zero_error() {
    let traj = run(&quiet(2.0));
    let scale = (0..traj.len()).map(|k| norm(traj.x(k))).fold(0.0, f64::max);
    for k in 0..traj.len() {
        for i in 0..traj.nodes() {
            assert!(norm(traj.e(k, i)) <= 1e-12 * scale, "t = {}, node {}", traj.times[k], i + 1);
            assert!(norm(traj.u(k, i)) <= 1e-12 * scale);
        }
    }
    // rounding-level errors sit inside the allowance of an otherwise zero bound
    let b = verify_performance_bound(&traj, &quiet(2.0), &example().1.gains).unwrap();
    assert_eq!(b.rhs, 0.0);
    assert!(b.satisfied && b.tolerance < 1e-20, "{b:?}");
}

#[test]
fn offset_estimates_decay_at_the_certified_rate() {
    let mut s = quiet(6.0);
    let nodes = s.nodes();
    s.simulation.xi = Some((0..nodes).map(|i| vec![if i % 2 == 0 { 2.0 } else { 0.0 }; s.n()]).collect());
    let sys = assemble_closed_loop(&s, &example().1.gains, Mode::Resilient).unwrap();
    let alpha = sys.error_abscissa(0.0);
    assert!(alpha < 0.0);
    let traj = run_simulation(&sys, &s.simulation).unwrap();
    let size = |k: usize| (0..nodes).map(|i| norm(traj.e(k, i))).fold(0.0, f64::max);
    let last = traj.len() - 1;
    // transient constant of a few units on top of e^{αt}
    assert!(size(last) <= 20.0 * (alpha * 6.0).exp() * size(0), "{} vs {}", size(last), size(0));
    assert!(size(last) < 1e-3 * size(0));
}

#[test]
fn error_columns_match_state_differences() {
    let mut s = quiet(1.0);
    s.simulation.xi = Some(vec![vec![0.5; s.n()]; s.nodes()]);
    let traj = run(&s);
    for k in (0..traj.len()).step_by(7) {
        for i in 0..traj.nodes() {
            let x = traj.x(k);
            let xh = traj.xhat(k, i);
            for c in 0..x.len() {
                assert!((traj.e(k, i)[c] - (x[c] - xh[c])).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn weighted_energy_grows_with_the_horizon() {
    let mut s = quiet(3.0);
    s.simulation.xi = Some(vec![vec![-1.0; s.n()]; s.nodes()]);
    let traj = run(&s);
    let p = performance_weight(&s);
    let mut prev = 0.0;
    for cut in [0.5, 1.0, 2.0, 3.0] {
        let mut head = traj.clone();
        let keep = head.times.partition_point(|&t| t <= cut + 1e-9);
        head.times.truncate(keep);
        head.states.truncate(keep);
        head.errors.truncate(keep);
        head.outputs.truncate(keep);
        head.disturbances.truncate(keep);
        head.innovations.truncate(keep);
        let energy = weighted_error_energy(&head, &p).unwrap();
        assert!(energy >= prev, "energy fell from {prev} to {energy} at {cut}");
        prev = energy;
    }
    assert!(prev > 0.0);
}

fn two_attacks() -> &'static Trajectory {
    static CELL: OnceLock<Trajectory> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut s = quiet(8.0);
        s.simulation.attacks = vec![AttackSignalSpec::step(1, 5.0, 2.0, 5.0), AttackSignalSpec::step(4, -3.0, 3.0, 6.0)];
        run(&s)
    })
}

#[test]
fn simultaneous_attacks_flag_both_nodes() {
    let det = detect_attacked_nodes(two_attacks(), &DetectionOptions::default()).unwrap();
    assert_eq!(det.flagged, vec![1, 4]);
    let onset1 = det.nodes[0].onset.unwrap();
    let onset4 = det.nodes[3].onset.unwrap();
    assert!((2.0..2.5).contains(&onset1), "{onset1}");
    assert!((3.0..3.5).contains(&onset4), "{onset4}");
}

#[test]
fn detection_is_invariant_to_output_scale() {
    let base = two_attacks();
    let opts = DetectionOptions::default();
    let mut scaled = base.clone();
    // a power of two keeps every product exact
    for row in &mut scaled.outputs {
        for v in row.iter_mut() {
            *v *= 8.0;
        }
    }
    let a = detect_attacked_nodes(base, &opts).unwrap();
    let b = detect_attacked_nodes(&scaled, &DetectionOptions { floor: 8.0 * opts.floor, ..opts }).unwrap();
    assert_eq!(a.flagged, b.flagged);
    for (x, y) in a.nodes.iter().zip(&b.nodes) {
        assert_eq!(x.onset, y.onset);
        assert_eq!(8.0 * x.peak_rms, y.peak_rms);
    }
}

#[test]
fn attacked_node_output_tracks_the_bias() {
    let traj = two_attacks();
    let k = traj.times.partition_point(|&t| t < 4.5);
    assert!((traj.u(k, 0)[0] - 5.0).abs() < 0.1);
    assert!((traj.u(k, 3)[0] + 3.0).abs() < 0.1);
    assert!(traj.u(k, 2)[0].abs() < 0.05);

    // the mismatch energy sits in the switching transients
    let total = tracking_error_energy(traj, 0);
    let mut steady = traj.clone();
    for row in &mut steady.outputs {
        row.iter_mut().for_each(|v| *v = 0.0);
    }
    assert!(total > 0.0 && total < 0.05 * tracking_error_energy(&steady, 0), "{total}");
}

#[test]
fn runs_are_reproducible() {
    let mut s = quiet(1.0);
    s.simulation.disturbances = rol::simcore::burst_suite(&s, 1.0, 0.1, 0.8);
    s.simulation.seed = 42;
    let a = run(&s);
    let b = run(&s);
    assert_eq!(a.states, b.states);
    s.simulation.seed = 43;
    let c = run(&s);
    assert_ne!(a.states, c.states);
}

#[test]
fn csv_state_columns_follow_the_mode() {
    let s = quiet(0.05);
    let count = |t: &Trajectory, prefix: &str| {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap().to_string();
        assert_eq!(text.lines().count(), t.len() + 1);
        header.split(',').filter(|c| prefix.split('|').any(|p| c.starts_with(p))).count()
    };
    let resilient = run(&s);
    let baseline = run_baseline(&s, &example().1.gains, &s.simulation).unwrap();
    assert_eq!(count(&resilient, "x[|xhat|ehat|epshat"), 90);
    assert_eq!(count(&baseline, "x[|xhat|ehat|epshat"), 42);
    assert_eq!(resilient.layout.dim, 90);
    assert_eq!(baseline.layout.dim, 42);
}

#[test]
fn baseline_and_resilient_agree_on_the_plant_state() {
    let s = quiet(1.0);
    let r = run(&s);
    let b = run_baseline(&s, &example().1.gains, &s.simulation).unwrap();
    for k in 0..r.len() {
        assert_eq!(r.x(k), b.x(k));
    }
}

#[test]
fn oversized_step_is_reported_as_divergence() {
    let mut s = quiet(50.0);
    s.simulation.step = 0.05;
    s.simulation.record_every = 1;
    let sys = assemble_closed_loop(&s, &example().1.gains, Mode::Resilient).unwrap();
    assert!(s.simulation.step > sys.stable_step_estimate(0.0));
    match run_simulation(&sys, &s.simulation) {
        Err(Error::Divergence { time, .. }) => assert!(time > 0.0 && time <= 50.0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn step_above_the_stability_estimate_warns() {
    let mut s = quiet(0.1);
    let sys = assemble_closed_loop(&s, &example().1.gains, Mode::Resilient).unwrap();
    s.simulation.step = 1.2 * sys.stable_step_estimate(0.0);
    s.simulation.record_every = 1;
    let traj = run_simulation(&sys, &s.simulation).unwrap();
    assert!(traj.warnings.iter().any(|w| w.contains("step")), "{:?}", traj.warnings);
}

#[test]
fn gains_for_another_graph_are_rejected() {
    let (s, syn) = example();
    let mut other = s.clone();
    other.graph.edges.pop();
    assert!(matches!(assemble_closed_loop(&other, &syn.gains, Mode::Resilient), Err(Error::Invalid(_))));
}

#[test]
fn trusted_node_has_no_detector_states() {
    let mut s = quiet(2.0);
    s.attack_class.0[0] = None;
    let syn = synthesize(&s, &SynthesisOptions::from_scenario(&s)).unwrap();
    let sys = assemble_closed_loop(&s, &syn.gains, Mode::Resilient).unwrap();
    assert!(sys.layout.eps(0).is_empty());
    assert!(sys.inputs.f[0].is_empty());
    assert!(sys.layout.dim < 90);
    let traj = run_simulation(&sys, &s.simulation).unwrap();
    assert!(traj.u(0, 0).is_empty());

    s.simulation.attacks = vec![AttackSignalSpec::step(1, 1.0, 0.5, 1.0)];
    assert!(run_simulation(&sys, &s.simulation).is_err());
}

#[test]
fn zero_weight_matrix_gives_zero_energy() {
    let traj = two_attacks();
    let n = traj.layout.n;
    let zero = Mat::zeros(n * traj.nodes(), n * traj.nodes());
    assert_eq!(weighted_error_energy(traj, &zero).unwrap(), 0.0);
}
