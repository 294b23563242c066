//! Time-varying plant: A(t) is sampled every 0.25 s and interpolated
//! linearly. The gains come from differential Riccati equations on a finite
//! horizon, so the certificate covers that horizon only.
//!
//! cargo run --release --example time_varying

use rol::analysis::{detect_attacked_nodes, DetectionOptions};
use rol::attackclass::AttackSignalSpec;
use rol::model::{builtin_example_scenario, Interp, MatrixSchedule};
use rol::simcore::{assemble_closed_loop, run_simulation, Mode};
use rol::synthesis::{synthesize, SynthesisOptions};

fn main() -> rol::Result<()> {
    let mut s = builtin_example_scenario();
    let a0 = s.plant.a.initial().clone();
    let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    let mats = times.iter().map(|t| &a0 * (1.0 + 0.1 * (1.5 * t).sin())).collect();
    s.plant.a = MatrixSchedule::sampled(times, mats, Interp::Linear).map_err(rol::Error::Invalid)?;
    s.simulation.t_end = 5.0;
    s.simulation.step = 1e-4;
    s.simulation.record_every = 10;
    s.simulation.ltv_horizon = Some(5.0);
    s.simulation.attacks = vec![AttackSignalSpec::step(2, 5.0, 2.0, 4.0)];

    let mut opts = SynthesisOptions::from_scenario(&s);
    opts.gamma2 = Some(0.02);
    opts.bar_gamma2 = Some(0.12);
    opts.baseline = false;
    let syn = synthesize(&s, &opts)?;
    println!("certificate: {}", syn.report.certificate);

    let sys = assemble_closed_loop(&s, &syn.gains, Mode::Resilient)?;
    println!("coefficient pieces: {}", sys.pieces.len());
    let traj = run_simulation(&sys, &s.simulation)?;
    let k = traj.window(3.5, 3.5).next().expect("sample at 3.5 s");
    println!("u_2(3.5) = {:.4}, max ‖e_i‖ on [3, 3.9] = {:.3e}", traj.u(k, 1)[0], (0..s.nodes()).map(|i| traj.max_error_norm(i, 3.0, 3.9)).fold(0.0, f64::max));
    let det = detect_attacked_nodes(&traj, &DetectionOptions::default())?;
    println!("flagged nodes: {:?}", det.flagged);
    Ok(())
}
