//! Checks the resilient performance inequality on seeded multisine
//! disturbance bursts (no attack) for several seeds.
//!
//! cargo run --release --example performance_bound

use rol::analysis::{detect_attacked_nodes, verify_performance_bound, DetectionOptions};
use rol::model::builtin_example_scenario;
use rol::simcore::{assemble_closed_loop, burst_suite, run_simulation, Mode};
use rol::synthesis::{synthesize, SynthesisOptions};

fn main() -> rol::Result<()> {
    let mut s = builtin_example_scenario();
    let syn = synthesize(&s, &SynthesisOptions::from_scenario(&s))?;
    s.simulation.attacks.clear();
    s.simulation.disturbances = burst_suite(&s, 1.0, 0.5, 3.0);
    let sys = assemble_closed_loop(&s, &syn.gains, Mode::Resilient)?;
    for seed in 1..=3 {
        s.simulation.seed = seed;
        let traj = run_simulation(&sys, &s.simulation)?;
        let b = verify_performance_bound(&traj, &s, &syn.gains)?;
        let flagged = detect_attacked_nodes(&traj, &DetectionOptions::default())?.flagged;
        println!(
            "seed {seed}: ∫eᵀPe = {:.4e}, bound = {:.4e} (disturbance part {:.4e}), satisfied {}, flagged {flagged:?}",
            b.lhs, b.rhs, b.disturbance_term, b.satisfied
        );
    }
    Ok(())
}
