//! Solves a scalar filtering Riccati equation three ways: the closed form, the
//! algebraic solver and the differential equation integrated to steady state.
//!
//! cargo run --example riccati_oracles

use rol::mat::Mat;
use rol::numerics::{integrate_dre, solve_are_lti, RiccatiProblem};

fn main() -> rol::Result<()> {
    // ẏ = 2ay + b² − y²(s − r/γ²), scalar case a = b = s = 1
    for q in [0.0, 0.5, 0.9] {
        let p = RiccatiProblem {
            a: Mat::from_element(1, 1, 1.0).into(),
            b: Mat::from_element(1, 1, 1.0).into(),
            s: Mat::from_element(1, 1, 1.0).into(),
            r_scaled: Mat::from_element(1, 1, q),
            y0: Mat::from_element(1, 1, 1.0),
        };
        let closed = (1.0 + (2.0 - q as f64).sqrt()) / (1.0 - q);
        let are = solve_are_lti(&p)?.y[(0, 0)];
        let dre = integrate_dre(&p, 20.0, 1e-3).last()[(0, 0)];
        println!("r/γ² = {q}: closed form {closed:.12}, ARE {are:.12}, DRE(20) {dre:.12}");
    }
    Ok(())
}
