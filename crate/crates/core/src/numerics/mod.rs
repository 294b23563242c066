//! Shared numerics: Riccati equations, eigenvalue utilities, polynomials and
//! a fixed-step RK4 integrator.

mod eig;
mod ode;
pub mod poly;
mod riccati;

pub use eig::{balance, eigenvalues, is_stabilizable, spectral_abscissa, spectral_radius, sym_eig_bounds, sym_min_eig};
pub use ode::{check_state, integrate_ode, Grid, OdeTrajectory, Rk4, DIVERGENCE_NORM};
pub use riccati::{
    integrate_dre, integrate_dre_with, solve_are_lti, solve_lyapunov, AreSolution, DreOptions,
    DreSolution, RiccatiProblem, ARE_RESIDUAL_TOL,
};
