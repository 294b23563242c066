//! Per-node Riccati feasibility tests at a fixed attenuation level.

use rayon::prelude::*;
use serde::Serialize;

use crate::mat::{block_diag, spd_inverse, Mat};
use crate::model::{Interp, MatrixSchedule};
use crate::numerics::{
    integrate_dre_with, solve_are_lti, spectral_abscissa, spectral_radius, sym_min_eig, DreOptions, RiccatiProblem,
};

/// How boundedness of the Riccati solutions is certified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityOptions {
    /// Constant coefficients: stabilising ARE solution, plus DRE convergence when `X` is given.
    pub lti: bool,
    /// Certification horizon for time-varying problems.
    pub horizon: f64,
    /// DRE step for time-varying problems.
    pub dre_step: f64,
}

/// Outcome for one node.
#[derive(Clone, Debug, Serialize)]
pub struct NodeFeasibility {
    /// 1-based label.
    pub node: usize,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Smallest eigenvalue of `Y` seen.
    pub min_eig: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub are_residual: Option<f64>,
    /// Spectral abscissa of `A − Y(S − R/γ²)` at the steady state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riccati_abscissa: Option<f64>,
    #[serde(skip)]
    pub y: Option<MatrixSchedule>,
}

impl NodeFeasibility {
    fn fail(node: usize, reason: String) -> Self {
        NodeFeasibility {
            node: node + 1,
            feasible: false,
            reason: Some(reason),
            min_eig: f64::NAN,
            are_residual: None,
            riccati_abscissa: None,
            y: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerFeasibility {
    pub layer: String,
    pub gamma2: f64,
    pub feasible: bool,
    pub nodes: Vec<NodeFeasibility>,
}

impl LayerFeasibility {
    /// First failing node, for error messages.
    pub fn first_failure(&self) -> Option<&NodeFeasibility> {
        self.nodes.iter().find(|n| !n.feasible)
    }

    pub fn describe_failure(&self) -> String {
        match self.first_failure() {
            Some(n) => format!("node {}: {}", n.node, n.reason.as_deref().unwrap_or("infeasible")),
            None => "feasible".into(),
        }
    }

    /// Riccati solutions in node order; `None` when infeasible.
    pub fn solutions(&self) -> Option<Vec<MatrixSchedule>> {
        self.nodes.iter().map(|n| n.y.clone()).collect()
    }
}

/// One node's Riccati problem with the optional initial weight `X` (so `Y(0) = X⁻¹`).
#[derive(Clone, Debug)]
pub struct NodeProblem {
    pub node: usize,
    pub problem: RiccatiProblem,
    pub x: Option<Mat>,
}

const PD_FLOOR: f64 = 1e-10;
const DRE_MATCH: f64 = 1e-6;

/// Decides feasibility of one node.
pub fn solve_node(np: &NodeProblem, opts: &FeasibilityOptions) -> NodeFeasibility {
    let node = np.node;
    let mut p = np.problem.clone();
    let y0 = match &np.x {
        Some(x) => match spd_inverse(x) {
            Some(y) => Some(y),
            None => return NodeFeasibility::fail(node, "initial weight X is not positive definite".into()),
        },
        None => None,
    };
    if opts.lti && p.is_constant() {
        let are = match solve_are_lti(&p) {
            Ok(a) => a,
            Err(e) => return NodeFeasibility::fail(node, e.to_string()),
        };
        let min_eig = sym_min_eig(&are.y);
        if !(min_eig > PD_FLOOR) {
            return NodeFeasibility {
                min_eig,
                ..NodeFeasibility::fail(node, format!("stabilising solution not positive definite (λ_min = {min_eig:e})"))
            };
        }
        let mut out = NodeFeasibility {
            node: node + 1,
            feasible: true,
            reason: None,
            min_eig,
            are_residual: Some(are.residual),
            riccati_abscissa: Some(are.closed_loop_abscissa),
            y: Some(MatrixSchedule::Constant(are.y.clone())),
        };
        let Some(y0) = y0 else { return out };
        // the DRE started at X⁻¹ must settle on the stabilising solution
        let (a, _, m) = p.coefficients(0.0);
        let rho = spectral_radius(&(&a - &are.y * &m)).max(spectral_radius(&(&a - &y0 * &m)));
        let step = (0.5 / rho).clamp(1e-6, 1e-2);
        let horizon = (20.0 / are.closed_loop_abscissa.abs()).clamp(1.0, 500.0);
        p.y0 = y0;
        let sol = integrate_dre_with(&p, horizon, step, &DreOptions::default());
        let gap = (sol.last() - &are.y).norm() / (1.0 + are.y.norm());
        out.min_eig = out.min_eig.min(sol.min_eig);
        if !sol.bounded || !(gap <= DRE_MATCH) {
            out.feasible = false;
            out.reason = Some(if sol.bounded {
                format!("DRE from X⁻¹ does not reach the stabilising solution (gap {gap:e})")
            } else {
                format!("DRE from X⁻¹ unbounded (t = {:?})", sol.divergence_time)
            });
            out.y = None;
            return out;
        }
        out.y = Some(
            MatrixSchedule::sampled(sol.times, sol.ys, Interp::Hold).expect("DRE samples are increasing"),
        );
        return out;
    }

    // time-varying: certify on the horizon only
    p.y0 = match y0 {
        Some(y) => y,
        None => {
            let frozen = RiccatiProblem {
                a: p.a.at(0.0).into(),
                b: p.b.at(0.0).into(),
                s: p.s.at(0.0).into(),
                ..p.clone()
            };
            solve_are_lti(&frozen)
                .map(|a| a.y)
                .unwrap_or_else(|_| Mat::identity(p.dim(), p.dim()))
        }
    };
    let sol = integrate_dre_with(&p, opts.horizon, opts.dre_step, &DreOptions::default());
    if !sol.bounded {
        let why = match sol.divergence_time {
            Some(t) => format!("Riccati solution unbounded at t = {t:.4}"),
            None => format!("Riccati solution lost positive definiteness (λ_min = {:e})", sol.min_eig),
        };
        return NodeFeasibility {
            min_eig: sol.min_eig,
            ..NodeFeasibility::fail(node, why)
        };
    }
    let last = sol.last().clone();
    let (a, _, m) = p.coefficients(opts.horizon);
    NodeFeasibility {
        node: node + 1,
        feasible: true,
        reason: None,
        min_eig: sol.min_eig,
        are_residual: None,
        riccati_abscissa: Some(spectral_abscissa(&(&a - &last * &m))),
        y: Some(MatrixSchedule::sampled(sol.times, sol.ys, Interp::Hold).expect("DRE samples are increasing")),
    }
}

/// Solves every node in parallel.
pub fn check_layer(layer: &str, gamma2: f64, problems: &[NodeProblem], opts: &FeasibilityOptions) -> LayerFeasibility {
    let nodes: Vec<NodeFeasibility> = if gamma2 > 0.0 && gamma2.is_finite() {
        problems.par_iter().map(|np| solve_node(np, opts)).collect()
    } else {
        problems
            .iter()
            .map(|np| NodeFeasibility::fail(np.node, format!("attenuation level {gamma2:e} is not positive and finite")))
            .collect()
    };
    LayerFeasibility {
        layer: layer.to_string(),
        gamma2,
        feasible: nodes.iter().all(|n| n.feasible),
        nodes,
    }
}

/// Information weight of one node: `Cᵀ(DDᵀ)⁻¹C` (padded to `dim`) plus the constant network share.
pub fn node_information(local: &MatrixSchedule, network: &Mat, dim: usize) -> MatrixSchedule {
    local.map(|m| {
        let pad = dim - m.nrows();
        block_diag(&[m, &Mat::zeros(pad, pad)]) + network
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn lti() -> FeasibilityOptions {
        FeasibilityOptions {
            lti: true,
            horizon: 10.0,
            dre_step: 1e-3,
        }
    }

    // Scalar H∞ filter a = 1, b = 1, s = 1: the ARE 2y + 1 − y²(1 − r/γ²) = 0 has a positive
    // stabilising root iff r/γ² < 1, namely y = (1 + √(2 − r/γ²)) / (1 − r/γ²).
    fn scalar_node(r_over_g: f64, x: Option<f64>) -> NodeProblem {
        NodeProblem {
            node: 0,
            problem: RiccatiProblem {
                a: scalar(1.0).into(),
                b: scalar(1.0).into(),
                s: scalar(1.0).into(),
                r_scaled: scalar(r_over_g),
                y0: scalar(1.0),
            },
            x: x.map(scalar),
        }
    }

    #[test]
    fn scalar_filter_existence_matches_quadratic() {
        for q in [0.0, 0.3, 0.9] {
            let out = solve_node(&scalar_node(q, None), &lti());
            assert!(out.feasible);
            let expected = (1.0 + (2.0 - q).sqrt()) / (1.0 - q);
            let y = out.y.unwrap().initial()[(0, 0)];
            assert!((y - expected).abs() < 1e-9 * expected, "{y} vs {expected}");
        }
        assert!(!solve_node(&scalar_node(1.5, None), &lti()).feasible);
    }

    #[test]
    fn dre_from_initial_weight_settles() {
        let out = solve_node(&scalar_node(0.3, Some(0.5)), &lti());
        assert!(out.feasible, "{:?}", out.reason);
        let y = out.y.unwrap();
        assert!(!y.is_constant());
        // y(0) = X⁻¹ = 2, up to the rounding of the SPD inverse
        assert!((y.initial()[(0, 0)] - 2.0).abs() < 4.0 * f64::EPSILON);
    }

    #[test]
    fn time_varying_path_certifies_on_horizon() {
        let opts = FeasibilityOptions {
            lti: false,
            horizon: 2.0,
            dre_step: 1e-3,
        };
        let out = solve_node(&scalar_node(0.3, None), &opts);
        assert!(out.feasible);
        let blow = solve_node(&scalar_node(3.0, Some(1.0)), &opts);
        assert!(!blow.feasible);
    }

    #[test]
    fn non_positive_level_is_infeasible() {
        let l = check_layer("detector", 0.0, &[scalar_node(0.0, None)], &lti());
        assert!(!l.feasible);
        assert!(l.describe_failure().starts_with("node 1"));
    }
}
