//! Metrics over recorded trajectories: error energies, the resilient performance
//! bound and a threshold rule for flagging attacked nodes.

mod plot;

use serde::Serialize;

pub use plot::{detector_plot, error_plot, LinePlot, Series};

use crate::error::{Error, Result};
use crate::mat::{spd_inverse, Mat};
use crate::model::Scenario;
use crate::simcore::{Mode, Trajectory};
use crate::synthesis::{node_bias_model, performance_weight, SynthesizedGains};

fn trapezoid(times: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (&t, v) in times.iter().zip(values) {
        if let Some((tp, vp)) = prev {
            acc += 0.5 * (t - tp) * (v + vp);
        }
        prev = Some((t, v));
    }
    acc
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Trapezoidal `∫ 𝐞ᵀP𝐞 dt` over the recorded grid.
pub fn weighted_error_energy(traj: &Trajectory, p: &Mat) -> Result<f64> {
    let dim = traj.nodes() * traj.layout.n;
    if p.shape() != (dim, dim) {
        return Err(Error::dim("performance weight", format!("expected {dim}×{dim}, found {:?}", p.shape())));
    }
    let quad = |k: usize| {
        let e = nalgebra::DVector::from_column_slice(&traj.errors[k]);
        e.dot(&(p * &e))
    };
    Ok(trapezoid(&traj.times, (0..traj.len()).map(quad)))
}

/// Trapezoidal `∫ ‖f_i − u_i‖² dt` for node `i` (0-based).
pub fn tracking_error_energy(traj: &Trajectory, node: usize) -> f64 {
    trapezoid(
        &traj.times,
        (0..traj.len()).map(|k| traj.f(k, node).iter().zip(traj.u(k, node)).map(|(f, u)| (f - u).powi(2)).sum()),
    )
}

/// Terms of the resilient performance inequality evaluated on one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `γ̄² Σ_i ‖x0 − ξ_i‖²_{X̄_i + 2γ²X_i}`.
    pub initial_term: f64,
    /// `γ̄²(1 + 2γ²) Σ_i ∫(‖w‖² + ‖v_i‖² + Σ_j ‖v_ij‖² + ‖v_c,ij‖²)`.
    pub disturbance_term: f64,
    /// `2γ̄²(1 + γ²) Σ_i ∫‖ν_i‖²`, with `ν_i` reconstructed from the known injected `f_i`.
    pub residual_term: f64,
    /// Rounding allowance on the LHS: errors below `ROUNDING_LEVEL·‖x‖` count as zero.
    pub tolerance: f64,
    pub oracle_assisted: bool,
}

/// Relative size of estimation errors indistinguishable from rounding in `x − x̂_i`.
const ROUNDING_LEVEL: f64 = 1e3 * f64::EPSILON;

fn initial_weights(s: &Scenario, gains: &SynthesizedGains) -> Result<(Vec<Mat>, Vec<Mat>)> {
    let n = s.n();
    let inv = |y: &Mat, what: &str| {
        spd_inverse(y).ok_or_else(|| Error::Invalid(format!("{what} Riccati solution at t = 0 is not positive definite")))
    };
    let bar = match &s.weights.x_bar {
        Some(x) => x.clone(),
        None => gains.y_observer.iter().map(|y| inv(y.initial(), "observer")).collect::<Result<_>>()?,
    };
    let det = match &s.weights.x {
        Some(x) => x.clone(),
        None => gains
            .y_detector
            .iter()
            .map(|y| inv(y.initial(), "detector").map(|m| m.view((0, 0), (n, n)).clone_owned()))
            .collect::<Result<_>>()?,
    };
    if bar.len() != s.nodes() || det.len() != s.nodes() {
        return Err(Error::Invalid("initial weights do not cover every node".into()));
    }
    Ok((bar, det))
}

/// Checks `∫𝐞ᵀP𝐞 ≤ RHS` on a resilient run. The residuals `ν_i` come from
/// filtering the recorded attack through the class model, so the check is
/// only available in simulation.
pub fn verify_performance_bound(traj: &Trajectory, s: &Scenario, gains: &SynthesizedGains) -> Result<BoundCheck> {
    if traj.mode != Mode::Resilient {
        return Err(Error::Invalid("the performance bound applies to resilient runs".into()));
    }
    if traj.is_empty() || traj.disturbances.len() != traj.len() {
        return Err(Error::Invalid("trajectory lacks injected-signal records".into()));
    }
    gains.ensure_matches(s)?;
    let (g2, gb2) = (gains.gamma2, gains.bar_gamma2);
    let lhs = weighted_error_energy(traj, &performance_weight(s))?;

    let (x_bar, x_det) = initial_weights(s, gains)?;
    let x0 = nalgebra::DVector::from_column_slice(traj.x(0));
    let mut init = 0.0;
    for i in 0..s.nodes() {
        let d = &x0 - nalgebra::DVector::from_column_slice(traj.xhat(0, i));
        init += d.dot(&((&x_bar[i] + &x_det[i] * (2.0 * g2)) * &d));
    }

    let inp = &traj.inputs;
    let energy = |range: std::ops::Range<usize>| trapezoid(&traj.times, (0..traj.len()).map(|k| sq(&traj.disturbances[k][range.clone()])));
    let w_energy = energy(inp.w.clone());
    let mut dist = 0.0;
    for i in 0..s.nodes() {
        dist += w_energy + energy(inp.v[i].clone());
        for (k, _) in s.graph.in_edges(i) {
            dist += energy(inp.v_comm[k].clone()) + energy(inp.v_ctrl[k].clone());
        }
    }

    let mut nu = 0.0;
    for i in 0..s.nodes() {
        if inp.f[i].is_empty() {
            continue;
        }
        let ups = node_bias_model(s, i)?.upsilon;
        nu += trapezoid(&traj.times, (0..traj.len()).map(|k| sq(&traj.nu(k, i, &ups))));
    }

    let initial_term = gb2 * init;
    let disturbance_term = gb2 * (1.0 + 2.0 * g2) * dist;
    let residual_term = 2.0 * gb2 * (1.0 + g2) * nu;
    let rhs = initial_term + disturbance_term + residual_term;
    let p_norm = performance_weight(s).norm();
    let x_energy = trapezoid(&traj.times, (0..traj.len()).map(|k| sq(traj.x(k))));
    let tolerance = ROUNDING_LEVEL.powi(2) * p_norm * s.nodes() as f64 * x_energy;
    Ok(BoundCheck {
        lhs,
        rhs,
        satisfied: lhs <= rhs + tolerance,
        initial_term,
        disturbance_term,
        residual_term,
        tolerance,
        oracle_assisted: true,
    })
}

/// Parameters of the sliding-window detection rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionOptions {
    /// Window length in seconds.
    pub window: f64,
    /// A node is flagged when its window RMS exceeds `ratio ×` the baseline RMS.
    pub ratio: f64,
    /// Lower clamp on the baseline RMS.
    pub floor: f64,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        DetectionOptions {
            window: 0.5,
            ratio: 3.0,
            floor: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeDetection {
    pub node: usize,
    pub flagged: bool,
    /// End time of the first window above threshold.
    pub onset: Option<f64>,
    pub peak_rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detection {
    pub options: DetectionOptions,
    /// Smallest cross-node window RMS before clamping.
    pub quiet_rms: f64,
    pub threshold: f64,
    /// Flagged nodes, 1-based.
    pub flagged: Vec<usize>,
    pub nodes: Vec<NodeDetection>,
}

/// Window RMS of `signal(k)` ending at each sample with a full window behind it.
fn window_rms(times: &[f64], window: f64, mut signal: impl FnMut(usize) -> f64) -> Vec<(f64, f64)> {
    let mut prefix = Vec::with_capacity(times.len() + 1);
    prefix.push(0.0);
    for k in 0..times.len() {
        let last = *prefix.last().expect("non-empty");
        prefix.push(last + signal(k));
    }
    let mut out = Vec::new();
    let mut start = 0;
    let t0 = times.first().copied().unwrap_or(0.0);
    let tol = 1e-9 * window;
    for (k, &t) in times.iter().enumerate() {
        if t - t0 < window - tol {
            continue;
        }
        while times[start] < t - window - tol {
            start += 1;
        }
        let count = (k + 1 - start) as f64;
        out.push((t, ((prefix[k + 1] - prefix[start]) / count).sqrt()));
    }
    out
}

/// Flags nodes whose detector output stands out from the quietest cross-node window.
pub fn detect_attacked_nodes(traj: &Trajectory, opts: &DetectionOptions) -> Result<Detection> {
    let horizon = traj.times.last().copied().unwrap_or(0.0) - traj.times.first().copied().unwrap_or(0.0);
    if !(opts.window > 0.0 && opts.window < horizon) {
        return Err(Error::Invalid(format!("detection window {} must lie in (0, {horizon})", opts.window)));
    }
    let nodes = traj.nodes();
    let per_node: Vec<Vec<(f64, f64)>> = (0..nodes)
        .map(|i| window_rms(&traj.times, opts.window, |k| sq(traj.u(k, i))))
        .collect();
    let quiet = if nodes == 0 {
        0.0
    } else {
        window_rms(&traj.times, opts.window, |k| (0..nodes).map(|i| sq(traj.u(k, i))).sum::<f64>() / nodes as f64)
            .into_iter()
            .map(|(_, r)| r)
            .fold(f64::INFINITY, f64::min)
    };
    let threshold = opts.ratio * quiet.max(opts.floor);
    let nodes_out: Vec<NodeDetection> = per_node
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let onset = w.iter().find(|(_, r)| *r > threshold).map(|(t, _)| *t);
            NodeDetection {
                node: i + 1,
                flagged: onset.is_some(),
                onset,
                peak_rms: w.iter().map(|(_, r)| *r).fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(Detection {
        options: *opts,
        quiet_rms: quiet,
        threshold,
        flagged: nodes_out.iter().filter(|n| n.flagged).map(|n| n.node).collect(),
        nodes: nodes_out,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub node: usize,
    pub max_error_norm: f64,
    pub final_error_norm: f64,
    pub max_abs_u: f64,
    pub tracking_energy: f64,
}

/// Summary of one run, written as `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub mode: Mode,
    pub scenario_hash: String,
    pub seed: u64,
    pub step: f64,
    pub samples: usize,
    pub state_dimension: usize,
    pub weighted_error_energy: f64,
    pub nodes: Vec<NodeMetrics>,
    /// Resilient runs only.
    pub bound: Option<BoundCheck>,
    /// Resilient runs only.
    pub detection: Option<Detection>,
    pub warnings: Vec<String>,
}

impl PerformanceReport {
    pub fn to_json(&self) -> String {
        crate::json::to_pretty(self)
    }
}

/// Computes every metric of a run.
pub fn performance_report(
    traj: &Trajectory,
    s: &Scenario,
    gains: &SynthesizedGains,
    detection: &DetectionOptions,
) -> Result<PerformanceReport> {
    let last = traj.len().saturating_sub(1);
    let nodes = (0..traj.nodes())
        .map(|i| NodeMetrics {
            node: i + 1,
            max_error_norm: traj.max_error_norm(i, f64::NEG_INFINITY, f64::INFINITY),
            final_error_norm: sq(traj.e(last, i)).sqrt(),
            max_abs_u: (0..traj.len())
                .flat_map(|k| traj.u(k, i).iter().map(|v| v.abs()))
                .fold(0.0, f64::max),
            tracking_energy: tracking_error_energy(traj, i),
        })
        .collect();
    let resilient = traj.mode == Mode::Resilient;
    Ok(PerformanceReport {
        mode: traj.mode,
        scenario_hash: s.content_hash(),
        seed: traj.seed,
        step: traj.step,
        samples: traj.len(),
        state_dimension: traj.layout.dim,
        weighted_error_energy: weighted_error_energy(traj, &performance_weight(s))?,
        nodes,
        bound: resilient.then(|| verify_performance_bound(traj, s, gains)).transpose()?,
        detection: resilient.then(|| detect_attacked_nodes(traj, detection)).transpose()?,
        warnings: traj.warnings.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_on_linear_data() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        assert!((trapezoid(&t, t.iter().map(|x| 3.0 * x + 1.0)) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn window_rms_of_constant_and_step() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let c = window_rms(&t, 0.5, |_| 4.0);
        assert_eq!(c.first().unwrap().0, 0.5);
        assert!(c.iter().all(|(_, r)| (r - 2.0).abs() < 1e-12));
        // step at 0.7: first full window with a positive sample ends at 0.7
        let s = window_rms(&t, 0.5, |k| if t[k] >= 0.7 - 1e-12 { 1.0 } else { 0.0 });
        let first = s.iter().find(|(_, r)| *r > 0.0).unwrap().0;
        assert!((first - 0.7).abs() < 1e-12);
    }
}
