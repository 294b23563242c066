//! Closed-form choice of the Riccati weights `R_i`, `Ř_i`, `R̄_i`.

use serde::Serialize;

use crate::error::Result;
use crate::mat::{block_diag, Mat};
use crate::model::{CheckWeightRule, SensorNode, WeightRule};
use crate::netmatrix::CouplingMatrices;
use crate::numerics::{sym_eig_bounds, sym_min_eig};

/// γ-independent part of the weight rule for one layer.
#[derive(Clone, Debug, Serialize)]
pub struct WeightShaping {
    /// Shaping matrices `T_i` (zero under the isotropic rule).
    #[serde(skip)]
    pub t: Vec<Mat>,
    pub theta: f64,
    pub beta: f64,
    /// `λ_min(blockdiag(T) + penalty)`.
    pub lambda_min: f64,
}

impl WeightShaping {
    fn block(&self) -> Mat {
        block_diag(&self.t.iter().collect::<Vec<_>>())
    }

    /// Precomputes the shaping for `coupling` under `rule`.
    pub fn new(coupling: &CouplingMatrices, sensors: &[SensorNode], rule: WeightRule) -> Result<Self> {
        let n = coupling.n;
        let nodes = coupling.nodes;
        let (beta, slack) = match rule {
            WeightRule::Isotropic => {
                let t = vec![Mat::zeros(n, n); nodes];
                let lambda_min = if nodes * n == 0 { 0.0 } else { coupling.penalty_bounds().0 };
                return Ok(WeightShaping {
                    t,
                    theta: 0.0,
                    beta: 0.0,
                    lambda_min,
                });
            }
            WeightRule::Shaped { beta, theta_slack } => (beta, theta_slack),
        };
        let net: Vec<Mat> = (0..nodes).map(|i| coupling.network_information(i)).collect();
        let local: Vec<Mat> = sensors
            .iter()
            .map(|s| s.information().map(|m| m.initial().clone()))
            .collect::<Result<_>>()?;
        let shaped = |theta: f64| -> Vec<Mat> {
            (0..nodes).map(|i| &net[i] * theta + &local[i] * beta).collect()
        };
        let lmin = |theta: f64| {
            let t = shaped(theta);
            sym_min_eig(&(block_diag(&t.iter().collect::<Vec<_>>()) + &coupling.penalty))
        };
        let theta = if nodes * n == 0 || lmin(0.0) >= 0.0 {
            0.0
        } else if lmin(1.0) < 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if lmin(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi * (1.0 + slack)
        };
        let t = shaped(theta);
        let shaping = WeightShaping {
            lambda_min: 0.0,
            t,
            theta,
            beta,
        };
        let lambda_min = if nodes * n == 0 {
            0.0
        } else {
            sym_min_eig(&(shaping.block() + &coupling.penalty))
        };
        Ok(WeightShaping { lambda_min, ..shaping })
    }
}

/// Weights for one attenuation pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectedWeights {
    pub r: Vec<Mat>,
    pub r_check: Vec<Mat>,
    pub r_bar: Vec<Mat>,
}

/// Detector weights `R_i = γ²T_i + (max(0, −γ²λ_min(T + penalty)) + α)I`.
pub fn detector_weights(shaping: &WeightShaping, gamma2: f64, alpha: f64) -> Vec<Mat> {
    let c = (-gamma2 * shaping.lambda_min).max(0.0) + alpha;
    shaping
        .t
        .iter()
        .map(|t| t * gamma2 + Mat::identity(t.nrows(), t.ncols()) * c)
        .collect()
}

/// Bias-state weights `Ř_i`.
pub fn check_weights(upsilons: &[Mat], alpha: f64, rule: CheckWeightRule) -> Vec<Mat> {
    upsilons
        .iter()
        .map(|u| {
            let k = u.ncols();
            let gram = u.transpose() * u;
            match rule {
                CheckWeightRule::RankAware => gram + Mat::identity(k, k) * alpha,
                CheckWeightRule::Isotropic => {
                    let top = if k == 0 { 0.0 } else { sym_eig_bounds(&gram).map(|b| b.1).unwrap_or(0.0) };
                    Mat::identity(k, k) * (top + alpha)
                }
            }
        })
        .collect()
}

/// Observer weights `R̄_i = γ̄²T̄_i + (max(0, λ_max(P − γ̄²(T̄ + penalty))) + α)I`.
pub fn observer_weights(
    shaping: &WeightShaping,
    coupling: &CouplingMatrices,
    p: &Mat,
    bar_gamma2: f64,
    alpha: f64,
) -> Vec<Mat> {
    let dim = coupling.nodes * coupling.n;
    let top = if dim == 0 {
        0.0
    } else {
        let m = p - (shaping.block() + &coupling.penalty) * bar_gamma2;
        -sym_min_eig(&(-m))
    };
    let c = top.max(0.0) + alpha;
    shaping
        .t
        .iter()
        .map(|t| t * bar_gamma2 + Mat::identity(t.nrows(), t.ncols()) * c)
        .collect()
}

/// All three weight families at `(γ², γ̄²)`.
#[allow(clippy::too_many_arguments)]
pub fn select_weights(
    det_shaping: &WeightShaping,
    obs_shaping: &WeightShaping,
    obs_coupling: &CouplingMatrices,
    upsilons: &[Mat],
    p: &Mat,
    gamma2: f64,
    bar_gamma2: f64,
    alpha: f64,
    check_rule: CheckWeightRule,
) -> SelectedWeights {
    SelectedWeights {
        r: detector_weights(det_shaping, gamma2, alpha),
        r_check: check_weights(upsilons, alpha, check_rule),
        r_bar: observer_weights(obs_shaping, obs_coupling, p, bar_gamma2, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_example_scenario, EdgeWeights, NetworkGraph};
    use crate::netmatrix::{coupling_matrices, Layer};

    #[test]
    fn bidirectional_pair_penalty_and_observer_offset() {
        // W = I, H = 0, Z = I: penalty = 2ℒ − 𝒟 = [[1, −2], [−2, 1]], eigenvalues −1 and 3
        let z = Mat::zeros(1, 0);
        let g = NetworkGraph::from_pairs(2, &[(0, 1), (1, 0)], &Mat::identity(1, 1), &z, &z);
        let c = coupling_matrices(&g, &EdgeWeights::uniform(Mat::identity(1, 1)), Layer::Observer, 1).unwrap();
        let (lo, hi) = c.penalty_bounds();
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let s = WeightShaping::new(&c, &[], WeightRule::Isotropic).unwrap();
        // P = 0, γ̄² = 2: offset λ_max(−2·penalty) = 2
        for m in observer_weights(&s, &c, &Mat::zeros(2, 2), 2.0, 1e-3) {
            assert!((m[(0, 0)] - 2.001).abs() < 1e-12);
        }
    }

    #[test]
    fn edgeless_graph_gives_alpha_identity() {
        let z = Mat::zeros(1, 0);
        let g = NetworkGraph::from_pairs(2, &[], &Mat::identity(1, 1), &z, &z);
        let c = coupling_matrices(&g, &EdgeWeights::uniform(Mat::identity(1, 1)), Layer::Observer, 1).unwrap();
        let s = WeightShaping::new(&c, &[], WeightRule::Isotropic).unwrap();
        for m in observer_weights(&s, &c, &Mat::zeros(2, 2), 1.0, 1e-3) {
            assert_eq!(m, Mat::identity(1, 1) * 1e-3);
        }
        assert_eq!(detector_weights(&s, 5.0, 1e-3), vec![Mat::identity(1, 1) * 1e-3; 2]);
    }

    #[test]
    fn isotropic_check_weight_example() {
        let u = Mat::from_row_slice(1, 2, &[-410.0, 0.0]);
        let r = check_weights(&[u.clone()], 1e-3, CheckWeightRule::Isotropic);
        assert!((&r[0] - Mat::identity(2, 2) * (410.0f64.powi(2) + 1e-3)).norm() < 1e-9);
        let r = check_weights(&[u.clone()], 1e-3, CheckWeightRule::RankAware);
        assert!(sym_min_eig(&(&r[0] - u.transpose() * &u)) >= 1e-3 - 1e-9);
    }

    #[test]
    fn weight_inequalities_hold_on_example() {
        let s = builtin_example_scenario();
        let det = coupling_matrices(&s.graph, &s.weights.z, Layer::Detector, 6).unwrap();
        let obs = coupling_matrices(&s.graph, &s.weights.z_bar, Layer::Observer, 6).unwrap();
        let p = crate::netmatrix::consensus_weight(&s.graph, 6);
        for rule in [WeightRule::Isotropic, WeightRule::default()] {
            let ds = WeightShaping::new(&det, &s.sensors, rule).unwrap();
            let os = WeightShaping::new(&obs, &s.sensors, rule).unwrap();
            for (g, gb) in [(1e-3, 1e-2), (0.5, 2.0), (30.0, 0.04)] {
                let alpha = 1e-3;
                let r = detector_weights(&ds, g, alpha);
                let rb = observer_weights(&os, &obs, &p, gb, alpha);
                let rd = block_diag(&r.iter().collect::<Vec<_>>());
                let rbd = block_diag(&rb.iter().collect::<Vec<_>>());
                assert!(sym_min_eig(&(&rd + &det.penalty * g)) >= alpha - 1e-9);
                assert!(sym_min_eig(&(&rbd + &obs.penalty * gb - &p)) >= alpha - 1e-9);
            }
        }
    }
}
