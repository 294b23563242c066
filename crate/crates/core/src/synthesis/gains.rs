//! Gain extraction from Riccati solutions and the controller composition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::MatrixSchedule;
use crate::netmatrix::CouplingMatrices;

/// Gain on the in-edge `from → to` (1-based labels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeGain {
    pub from: usize,
    pub to: usize,
    pub k: MatrixSchedule,
}

/// Output-injection gains of one node: `L` on the measurement innovation, `K` per in-edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeGains {
    pub l: MatrixSchedule,
    pub k: Vec<EdgeGain>,
}

/// Detector gains split into the estimation-error part (hat) and the bias-state part (check).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorNodeGains {
    pub hat: NodeGains,
    pub check: NodeGains,
}

fn product(y: &MatrixSchedule, right: &MatrixSchedule, rows: std::ops::Range<usize>) -> MatrixSchedule {
    y.zip_with(right, |y, r| y.rows(rows.start, rows.len()) * r)
}

/// `𝐋 = 𝐘𝐂ᵀ(DDᵀ)⁻¹` and `𝐊_ij = 𝐘𝐖_ijᵀU_ij⁻¹`, split after the first `n` rows.
pub fn detector_gains(
    y: &MatrixSchedule,
    c_ext: &MatrixSchedule,
    precision: &MatrixSchedule,
    coupling: &CouplingMatrices,
    node: usize,
    n: usize,
) -> DetectorNodeGains {
    let dim = y.nrows();
    let ct_r = c_ext.zip_with(precision, |c, r| c.transpose() * r);
    let part = |rows: std::ops::Range<usize>| {
        let k = coupling
            .in_edges(node)
            .map(|e| {
                let mut w_ext = Mat::zeros(e.w.nrows(), dim);
                w_ext.view_mut((0, 0), e.w.shape()).copy_from(&e.w);
                let wu = MatrixSchedule::Constant(w_ext.transpose() * &e.u_inv);
                EdgeGain {
                    from: e.from + 1,
                    to: e.to + 1,
                    k: product(y, &wu, rows.clone()),
                }
            })
            .collect();
        NodeGains {
            l: product(y, &ct_r, rows),
            k,
        }
    };
    DetectorNodeGains {
        hat: part(0..n),
        check: part(n..dim),
    }
}

/// `L^r = ȲCᵀ(DDᵀ)⁻¹` and `K^r_ij = ȲW_ijᵀŪ_ij⁻¹`.
pub fn observer_gains(
    y: &MatrixSchedule,
    c: &MatrixSchedule,
    precision: &MatrixSchedule,
    coupling: &CouplingMatrices,
    node: usize,
) -> NodeGains {
    let n = y.nrows();
    let ct_r = c.zip_with(precision, |c, r| c.transpose() * r);
    let k = coupling
        .in_edges(node)
        .map(|e| EdgeGain {
            from: e.from + 1,
            to: e.to + 1,
            k: product(y, &MatrixSchedule::Constant(e.w.transpose() * &e.u_inv), 0..n),
        })
        .collect();
    NodeGains {
        l: product(y, &ct_r, 0..n),
        k,
    }
}

/// `L̄ = L̂ − L^r`, `K̄_ij = K̂_ij − K^r_ij`, samplewise on time-varying schedules.
pub fn compose_controller_gains(hat: &NodeGains, observer: &NodeGains) -> Result<NodeGains> {
    let same_edges = hat.k.len() == observer.k.len()
        && hat.k.iter().zip(&observer.k).all(|(a, b)| (a.from, a.to) == (b.from, b.to));
    if !same_edges || hat.l.shape() != observer.l.shape() {
        return Err(Error::Invalid(
            "detector and observer gains index different nodes or edges".into(),
        ));
    }
    Ok(NodeGains {
        l: hat.l.zip_with(&observer.l, |a, b| a - b),
        k: hat
            .k
            .iter()
            .zip(&observer.k)
            .map(|(a, b)| EdgeGain {
                from: a.from,
                to: a.to,
                k: a.k.zip_with(&b.k, |x, y| x - y),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EdgeWeights, Interp, NetworkGraph};
    use crate::netmatrix::{coupling_matrices, Layer};

    fn ring_coupling(n: usize) -> CouplingMatrices {
        let h = Mat::zeros(n, 0);
        let g = NetworkGraph::directed_ring(3, &Mat::identity(n, n), &h, &h);
        coupling_matrices(&g, &EdgeWeights::uniform(Mat::identity(n, n) * 2.0), Layer::Detector, n).unwrap()
    }

    #[test]
    fn identity_y_partitions() {
        let n = 2;
        let c = Mat::from_row_slice(1, 3, &[1.0, 2.0, 0.0]);
        let prec = Mat::from_element(1, 1, 4.0);
        let g = detector_gains(
            &Mat::identity(3, 3).into(),
            &c.clone().into(),
            &prec.clone().into(),
            &ring_coupling(n),
            0,
            n,
        );
        assert_eq!(g.hat.l.initial(), &Mat::from_row_slice(2, 1, &[4.0, 8.0]));
        assert_eq!(g.check.l.initial(), &Mat::zeros(1, 1));
        assert_eq!(g.hat.k.len(), 1);
        assert!((g.hat.k[0].k.initial() - Mat::identity(2, 2) * 0.5).amax() < 4.0 * f64::EPSILON);
        assert_eq!(g.check.k[0].k.initial().shape(), (1, 2));
        assert_eq!((g.hat.k[0].from, g.hat.k[0].to), (3, 1));
    }

    #[test]
    fn scalar_observer_gain() {
        let sigma: f64 = 0.1;
        let h = Mat::zeros(1, 0);
        let g = NetworkGraph::from_pairs(2, &[(0, 1)], &Mat::identity(1, 1), &h, &h);
        let cpl = coupling_matrices(&g, &EdgeWeights::uniform(Mat::identity(1, 1)), Layer::Observer, 1).unwrap();
        let prec = Mat::from_element(1, 1, sigma.powi(-2));
        let out = observer_gains(&Mat::identity(1, 1).into(), &Mat::identity(1, 1).into(), &prec.into(), &cpl, 0);
        assert!((out.l.initial()[(0, 0)] - 100.0).abs() < 1e-12);
        assert!(out.k.is_empty());
    }

    #[test]
    fn composition_is_exact_and_samplewise() {
        let sched = |a: f64, b: f64| {
            MatrixSchedule::sampled(
                vec![0.0, 1.0],
                vec![Mat::from_element(1, 1, a), Mat::from_element(1, 1, b)],
                Interp::Hold,
            )
            .unwrap()
        };
        let hat = NodeGains {
            l: sched(0.3, 0.7),
            k: vec![],
        };
        let obs = NodeGains {
            l: sched(0.1, 0.2),
            k: vec![],
        };
        let bar = compose_controller_gains(&hat, &obs).unwrap();
        assert_eq!(bar.l.sample_times(), Some(&[0.0, 1.0][..]));
        for t in [0.0, 1.0] {
            let back = bar.l.at(t) + obs.l.at(t);
            assert!((back - hat.l.at(t)).abs().max() <= 4.0 * f64::EPSILON);
        }
        let same = compose_controller_gains(&hat, &hat).unwrap();
        assert_eq!(same.l.at(0.5), Mat::zeros(1, 1));
    }
}
