//! Interconnection matrices of the observer network.
//!
//! For every edge `j → i` with channel noise `H` and weight `Z`, `U = HHᵀ + Z`.
//! Node `i` collects `Δ_i = Σ WᵀU⁻¹ZU⁻¹W`; the block matrix `Φ` has
//! `Φ_ii = Δ_i` and `Φ_ij = −WᵀU⁻¹W` for in-neighbours, and the network
//! penalty is `Φ + Φᵀ − Δ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::{add_block, spd_inverse, symmetrize, Mat};
use crate::model::{EdgeWeights, NetworkGraph};
use crate::numerics::sym_eig_bounds;

/// Which design layer the coupling belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    /// Detector layer: noise `[H  H_c]`, weights `Z`.
    Detector,
    /// Observer layer: noise `H`, weights `Z̄`.
    Observer,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layer::Detector => "detector",
            Layer::Observer => "observer",
        })
    }
}

/// Per-edge quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCoupling {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
    pub w: Mat,
    pub u: Mat,
    pub u_inv: Mat,
    /// `WᵀU⁻¹W`.
    pub information: Mat,
    /// `WᵀU⁻¹ZU⁻¹W`.
    pub dissipation: Mat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrices {
    pub layer: Layer,
    pub n: usize,
    pub nodes: usize,
    pub edges: Vec<EdgeCoupling>,
    /// `Δ_i` per node.
    pub delta: Vec<Mat>,
    pub phi: Mat,
    /// `Φ + Φᵀ − Δ`.
    pub penalty: Mat,
    pub warnings: Vec<String>,
}

impl CouplingMatrices {
    /// `Σ_{j∈V_i} WᵀU⁻¹W`, the network share of node `i`'s information weight.
    pub fn network_information(&self, i: usize) -> Mat {
        self.edges
            .iter()
            .filter(|e| e.to == i)
            .fold(Mat::zeros(self.n, self.n), |acc, e| acc + &e.information)
    }

    pub fn in_edges(&self, i: usize) -> impl Iterator<Item = &EdgeCoupling> {
        self.edges.iter().filter(move |e| e.to == i)
    }

    /// Block-diagonal `Δ`.
    pub fn delta_block(&self) -> Mat {
        let mut out = Mat::zeros(self.nodes * self.n, self.nodes * self.n);
        for (i, d) in self.delta.iter().enumerate() {
            add_block(&mut out, i * self.n, i * self.n, d, 1.0);
        }
        out
    }

    pub fn penalty_bounds(&self) -> (f64, f64) {
        if self.penalty.nrows() == 0 {
            return (0.0, 0.0);
        }
        sym_eig_bounds(&self.penalty).expect("penalty is symmetric by construction")
    }
}

/// Builds `U`, `Δ`, `Φ` and the penalty for one layer. `n` is the plant order.
pub fn coupling_matrices(
    graph: &NetworkGraph,
    weights: &EdgeWeights,
    layer: Layer,
    n: usize,
) -> Result<CouplingMatrices> {
    let nodes = graph.nodes;
    let mut phi = Mat::zeros(nodes * n, nodes * n);
    let mut delta = vec![Mat::zeros(n, n); nodes];
    let mut edges = Vec::with_capacity(graph.edges.len());
    let mut warnings = Vec::new();
    for (k, e) in graph.edges.iter().enumerate() {
        let label = format!("({},{})", e.from + 1, e.to + 1);
        if e.w.ncols() != n {
            return Err(Error::dim(format!("edge {label}"), format!("W needs {n} columns")));
        }
        let z = weights
            .for_edge(e.from, e.to)
            .ok_or_else(|| Error::Invalid(format!("no {layer}-layer weight for edge {label}")))?;
        if z.shape() != (e.p(), e.p()) {
            return Err(Error::dim(format!("{layer} weight on edge {label}"), format!("expected {}×{}", e.p(), e.p())));
        }
        let noise = match layer {
            Layer::Detector => e.h_stacked(),
            Layer::Observer => e.h.clone(),
        };
        let u = symmetrize(&(&noise * noise.transpose() + z));
        let (lo, hi) = sym_eig_bounds(&u)?;
        if lo <= 1e-12 {
            return Err(Error::Invalid(format!("U singular on edge {label} (min eigenvalue {lo:e})")));
        }
        if hi / lo > 1e12 {
            warnings.push(format!("U on edge {label} is ill-conditioned (cond ≈ {:.1e})", hi / lo));
        }
        let u_inv = symmetrize(&spd_inverse(&u).expect("positive definite"));
        let wt_ui = e.w.transpose() * &u_inv;
        let information = symmetrize(&(&wt_ui * &e.w));
        let dissipation = symmetrize(&(&wt_ui * z * &u_inv * &e.w));
        let (i, j) = (e.to, e.from);
        delta[i] += &dissipation;
        add_block(&mut phi, i * n, j * n, &information, -1.0);
        edges.push(EdgeCoupling {
            edge: k,
            from: j,
            to: i,
            w: e.w.clone(),
            u,
            u_inv,
            information,
            dissipation,
        });
    }
    let mut delta_block = Mat::zeros(nodes * n, nodes * n);
    for (i, d) in delta.iter().enumerate() {
        add_block(&mut phi, i * n, i * n, d, 1.0);
        add_block(&mut delta_block, i * n, i * n, d, 1.0);
    }
    let penalty = symmetrize(&(&phi + phi.transpose() - delta_block));
    Ok(CouplingMatrices {
        layer,
        n,
        nodes,
        edges,
        delta,
        phi,
        penalty,
        warnings,
    })
}

/// In-degree Laplacian `ℒ = 𝒟 − 𝒜` with `𝒜_ij = 1` for each edge `j → i`, and `𝒟`.
pub fn laplacian_specialization(graph: &NetworkGraph) -> (Mat, Mat) {
    let n = graph.nodes;
    let mut adj = Mat::zeros(n, n);
    for e in &graph.edges {
        adj[(e.to, e.from)] = 1.0;
    }
    let deg = Mat::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| adj.row(i).sum()));
    (&deg - adj, deg)
}

/// Consensus performance weight `(ℒ + ℒ_T) ⊗ I_n`, where `ℒ_T` is the
/// out-degree Laplacian `𝒟_out − 𝒜ᵀ`.
pub fn consensus_weight(graph: &NetworkGraph, n: usize) -> Mat {
    let nodes = graph.nodes;
    let mut adj = Mat::zeros(nodes, nodes);
    for e in &graph.edges {
        adj[(e.to, e.from)] = 1.0;
    }
    let din = Mat::from_diagonal(&nalgebra::DVector::from_fn(nodes, |i, _| adj.row(i).sum()));
    let dout = Mat::from_diagonal(&nalgebra::DVector::from_fn(nodes, |i, _| adj.column(i).sum()));
    let l = &din - &adj;
    let lt = &dout - adj.transpose();
    (l + lt).kronecker(&Mat::identity(n, n))
}
