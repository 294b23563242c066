//! Builds the interconnection matrices of a small digraph and checks that the
//! noise-free identity case reduces to the Kronecker-lifted Laplacian.
//!
//! cargo run --example network_matrices

use rol::mat::Mat;
use rol::model::{EdgeWeights, NetworkGraph};
use rol::netmatrix::{coupling_matrices, laplacian_specialization, Layer};

fn main() -> rol::Result<()> {
    let n = 2;
    let eye = Mat::identity(n, n);
    let none = Mat::zeros(n, 0);
    let g = NetworkGraph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], &eye, &none, &none);
    let c = coupling_matrices(&g, &EdgeWeights::uniform(eye.clone()), Layer::Observer, n)?;
    let (lap, _) = laplacian_specialization(&g);
    let lifted = lap.kronecker(&eye);
    println!("Laplacian:{lap}");
    println!("‖Φ − ℒ⊗I‖ = {:e}", (&c.phi - &lifted).norm());
    let (lo, hi) = c.penalty_bounds();
    println!("network penalty spectrum in [{lo:.3}, {hi:.3}]");
    Ok(())
}
