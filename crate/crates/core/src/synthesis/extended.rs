use crate::attackclass::BiasModel;
use crate::error::{Error, Result};
use crate::mat::{block_diag, hstack, vstack, Mat};
use crate::model::{MatrixSchedule, NodeAttackClass, PlantModel, SensorNode};

/// Extended plant `(x, δ)` seen by one node's detector, where `δ` is the bias-model state.
///
/// `𝐀 = [[A, −F̂Υ], [0, Ω − F̌Υ]]`, `𝐁 = [[B, F̂], [0, Γ̌]]`, `𝐂 = [C, 0]`,
/// `𝐖_ij = [W_ij, 0]`, with `F̂ = F + F̄` and `Γ̌ = Γ + F̌`.
#[derive(Clone, Debug)]
pub struct ExtendedNodeSystem {
    pub node: usize,
    pub n: usize,
    pub bias: BiasModel,
    pub f: Mat,
    pub f_hat: Mat,
    pub f_check: Mat,
    pub gamma_check: Mat,
    pub a: MatrixSchedule,
    pub b: MatrixSchedule,
    pub c: MatrixSchedule,
    pub d: MatrixSchedule,
    /// `(edge index, 𝐖_ij)` for every in-edge.
    pub w: Vec<(usize, Mat)>,
    /// `blockdiag(X_i, X_{i,0})` when supplied.
    pub x: Option<Mat>,
}

impl ExtendedNodeSystem {
    pub fn n_eps(&self) -> usize {
        self.bias.order()
    }

    pub fn dim(&self) -> usize {
        self.n + self.n_eps()
    }
}

/// Assembles the extended node system. `in_edges` lists `(edge index, W_ij)`.
pub fn build_extended_node(
    node: usize,
    plant: &PlantModel,
    sensor: &SensorNode,
    in_edges: &[(usize, Mat)],
    class: Option<&NodeAttackClass>,
    bias: &BiasModel,
    x: Option<(&Mat, &Mat)>,
) -> Result<ExtendedNodeSystem> {
    let n = plant.n();
    let ne = bias.order();
    let nf = bias.n_f;
    let (f, f_bar, f_check) = match class {
        Some(c) if c.n_f() > 0 => (c.f.clone(), c.f_bar_or_zero(), c.f_check_or_zero(ne)),
        _ => (Mat::zeros(n, 0), Mat::zeros(n, 0), Mat::zeros(0, 0)),
    };
    if f.ncols() != nf || bias.upsilon.ncols() != ne {
        return Err(Error::dim(
            format!("attack_class[{}]", node + 1),
            format!("F has {} columns but the bias model has {nf} channels", f.ncols()),
        ));
    }
    if f.nrows() != n || f_bar.shape() != f.shape() || f_check.shape() != (ne, nf) {
        return Err(Error::dim(
            format!("attack_class[{}]", node + 1),
            "F, F̄ and F̌ shapes disagree with the plant and bias model".to_string(),
        ));
    }
    let f_hat = &f + &f_bar;
    let gamma_check = &bias.gamma + &f_check;
    let top_right = -(&f_hat * &bias.upsilon);
    let bottom_right = &bias.omega - &f_check * &bias.upsilon;
    let a = plant.a.map(|a| {
        vstack(&[
            &hstack(&[a, &top_right]),
            &hstack(&[&Mat::zeros(ne, n), &bottom_right]),
        ])
    });
    let b = plant.b.map(|b| {
        vstack(&[
            &hstack(&[b, &f_hat]),
            &hstack(&[&Mat::zeros(ne, b.ncols()), &gamma_check]),
        ])
    });
    let c = sensor.c.map(|c| hstack(&[c, &Mat::zeros(c.nrows(), ne)]));
    let w = in_edges
        .iter()
        .map(|(k, w)| (*k, hstack(&[w, &Mat::zeros(w.nrows(), ne)])))
        .collect();
    let x = x.map(|(x, x0)| block_diag(&[x, x0]));
    Ok(ExtendedNodeSystem {
        node,
        n,
        bias: bias.clone(),
        f,
        f_hat,
        f_check,
        gamma_check,
        a,
        b,
        c,
        d: sensor.d.clone(),
        w,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attackclass::realize_bias_model;
    use crate::model::builtin_example_scenario;

    fn node_system(f_bar: Option<Mat>) -> ExtendedNodeSystem {
        let s = builtin_example_scenario();
        let mut class = s.attack_class.node(0).unwrap().clone();
        class.f_bar = f_bar;
        let bias = realize_bias_model(&class.g, 1).unwrap();
        let edges: Vec<_> = s.graph.in_edges(0).map(|(k, e)| (k, e.w.clone())).collect();
        build_extended_node(0, &s.plant, &s.sensors[0], &edges, Some(&class), &bias, None).unwrap()
    }

    #[test]
    fn example_blocks() {
        let sys = node_system(None);
        let a = sys.a.initial();
        assert_eq!(a.shape(), (8, 8));
        assert_eq!(a.view((6, 0), (2, 6)).norm(), 0.0);
        let expected = -(Mat::from_element(6, 1, 1.0) * Mat::from_row_slice(1, 2, &[-410.0, 0.0]));
        assert_eq!(a.view((0, 6), (6, 2)).clone_owned(), expected);
        assert_eq!(sys.c.initial().view((0, 6), (2, 2)).norm(), 0.0);
        assert_eq!(sys.w[0].1.shape(), (6, 8));
    }

    #[test]
    fn cancelling_injection_zeroes_b_block() {
        let sys = node_system(Some(-Mat::from_element(6, 1, 1.0)));
        assert_eq!(sys.b.initial().view((0, 6), (6, 1)).norm(), 0.0);
        assert_eq!(sys.a.initial().view((0, 6), (6, 2)).norm(), 0.0);
    }

    #[test]
    fn trusted_node_degenerates_to_plant() {
        let s = builtin_example_scenario();
        let sys =
            build_extended_node(0, &s.plant, &s.sensors[0], &[], None, &BiasModel::empty(), None).unwrap();
        assert_eq!(sys.a.initial(), s.plant.a.initial());
        assert_eq!(sys.b.initial(), s.plant.b.initial());
        assert_eq!(sys.c.initial(), s.sensors[0].c.initial());
    }
}
