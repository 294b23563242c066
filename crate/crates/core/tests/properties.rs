//! Randomised checks of the structural invariants.

use num_complex::Complex64;
use proptest::prelude::*;

use rol::attackclass::{check_admissible_filter, realize_bias_model};
use rol::mat::{asymmetry, block_diag, Mat};
use rol::model::{builtin_example_scenario, parse_scenario, EdgeWeights, MatrixSchedule, NetworkGraph, TransferFunction};
use rol::netmatrix::{coupling_matrices, laplacian_specialization, Layer};
use rol::numerics::{integrate_dre, poly, solve_are_lti, spectral_abscissa, spectral_radius, sym_min_eig, RiccatiProblem};
use rol::synthesis::{bisect_gamma, compose_controller_gains, BisectOptions, DesignContext, EdgeGain, NodeGains, SynthesisOptions};

fn mat(rows: usize, cols: usize, entries: &[f64]) -> Mat {
    Mat::from_row_slice(rows, cols, &entries[..rows * cols])
}

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

/// Digraph on `nodes` vertices: a random spanning tree (either orientation) plus extra arcs.
fn connected_digraph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..=6).prop_flat_map(|nodes| {
        (
            Just(nodes),
            prop::collection::vec((0.0..1.0f64, any::<bool>()), nodes - 1),
            prop::collection::vec(any::<bool>(), nodes * nodes),
        )
            .prop_map(|(nodes, tree, extra)| {
                let mut pairs = Vec::new();
                for (j, (u, flip)) in tree.into_iter().enumerate() {
                    let child = j + 1;
                    let parent = ((u * child as f64) as usize).min(child - 1);
                    pairs.push(if flip { (parent, child) } else { (child, parent) });
                }
                for (k, add) in extra.into_iter().enumerate() {
                    let (i, j) = (k / nodes, k % nodes);
                    if add && i != j && !pairs.contains(&(i, j)) {
                        pairs.push((i, j));
                    }
                }
                (nodes, pairs)
            })
    })
}

/// Random filtering problem with `S − R/γ² = (1 − q)CᵀC`, `C` well conditioned.
fn riccati_problem(dim: usize) -> impl Strategy<Value = RiccatiProblem> {
    (entries(dim * dim), entries(dim * dim), entries(dim * dim), 0.0..0.5f64).prop_map(move |(a, b, c, q)| {
        let c = mat(dim, dim, &c) * 0.3 + Mat::identity(dim, dim);
        let s = c.transpose() * &c;
        RiccatiProblem {
            a: MatrixSchedule::Constant(mat(dim, dim, &a)),
            b: MatrixSchedule::Constant(mat(dim, dim, &b)),
            r_scaled: &s * q,
            s: MatrixSchedule::Constant(s),
            y0: Mat::zeros(dim, dim),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_identity_on_random_digraphs((nodes, pairs) in connected_digraph(), n in 1usize..=3) {
        let eye = Mat::identity(n, n);
        let none = Mat::zeros(n, 0);
        let g = NetworkGraph::from_pairs(nodes, &pairs, &eye, &none, &none);
        prop_assert!(g.is_weakly_connected());
        for layer in [Layer::Detector, Layer::Observer] {
            let c = coupling_matrices(&g, &EdgeWeights::uniform(eye.clone()), layer, n).unwrap();
            let (lap, _) = laplacian_specialization(&g);
            for i in 0..nodes {
                for j in 0..nodes {
                    prop_assert_eq!(c.phi.view((i * n, j * n), (n, n)).clone_owned(), &eye * lap[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn coupling_sparsity_and_penalty_symmetry(
        (nodes, pairs) in connected_digraph(),
        w in entries(4),
        h in entries(2),
        z in entries(4),
    ) {
        let n = 2;
        let w = mat(n, n, &w) + Mat::identity(n, n) * 2.0;
        let h = mat(n, 1, &h);
        let z = mat(n, n, &z);
        let z = &z * z.transpose() + Mat::identity(n, n) * 0.1;
        let g = NetworkGraph::from_pairs(nodes, &pairs, &w, &h, &h);
        let c = coupling_matrices(&g, &EdgeWeights::uniform(z), Layer::Observer, n).unwrap();
        prop_assert_eq!(&c.penalty, &c.penalty.transpose());
        for i in 0..nodes {
            for j in 0..nodes {
                let block = c.phi.view((i * n, j * n), (n, n));
                let nonzero = block.iter().any(|v| *v != 0.0);
                if i == j {
                    prop_assert_eq!(block.clone_owned(), c.delta[i].clone());
                } else {
                    prop_assert_eq!(nonzero, pairs.contains(&(j, i)), "block ({}, {})", i, j);
                }
            }
        }
    }

    #[test]
    fn dre_stays_symmetric(p in riccati_problem(3)) {
        let sol = integrate_dre(&p, 1.0, 1e-2);
        for y in &sol.ys {
            prop_assert!(asymmetry(y) <= 1e-8 * y.norm().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn dre_settles_on_the_stabilising_solution(p in riccati_problem(3)) {
        let are = solve_are_lti(&p).unwrap();
        prop_assert!(are.closed_loop_abscissa < 0.0);
        let (a, _, m) = p.coefficients(0.0);
        let step = 0.5 / spectral_radius(&(&a - &are.y * &m)).max(spectral_radius(&a)).max(1e-3);
        let horizon = 20.0 / are.closed_loop_abscissa.abs();
        let dre = integrate_dre(&p, horizon, step.min(horizon / 100.0));
        prop_assert!((dre.last() - &are.y).norm() <= 1e-6 * (1.0 + are.y.norm()));
    }

    #[test]
    fn dre_converges_at_fourth_order(p in riccati_problem(2)) {
        let at = |h: f64| integrate_dre(&p, 1.0, h).last().clone();
        let (y1, y2, y3) = (at(0.1), at(0.05), at(0.025));
        let (d1, d2) = ((&y1 - &y2).norm(), (&y2 - &y3).norm());
        prop_assume!(d2 > 1e-11);
        prop_assert!((d1 / d2).log2() >= 3.5, "observed order {}", (d1 / d2).log2());
    }

    #[test]
    fn bias_model_realises_minus_g_over_s(b0 in 0.1..50.0f64, b1 in 0.0..5.0f64, a0 in 0.1..50.0f64, a1 in 0.5..50.0f64, n_f in 1usize..=3) {
        // sD + N = s³ + a1 s² + (a0 + b1) s + b0 is Hurwitz iff a1(a0 + b1) > b0
        prop_assume!(a1 * (a0 + b1) > 1.01 * b0);
        let g = TransferFunction::new(&[b1, b0], &[1.0, a1, a0]);
        let model = realize_bias_model(&g, n_f).unwrap();
        // b0 > 0 keeps the integrator, so −G/s has order deg D + 1
        prop_assert_eq!(model.order(), 3 * n_f);
        prop_assert!(model.is_minimal(1e-8));
        for k in 0..50 {
            let w = 10f64.powf(-2.0 + 5.0 * k as f64 / 49.0);
            let s = Complex64::new(0.0, w);
            let expected = -(poly::eval(&g.num, s) / poly::eval(&g.den, s)) / s;
            let got = model.frequency_response(w);
            prop_assert!((got - expected).norm() <= 1e-6 * expected.norm(), "ω = {}", w);
        }
    }

    #[test]
    fn stable_certificates_list_left_half_plane_roots(num in entries(2), den in entries(2)) {
        let g = TransferFunction::new(&num, &[1.0, den[0] * 10.0, den[1] * 10.0]);
        let cert = check_admissible_filter(&g).unwrap();
        // sD + N, highest power first
        let char_poly = poly::add(&poly::mul(&[1.0, 0.0], &g.den), &g.num);
        for r in &cert.roots {
            let z = Complex64::new(r[0], r[1]);
            prop_assert!(poly::eval(&char_poly, z).norm() <= 1e-6 * (1.0 + z.norm().powi(3)));
        }
        if cert.stable {
            prop_assert!(cert.roots.iter().all(|r| r[0] < 0.0));
            prop_assert!(cert.g1.is_finite() && cert.g2.is_finite());
        } else {
            prop_assert!(cert.offending_root.is_some_and(|r| r[0] >= 0.0));
        }
    }

    #[test]
    fn bisection_brackets_a_threshold(log_c in -5.0..3.0f64) {
        let c = 10f64.powf(log_c);
        let opts = BisectOptions::default();
        let r = bisect_gamma(|g| g >= c, &opts);
        prop_assert!(r.monotone);
        prop_assert!(r.gamma2 >= c && r.gamma2 <= c * (1.0 + opts.rel_tol) + f64::EPSILON, "{} vs {}", r.gamma2, c);
    }

    #[test]
    fn composed_gains_add_back_to_the_detector_gain(hat in entries(6), obs in entries(6), k1 in entries(4), k2 in entries(4)) {
        let scale = 100.0;
        let node = |l: &[f64], k: &[f64]| NodeGains {
            l: MatrixSchedule::Constant(mat(2, 3, l) * scale),
            k: vec![EdgeGain { from: 2, to: 1, k: MatrixSchedule::Constant(mat(2, 2, k) * scale) }],
        };
        let (h, o) = (node(&hat, &k1), node(&obs, &k2));
        let c = compose_controller_gains(&h, &o).unwrap();
        let sum = |a: &MatrixSchedule, b: &MatrixSchedule| a.at(0.0) + b.at(0.0);
        // one rounding in the difference, one in the sum
        prop_assert!((sum(&c.l, &o.l) - h.l.at(0.0)).amax() <= 4.0 * f64::EPSILON * 2.0 * scale);
        prop_assert!((sum(&c.k[0].k, &o.k[0].k) - h.k[0].k.at(0.0)).amax() <= 4.0 * f64::EPSILON * 2.0 * scale);
    }

    #[test]
    fn scenario_round_trip_is_bit_exact(a in entries(36), seed in any::<u64>()) {
        let mut s = builtin_example_scenario();
        s.plant.a = MatrixSchedule::Constant(mat(6, 6, &a) * 1e3 + Mat::from_element(6, 6, 1.0 / 3.0));
        s.simulation.seed = seed;
        let back = parse_scenario(&s.to_json(), "round trip").unwrap();
        prop_assert_eq!(back, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn selected_weights_meet_the_interconnection_inequalities(log_g in -2.5..1.0f64, log_gb in -1.5..1.0f64) {
        let s = builtin_example_scenario();
        let ctx = DesignContext::new(&s, &SynthesisOptions::from_scenario(&s)).unwrap();
        let (g, gb) = (10f64.powf(log_g), 10f64.powf(log_gb));
        let alpha = s.weights.alpha;
        let w = ctx.weights(g, gb);
        let r = block_diag(&w.r.iter().collect::<Vec<_>>());
        prop_assert!(sym_min_eig(&(r + &ctx.det.penalty * g)) >= alpha - 1e-9);
        let rb = block_diag(&w.r_bar.iter().collect::<Vec<_>>());
        prop_assert!(sym_min_eig(&(rb + &ctx.obs.penalty * gb - &ctx.p)) >= alpha - 1e-9);
        for (rc, b) in w.r_check.iter().zip(&ctx.bias) {
            prop_assert!(sym_min_eig(&(rc - b.upsilon.transpose() * &b.upsilon)) >= alpha - 1e-9);
        }
    }
}

#[test]
fn example_abscissa_is_negative_at_the_design_point() {
    let s = builtin_example_scenario();
    let syn = rol::synthesis::synthesize(&s, &SynthesisOptions::from_scenario(&s)).unwrap();
    let sys = rol::simcore::assemble_closed_loop(&s, &syn.gains, rol::simcore::Mode::Resilient).unwrap();
    assert!(spectral_abscissa(&sys.error_dynamics(0.0)) < 0.0);
}
