use super::{
    AttackClassSpec, CheckWeightRule, DesignWeights, EdgeWeights, MatrixSchedule, NetworkGraph,
    NodeAttackClass, PerformanceWeight, PlantModel, Scenario, SensorNode, SimulationSpec,
    TransferFunction, WeightRule,
};
use crate::attackclass::AttackSignalSpec;
use crate::mat::Mat;

const A: [[f64; 6]; 6] = [
    [0.3775, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2959, 0.3510, 0.0, 0.0, 0.0, 0.0],
    [1.4751, 0.6232, 1.0078, 0.0, 0.0, 0.0],
    [0.2340, 0.0, 0.0, 0.5596, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.4437, 1.1878, -0.0215],
    [0.0, 0.0, 0.0, 0.0, 2.2023, 1.0039],
];

/// Six-state plant watched by six two-channel sensors on a directed ring.
///
/// Sensor `i` measures coordinates `i` and `i+1` (cyclically), every node can
/// be attacked through `F_i = 1` with attack class `G(s) = 410/(s+40)`, and the
/// scripted attack hits node 2 with amplitude 5 on `[4, 7)` s. The ring
/// topology is a default (`graph_assumed`).
pub fn builtin_example_scenario() -> Scenario {
    let n = 6;
    let a = Mat::from_fn(n, n, |i, j| A[i][j]);
    let b = Mat::identity(n, n) * 0.1;
    let sensors = (0..n)
        .map(|i| {
            let mut c = Mat::zeros(2, n);
            c[(0, i)] = 1.0;
            c[(1, (i + 1) % n)] = 1.0;
            SensorNode {
                c: MatrixSchedule::Constant(c),
                d: MatrixSchedule::Constant(Mat::identity(2, 2) * 0.01),
            }
        })
        .collect();
    let h = Mat::from_element(n, 1, 0.1 / 2f64.sqrt());
    let mut graph = NetworkGraph::directed_ring(n, &Mat::identity(n, n), &h, &h);
    graph.graph_assumed = true;
    let class = NodeAttackClass {
        f: Mat::from_element(n, 1, 1.0),
        f_bar: None,
        f_check: None,
        g: TransferFunction::new(&[410.0], &[1.0, 40.0]),
    };
    let z = Mat::identity(n, n) * 0.01;
    Scenario {
        plant: PlantModel {
            a: MatrixSchedule::Constant(a),
            b: MatrixSchedule::Constant(b),
        },
        sensors,
        graph,
        attack_class: AttackClassSpec(vec![Some(class); n]),
        weights: DesignWeights {
            z: EdgeWeights::uniform(z.clone()),
            z_bar: EdgeWeights::uniform(z),
            x: None,
            x0: None,
            x_bar: None,
            p: PerformanceWeight::Consensus,
            alpha: 1e-3,
            gamma2: None,
            bar_gamma2: None,
            rule: WeightRule::default(),
            check_rule: CheckWeightRule::RankAware,
            design_margin: 1.1,
        },
        simulation: SimulationSpec {
            t_end: 10.0,
            step: 1e-5,
            record_every: 100,
            x0: vec![1.0; n],
            xi: None,
            seed: 0,
            attacks: vec![AttackSignalSpec::step(2, 5.0, 4.0, 7.0)],
            disturbances: vec![],
            ltv_horizon: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_scenario, validate_scenario};

    #[test]
    fn published_values() {
        let s = builtin_example_scenario();
        assert_eq!(s.plant.a.initial()[(0, 0)], 0.3775);
        assert_eq!(s.nodes(), 6);
        assert_eq!(s.n(), 6);
        let g = &s.attack_class.node(0).unwrap().g;
        assert_eq!(g.num, vec![410.0]);
        assert_eq!(g.den, vec![1.0, 40.0]);
        let atk = &s.simulation.attacks[0];
        assert_eq!(atk.node, 2);
        assert_eq!(atk.bias[0].value, 5.0);
        assert_eq!((atk.bias[0].start, atk.bias[0].end), (4.0, 7.0));
    }

    #[test]
    fn validates_cleanly() {
        let s = builtin_example_scenario();
        let r = validate_scenario(&s);
        assert!(r.is_empty(), "{:?}", r.issues);
        assert!(r.graph_assumed);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let s = builtin_example_scenario();
        let back = parse_scenario(&s.to_json(), "roundtrip").unwrap();
        assert_eq!(back, s);
        assert_eq!(back.content_hash(), s.content_hash());
    }

    #[test]
    fn design_hash_ignores_simulation_settings() {
        let s = builtin_example_scenario();
        let mut t = s.clone();
        t.simulation.seed = 7;
        t.simulation.attacks.clear();
        assert_eq!(t.design_hash(), s.design_hash());
        assert_ne!(t.content_hash(), s.content_hash());
        t.weights.alpha *= 2.0;
        assert_ne!(t.design_hash(), s.design_hash());
    }
}
