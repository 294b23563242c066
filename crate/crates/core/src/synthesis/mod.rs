//! Gain synthesis: closed-form weights, per-node Riccati feasibility, gain
//! extraction and composition, bisection on the attenuation levels, and the
//! running-minimum search over candidate graphs.

mod bisect;
mod extended;
mod feasibility;
mod gains;
mod graphs;
mod weights;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bisect::{bisect_gamma, BisectOptions, BisectionResult};
pub use extended::{build_extended_node, ExtendedNodeSystem};
pub use feasibility::{
    check_layer, node_information, solve_node, FeasibilityOptions, LayerFeasibility, NodeFeasibility, NodeProblem,
};
pub use gains::{compose_controller_gains, detector_gains, observer_gains, DetectorNodeGains, EdgeGain, NodeGains};
pub use graphs::{optimize_over_graphs, CandidateGraph, CandidateOutcome, GraphOptimization, LevelCache};
pub use weights::{
    check_weights, detector_weights, observer_weights, select_weights, SelectedWeights, WeightShaping,
};

use crate::attackclass::{realize_bias_model, AdmissibilityCertificate, BiasModel};
use crate::error::{Error, Result};
use crate::mat::{block_diag, hstack, rows, Mat};
use crate::model::{validate_scenario, MatrixSchedule, PerformanceWeight, Scenario};
use crate::netmatrix::{consensus_weight, coupling_matrices, CouplingMatrices, Layer};
use crate::numerics::{is_stabilizable, RiccatiProblem};

/// Label attached to every attenuation level computed here.
pub const SUBOPTIMAL_LABEL: &str = "suboptimal (closed-form weights)";

/// Knobs for [`synthesize`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOptions {
    /// Fixed detector level; bisect when absent.
    pub gamma2: Option<f64>,
    /// Fixed observer level; bisect when absent.
    pub bar_gamma2: Option<f64>,
    pub bisect: BisectOptions,
    /// Certification horizon for time-varying scenarios.
    pub ltv_horizon: Option<f64>,
    /// DRE step for time-varying scenarios; the simulation step when absent.
    pub dre_step: Option<f64>,
    /// Also design the non-resilient comparison observer.
    pub baseline: bool,
}

impl SynthesisOptions {
    /// Defaults taken from the scenario document.
    pub fn from_scenario(s: &Scenario) -> Self {
        SynthesisOptions {
            gamma2: s.weights.gamma2,
            bar_gamma2: s.weights.bar_gamma2,
            bisect: BisectOptions::default(),
            ltv_horizon: s.simulation.ltv_horizon,
            dre_step: None,
            baseline: true,
        }
    }
}

/// Everything about a scenario that does not depend on the attenuation levels.
#[derive(Clone, Debug)]
pub struct DesignContext {
    pub scenario: Scenario,
    pub det: CouplingMatrices,
    pub obs: CouplingMatrices,
    pub det_shaping: WeightShaping,
    pub obs_shaping: WeightShaping,
    pub bias: Vec<BiasModel>,
    pub systems: Vec<ExtendedNodeSystem>,
    /// `(DᵢDᵢᵀ)⁻¹` per node.
    pub precision: Vec<MatrixSchedule>,
    pub p: Mat,
    pub feasibility: FeasibilityOptions,
    pub warnings: Vec<String>,
}

/// Bias model of node `i`, empty for trusted nodes.
pub fn node_bias_model(s: &Scenario, i: usize) -> Result<BiasModel> {
    match s.attack_class.node(i) {
        Some(c) => realize_bias_model(&c.g, c.n_f()),
        None => Ok(BiasModel::empty()),
    }
}

/// Stacked performance weight `P`.
pub fn performance_weight(s: &Scenario) -> Mat {
    let dim = s.nodes() * s.n();
    match &s.weights.p {
        PerformanceWeight::Consensus => consensus_weight(&s.graph, s.n()),
        PerformanceWeight::Zero => Mat::zeros(dim, dim),
        PerformanceWeight::Matrix(p) => p.clone(),
    }
}

impl DesignContext {
    pub fn new(s: &Scenario, opts: &SynthesisOptions) -> Result<Self> {
        let report = validate_scenario(s).into_result()?;
        let n = s.n();
        let nodes = s.nodes();
        let det = coupling_matrices(&s.graph, &s.weights.z, Layer::Detector, n)?;
        let obs = coupling_matrices(&s.graph, &s.weights.z_bar, Layer::Observer, n)?;
        let det_shaping = WeightShaping::new(&det, &s.sensors, s.weights.rule)?;
        let obs_shaping = WeightShaping::new(&obs, &s.sensors, s.weights.rule)?;
        let mut warnings: Vec<String> = report.warnings().map(|w| w.message.clone()).collect();
        warnings.extend(det.warnings.iter().cloned());
        warnings.extend(obs.warnings.iter().cloned());
        let bias = (0..nodes).map(|i| node_bias_model(s, i)).collect::<Result<Vec<_>>>()?;
        let precision = s
            .sensors
            .iter()
            .map(|sn| sn.noise_precision())
            .collect::<Result<Vec<_>>>()?;
        let systems = (0..nodes)
            .map(|i| {
                let edges: Vec<_> = s.graph.in_edges(i).map(|(k, e)| (k, e.w.clone())).collect();
                let x = match (&s.weights.x, &s.weights.x0) {
                    (Some(x), Some(x0)) => Some((&x[i], &x0[i])),
                    _ => None,
                };
                build_extended_node(i, &s.plant, &s.sensors[i], &edges, s.attack_class.node(i), &bias[i], x)
            })
            .collect::<Result<Vec<_>>>()?;
        let lti = s.is_lti();
        let horizon = opts.ltv_horizon.unwrap_or(s.simulation.t_end);
        Ok(DesignContext {
            scenario: s.clone(),
            p: performance_weight(s),
            det,
            obs,
            det_shaping,
            obs_shaping,
            bias,
            systems,
            precision,
            feasibility: FeasibilityOptions {
                lti,
                horizon,
                dre_step: opts.dre_step.unwrap_or(s.simulation.step),
            },
            warnings,
        })
    }

    pub fn upsilons(&self) -> Vec<Mat> {
        self.bias.iter().map(|b| b.upsilon.clone()).collect()
    }

    pub fn weights(&self, gamma2: f64, bar_gamma2: f64) -> SelectedWeights {
        select_weights(
            &self.det_shaping,
            &self.obs_shaping,
            &self.obs,
            &self.upsilons(),
            &self.p,
            gamma2,
            bar_gamma2,
            self.scenario.weights.alpha,
            self.scenario.weights.check_rule,
        )
    }

    /// Riccati problems of the detector layer at `γ²`.
    pub fn detector_problems(&self, gamma2: f64) -> Vec<NodeProblem> {
        let alpha = self.scenario.weights.alpha;
        let r = detector_weights(&self.det_shaping, gamma2, alpha);
        let r_check = check_weights(&self.upsilons(), alpha, self.scenario.weights.check_rule);
        self.systems
            .iter()
            .enumerate()
            .map(|(i, sys)| {
                let dim = sys.dim();
                let net = block_diag(&[&self.det.network_information(i), &Mat::zeros(sys.n_eps(), sys.n_eps())]);
                let local = self.scenario.sensors[i].information().expect("checked at construction");
                NodeProblem {
                    node: i,
                    problem: RiccatiProblem {
                        a: sys.a.clone(),
                        b: sys.b.clone(),
                        s: node_information(&local, &net, dim),
                        r_scaled: block_diag(&[&r[i], &r_check[i]]) / gamma2,
                        y0: Mat::identity(dim, dim),
                    },
                    x: sys.x.clone(),
                }
            })
            .collect()
    }

    /// Riccati problems of the observer layer at `γ̄²`; `baseline` drops the attack channel.
    pub fn observer_problems(&self, bar_gamma2: f64, baseline: bool) -> Vec<NodeProblem> {
        let s = &self.scenario;
        let n = s.n();
        let r_bar = observer_weights(&self.obs_shaping, &self.obs, &self.p, bar_gamma2, s.weights.alpha);
        (0..s.nodes())
            .map(|i| {
                let f = &self.systems[i].f;
                let b = if baseline || f.ncols() == 0 {
                    s.plant.b.clone()
                } else {
                    s.plant.b.map(|b| hstack(&[b, &(-f)]))
                };
                let local = s.sensors[i].information().expect("checked at construction");
                NodeProblem {
                    node: i,
                    problem: RiccatiProblem {
                        a: s.plant.a.clone(),
                        b,
                        s: node_information(&local, &self.obs.network_information(i), n),
                        r_scaled: &r_bar[i] / bar_gamma2,
                        y0: Mat::identity(n, n),
                    },
                    x: s.weights.x_bar.as_ref().map(|x| x[i].clone()),
                }
            })
            .collect()
    }

    pub fn check_detector_feasibility(&self, gamma2: f64) -> LayerFeasibility {
        check_layer("detector", gamma2, &self.detector_problems(gamma2), &self.feasibility)
    }

    pub fn check_observer_feasibility(&self, bar_gamma2: f64) -> LayerFeasibility {
        check_layer("observer", bar_gamma2, &self.observer_problems(bar_gamma2, false), &self.feasibility)
    }

    pub fn check_baseline_feasibility(&self, bar_gamma2: f64) -> LayerFeasibility {
        check_layer("baseline", bar_gamma2, &self.observer_problems(bar_gamma2, true), &self.feasibility)
    }

    /// Bisected minimal level of one layer.
    pub fn bisect_layer(&self, layer: LayerKind, opts: &BisectOptions) -> BisectionResult {
        bisect_gamma(|g| self.check(layer, g).feasible, opts)
    }

    pub fn check(&self, layer: LayerKind, gamma2: f64) -> LayerFeasibility {
        match layer {
            LayerKind::Detector => self.check_detector_feasibility(gamma2),
            LayerKind::Observer => self.check_observer_feasibility(gamma2),
            LayerKind::Baseline => self.check_baseline_feasibility(gamma2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Detector,
    Observer,
    Baseline,
}

impl LayerKind {
    fn name(self) -> &'static str {
        match self {
            LayerKind::Detector => "detector",
            LayerKind::Observer => "observer",
            LayerKind::Baseline => "baseline",
        }
    }
}

/// Non-resilient observer gains used for comparison runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineGains {
    pub bar_gamma2: f64,
    pub observer: Vec<NodeGains>,
}

/// Complete gain set for one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedGains {
    pub scenario_hash: String,
    pub gamma2: f64,
    pub bar_gamma2: f64,
    /// `L^r`, `K^r_ij`.
    pub observer: Vec<NodeGains>,
    /// `L̂^r`, `K̂^r_ij` and `Ľ^r`, `Ǩ^r_ij`.
    pub detector: Vec<DetectorNodeGains>,
    /// `L̄^r`, `K̄^r_ij`.
    pub controller: Vec<NodeGains>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineGains>,
    pub y_detector: Vec<MatrixSchedule>,
    pub y_observer: Vec<MatrixSchedule>,
}

impl SynthesizedGains {
    pub fn to_json(&self) -> String {
        crate::json::to_pretty(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Parse {
            what: path.display().to_string(),
            source,
        })
    }

    /// Fails unless the gains were designed for `scenario` (simulation settings aside).
    pub fn ensure_matches(&self, scenario: &Scenario) -> Result<()> {
        let expected = scenario.design_hash();
        if self.scenario_hash != expected {
            return Err(Error::HashMismatch {
                expected,
                found: self.scenario_hash.clone(),
            });
        }
        Ok(())
    }
}

/// Outcome of one layer's level selection.
#[derive(Clone, Debug, Serialize)]
pub struct LayerReport {
    /// Bisected minimum, absent when the level was fixed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_star: Option<f64>,
    /// Level the gains were designed at.
    pub gamma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisection: Option<BisectionResult>,
    pub shaping: WeightShaping,
    /// `R_i` (or `R̄_i`) in node order.
    pub weights: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_weights: Option<Vec<Vec<Vec<f64>>>>,
    pub feasibility: LayerFeasibility,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackClassReport {
    pub node: usize,
    pub certificate: AdmissibilityCertificate,
    pub order: usize,
    #[serde(with = "rows")]
    pub f_hat: Mat,
    #[serde(with = "rows")]
    pub gamma_check: Mat,
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisReport {
    pub scenario_hash: String,
    pub method: String,
    pub certificate: String,
    pub graph_assumed: bool,
    pub detector: LayerReport,
    pub observer: LayerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<LayerReport>,
    /// PBH stabilisability of `(A, B)`; reported, not enforced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilizable: Option<bool>,
    /// Spectral abscissa of the joint error dynamics (time-invariant case).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_loop_abscissa: Option<f64>,
    pub attack_classes: Vec<AttackClassReport>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub gains: SynthesizedGains,
    pub report: SynthesisReport,
}

fn mats_to_rows(ms: &[Mat]) -> Vec<Vec<Vec<f64>>> {
    ms.iter().map(rows::to_rows).collect()
}

/// Picks the design level of one layer and returns its feasibility at that level.
fn design_layer(
    ctx: &DesignContext,
    layer: LayerKind,
    fixed: Option<f64>,
    opts: &SynthesisOptions,
) -> Result<(LayerFeasibility, Option<BisectionResult>)> {
    if let Some(g) = fixed {
        let feas = ctx.check(layer, g);
        if !feas.feasible {
            return Err(Error::Infeasible {
                layer: layer.name().into(),
                gamma2: g,
                reason: feas.describe_failure(),
            });
        }
        return Ok((feas, None));
    }
    let bis = ctx.bisect_layer(layer, &opts.bisect);
    if !bis.gamma2.is_finite() {
        let feas = ctx.check(layer, opts.bisect.hi);
        return Err(Error::Infeasible {
            layer: layer.name().into(),
            gamma2: opts.bisect.hi,
            reason: format!("infeasible over the whole bracket; {}", feas.describe_failure()),
        });
    }
    let margin = ctx.scenario.weights.design_margin;
    let target = (bis.gamma2 * margin).min(opts.bisect.hi);
    let mut feas = ctx.check(layer, target);
    if !feas.feasible {
        feas = ctx.check(layer, bis.gamma2);
    }
    Ok((feas, Some(bis)))
}

fn layer_report(
    ctx: &DesignContext,
    feas: LayerFeasibility,
    bis: Option<BisectionResult>,
    layer: LayerKind,
) -> LayerReport {
    let g = feas.gamma2;
    let alpha = ctx.scenario.weights.alpha;
    let (shaping, weights, check) = match layer {
        LayerKind::Detector => (
            ctx.det_shaping.clone(),
            detector_weights(&ctx.det_shaping, g, alpha),
            Some(mats_to_rows(&check_weights(&ctx.upsilons(), alpha, ctx.scenario.weights.check_rule))),
        ),
        _ => (
            ctx.obs_shaping.clone(),
            observer_weights(&ctx.obs_shaping, &ctx.obs, &ctx.p, g, alpha),
            None,
        ),
    };
    LayerReport {
        gamma2_star: bis.as_ref().map(|b| b.gamma2),
        gamma2: g,
        bisection: bis,
        shaping,
        weights: mats_to_rows(&weights),
        check_weights: check,
        feasibility: feas,
    }
}

/// Steps 1–3 of the design: detector layer, observer layer, controller composition.
pub fn synthesize(s: &Scenario, opts: &SynthesisOptions) -> Result<Synthesis> {
    let ctx = DesignContext::new(s, opts)?;
    synthesize_with(&ctx, opts)
}

pub fn synthesize_with(ctx: &DesignContext, opts: &SynthesisOptions) -> Result<Synthesis> {
    let s = &ctx.scenario;
    let n = s.n();
    let (det_feas, det_bis) = design_layer(ctx, LayerKind::Detector, opts.gamma2, opts)?;
    let (obs_feas, obs_bis) = design_layer(ctx, LayerKind::Observer, opts.bar_gamma2, opts)?;
    let y_det = det_feas.solutions().expect("feasible layer has solutions");
    let y_obs = obs_feas.solutions().expect("feasible layer has solutions");

    let detector: Vec<DetectorNodeGains> = ctx
        .systems
        .iter()
        .enumerate()
        .map(|(i, sys)| detector_gains(&y_det[i], &sys.c, &ctx.precision[i], &ctx.det, i, n))
        .collect();
    let observer: Vec<NodeGains> = (0..s.nodes())
        .map(|i| observer_gains(&y_obs[i], &s.sensors[i].c, &ctx.precision[i], &ctx.obs, i))
        .collect();
    let controller = detector
        .iter()
        .zip(&observer)
        .map(|(d, o)| compose_controller_gains(&d.hat, o))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = ctx.warnings.clone();
    let (baseline, baseline_report) = if opts.baseline {
        match design_layer(ctx, LayerKind::Baseline, None, opts) {
            Ok((feas, bis)) => {
                let ys = feas.solutions().expect("feasible layer has solutions");
                let gains = BaselineGains {
                    bar_gamma2: feas.gamma2,
                    observer: (0..s.nodes())
                        .map(|i| observer_gains(&ys[i], &s.sensors[i].c, &ctx.precision[i], &ctx.obs, i))
                        .collect(),
                };
                (Some(gains), Some(layer_report(ctx, feas, bis, LayerKind::Baseline)))
            }
            Err(e) => {
                warnings.push(format!("baseline observer not designed: {e}"));
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    for (name, bis) in [("detector", &det_bis), ("observer", &obs_bis)] {
        if let Some(b) = bis {
            if !b.monotone {
                warnings.push(format!("{name} feasibility is not monotone on the probe set"));
            }
        }
    }

    let gains = SynthesizedGains {
        scenario_hash: s.design_hash(),
        gamma2: det_feas.gamma2,
        bar_gamma2: obs_feas.gamma2,
        observer,
        detector,
        controller,
        baseline,
        y_detector: y_det,
        y_observer: y_obs,
    };

    let lti = ctx.feasibility.lti;
    let certificate = if lti {
        "infinite-horizon (stabilising algebraic Riccati solutions)".to_string()
    } else {
        format!("horizon-limited certificate (T = {})", ctx.feasibility.horizon)
    };
    let stabilizable = lti.then(|| is_stabilizable(s.plant.a.initial(), s.plant.b.initial(), 1e-9));
    let closed_loop_abscissa = if lti {
        match crate::simcore::assemble_closed_loop(s, &gains, crate::simcore::Mode::Resilient) {
            Ok(cl) => Some(cl.error_abscissa(0.0)),
            Err(e) => {
                warnings.push(format!("closed-loop assembly failed: {e}"));
                None
            }
        }
    } else {
        None
    };
    let attack_classes = ctx
        .systems
        .iter()
        .filter(|sys| sys.bias.n_f > 0)
        .map(|sys| AttackClassReport {
            node: sys.node + 1,
            certificate: sys.bias.certificate.clone(),
            order: sys.n_eps(),
            f_hat: sys.f_hat.clone(),
            gamma_check: sys.gamma_check.clone(),
        })
        .collect();
    let report = SynthesisReport {
        scenario_hash: gains.scenario_hash.clone(),
        method: SUBOPTIMAL_LABEL.into(),
        certificate,
        graph_assumed: s.graph.graph_assumed,
        detector: layer_report(ctx, det_feas, det_bis, LayerKind::Detector),
        observer: layer_report(ctx, obs_feas, obs_bis, LayerKind::Observer),
        baseline: baseline_report,
        stabilizable,
        closed_loop_abscissa,
        attack_classes,
        warnings,
    };
    Ok(Synthesis { gains, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_example_scenario;

    #[test]
    fn example_is_feasible_at_unit_levels() {
        let s = builtin_example_scenario();
        let ctx = DesignContext::new(&s, &SynthesisOptions::from_scenario(&s)).unwrap();
        assert!(ctx.check_detector_feasibility(1.0).feasible);
        assert!(ctx.check_observer_feasibility(1.0).feasible);
        assert!(!ctx.check_detector_feasibility(1e-12).feasible);
        assert!(!ctx.check_observer_feasibility(1e-12).feasible);
    }

    #[test]
    fn fixed_infeasible_level_names_the_layer() {
        let s = builtin_example_scenario();
        let mut opts = SynthesisOptions::from_scenario(&s);
        opts.gamma2 = Some(1e-12);
        match synthesize(&s, &opts) {
            Err(Error::Infeasible { layer, .. }) => assert_eq!(layer, "detector"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn example_gain_shapes_and_composition() {
        let s = builtin_example_scenario();
        let mut opts = SynthesisOptions::from_scenario(&s);
        opts.gamma2 = Some(1.0);
        opts.bar_gamma2 = Some(1.0);
        opts.baseline = false;
        let out = synthesize(&s, &opts).unwrap();
        let g = &out.gains;
        for i in 0..6 {
            assert_eq!(g.observer[i].l.shape(), (6, 2));
            assert_eq!(g.detector[i].hat.k[0].k.shape(), (6, 6));
            assert_eq!(g.detector[i].check.k[0].k.shape(), (2, 6));
            let back = g.controller[i].l.initial() + g.observer[i].l.initial();
            let hat = g.detector[i].hat.l.initial();
            assert!((back - hat).abs().max() <= 4.0 * f64::EPSILON * hat.abs().max());
        }
        assert_eq!(out.report.method, SUBOPTIMAL_LABEL);
        assert_eq!(out.report.stabilizable, Some(true));
    }
}
