//! Problem description: plant, sensors, communication graph, attack class,
//! design weights and simulation inputs, plus the JSON scenario document.

mod builtin;
mod graph;
mod schedule;
mod validate;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use builtin::builtin_example_scenario;
pub use graph::{Edge, NetworkGraph};
pub use schedule::{Interp, MatrixSchedule};
pub use validate::{validate_scenario, Issue, IssueKind, Severity, ValidationReport};

use crate::attackclass::{AttackSignalSpec, DisturbanceSpec};
use crate::error::{Error, Result};
use crate::mat::{rows, rows_opt, rows_vec_opt, Mat};

/// Plant `ẋ = A(t)x + B(t)w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantModel {
    pub a: MatrixSchedule,
    pub b: MatrixSchedule,
}

impl PlantModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_w(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_lti(&self) -> bool {
        self.a.is_constant() && self.b.is_constant()
    }
}

/// Sensor `y_i = C_i(t)x + D_i(t)v_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNode {
    pub c: MatrixSchedule,
    pub d: MatrixSchedule,
}

impl SensorNode {
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_v(&self) -> usize {
        self.d.ncols()
    }

    pub fn is_lti(&self) -> bool {
        self.c.is_constant() && self.d.is_constant()
    }

    /// Information weight `Cᵀ(DDᵀ)⁻¹C` as a schedule.
    pub fn information(&self) -> Result<MatrixSchedule> {
        let inv = self.noise_precision()?;
        Ok(self.c.zip_with(&inv, |c, r| c.transpose() * r * c))
    }

    /// `(DDᵀ)⁻¹` as a schedule.
    pub fn noise_precision(&self) -> Result<MatrixSchedule> {
        for d in self.d.matrices() {
            crate::mat::spd_inverse(&(d * d.transpose()))
                .ok_or_else(|| Error::Invalid("D·Dᵀ is not invertible".into()))?;
        }
        Ok(self
            .d
            .map(|d| crate::mat::spd_inverse(&(d * d.transpose())).expect("checked above")))
    }
}

/// Scalar rational transfer function `N(s)/D(s)`, coefficients from the highest power down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: &[f64], den: &[f64]) -> Self {
        TransferFunction {
            num: num.to_vec(),
            den: den.to_vec(),
        }
    }
}

/// Admissible attack class at one node. Absent (`null`) entries mark trusted nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeAttackClass {
    /// Attack input matrix `F_i` (n × n_f).
    #[serde(with = "rows")]
    pub f: Mat,
    /// Defender's detector-injection offset `F̄_i`; zero when absent.
    #[serde(default, with = "rows_opt", skip_serializing_if = "Option::is_none")]
    pub f_bar: Option<Mat>,
    /// Defender's bias-state injection `F̌_i`; zero when absent.
    #[serde(default, with = "rows_opt", skip_serializing_if = "Option::is_none")]
    pub f_check: Option<Mat>,
    pub g: TransferFunction,
}

impl NodeAttackClass {
    pub fn n_f(&self) -> usize {
        self.f.ncols()
    }

    /// `F̂_i = F_i + F̄_i`.
    pub fn f_hat(&self) -> Mat {
        match &self.f_bar {
            Some(fb) => &self.f + fb,
            None => self.f.clone(),
        }
    }

    pub fn f_bar_or_zero(&self) -> Mat {
        self.f_bar
            .clone()
            .unwrap_or_else(|| Mat::zeros(self.f.nrows(), self.f.ncols()))
    }

    pub fn f_check_or_zero(&self, n_eps: usize) -> Mat {
        self.f_check
            .clone()
            .unwrap_or_else(|| Mat::zeros(n_eps, self.f.ncols()))
    }
}

/// Per-node attack classes, in node order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttackClassSpec(pub Vec<Option<NodeAttackClass>>);

impl AttackClassSpec {
    pub fn node(&self, i: usize) -> Option<&NodeAttackClass> {
        self.0.get(i).and_then(Option::as_ref).filter(|c| c.n_f() > 0)
    }
}

/// Edge weight matrices (`Z_ij` or `Z̄_ij`): a default plus per-edge overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EdgeWeights {
    #[serde(default, with = "rows_opt", skip_serializing_if = "Option::is_none")]
    pub default: Option<Mat>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeWeight>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeWeight {
    /// 1-based node labels.
    pub from: usize,
    pub to: usize,
    #[serde(with = "rows")]
    pub m: Mat,
}

impl EdgeWeights {
    pub fn uniform(m: Mat) -> Self {
        EdgeWeights {
            default: Some(m),
            edges: vec![],
        }
    }

    /// Weight for the 0-based edge `from → to`.
    pub fn for_edge(&self, from: usize, to: usize) -> Option<&Mat> {
        self.edges
            .iter()
            .find(|e| e.from == from + 1 && e.to == to + 1)
            .map(|e| &e.m)
            .or(self.default.as_ref())
    }
}

/// Performance weight `P` on the stacked estimation error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceWeight {
    /// `(ℒ + ℒ_T) ⊗ I`, penalising disagreement between neighbouring estimates.
    #[default]
    Consensus,
    Zero,
    Matrix(#[serde(with = "rows")] Mat),
}

/// How the Riccati weights `R_i`, `R̄_i` are chosen for a given attenuation level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightRule {
    /// `R_i = γ²T_i + cI` with `T_i = θ·S_net,i + β·C_iᵀ(DDᵀ)⁻¹C_i` and θ the
    /// smallest value making the interconnection penalty plus `T` PSD, inflated by `theta_slack`.
    Shaped { beta: f64, theta_slack: f64 },
    /// `R_i = cI` with the smallest `c` satisfying the dissipativity inequality.
    Isotropic,
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::Shaped {
            beta: 0.1,
            theta_slack: 0.02,
        }
    }
}

/// Choice of the bias-state weight `Ř_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CheckWeightRule {
    /// `Ř_i = Υ_iᵀΥ_i + αI`.
    #[default]
    RankAware,
    /// `Ř_i = (λ_max(Υ_iᵀΥ_i) + α)I`.
    Isotropic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignWeights {
    /// Detector-layer edge weights `Z_ij`.
    pub z: EdgeWeights,
    /// Observer-layer edge weights `Z̄_ij`.
    pub z_bar: EdgeWeights,
    /// Initial-error weights `X_i`; absent means steady-state initialisation.
    #[serde(default, with = "rows_vec_opt", skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Mat>>,
    #[serde(default, with = "rows_vec_opt", skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Mat>>,
    #[serde(default, with = "rows_vec_opt", skip_serializing_if = "Option::is_none")]
    pub x_bar: Option<Vec<Mat>>,
    #[serde(default)]
    pub p: PerformanceWeight,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bar_gamma2: Option<f64>,
    #[serde(default)]
    pub rule: WeightRule,
    #[serde(default)]
    pub check_rule: CheckWeightRule,
    /// Gains are computed at `design_margin × γ*²` when the level is bisected.
    #[serde(default = "default_margin")]
    pub design_margin: f64,
}

fn default_alpha() -> f64 {
    1e-3
}

fn default_margin() -> f64 {
    1.1
}

fn default_record() -> usize {
    1
}

/// Simulation grid, initial conditions and exogenous inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub t_end: f64,
    pub step: f64,
    #[serde(default = "default_record")]
    pub record_every: usize,
    pub x0: Vec<f64>,
    /// Observer initial estimates; each defaults to `x0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub attacks: Vec<AttackSignalSpec>,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceSpec>,
    /// Certification horizon for time-varying plants; `t_end` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ltv_horizon: Option<f64>,
}

impl SimulationSpec {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.step - 1e-9).ceil().max(1.0) as usize
    }

    pub fn initial_estimates(&self, nodes: usize) -> Vec<Vec<f64>> {
        self.xi
            .clone()
            .unwrap_or_else(|| vec![self.x0.clone(); nodes])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub plant: PlantModel,
    pub sensors: Vec<SensorNode>,
    pub graph: NetworkGraph,
    pub attack_class: AttackClassSpec,
    pub weights: DesignWeights,
    pub simulation: SimulationSpec,
}

impl Scenario {
    pub fn nodes(&self) -> usize {
        self.sensors.len()
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn is_lti(&self) -> bool {
        self.plant.is_lti() && self.sensors.iter().all(SensorNode::is_lti)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_pretty(self)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("scenario serialises");
        hex::encode(Sha256::digest(&json))
    }

    /// SHA-256 over the parts that determine the gains: plant, sensors, graph,
    /// attack class and weights. Simulation settings are excluded.
    pub fn design_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        #[derive(Serialize)]
        struct Design<'a> {
            plant: &'a PlantModel,
            sensors: &'a [SensorNode],
            graph: &'a NetworkGraph,
            attack_class: &'a AttackClassSpec,
            weights: &'a DesignWeights,
        }
        let json = serde_json::to_vec(&Design {
            plant: &self.plant,
            sensors: &self.sensors,
            graph: &self.graph,
            attack_class: &self.attack_class,
            weights: &self.weights,
        })
        .expect("scenario serialises");
        hex::encode(Sha256::digest(&json))
    }

    /// Same scenario with a different communication graph.
    pub fn with_graph(&self, graph: NetworkGraph) -> Scenario {
        Scenario {
            graph,
            ..self.clone()
        }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str, what: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|source| Error::Parse {
        what: what.to_string(),
        source,
    })?;
    validate_scenario(&s).into_result()?;
    Ok(s)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, s.to_json()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
