use serde::Serialize;

use super::{PerformanceWeight, Scenario};
use crate::attackclass::{realize_bias_model, Channel};
use crate::error::{Error, Result};
use crate::mat::{asymmetry, Mat};
use crate::numerics::sym_eig_bounds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IssueKind {
    Dimension,
    /// `D_i D_iᵀ` singular at the 1-based node.
    SingularNoise { node: usize },
    NotL2,
    Invalid,
    Disconnected,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub field: String,
    pub message: String,
    #[serde(flatten)]
    pub kind: IssueKind,
}

impl Issue {
    pub fn to_error(&self) -> Error {
        match self.kind {
            IssueKind::Dimension => Error::dim(&self.field, &self.message),
            IssueKind::SingularNoise { node } => Error::SingularNoise { node },
            IssueKind::NotL2 => Error::NotL2(format!("{}: {}", self.field, self.message)),
            _ => Error::Invalid(format!("{}: {}", self.field, self.message)),
        }
    }
}

/// Violated invariants of a scenario. Empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub graph_assumed: bool,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    /// First error as `Err`; warnings pass.
    pub fn into_result(self) -> Result<ValidationReport> {
        if let Some(issue) = self.errors().next() {
            return Err(issue.to_error());
        }
        Ok(self)
    }

    fn push(&mut self, severity: Severity, kind: IssueKind, field: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity,
            field: field.into(),
            message: message.into(),
            kind,
        });
    }

    fn dim(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, IssueKind::Dimension, field, message);
    }

    fn invalid(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, IssueKind::Invalid, field, message);
    }
}

const SYM_TOL: f64 = 1e-10;

fn check_spd(r: &mut ValidationReport, field: &str, m: &Mat, size: usize, semi: bool) {
    if m.shape() != (size, size) {
        r.dim(field, format!("expected {size}×{size}, found {}×{}", m.nrows(), m.ncols()));
        return;
    }
    if !m.iter().all(|v| v.is_finite()) {
        r.invalid(field, "non-finite entry");
        return;
    }
    if asymmetry(m) > SYM_TOL * m.norm().max(1.0) {
        r.invalid(field, "not symmetric");
        return;
    }
    if size == 0 {
        return;
    }
    let (lo, _) = sym_eig_bounds(m).expect("symmetry checked");
    if semi && lo < -SYM_TOL * m.norm().max(1.0) {
        r.invalid(field, format!("not positive semidefinite (min eigenvalue {lo:e})"));
    } else if !semi && lo <= 0.0 {
        r.invalid(field, format!("not positive definite (min eigenvalue {lo:e})"));
    }
}

/// Checks every cross-field invariant of a scenario.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut r = ValidationReport {
        graph_assumed: s.graph.graph_assumed,
        ..Default::default()
    };
    let n = s.plant.n();
    let nodes = s.sensors.len();

    // plant
    if s.plant.a.ncols() != n {
        r.dim("plant.a", format!("A must be square, found {:?}", s.plant.a.shape()));
    }
    if s.plant.b.nrows() != n {
        r.dim("plant.b", format!("B needs {n} rows, found {}", s.plant.b.nrows()));
    }
    if !s.plant.a.all_finite() || !s.plant.b.all_finite() {
        r.invalid("plant", "non-finite entry");
    }

    // sensors
    if nodes == 0 {
        r.invalid("sensors", "at least one sensor node is required");
    }
    for (i, sn) in s.sensors.iter().enumerate() {
        let label = i + 1;
        if sn.c.ncols() != n {
            r.dim(format!("sensors[{label}].c"), format!("C needs {n} columns, found {}", sn.c.ncols()));
        }
        if sn.d.nrows() != sn.c.nrows() {
            r.dim(
                format!("sensors[{label}].d"),
                format!("D needs {} rows, found {}", sn.c.nrows(), sn.d.nrows()),
            );
            continue;
        }
        if !sn.c.all_finite() || !sn.d.all_finite() {
            r.invalid(format!("sensors[{label}]"), "non-finite entry");
            continue;
        }
        let singular = sn.d.matrices().iter().any(|d| {
            let dd = *d * d.transpose();
            dd.nrows() == 0 || sym_eig_bounds(&crate::mat::symmetrize(&dd)).map_or(true, |(lo, _)| lo <= 1e-12)
        });
        if singular {
            r.push(
                Severity::Error,
                IssueKind::SingularNoise { node: label },
                format!("sensors[{label}].d"),
                format!("D·Dᵀ singular at node {label}"),
            );
        }
    }

    // graph
    if s.graph.nodes != nodes {
        r.dim("graph.nodes", format!("graph has {} nodes but there are {nodes} sensors", s.graph.nodes));
    }
    for e in &s.graph.edges {
        let label = format!("graph.edges({},{})", e.from + 1, e.to + 1);
        if e.w.ncols() != n {
            r.dim(&label, format!("edge ({},{}): W needs {n} columns, found {}", e.from + 1, e.to + 1, e.w.ncols()));
        }
        if e.h.nrows() != e.p() || e.hc.nrows() != e.p() {
            r.dim(&label, format!("edge ({},{}): H and H_c need {} rows", e.from + 1, e.to + 1, e.p()));
        }
    }
    if !s.graph.is_weakly_connected() {
        r.push(
            Severity::Warning,
            IssueKind::Disconnected,
            "graph",
            "graph not connected; components may be solved separately",
        );
    }

    // attack class
    if s.attack_class.0.len() != nodes {
        r.dim(
            "attack_class",
            format!("expected {nodes} entries (null for trusted nodes), found {}", s.attack_class.0.len()),
        );
    }
    for (i, ac) in s.attack_class.0.iter().enumerate() {
        let Some(ac) = ac else { continue };
        let field = format!("attack_class[{}]", i + 1);
        if ac.f.nrows() != n {
            r.dim(&field, format!("F needs {n} rows, found {}", ac.f.nrows()));
            continue;
        }
        if ac.n_f() == 0 {
            continue;
        }
        if let Some(fb) = &ac.f_bar {
            if fb.shape() != ac.f.shape() {
                r.dim(&field, format!("F̄ must be {}×{}", n, ac.n_f()));
            }
        }
        match realize_bias_model(&ac.g, ac.n_f()) {
            Ok(bm) => {
                if !bm.certificate.stable {
                    r.invalid(&field, "attack-class filter G/(s+G) is not stable");
                }
                if let Some(fc) = &ac.f_check {
                    if fc.shape() != (bm.order(), ac.n_f()) {
                        r.dim(&field, format!("F̌ must be {}×{}", bm.order(), ac.n_f()));
                    }
                }
            }
            Err(e) => r.invalid(&field, e.to_string()),
        }
    }

    // weights
    let w = &s.weights;
    if !(w.alpha > 0.0 && w.alpha.is_finite()) {
        r.invalid("weights.alpha", "alpha must be positive");
    }
    for (name, g) in [("weights.gamma2", w.gamma2), ("weights.bar_gamma2", w.bar_gamma2)] {
        if let Some(g) = g {
            if !(g > 0.0 && g.is_finite()) {
                r.invalid(name, "attenuation level must be positive and finite");
            }
        }
    }
    if !(w.design_margin >= 1.0 && w.design_margin.is_finite()) {
        r.invalid("weights.design_margin", "design margin must be at least 1");
    }
    if let super::WeightRule::Shaped { beta, theta_slack } = w.rule {
        if !(beta >= 0.0 && theta_slack >= 0.0) {
            r.invalid("weights.rule", "beta and theta_slack must be non-negative");
        }
    }
    for (layer, zs) in [("weights.z", &w.z), ("weights.z_bar", &w.z_bar)] {
        for e in &s.graph.edges {
            let field = format!("{layer}({},{})", e.from + 1, e.to + 1);
            match zs.for_edge(e.from, e.to) {
                Some(z) => check_spd(&mut r, &field, z, e.p(), false),
                None => r.invalid(field, "no weight for this edge and no default"),
            }
        }
        for ew in &zs.edges {
            if ew.from == 0 || ew.to == 0 || s.graph.find_edge(ew.from - 1, ew.to - 1).is_none() {
                r.invalid(format!("{layer}({},{})", ew.from, ew.to), "weight given for an edge not in the graph");
            }
        }
    }
    for (name, xs) in [("weights.x", &w.x), ("weights.x_bar", &w.x_bar)] {
        if let Some(xs) = xs {
            if xs.len() != nodes {
                r.dim(name, format!("expected {nodes} matrices, found {}", xs.len()));
            }
            for (i, x) in xs.iter().enumerate() {
                check_spd(&mut r, &format!("{name}[{}]", i + 1), x, n, false);
            }
        }
    }
    if let Some(x0) = &w.x0 {
        if x0.len() != nodes {
            r.dim("weights.x0", format!("expected {nodes} matrices, found {}", x0.len()));
        }
        for (i, m) in x0.iter().enumerate() {
            let order = s
                .attack_class
                .node(i)
                .and_then(|ac| realize_bias_model(&ac.g, ac.n_f()).ok())
                .map_or(0, |bm| bm.order());
            check_spd(&mut r, &format!("weights.x0[{}]", i + 1), m, order, false);
        }
    }
    if w.x.is_some() != w.x0.is_some() {
        r.invalid("weights.x0", "x and x0 must be given together");
    }
    if let PerformanceWeight::Matrix(p) = &w.p {
        check_spd(&mut r, "weights.p", p, nodes * n, true);
    }

    // simulation
    let sim = &s.simulation;
    if !(sim.t_end > 0.0 && sim.t_end.is_finite()) {
        r.invalid("simulation.t_end", "t_end must be positive");
    }
    if !(sim.step > 0.0 && sim.step.is_finite()) {
        r.invalid("simulation.step", "step must be positive");
    }
    if sim.record_every == 0 {
        r.invalid("simulation.record_every", "must be at least 1");
    }
    if let Some(h) = sim.ltv_horizon {
        if !(h > 0.0 && h.is_finite()) {
            r.invalid("simulation.ltv_horizon", "horizon must be positive");
        }
    }
    if sim.x0.len() != n {
        r.dim("simulation.x0", format!("expected {n} entries, found {}", sim.x0.len()));
    }
    if let Some(xi) = &sim.xi {
        if xi.len() != nodes || xi.iter().any(|v| v.len() != n) {
            r.dim("simulation.xi", format!("expected {nodes} vectors of length {n}"));
        }
    }
    for (k, a) in sim.attacks.iter().enumerate() {
        let field = format!("simulation.attacks[{k}]");
        if a.node == 0 || a.node > nodes {
            r.invalid(&field, format!("node {} out of range", a.node));
            continue;
        }
        match s.attack_class.node(a.node - 1) {
            None => r.invalid(&field, format!("node {} is trusted (no attack channel)", a.node)),
            Some(ac) if a.component >= ac.n_f() => {
                r.dim(&field, format!("component {} but n_f = {}", a.component, ac.n_f()))
            }
            _ => {}
        }
        if let Err(e) = a.check() {
            let kind = if matches!(e, Error::NotL2(_)) { IssueKind::NotL2 } else { IssueKind::Invalid };
            r.push(Severity::Error, kind, &field, e.to_string());
        }
    }
    for (k, d) in sim.disturbances.iter().enumerate() {
        let field = format!("simulation.disturbances[{k}]");
        let width = match d.channel {
            Channel::Plant => Some(s.plant.n_w()),
            Channel::Sensor { node } => (node >= 1 && node <= nodes).then(|| s.sensors[node - 1].n_v()),
            Channel::Comm { from, to } | Channel::Ctrl { from, to } => (from >= 1 && to >= 1)
                .then(|| s.graph.find_edge(from - 1, to - 1))
                .flatten()
                .map(|e| {
                    let e = &s.graph.edges[e];
                    if matches!(d.channel, Channel::Comm { .. }) { e.h.ncols() } else { e.hc.ncols() }
                }),
        };
        match width {
            None => r.invalid(&field, "channel refers to a node or edge that does not exist"),
            Some(wd) if d.component >= wd => r.dim(&field, format!("component {} but channel width {wd}", d.component)),
            _ => {}
        }
        if let Err(e) = d.check() {
            let kind = if matches!(e, Error::NotL2(_)) { IssueKind::NotL2 } else { IssueKind::Invalid };
            r.push(Severity::Error, kind, &field, e.to_string());
        }
    }
    r
}
