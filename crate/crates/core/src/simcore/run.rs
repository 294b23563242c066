use std::io::Write;

use nalgebra_sparse::CsrMatrix;
use serde::Serialize;

use super::{assemble_closed_loop, ClosedLoopSystem, InputLayout, Mode, StateLayout};
use crate::attackclass::{attack_salt, disturbance_salt, Channel, CompiledSignal};
use crate::error::{Error, Result};
use crate::model::{Scenario, SimulationSpec};
use crate::numerics::{check_state, Grid, Rk4};
use crate::synthesis::SynthesizedGains;

/// Recorded closed-loop run. Rows are the decimated grid samples.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub mode: Mode,
    pub layout: StateLayout,
    #[serde(skip)]
    pub inputs: InputLayout,
    pub step: f64,
    pub seed: u64,
    pub times: Vec<f64>,
    /// Full joint state, auxiliary filters included.
    #[serde(skip)]
    pub states: Vec<Vec<f64>>,
    /// Exogenous input vector `[w; v; v_comm; v_ctrl; f]`.
    #[serde(skip)]
    pub disturbances: Vec<Vec<f64>>,
    /// `e_i = x − x̂_i`, nodes concatenated.
    #[serde(skip)]
    pub errors: Vec<Vec<f64>>,
    /// `u_i = Υ_i ε̂_i`, nodes concatenated (zero in baseline mode).
    #[serde(skip)]
    pub outputs: Vec<Vec<f64>>,
    /// Local innovations `ζ_i`, nodes concatenated.
    #[serde(skip)]
    pub innovations: Vec<Vec<f64>>,
    /// Sensor output dimension per node.
    #[serde(skip)]
    pub output_widths: Vec<usize>,
    pub warnings: Vec<String>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.layout.nodes
    }

    pub fn x(&self, k: usize) -> &[f64] {
        &self.states[k][self.layout.x()]
    }

    pub fn xhat(&self, k: usize, i: usize) -> &[f64] {
        &self.states[k][self.layout.xhat(i)]
    }

    pub fn e(&self, k: usize, i: usize) -> &[f64] {
        let n = self.layout.n;
        &self.errors[k][i * n..(i + 1) * n]
    }

    fn node_offset(&self, i: usize) -> usize {
        self.inputs.f[..i].iter().map(|r| r.len()).sum()
    }

    pub fn u(&self, k: usize, i: usize) -> &[f64] {
        let o = self.node_offset(i);
        &self.outputs[k][o..o + self.inputs.f[i].len()]
    }

    pub fn f(&self, k: usize, i: usize) -> &[f64] {
        &self.disturbances[k][self.inputs.f[i].clone()]
    }

    pub fn zeta(&self, k: usize, i: usize) -> &[f64] {
        let o: usize = self.output_widths[..i].iter().sum();
        &self.innovations[k][o..o + self.output_widths[i]]
    }

    /// Class residual `ν_i = Υ_i ε_i − f_i` from the auxiliary filter.
    pub fn nu(&self, k: usize, i: usize, upsilon: &crate::mat::Mat) -> Vec<f64> {
        let eps = &self.states[k][self.layout.aux(i)];
        let f = self.f(k, i);
        (0..f.len())
            .map(|r| (0..eps.len()).map(|c| upsilon[(r, c)] * eps[c]).sum::<f64>() - f[r])
            .collect()
    }

    /// `max_k ‖e_i(t_k)‖` over samples with `t ∈ [from, to]`.
    pub fn max_error_norm(&self, i: usize, from: f64, to: f64) -> f64 {
        self.window(from, to).map(|k| norm(self.e(k, i))).fold(0.0, f64::max)
    }

    /// Sample indices with time in `[from, to]`.
    pub fn window(&self, from: f64, to: f64) -> impl Iterator<Item = usize> + '_ {
        let eps = 1e-9 * self.step;
        (0..self.len()).filter(move |&k| self.times[k] >= from - eps && self.times[k] <= to + eps)
    }

    /// CSV with columns `t`, the joint state blocks, then `e{i}`, `u{i}`, `f{i}` per node (1-based).
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let l = &self.layout;
        let mut cols = vec!["t".to_string()];
        cols.extend((0..l.n).map(|c| format!("x[{c}]")));
        for i in 0..l.nodes {
            cols.extend((0..l.n).map(|c| format!("xhat{}[{c}]", i + 1)));
        }
        if l.mode == Mode::Resilient {
            for i in 0..l.nodes {
                cols.extend((0..l.n).map(|c| format!("ehat{}[{c}]", i + 1)));
            }
            for i in 0..l.nodes {
                cols.extend((0..l.n_eps[i]).map(|c| format!("epshat{}[{c}]", i + 1)));
            }
        }
        for i in 0..l.nodes {
            cols.extend((0..l.n).map(|c| format!("e{}[{c}]", i + 1)));
        }
        if l.mode == Mode::Resilient {
            for i in 0..l.nodes {
                cols.extend((0..self.inputs.f[i].len()).map(|c| format!("u{}[{c}]", i + 1)));
            }
        }
        for i in 0..l.nodes {
            cols.extend((0..self.inputs.f[i].len()).map(|c| format!("f{}[{c}]", i + 1)));
        }
        writeln!(out, "{}", cols.join(","))?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            let mut push = |v: f64| {
                if !line.is_empty() {
                    line.push(',');
                }
                line.push_str(&format!("{v:e}"));
            };
            push(self.times[k]);
            self.states[k][..l.dim].iter().for_each(|&v| push(v));
            self.errors[k].iter().for_each(|&v| push(v));
            if l.mode == Mode::Resilient {
                self.outputs[k].iter().for_each(|&v| push(v));
            }
            self.disturbances[k][self.inputs.disturbance_len()..].iter().for_each(|&v| push(v));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Compiled exogenous inputs: `(index into d, signal)`.
struct Inputs {
    signals: Vec<(usize, CompiledSignal)>,
    len: usize,
}

impl Inputs {
    fn fill(&self, t: f64, d: &mut [f64]) {
        d.fill(0.0);
        for (idx, sig) in &self.signals {
            d[*idx] += sig.eval(t);
        }
    }
}

fn compile_inputs(s: &Scenario, layout: &InputLayout, sim: &SimulationSpec) -> Result<Inputs> {
    let nodes = s.nodes();
    let mut signals = Vec::new();
    let slot = |range: &std::ops::Range<usize>, component: usize, what: &str| -> Result<usize> {
        if component >= range.len() {
            return Err(Error::Invalid(format!(
                "{what}: component {component} out of range (width {})",
                range.len()
            )));
        }
        Ok(range.start + component)
    };
    for a in &sim.attacks {
        a.check()?;
        if a.node == 0 || a.node > nodes {
            return Err(Error::Invalid(format!("attack on unknown node {}", a.node)));
        }
        let idx = slot(&layout.f[a.node - 1], a.component, &format!("attack at node {}", a.node))?;
        signals.push((idx, CompiledSignal::from_bias(&a.bias, &a.masking, sim.seed, attack_salt(a))));
    }
    for (k, d) in sim.disturbances.iter().enumerate() {
        d.check()?;
        let edge = |from: usize, to: usize| {
            s.graph
                .find_edge(from.wrapping_sub(1), to.wrapping_sub(1))
                .ok_or_else(|| Error::Invalid(format!("disturbance on missing edge ({from},{to})")))
        };
        let range = match &d.channel {
            Channel::Plant => layout.w.clone(),
            Channel::Sensor { node } => layout
                .v
                .get(node.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("disturbance on unknown node {node}")))?,
            Channel::Comm { from, to } => layout.v_comm[edge(*from, *to)?].clone(),
            Channel::Ctrl { from, to } => layout.v_ctrl[edge(*from, *to)?].clone(),
        };
        let idx = slot(&range, d.component, "disturbance")?;
        signals.push((idx, CompiledSignal::new(std::slice::from_ref(&d.signal), sim.seed, disturbance_salt(k))));
    }
    Ok(Inputs {
        signals,
        len: layout.total,
    })
}

fn spmv_add(m: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let (offsets, cols, vals) = (m.row_offsets(), m.col_indices(), m.values());
    for (r, y_r) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for p in offsets[r]..offsets[r + 1] {
            acc += vals[p] * x[cols[p]];
        }
        *y_r += acc;
    }
}

fn initial_state(s: &Scenario, layout: &StateLayout, sim: &SimulationSpec) -> Result<Vec<f64>> {
    let n = s.n();
    if sim.x0.len() != n {
        return Err(Error::dim("simulation.x0", format!("expected {n} entries, found {}", sim.x0.len())));
    }
    let xi = sim.initial_estimates(s.nodes());
    if xi.len() != s.nodes() || xi.iter().any(|v| v.len() != n) {
        return Err(Error::dim("simulation.xi", format!("expected {} vectors of length {n}", s.nodes())));
    }
    let mut z = vec![0.0; layout.total];
    z[layout.x()].copy_from_slice(&sim.x0);
    for (i, v) in xi.iter().enumerate() {
        z[layout.xhat(i)].copy_from_slice(v);
    }
    Ok(z)
}

struct Recorder<'a> {
    sys: &'a ClosedLoopSystem,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, z: &[f64], d: &[f64]) {
        let sys = self.sys;
        let l = &sys.layout;
        let s = &sys.scenario;
        let x = &z[l.x()];
        let mut e = Vec::with_capacity(l.nodes * l.n);
        let mut u = Vec::new();
        let mut zeta = Vec::new();
        for i in 0..l.nodes {
            let xh = &z[l.xhat(i)];
            e.extend(x.iter().zip(xh).map(|(a, b)| a - b));
            let nf = sys.inputs.f[i].len();
            if l.mode == Mode::Resilient && l.n_eps[i] > 0 {
                let eps = &z[l.eps(i)];
                let ups = &sys.bias[i].upsilon;
                u.extend((0..nf).map(|r| (0..eps.len()).map(|c| ups[(r, c)] * eps[c]).sum::<f64>()));
            } else {
                u.extend(std::iter::repeat_n(0.0, nf));
            }
            let c = s.sensors[i].c.at(t);
            let dm = s.sensors[i].d.at(t);
            let v = &d[sys.inputs.v[i].clone()];
            for r in 0..c.nrows() {
                let mut acc = 0.0;
                for k in 0..l.n {
                    acc += c[(r, k)] * (x[k] - xh[k]);
                }
                for k in 0..v.len() {
                    acc += dm[(r, k)] * v[k];
                }
                zeta.push(acc);
            }
        }
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.states.push(z.to_vec());
        tr.disturbances.push(d.to_vec());
        tr.errors.push(e);
        tr.outputs.push(u);
        tr.innovations.push(zeta);
    }
}

/// Integrates the closed loop with fixed-step RK4 over the scenario grid.
pub fn run_simulation(sys: &ClosedLoopSystem, sim: &SimulationSpec) -> Result<Trajectory> {
    if !(sim.step > 0.0 && sim.step.is_finite()) || !(sim.t_end > 0.0) {
        return Err(Error::Invalid("simulation step and horizon must be positive".into()));
    }
    let s = &sys.scenario;
    let l = &sys.layout;
    let inputs = compile_inputs(s, &sys.inputs, sim)?;
    let mut z = initial_state(s, l, sim)?;
    let grid = Grid {
        t0: 0.0,
        step: sim.step,
        n_steps: sim.n_steps(),
        record_every: sim.record_every,
    };

    let warnings: Vec<String> = sys.step_warning(sim.step).into_iter().collect();

    let mut rec = Recorder {
        sys,
        traj: Trajectory {
            mode: sys.mode,
            layout: l.clone(),
            inputs: sys.inputs.clone(),
            step: sim.step,
            seed: sim.seed,
            times: Vec::new(),
            states: Vec::new(),
            disturbances: Vec::new(),
            errors: Vec::new(),
            outputs: Vec::new(),
            innovations: Vec::new(),
            output_widths: s.sensors.iter().map(|sn| sn.p()).collect(),
            warnings,
        },
    };
    let mut d = vec![0.0; inputs.len];
    inputs.fill(0.0, &mut d);
    rec.record(0.0, &z, &d);

    let mut field = |t: f64, z: &[f64], dz: &mut [f64]| {
        let p = sys.piece_at(t);
        dz.fill(0.0);
        spmv_add(&p.a_csr, z, dz);
        inputs.fill(t, &mut d);
        spmv_add(&p.b_csr, &d, dz);
    };
    let mut rk = Rk4::new(l.total);
    for k in 0..grid.n_steps {
        rk.step(&mut field, grid.time(k), &mut z, grid.step);
        let t = grid.time(k + 1);
        check_state(&z, t, k + 1)?;
        if grid.records(k + 1) {
            let mut dk = vec![0.0; inputs.len];
            inputs.fill(t, &mut dk);
            rec.record(t, &z, &dk);
        }
    }
    Ok(rec.traj)
}

/// Runs the non-resilient observer network (no detector, no compensation) under the same inputs.
pub fn run_baseline(s: &Scenario, gains: &SynthesizedGains, sim: &SimulationSpec) -> Result<Trajectory> {
    let sys = assemble_closed_loop(s, gains, Mode::Baseline)?;
    run_simulation(&sys, sim)
}
