//! Closed-loop simulation of the plant, the observer network and the attack
//! detectors under disturbance and attack inputs.
//!
//! Joint state layout: `[x; x̂_1…x̂_N; ê_1…ê_N; ε̂_1…ε̂_N]` (baseline mode keeps
//! only `[x; x̂_1…x̂_N]`), followed by one auxiliary filter per attacked node
//! that reconstructs the class residual `ν_i` from the injected `f_i`.

mod run;

use std::ops::Range;

use nalgebra_sparse::CsrMatrix;
use serde::Serialize;

pub use run::{run_baseline, run_simulation, Trajectory};

use crate::attackclass::{Channel, DisturbanceSpec, SignalTerm};

use crate::attackclass::BiasModel;
use crate::error::{Error, Result};
use crate::mat::{add_block, Mat};
use crate::model::Scenario;
use crate::numerics::{spectral_abscissa, spectral_radius};
use crate::synthesis::{node_bias_model, NodeGains, SynthesizedGains};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Resilient,
    Baseline,
}

/// Offsets of every block in the joint state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateLayout {
    pub mode: Mode,
    pub n: usize,
    pub nodes: usize,
    pub n_eps: Vec<usize>,
    eps_start: Vec<usize>,
    aux_start: Vec<usize>,
    /// Documented closed-loop dimension (auxiliary filters excluded).
    pub dim: usize,
    /// Dimension including the auxiliary filters.
    pub total: usize,
}

impl StateLayout {
    pub fn new(mode: Mode, n: usize, n_eps: Vec<usize>) -> Self {
        let nodes = n_eps.len();
        let mut off = n + nodes * n;
        if mode == Mode::Resilient {
            off += nodes * n;
        }
        let mut eps_start = Vec::with_capacity(nodes);
        if mode == Mode::Resilient {
            for &k in &n_eps {
                eps_start.push(off);
                off += k;
            }
        }
        let dim = off;
        let mut aux_start = Vec::with_capacity(nodes);
        for &k in &n_eps {
            aux_start.push(off);
            off += k;
        }
        StateLayout {
            mode,
            n,
            nodes,
            n_eps,
            eps_start,
            aux_start,
            dim,
            total: off,
        }
    }

    pub fn x(&self) -> Range<usize> {
        0..self.n
    }

    pub fn xhat(&self, i: usize) -> Range<usize> {
        let s = self.n * (1 + i);
        s..s + self.n
    }

    /// Detector error estimate `ê_i` (resilient mode only).
    pub fn ehat(&self, i: usize) -> Range<usize> {
        let s = self.n * (1 + self.nodes + i);
        s..s + self.n
    }

    /// Bias-state estimate `ε̂_i` (resilient mode only).
    pub fn eps(&self, i: usize) -> Range<usize> {
        self.eps_start[i]..self.eps_start[i] + self.n_eps[i]
    }

    /// Auxiliary residual filter of node `i`.
    pub fn aux(&self, i: usize) -> Range<usize> {
        self.aux_start[i]..self.aux_start[i] + self.n_eps[i]
    }
}

/// Offsets of the exogenous input vector `[w; v_i; v_ij; v_c,ij; f_i]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputLayout {
    pub w: Range<usize>,
    pub v: Vec<Range<usize>>,
    /// Per graph edge.
    pub v_comm: Vec<Range<usize>>,
    pub v_ctrl: Vec<Range<usize>>,
    pub f: Vec<Range<usize>>,
    pub total: usize,
}

impl InputLayout {
    pub fn new(s: &Scenario) -> Self {
        let mut off = 0;
        let mut take = |k: usize| {
            let r = off..off + k;
            off += k;
            r
        };
        let w = take(s.plant.n_w());
        let v = s.sensors.iter().map(|sn| take(sn.n_v())).collect();
        let v_comm = s.graph.edges.iter().map(|e| take(e.h.ncols())).collect();
        let v_ctrl = s.graph.edges.iter().map(|e| take(e.hc.ncols())).collect();
        let f = (0..s.nodes())
            .map(|i| take(s.attack_class.node(i).map_or(0, |c| c.n_f())))
            .collect();
        InputLayout {
            w,
            v,
            v_comm,
            v_ctrl,
            f,
            total: off,
        }
    }

    /// Start of the attack block; everything before it is disturbance.
    pub fn disturbance_len(&self) -> usize {
        self.f.first().map_or(self.total, |r| r.start)
    }
}

/// Constant-coefficient piece of the joint system `ż = 𝒜z + ℬd`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub start: f64,
    pub a: Mat,
    pub b: Mat,
    pub a_csr: CsrMatrix<f64>,
    pub b_csr: CsrMatrix<f64>,
}

/// Assembled closed loop.
#[derive(Clone, Debug)]
pub struct ClosedLoopSystem {
    pub mode: Mode,
    pub layout: StateLayout,
    pub inputs: InputLayout,
    /// Pieces in time order; a single piece for constant coefficients.
    pub pieces: Vec<Piece>,
    pub bias: Vec<BiasModel>,
    pub scenario: Scenario,
}

impl ClosedLoopSystem {
    pub fn piece_at(&self, t: f64) -> &Piece {
        let k = self.pieces.partition_point(|p| p.start <= t);
        &self.pieces[k.saturating_sub(1)]
    }

    pub fn is_time_invariant(&self) -> bool {
        self.pieces.len() == 1
    }

    /// Joint error dynamics in coordinates `[e_i = x − x̂_i; ê_i; ε̂_i]` at time `t`.
    pub fn error_dynamics(&self, t: f64) -> Mat {
        let l = &self.layout;
        let a = &self.piece_at(t).a;
        // z = T·[x; x̂; rest] with e_i = x − x̂_i; T is an involution on the (x, x̂) blocks
        let mut tm = Mat::identity(l.total, l.total);
        for i in 0..l.nodes {
            let r = l.xhat(i);
            add_block(&mut tm, r.start, 0, &Mat::identity(l.n, l.n), 1.0);
            add_block(&mut tm, r.start, r.start, &Mat::identity(l.n, l.n), -2.0);
        }
        let ae = &tm * a * &tm;
        ae.view((l.n, l.n), (l.dim - l.n, l.dim - l.n)).clone_owned()
    }

    /// Spectral abscissa of [`ClosedLoopSystem::error_dynamics`].
    pub fn error_abscissa(&self, t: f64) -> f64 {
        spectral_abscissa(&self.error_dynamics(t))
    }

    /// Largest RK4-stable step estimated from the spectral radius at `t`.
    pub fn stable_step_estimate(&self, t: f64) -> f64 {
        let a = &self.piece_at(t).a;
        let dim = self.layout.dim;
        2.785 / spectral_radius(&a.view((0, 0), (dim, dim)).clone_owned())
    }

    /// Warning text when `step` exceeds the stability estimate at `t = 0`.
    pub fn step_warning(&self, step: f64) -> Option<String> {
        let h_max = self.stable_step_estimate(0.0);
        (step > h_max).then(|| format!("step {step:e} exceeds the estimated RK4 stability bound {h_max:e}"))
    }
}

fn edge_gain<'a>(g: &'a NodeGains, from: usize, to: usize) -> Result<&'a crate::model::MatrixSchedule> {
    g.k.iter()
        .find(|k| k.from == from + 1 && k.to == to + 1)
        .map(|k| &k.k)
        .ok_or_else(|| Error::Invalid(format!("gain set has no entry for edge ({},{})", from + 1, to + 1)))
}

fn check_gains(s: &Scenario, g: &SynthesizedGains, mode: Mode) -> Result<()> {
    let nodes = s.nodes();
    let ok = match mode {
        Mode::Resilient => {
            g.observer.len() == nodes && g.detector.len() == nodes && g.controller.len() == nodes
        }
        Mode::Baseline => g.baseline.as_ref().is_some_and(|b| b.observer.len() == nodes),
    };
    if !ok {
        return Err(Error::Invalid(format!("gain set does not cover the {nodes} scenario nodes")));
    }
    let sets: Vec<&[NodeGains]> = match mode {
        Mode::Resilient => vec![&g.observer, &g.controller],
        Mode::Baseline => vec![&g.baseline.as_ref().expect("checked above").observer],
    };
    for i in 0..nodes {
        let mut want: Vec<(usize, usize)> = s.graph.in_edges(i).map(|(j, _)| (j + 1, i + 1)).collect();
        want.sort_unstable();
        for set in &sets {
            let mut have: Vec<(usize, usize)> = set[i].k.iter().map(|k| (k.from, k.to)).collect();
            have.sort_unstable();
            if have != want {
                return Err(Error::Invalid(format!(
                    "gain set edges {have:?} at node {} differ from the graph's in-edges {want:?}",
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

fn assemble_at(
    s: &Scenario,
    gains: &SynthesizedGains,
    mode: Mode,
    layout: &StateLayout,
    inputs: &InputLayout,
    bias: &[BiasModel],
    t: f64,
) -> Result<(Mat, Mat)> {
    let n = s.n();
    let mut a = Mat::zeros(layout.total, layout.total);
    let mut b = Mat::zeros(layout.total, inputs.total);
    let ap = s.plant.a.at(t);
    let x = 0;
    add_block(&mut a, x, x, &ap, 1.0);
    add_block(&mut b, x, inputs.w.start, &s.plant.b.at(t), 1.0);

    for i in 0..s.nodes() {
        let c = s.sensors[i].c.at(t);
        let d = s.sensors[i].d.at(t);
        let obs = match mode {
            Mode::Resilient => &gains.observer[i],
            Mode::Baseline => &gains.baseline.as_ref().expect("checked").observer[i],
        };
        let l = obs.l.at(t);
        if l.shape() != (n, c.nrows()) {
            return Err(Error::Invalid(format!("observer gain of node {} has the wrong shape", i + 1)));
        }
        let class = s.attack_class.node(i);
        let ne = layout.n_eps[i];
        let f = class.map_or_else(|| Mat::zeros(n, 0), |c| c.f.clone());
        let fr = inputs.f[i].start;
        let bm = &bias[i];

        // observer x̂_i
        let r = layout.xhat(i).start;
        let mut diag = &ap - &l * &c;
        add_block(&mut a, r, x, &(&l * &c), 1.0);
        add_block(&mut b, r, inputs.v[i].start, &(&l * &d), 1.0);
        let in_edges: Vec<_> = s.graph.in_edges(i).collect();
        let mut k_obs = Vec::with_capacity(in_edges.len());
        for &(k, e) in &in_edges {
            let kg = edge_gain(obs, e.from, e.to)?.at(t);
            diag -= &kg * &e.w;
            add_block(&mut a, r, layout.xhat(e.from).start, &(&kg * &e.w), 1.0);
            add_block(&mut b, r, inputs.v_comm[k].start, &(&kg * &e.h), 1.0);
            k_obs.push(kg);
        }
        add_block(&mut a, r, r, &diag, 1.0);
        add_block(&mut b, r, fr, &f, 1.0);
        // residual filter ε̇ = (Ω + ΓΥ)ε − Γf
        if ne > 0 {
            let q = layout.aux(i).start;
            add_block(&mut a, q, q, &(&bm.omega + &bm.gamma * &bm.upsilon), 1.0);
            add_block(&mut b, q, fr, &bm.gamma, -1.0);
        }
        if mode == Mode::Baseline {
            continue;
        }
        add_block(&mut a, r, layout.eps(i).start, &(&f * &bm.upsilon), -1.0);

        // detector ê_i
        let ctrl = &gains.controller[i];
        let chk = &gains.detector[i].check;
        let f_bar = class.map_or_else(|| Mat::zeros(n, 0), |c| c.f_bar_or_zero());
        let f_check = class.map_or_else(|| Mat::zeros(0, 0), |c| c.f_check_or_zero(ne));
        let lb = ctrl.l.at(t);
        let re = layout.ehat(i).start;
        let mut ediag = &diag - &lb * &c;
        add_block(&mut a, re, x, &(&lb * &c), 1.0);
        add_block(&mut a, re, r, &(&lb * &c), -1.0);
        add_block(&mut b, re, inputs.v[i].start, &(&lb * &d), 1.0);
        for (idx, &(k, e)) in in_edges.iter().enumerate() {
            let kb = edge_gain(ctrl, e.from, e.to)?.at(t);
            let kr = &k_obs[idx];
            ediag -= &kb * &e.w;
            let kw = (kr + &kb) * &e.w;
            add_block(&mut a, re, layout.ehat(e.from).start, &kw, 1.0);
            add_block(&mut b, re, inputs.v_ctrl[k].start, &((kr + &kb) * &e.hc), 1.0);
            add_block(&mut a, re, layout.xhat(e.from).start, &(&kb * &e.w), 1.0);
            add_block(&mut a, re, r, &(&kb * &e.w), -1.0);
            add_block(&mut b, re, inputs.v_comm[k].start, &(&kb * &e.h), 1.0);
        }
        add_block(&mut a, re, re, &ediag, 1.0);
        if ne == 0 {
            continue;
        }
        add_block(&mut b, re, fr, &f_bar, 1.0);
        let rs = layout.eps(i).start;
        add_block(&mut a, re, rs, &(&f_bar * &bm.upsilon), -1.0);

        // bias-state estimate ε̂_i
        let lc = chk.l.at(t);
        if lc.shape() != (ne, c.nrows()) {
            return Err(Error::Invalid(format!("detector gain of node {} has the wrong shape", i + 1)));
        }
        add_block(&mut a, rs, rs, &(&bm.omega - &f_check * &bm.upsilon), 1.0);
        let lcc = &lc * &c;
        add_block(&mut a, rs, x, &lcc, 1.0);
        add_block(&mut a, rs, r, &lcc, -1.0);
        add_block(&mut a, rs, re, &lcc, -1.0);
        add_block(&mut b, rs, inputs.v[i].start, &(&lc * &d), 1.0);
        for &(k, e) in &in_edges {
            let kc = edge_gain(chk, e.from, e.to)?.at(t);
            let kw = &kc * &e.w;
            add_block(&mut a, rs, layout.xhat(e.from).start, &kw, 1.0);
            add_block(&mut a, rs, r, &kw, -1.0);
            add_block(&mut a, rs, re, &kw, -1.0);
            add_block(&mut a, rs, layout.ehat(e.from).start, &kw, 1.0);
            add_block(&mut b, rs, inputs.v_comm[k].start, &(&kc * &e.h), 1.0);
            add_block(&mut b, rs, inputs.v_ctrl[k].start, &(&kc * &e.hc), 1.0);
        }
        add_block(&mut b, rs, fr, &f_check, 1.0);
    }
    Ok((a, b))
}

/// Breakpoints of every time-varying coefficient, including gain schedules.
fn breakpoints(s: &Scenario, gains: &SynthesizedGains, mode: Mode) -> Vec<f64> {
    let mut ts: Vec<f64> = vec![0.0];
    let mut push = |sched: &crate::model::MatrixSchedule| {
        if let Some(t) = sched.sample_times() {
            ts.extend(t.iter().copied().filter(|&t| t > 0.0));
        }
    };
    push(&s.plant.a);
    push(&s.plant.b);
    for sn in &s.sensors {
        push(&sn.c);
        push(&sn.d);
    }
    let mut push_gains = |g: &NodeGains| {
        push(&g.l);
        for k in &g.k {
            push(&k.k);
        }
    };
    match mode {
        Mode::Resilient => {
            gains.observer.iter().for_each(&mut push_gains);
            gains.controller.iter().for_each(&mut push_gains);
            gains.detector.iter().for_each(|d| push_gains(&d.check));
        }
        Mode::Baseline => {
            if let Some(b) = &gains.baseline {
                b.observer.iter().for_each(&mut push_gains);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Builds the joint closed loop for `mode`. Coefficients are frozen between
/// consecutive sample times of the underlying schedules.
pub fn assemble_closed_loop(s: &Scenario, gains: &SynthesizedGains, mode: Mode) -> Result<ClosedLoopSystem> {
    check_gains(s, gains, mode)?;
    let bias = (0..s.nodes()).map(|i| node_bias_model(s, i)).collect::<Result<Vec<_>>>()?;
    let layout = StateLayout::new(mode, s.n(), bias.iter().map(BiasModel::order).collect());
    let inputs = InputLayout::new(s);
    let pieces = breakpoints(s, gains, mode)
        .into_iter()
        .map(|start| {
            let (a, b) = assemble_at(s, gains, mode, &layout, &inputs, &bias, start)?;
            Ok(Piece {
                start,
                a_csr: CsrMatrix::from(&a),
                b_csr: CsrMatrix::from(&b),
                a,
                b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClosedLoopSystem {
        mode,
        layout,
        inputs,
        pieces,
        bias,
        scenario: s.clone(),
    })
}

/// Seeded multisine bursts on every disturbance channel component over `[start, end)`.
/// Sensor noise gets a tenth of `amplitude` so measurement noise stays in proportion.
pub fn burst_suite(s: &Scenario, amplitude: f64, start: f64, end: f64) -> Vec<DisturbanceSpec> {
    let mut out = Vec::new();
    let mut push = |channel: Channel, width: usize, amplitude: f64| {
        for component in 0..width {
            let stream = out.len() as u64;
            out.push(DisturbanceSpec {
                channel: channel.clone(),
                component,
                signal: SignalTerm::Burst {
                    amplitude,
                    start,
                    end,
                    bandwidth: 20.0,
                    stream,
                },
            });
        }
    };
    push(Channel::Plant, s.plant.n_w(), amplitude);
    for (i, sn) in s.sensors.iter().enumerate() {
        push(Channel::Sensor { node: i + 1 }, sn.n_v(), 0.1 * amplitude);
    }
    for e in &s.graph.edges {
        let (from, to) = (e.from + 1, e.to + 1);
        push(Channel::Comm { from, to }, e.h.ncols(), amplitude);
        push(Channel::Ctrl { from, to }, e.hc.ncols(), amplitude);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_layout_dimensions() {
        let l = StateLayout::new(Mode::Resilient, 6, vec![2; 6]);
        assert_eq!(l.dim, 6 + 36 + 36 + 12);
        assert_eq!(l.total, 90 + 12);
        assert_eq!(l.eps(5), 88..90);
        assert_eq!(l.aux(0), 90..92);
        let b = StateLayout::new(Mode::Baseline, 6, vec![2; 6]);
        assert_eq!(b.dim, 42);
        assert_eq!(b.aux(5), 52..54);
    }
}
