//! Choice of the communication graph by a running-minimum recursion over candidates.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BisectOptions, DesignContext, LayerKind, SynthesisOptions};
use crate::error::{Error, Result};
use crate::model::{validate_scenario, NetworkGraph, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGraph {
    pub id: String,
    pub graph: NetworkGraph,
}

/// Bisected levels of one candidate; `+∞` (serialised as `null`) when infeasible.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateOutcome {
    pub id: String,
    pub scenario_hash: String,
    pub gamma2: f64,
    pub bar_gamma2: f64,
    /// `γ°_m² = min(γ_m², γ°_{m−1}²)`.
    pub running_gamma2: f64,
    pub running_bar_gamma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphOptimization {
    pub candidates: Vec<CandidateOutcome>,
    /// Candidate attaining the smallest detector level.
    pub best: Option<usize>,
    /// Candidate attaining the smallest observer level.
    pub best_bar: Option<usize>,
    pub gamma2_sequence: Vec<f64>,
    pub bar_gamma2_sequence: Vec<f64>,
}

impl GraphOptimization {
    /// At least one candidate is feasible in both layers.
    pub fn admissible(&self) -> bool {
        self.best.is_some() && self.best_bar.is_some()
    }

    /// Winning candidate id, or the explicit no-admissible-graph error.
    pub fn winner(&self) -> Result<&CandidateOutcome> {
        match (self.best, self.best_bar) {
            (Some(b), Some(_)) => Ok(&self.candidates[b]),
            _ => Err(Error::NoAdmissibleGraph {
                candidates: self.candidates.len(),
            }),
        }
    }
}

/// Per-scenario cache of bisected levels, keyed by content hash.
#[derive(Debug, Default)]
pub struct LevelCache {
    inner: Mutex<HashMap<String, (f64, f64, Option<String>)>>,
}

impl LevelCache {
    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn evaluate(s: &Scenario, bisect: &BisectOptions, opts: &SynthesisOptions) -> (f64, f64, Option<String>) {
    let report = validate_scenario(s);
    if let Some(issue) = report.errors().next() {
        return (f64::INFINITY, f64::INFINITY, Some(format!("invalid: {}", issue.message)));
    }
    if !s.graph.is_weakly_connected() {
        return (f64::INFINITY, f64::INFINITY, Some("graph not connected".into()));
    }
    let ctx = match DesignContext::new(s, opts) {
        Ok(c) => c,
        Err(e) => return (f64::INFINITY, f64::INFINITY, Some(e.to_string())),
    };
    let det = ctx.bisect_layer(LayerKind::Detector, bisect);
    let obs = ctx.bisect_layer(LayerKind::Observer, bisect);
    let note = (!det.monotone || !obs.monotone).then(|| "feasibility not monotone on the probe set".to_string());
    (det.gamma2, obs.gamma2, note)
}

fn argmin(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Bisects both layers for every candidate graph (in parallel, cached by
/// scenario hash) and forms the running minima.
pub fn optimize_over_graphs(
    base: &Scenario,
    candidates: &[CandidateGraph],
    opts: &SynthesisOptions,
    cache: Option<&LevelCache>,
) -> Result<GraphOptimization> {
    if candidates.is_empty() {
        return Err(Error::Invalid("at least one candidate graph is required".into()));
    }
    let levels: Vec<(String, (f64, f64, Option<String>))> = candidates
        .par_iter()
        .map(|c| {
            let s = base.with_graph(c.graph.clone());
            let hash = s.design_hash();
            if let Some(hit) = cache.and_then(|c| c.inner.lock().expect("cache lock").get(&hash).cloned()) {
                return (hash, hit);
            }
            let out = evaluate(&s, &opts.bisect, opts);
            if let Some(c) = cache {
                c.inner.lock().expect("cache lock").insert(hash.clone(), out.clone());
            }
            (hash, out)
        })
        .collect();

    let (mut run, mut run_bar) = (f64::INFINITY, f64::INFINITY);
    let mut outcomes = Vec::with_capacity(candidates.len());
    for (c, (hash, (g, gb, note))) in candidates.iter().zip(levels) {
        run = run.min(g);
        run_bar = run_bar.min(gb);
        outcomes.push(CandidateOutcome {
            id: c.id.clone(),
            scenario_hash: hash,
            gamma2: g,
            bar_gamma2: gb,
            running_gamma2: run,
            running_bar_gamma2: run_bar,
            note,
        });
    }
    let seq: Vec<f64> = outcomes.iter().map(|o| o.running_gamma2).collect();
    let seq_bar: Vec<f64> = outcomes.iter().map(|o| o.running_bar_gamma2).collect();
    debug_assert!(seq.windows(2).all(|w| !(w[1] > w[0])));
    debug_assert!(seq_bar.windows(2).all(|w| !(w[1] > w[0])));
    Ok(GraphOptimization {
        best: argmin(outcomes.iter().map(|o| o.gamma2)),
        best_bar: argmin(outcomes.iter().map(|o| o.bar_gamma2)),
        candidates: outcomes,
        gamma2_sequence: seq,
        bar_gamma2_sequence: seq_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_skips_infinite_and_keeps_first_tie() {
        assert_eq!(argmin([f64::INFINITY, 2.0, 1.0, 1.0].into_iter()), Some(2));
        assert_eq!(argmin([f64::INFINITY; 3].into_iter()), None);
    }
}
