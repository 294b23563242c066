//! Attack and disturbance signal generators. Every masking or disturbance
//! term is square-integrable by construction: either it decays
//! exponentially or it has finite support.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BURST_TONES: usize = 24;
const BURST_TAPER: f64 = 0.1;

/// One additive signal term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalTerm {
    /// `value` on `[start, end)`; an absent `end` means the step never switches off.
    Step {
        value: f64,
        start: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<f64>,
    },
    /// `amplitude · exp(−decay·τ) · sin(omega·τ + phase)` with `τ = t − start`, for `t ≥ start`.
    Decaying {
        amplitude: f64,
        decay: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        start: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<f64>,
    },
    /// Seeded random-phase multisine on `[start, end)` with tapered edges and
    /// RMS close to `amplitude`; tone frequencies lie below `bandwidth` rad/s.
    Burst {
        amplitude: f64,
        start: f64,
        end: f64,
        #[serde(default = "default_bandwidth")]
        bandwidth: f64,
        #[serde(default)]
        stream: u64,
    },
}

fn default_bandwidth() -> f64 {
    20.0
}

impl SignalTerm {
    /// Whether the term is square-integrable on `[0, ∞)`.
    pub fn is_l2(&self) -> bool {
        match *self {
            SignalTerm::Step { value, end, .. } => value == 0.0 || end.is_some(),
            SignalTerm::Decaying {
                amplitude,
                decay,
                end,
                ..
            } => amplitude == 0.0 || decay > 0.0 || end.is_some(),
            SignalTerm::Burst { .. } => true,
        }
    }

    pub fn check(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!("signal {name} must be finite")))
            }
        };
        match *self {
            SignalTerm::Step { value, start, end } => {
                finite(value, "value")?;
                finite(start, "start")?;
                if let Some(e) = end {
                    finite(e, "end")?;
                }
            }
            SignalTerm::Decaying {
                amplitude,
                decay,
                omega,
                phase,
                start,
                end,
            } => {
                for (v, n) in [
                    (amplitude, "amplitude"),
                    (decay, "decay"),
                    (omega, "omega"),
                    (phase, "phase"),
                    (start, "start"),
                ] {
                    finite(v, n)?;
                }
                if let Some(e) = end {
                    finite(e, "end")?;
                }
            }
            SignalTerm::Burst {
                amplitude,
                start,
                end,
                bandwidth,
                ..
            } => {
                for (v, n) in [
                    (amplitude, "amplitude"),
                    (start, "start"),
                    (end, "end"),
                    (bandwidth, "bandwidth"),
                ] {
                    finite(v, n)?;
                }
                if !(end > start) {
                    return Err(Error::Invalid("burst needs end > start".into()));
                }
                if !(bandwidth > 0.0) {
                    return Err(Error::Invalid("burst bandwidth must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Attack injected into one node's observer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSignalSpec {
    /// 1-based node label.
    pub node: usize,
    /// Component of the node's attack vector `f_i` (0-based).
    #[serde(default)]
    pub component: usize,
    #[serde(default)]
    pub bias: Vec<BiasSegment>,
    #[serde(default)]
    pub masking: Vec<SignalTerm>,
}

/// Constant bias `value` on `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSegment {
    pub value: f64,
    pub start: f64,
    pub end: f64,
}

impl AttackSignalSpec {
    /// The step attack used throughout the examples.
    pub fn step(node: usize, amplitude: f64, start: f64, end: f64) -> Self {
        AttackSignalSpec {
            node,
            component: 0,
            bias: vec![BiasSegment {
                value: amplitude,
                start,
                end,
            }],
            masking: vec![],
        }
    }

    pub fn check(&self) -> Result<()> {
        for seg in &self.bias {
            if !(seg.value.is_finite() && seg.start.is_finite() && seg.end.is_finite()) {
                return Err(Error::Invalid("bias segment entries must be finite".into()));
            }
            if seg.end < seg.start {
                return Err(Error::Invalid("bias segment ends before it starts".into()));
            }
        }
        for m in &self.masking {
            m.check()?;
            if !m.is_l2() {
                return Err(Error::NotL2(format!(
                    "masking term {m:?} at node {} has neither positive decay nor finite support",
                    self.node
                )));
            }
        }
        Ok(())
    }
}

/// Disturbance channel selector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "channel", deny_unknown_fields)]
pub enum Channel {
    /// Plant disturbance `w`.
    #[serde(rename = "w")]
    Plant,
    /// Measurement noise `v_i` (1-based node).
    #[serde(rename = "v")]
    Sensor { node: usize },
    /// Communication noise `v_ij` on edge `from → to` (1-based).
    #[serde(rename = "v_comm")]
    Comm { from: usize, to: usize },
    /// Detector-message noise `v_c,ij` on edge `from → to` (1-based).
    #[serde(rename = "v_ctrl")]
    Ctrl { from: usize, to: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    #[serde(flatten)]
    pub channel: Channel,
    #[serde(default)]
    pub component: usize,
    pub signal: SignalTerm,
}

impl DisturbanceSpec {
    pub fn check(&self) -> Result<()> {
        self.signal.check()?;
        if !self.signal.is_l2() {
            return Err(Error::NotL2(format!(
                "disturbance on {:?} is not square-integrable",
                self.channel
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Compiled {
    Step {
        value: f64,
        start: f64,
        end: f64,
    },
    Decaying {
        amplitude: f64,
        decay: f64,
        omega: f64,
        phase: f64,
        start: f64,
        end: f64,
    },
    Burst {
        start: f64,
        end: f64,
        tones: Vec<(f64, f64, f64)>,
    },
}

/// A signal ready for evaluation; bursts have their random tones drawn once.
#[derive(Clone, Debug, Default)]
pub struct CompiledSignal {
    terms: Vec<Compiled>,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CompiledSignal {
    /// Compiles `terms`; `salt` separates the random streams of different signals.
    pub fn new(terms: &[SignalTerm], seed: u64, salt: u64) -> Self {
        let terms = terms
            .iter()
            .enumerate()
            .map(|(k, term)| match *term {
                SignalTerm::Step { value, start, end } => Compiled::Step {
                    value,
                    start,
                    end: end.unwrap_or(f64::INFINITY),
                },
                SignalTerm::Decaying {
                    amplitude,
                    decay,
                    omega,
                    phase,
                    start,
                    end,
                } => Compiled::Decaying {
                    amplitude,
                    decay,
                    omega,
                    phase,
                    start,
                    end: end.unwrap_or(f64::INFINITY),
                },
                SignalTerm::Burst {
                    amplitude,
                    start,
                    end,
                    bandwidth,
                    stream,
                } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix(
                        mix(seed, salt),
                        (k as u64) << 32 ^ stream,
                    ));
                    let a = amplitude * (2.0 / BURST_TONES as f64).sqrt();
                    let tones = (0..BURST_TONES)
                        .map(|_| {
                            let w = rng.random_range(0.05 * bandwidth..bandwidth);
                            let p = rng.random_range(0.0..2.0 * PI);
                            (a, w, p)
                        })
                        .collect();
                    Compiled::Burst { start, end, tones }
                }
            })
            .collect();
        CompiledSignal { terms }
    }

    pub fn from_bias(segments: &[BiasSegment], masking: &[SignalTerm], seed: u64, salt: u64) -> Self {
        let mut out = CompiledSignal::new(masking, seed, salt);
        out.terms.extend(segments.iter().map(|s| Compiled::Step {
            value: s.value,
            start: s.start,
            end: s.end,
        }));
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            acc += match term {
                Compiled::Step { value, start, end } => {
                    if t >= *start && t < *end {
                        *value
                    } else {
                        0.0
                    }
                }
                Compiled::Decaying {
                    amplitude,
                    decay,
                    omega,
                    phase,
                    start,
                    end,
                } => {
                    if t >= *start && t < *end {
                        let tau = t - start;
                        amplitude * (-decay * tau).exp() * (omega * tau + phase).sin()
                    } else {
                        0.0
                    }
                }
                Compiled::Burst { start, end, tones } => {
                    if t >= *start && t < *end {
                        let len = end - start;
                        let edge = BURST_TAPER * len;
                        let d = (t - start).min(end - t);
                        let window = if d >= edge {
                            1.0
                        } else {
                            0.5 * (1.0 - (PI * d / edge).cos())
                        };
                        window
                            * tones
                                .iter()
                                .map(|(a, w, p)| a * (w * (t - start) + p).sin())
                                .sum::<f64>()
                    } else {
                        0.0
                    }
                }
            };
        }
        acc
    }
}

/// Samples an attack signal on the uniform grid `t_k = k·step`, `k = 0..=n_steps`.
pub fn generate_attack_signal(
    spec: &AttackSignalSpec,
    step: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.check()?;
    let sig = CompiledSignal::from_bias(&spec.bias, &spec.masking, seed, attack_salt(spec));
    Ok((0..=n_steps).map(|k| sig.eval(k as f64 * step)).collect())
}

pub(crate) fn attack_salt(spec: &AttackSignalSpec) -> u64 {
    ((spec.node as u64) << 16) ^ spec.component as u64
}

pub(crate) fn disturbance_salt(index: usize) -> u64 {
    0xD157_0000_0000 ^ index as u64
}
