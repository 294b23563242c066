use serde::{Deserialize, Serialize};

use crate::mat::{rows, Mat};

/// Interpolation between schedule samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    /// Zero-order hold: the most recent sample applies.
    Hold,
    Linear,
}

/// A matrix-valued function of time: either constant or sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleDoc", into = "ScheduleDoc")]
pub enum MatrixSchedule {
    Constant(Mat),
    Sampled {
        times: Vec<f64>,
        mats: Vec<Mat>,
        interp: Interp,
    },
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum ScheduleDoc {
    Constant {
        #[serde(with = "rows")]
        constant: Mat,
    },
    Sampled {
        samples: Vec<SampleDoc>,
        #[serde(default = "yes")]
        hold: bool,
    },
}

#[derive(Clone, Serialize, Deserialize)]
struct SampleDoc {
    t: f64,
    #[serde(with = "rows")]
    m: Mat,
}

fn yes() -> bool {
    true
}

impl TryFrom<ScheduleDoc> for MatrixSchedule {
    type Error = String;

    fn try_from(doc: ScheduleDoc) -> Result<Self, String> {
        match doc {
            ScheduleDoc::Constant { constant } => Ok(MatrixSchedule::Constant(constant)),
            ScheduleDoc::Sampled { samples, hold } => {
                let interp = if hold { Interp::Hold } else { Interp::Linear };
                let (times, mats) = samples.into_iter().map(|s| (s.t, s.m)).unzip();
                MatrixSchedule::sampled(times, mats, interp)
            }
        }
    }
}

impl From<MatrixSchedule> for ScheduleDoc {
    fn from(s: MatrixSchedule) -> Self {
        match s {
            MatrixSchedule::Constant(constant) => ScheduleDoc::Constant { constant },
            MatrixSchedule::Sampled {
                times,
                mats,
                interp,
            } => ScheduleDoc::Sampled {
                samples: times
                    .into_iter()
                    .zip(mats)
                    .map(|(t, m)| SampleDoc { t, m })
                    .collect(),
                hold: interp == Interp::Hold,
            },
        }
    }
}

impl From<Mat> for MatrixSchedule {
    fn from(m: Mat) -> Self {
        MatrixSchedule::Constant(m)
    }
}

impl MatrixSchedule {
    /// Builds a sampled schedule, checking that times strictly increase and shapes agree.
    pub fn sampled(times: Vec<f64>, mats: Vec<Mat>, interp: Interp) -> Result<Self, String> {
        if times.is_empty() || times.len() != mats.len() {
            return Err("sampled schedule needs at least one (t, m) sample".into());
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("sample times must be strictly increasing".into());
        }
        let shape = mats[0].shape();
        if let Some(k) = mats.iter().position(|m| m.shape() != shape) {
            return Err(format!(
                "sample {k} has shape {:?}, expected {shape:?}",
                mats[k].shape()
            ));
        }
        Ok(MatrixSchedule::Sampled {
            times,
            mats,
            interp,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixSchedule::Constant(m) => m.shape(),
            MatrixSchedule::Sampled { mats, .. } => mats[0].shape(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.shape().0
    }

    pub fn ncols(&self) -> usize {
        self.shape().1
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixSchedule::Constant(_))
    }

    /// The value at time zero (or the constant value).
    pub fn initial(&self) -> &Mat {
        match self {
            MatrixSchedule::Constant(m) => m,
            MatrixSchedule::Sampled { mats, .. } => &mats[0],
        }
    }

    pub fn matrices(&self) -> Vec<&Mat> {
        match self {
            MatrixSchedule::Constant(m) => vec![m],
            MatrixSchedule::Sampled { mats, .. } => mats.iter().collect(),
        }
    }

    pub fn sample_times(&self) -> Option<&[f64]> {
        match self {
            MatrixSchedule::Constant(_) => None,
            MatrixSchedule::Sampled { times, .. } => Some(times),
        }
    }

    /// Evaluates the schedule at `t`. Outside the sampled range the end samples are held.
    pub fn at(&self, t: f64) -> Mat {
        match self {
            MatrixSchedule::Constant(m) => m.clone(),
            MatrixSchedule::Sampled {
                times,
                mats,
                interp,
            } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    return mats[0].clone();
                }
                if k == times.len() {
                    return mats[k - 1].clone();
                }
                match interp {
                    Interp::Hold => mats[k - 1].clone(),
                    Interp::Linear => {
                        let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                        &mats[k - 1] * (1.0 - w) + &mats[k] * w
                    }
                }
            }
        }
    }

    /// Applies `f` to every stored matrix, keeping sample times.
    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> MatrixSchedule {
        match self {
            MatrixSchedule::Constant(m) => MatrixSchedule::Constant(f(m)),
            MatrixSchedule::Sampled {
                times,
                mats,
                interp,
            } => MatrixSchedule::Sampled {
                times: times.clone(),
                mats: mats.iter().map(f).collect(),
                interp: *interp,
            },
        }
    }

    /// Combines two schedules pointwise on the union of their sample times.
    /// Linear interpolation wins when either input interpolates linearly.
    pub fn zip_with(&self, other: &MatrixSchedule, f: impl Fn(&Mat, &Mat) -> Mat) -> MatrixSchedule {
        match (self, other) {
            (MatrixSchedule::Constant(a), MatrixSchedule::Constant(b)) => {
                MatrixSchedule::Constant(f(a, b))
            }
            _ => {
                let mut times: Vec<f64> = self
                    .sample_times()
                    .into_iter()
                    .chain(other.sample_times())
                    .flatten()
                    .copied()
                    .collect();
                times.sort_by(f64::total_cmp);
                times.dedup();
                let interp = if self.interp() == Some(Interp::Linear)
                    || other.interp() == Some(Interp::Linear)
                {
                    Interp::Linear
                } else {
                    Interp::Hold
                };
                let mats = times.iter().map(|&t| f(&self.at(t), &other.at(t))).collect();
                MatrixSchedule::Sampled {
                    times,
                    mats,
                    interp,
                }
            }
        }
    }

    pub fn interp(&self) -> Option<Interp> {
        match self {
            MatrixSchedule::Constant(_) => None,
            MatrixSchedule::Sampled { interp, .. } => Some(*interp),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.matrices()
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }
}
