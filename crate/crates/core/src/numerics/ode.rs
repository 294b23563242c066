use crate::error::{Error, Result};

/// States with a larger Euclidean norm are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Uniform time grid `t0 + k·step`, `k = 0..=n_steps`; every `record_every`-th
/// point (and the last) is stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub step: f64,
    pub n_steps: usize,
    pub record_every: usize,
}

impl Grid {
    pub fn new(t_end: f64, step: f64) -> Self {
        Grid {
            t0: 0.0,
            step,
            n_steps: (t_end / step - 1e-9).ceil().max(1.0) as usize,
            record_every: 1,
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn records(&self, k: usize) -> bool {
        k % self.record_every.max(1) == 0 || k == self.n_steps
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Classical fourth-order Runge–Kutta stepper with reusable stage buffers.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` from `t` to `t + h` in place.
    pub fn step<F>(&mut self, field: &mut F, t: f64, x: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * h;
        field(t, x, &mut self.k1);
        for (i, v) in self.tmp.iter_mut().enumerate() {
            *v = x[i] + half * self.k1[i];
        }
        field(t + half, &self.tmp, &mut self.k2);
        for (i, v) in self.tmp.iter_mut().enumerate() {
            *v = x[i] + half * self.k2[i];
        }
        field(t + half, &self.tmp, &mut self.k3);
        for (i, v) in self.tmp.iter_mut().enumerate() {
            *v = x[i] + h * self.k3[i];
        }
        field(t + h, &self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..x.len() {
            x[i] += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Returns a divergence error if `x` is non-finite or too large.
pub fn check_state(x: &[f64], time: f64, step: usize) -> Result<()> {
    let mut norm2 = 0.0;
    let mut worst = (0usize, 0.0f64);
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Divergence {
                time,
                step,
                component: i,
                value: v,
            });
        }
        norm2 += v * v;
        if v.abs() > worst.1.abs() {
            worst = (i, v);
        }
    }
    if norm2.sqrt() > DIVERGENCE_NORM {
        return Err(Error::Divergence {
            time,
            step,
            component: worst.0,
            value: worst.1,
        });
    }
    Ok(())
}

/// Fixed-step RK4 integration of `ẋ = field(t, x)`.
pub fn integrate_ode<F>(mut field: F, x0: &[f64], grid: &Grid) -> Result<OdeTrajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(grid.step > 0.0) {
        return Err(Error::Invalid("integration step must be positive".into()));
    }
    let mut rk = Rk4::new(x0.len());
    let mut x = x0.to_vec();
    check_state(&x, grid.t0, 0)?;
    let mut out = OdeTrajectory::default();
    out.times.push(grid.t0);
    out.states.push(x.clone());
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        rk.step(&mut field, t, &mut x, grid.step);
        check_state(&x, grid.time(k + 1), k + 1)?;
        if grid.records(k + 1) {
            out.times.push(grid.time(k + 1));
            out.states.push(x.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field() {
        let tr = integrate_ode(|_, _, dx: &mut [f64]| dx.fill(0.0), &[3.0, -1.0], &Grid::new(1.0, 0.1)).unwrap();
        assert!(tr.states.iter().all(|s| s == &[3.0, -1.0]));
        assert_eq!(tr.times.len(), 11);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let tr = integrate_ode(|_, x: &[f64], dx: &mut [f64]| dx[0] = -x[0], &[1.0], &Grid::new(1.0, 1e-3)).unwrap();
        let last = tr.states.last().unwrap()[0];
        assert!((last - (-1f64).exp()).abs() < 1e-8);
        assert!((tr.times.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn growth_reports_divergence() {
        let err = integrate_ode(|_, x: &[f64], dx: &mut [f64]| dx[0] = x[0], &[1.0], &Grid::new(100.0, 1e-2)).unwrap_err();
        match err {
            Error::Divergence { time, component, .. } => {
                assert_eq!(component, 0);
                assert!(time > 27.0 && time < 28.5, "{time}");
            }
            other => panic!("unexpected {other}"),
        }
    }
}
