//! Filter-type Riccati equations `Ẏ = AY + YAᵀ + BBᵀ − Y(S − R/γ²)Y`.

use nalgebra::{DVector, LU};

use super::eig::{eigenvalues, spectral_abscissa, sym_min_eig};
use crate::error::{Error, Result};
use crate::mat::{symmetrize, Mat};
use crate::model::MatrixSchedule;

/// One Riccati equation. `s` is the information weight
/// `Cᵀ(DDᵀ)⁻¹C + Σ WᵀU⁻¹W`; `r_scaled` is the constant bonus `R/γ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiProblem {
    pub a: MatrixSchedule,
    pub b: MatrixSchedule,
    pub s: MatrixSchedule,
    pub r_scaled: Mat,
    pub y0: Mat,
}

impl RiccatiProblem {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_constant(&self) -> bool {
        self.a.is_constant() && self.b.is_constant() && self.s.is_constant()
    }

    /// `(A, BBᵀ, S − R/γ²)` at time `t`.
    pub fn coefficients(&self, t: f64) -> (Mat, Mat, Mat) {
        let a = self.a.at(t);
        let b = self.b.at(t);
        let m = symmetrize(&(self.s.at(t) - &self.r_scaled));
        (a, &b * b.transpose(), m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DreOptions {
    /// Store every k-th step; 0 picks a stride giving about a thousand samples.
    pub record_every: usize,
    /// Spectral-norm cap above which the solution counts as unbounded.
    pub cap: f64,
    /// Smallest admissible eigenvalue.
    pub min_eig_floor: f64,
}

impl Default for DreOptions {
    fn default() -> Self {
        DreOptions {
            record_every: 0,
            cap: 1e8,
            min_eig_floor: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DreSolution {
    pub times: Vec<f64>,
    pub ys: Vec<Mat>,
    /// Bounded by the cap with a positive-definite margin over the whole horizon.
    pub bounded: bool,
    /// Largest spectral norm seen.
    pub bound_estimate: f64,
    /// Smallest eigenvalue seen at the stored samples.
    pub min_eig: f64,
    /// First time a non-finite or over-cap value appeared.
    pub divergence_time: Option<f64>,
}

impl DreSolution {
    pub fn last(&self) -> &Mat {
        self.ys.last().expect("at least the initial value is stored")
    }

    /// Solution at `t`, linearly interpolated between stored samples.
    pub fn at(&self, t: f64) -> Mat {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.ys[0].clone();
        }
        if k == self.times.len() {
            return self.last().clone();
        }
        let w = (t - self.times[k - 1]) / (self.times[k] - self.times[k - 1]);
        &self.ys[k - 1] * (1.0 - w) + &self.ys[k] * w
    }
}

fn dre_rhs(a: &Mat, q: &Mat, m: &Mat, y: &Mat) -> Mat {
    let ay = a * y;
    let ym = y * m;
    &ay + ay.transpose() + q - ym * y
}

fn spectral_norm_sym(y: &Mat) -> f64 {
    let ev = nalgebra::SymmetricEigen::new(y.clone()).eigenvalues;
    ev.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Integrates the Riccati differential equation with classical RK4 and
/// per-step symmetrisation.
pub fn integrate_dre(p: &RiccatiProblem, horizon: f64, step: f64) -> DreSolution {
    integrate_dre_with(p, horizon, step, &DreOptions::default())
}

pub fn integrate_dre_with(p: &RiccatiProblem, horizon: f64, step: f64, opts: &DreOptions) -> DreSolution {
    assert!(step > 0.0 && horizon >= step, "need step > 0 and horizon ≥ step");
    let n_steps = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / n_steps as f64;
    let stride = if opts.record_every == 0 {
        (n_steps / 1000).max(1)
    } else {
        opts.record_every
    };
    let constant = p.is_constant().then(|| p.coefficients(0.0));
    let coef = |t: f64| match &constant {
        Some(c) => c.clone(),
        None => p.coefficients(t),
    };

    let mut y = symmetrize(&p.y0);
    let mut sol = DreSolution {
        times: vec![0.0],
        ys: vec![y.clone()],
        bounded: true,
        bound_estimate: spectral_norm_sym(&y),
        min_eig: sym_min_eig(&y),
        divergence_time: None,
    };
    for k in 0..n_steps {
        let t = k as f64 * h;
        let (a0, q0, m0) = coef(t);
        let (ah, qh, mh) = coef(t + 0.5 * h);
        let (a1, q1, m1) = coef(t + h);
        let k1 = dre_rhs(&a0, &q0, &m0, &y);
        let k2 = dre_rhs(&ah, &qh, &mh, &(&y + &k1 * (0.5 * h)));
        let k3 = dre_rhs(&ah, &qh, &mh, &(&y + &k2 * (0.5 * h)));
        let k4 = dre_rhs(&a1, &q1, &m1, &(&y + &k3 * h));
        y += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        y = symmetrize(&y);
        let t1 = (k + 1) as f64 * h;
        let finite = y.iter().all(|v| v.is_finite());
        if !finite || y.norm() > opts.cap * (y.nrows() as f64).sqrt() {
            sol.bounded = false;
            sol.divergence_time = Some(t1);
            sol.bound_estimate = if finite { spectral_norm_sym(&y) } else { f64::INFINITY };
            if finite {
                sol.min_eig = sol.min_eig.min(sym_min_eig(&y));
                sol.times.push(t1);
                sol.ys.push(y);
            }
            return sol;
        }
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            sol.bound_estimate = sol.bound_estimate.max(spectral_norm_sym(&y));
            sol.min_eig = sol.min_eig.min(sym_min_eig(&y));
            sol.times.push(t1);
            sol.ys.push(y.clone());
        }
    }
    sol.bounded = sol.bound_estimate <= opts.cap && sol.min_eig > opts.min_eig_floor;
    sol
}

/// Stabilising solution of the algebraic Riccati equation.
#[derive(Clone, Debug, PartialEq)]
pub struct AreSolution {
    pub y: Mat,
    /// `‖AY + YAᵀ + BBᵀ − YMY‖_F` divided by the sum of the term norms.
    pub residual: f64,
    /// Spectral abscissa of `A − YM`.
    pub closed_loop_abscissa: f64,
}

/// Solves `A X + X Aᵀ + C = 0` through the Kronecker form.
pub fn solve_lyapunov(a: &Mat, c: &Mat) -> Option<Mat> {
    let n = a.nrows();
    let eye = Mat::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_column_slice((-c).as_slice());
    let x = LU::new(k).solve(&rhs)?;
    Some(symmetrize(&Mat::from_column_slice(n, n, x.as_slice())))
}

fn log_abs_det(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

/// Matrix sign function by the scaled Newton iteration.
fn matrix_sign(h: &Mat) -> Option<Mat> {
    let n = h.nrows();
    let mut z = h.clone();
    let mut scaling = true;
    for _ in 0..100 {
        let lu = LU::new(z.clone());
        let c = if scaling {
            (-log_abs_det(&lu) / n as f64).exp()
        } else {
            1.0
        };
        let zinv = lu.try_inverse()?;
        if !c.is_finite() || c == 0.0 {
            return None;
        }
        let next = (&z * c + zinv / c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if change < 1e-2 {
            scaling = false;
        }
        if change < 1e-14 {
            return Some(z);
        }
    }
    (z.iter().all(|v| v.is_finite())).then_some(z)
}

fn are_residual(a: &Mat, q: &Mat, m: &Mat, y: &Mat) -> (Mat, f64) {
    let ay = a * y;
    let ymy = y * m * y;
    let res = &ay + ay.transpose() + q - &ymy;
    let scale = 2.0 * ay.norm() + q.norm() + ymy.norm() + f64::MIN_POSITIVE;
    let rel = res.norm() / scale;
    (res, rel)
}

/// Relative residual accepted for a stabilising solution.
pub const ARE_RESIDUAL_TOL: f64 = 1e-8;

/// Stabilising solution of `0 = AY + YAᵀ + BBᵀ − Y(S − R/γ²)Y` via the
/// Hamiltonian sign function, polished with Newton steps.
pub fn solve_are_lti(p: &RiccatiProblem) -> Result<AreSolution> {
    if !p.is_constant() {
        return Err(Error::Invalid("solve_are_lti needs constant coefficients".into()));
    }
    let (a, q, m) = p.coefficients(0.0);
    let n = a.nrows();
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
    h.view_mut((0, n), (n, n)).copy_from(&(-&m));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    h.view_mut((n, n), (n, n)).copy_from(&(-&a));

    let ev = eigenvalues(&h)?;
    let axis_tol = 1e-9 * h.norm().max(1.0);
    if let Some(z) = ev.iter().find(|z| z.re.abs() <= axis_tol) {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian eigenvalue {z} lies on the imaginary axis"
        )));
    }

    let sign = matrix_sign(&h)
        .ok_or_else(|| Error::NoStabilizingSolution("sign iteration failed".into()))?;
    let eye = Mat::identity(n, n);
    let mut lhs = Mat::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&sign.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(sign.view((n, n), (n, n)) + &eye));
    let mut rhs = Mat::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(sign.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-sign.view((n, 0), (n, n))));
    let svd = lhs.svd(true, true);
    let y = svd
        .solve(&rhs, 1e-14 * svd.singular_values.max())
        .map_err(|e| Error::NoStabilizingSolution(format!("subspace solve failed: {e}")))?;
    let mut y = symmetrize(&y);
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NoStabilizingSolution("non-finite subspace solution".into()));
    }

    let (_, mut rel) = are_residual(&a, &q, &m, &y);
    for _ in 0..6 {
        if rel < 1e-13 {
            break;
        }
        let (res, _) = are_residual(&a, &q, &m, &y);
        let ac = &a - &y * &m;
        let Some(dy) = solve_lyapunov(&ac, &res) else { break };
        let cand = symmetrize(&(&y + dy));
        let (_, cand_rel) = are_residual(&a, &q, &m, &cand);
        if !(cand_rel < rel) {
            break;
        }
        y = cand;
        rel = cand_rel;
    }

    let abscissa = spectral_abscissa(&(&a - &y * &m));
    if !(abscissa < 0.0) {
        return Err(Error::NoStabilizingSolution(format!(
            "solution is not stabilising (closed-loop abscissa {abscissa:e})"
        )));
    }
    if !(rel <= ARE_RESIDUAL_TOL) {
        return Err(Error::NoStabilizingSolution(format!(
            "Riccati residual {rel:e} above tolerance"
        )));
    }
    Ok(AreSolution {
        y,
        residual: rel,
        closed_loop_abscissa: abscissa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn scalar_problem(a: f64, b: f64, s: f64, r: f64, y0: f64) -> RiccatiProblem {
        RiccatiProblem {
            a: scalar(a).into(),
            b: scalar(b).into(),
            s: scalar(s).into(),
            r_scaled: scalar(r),
            y0: scalar(y0),
        }
    }

    #[test]
    fn stationary_identity() {
        let p = RiccatiProblem {
            a: Mat::zeros(3, 3).into(),
            b: Mat::zeros(3, 3).into(),
            s: Mat::zeros(3, 3).into(),
            r_scaled: Mat::zeros(3, 3),
            y0: Mat::identity(3, 3),
        };
        let sol = integrate_dre(&p, 1.0, 0.01);
        assert!(sol.ys.iter().all(|y| *y == Mat::identity(3, 3)));
        assert!(sol.bounded);
    }

    #[test]
    fn scalar_lyapunov_limit() {
        let p = scalar_problem(-1.0, 1.0, 0.0, 0.0, 1.0);
        let sol = integrate_dre(&p, 30.0, 1e-3);
        assert!((sol.last()[(0, 0)] - 0.5).abs() < 1e-10);
        // closed form: y(t) = 1/2 + e^{-2t}/2
        for (t, y) in sol.times.iter().zip(&sol.ys).take(100) {
            assert!((y[(0, 0)] - (0.5 + 0.5 * (-2.0 * t).exp())).abs() < 1e-10);
        }
        let are = solve_are_lti(&p).unwrap();
        assert!((are.y[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unstable_drift_is_unbounded() {
        let p = scalar_problem(1.0, 0.0, 0.0, 0.0, 1.0);
        let sol = integrate_dre(&p, 20.0, 1e-3);
        assert!(!sol.bounded);
        let t = sol.divergence_time.unwrap();
        assert!((t - 0.5 * (1e8f64).ln()).abs() < 0.05, "{t}");
    }

    #[test]
    fn symmetric_fixed_point() {
        let p = RiccatiProblem {
            a: Mat::zeros(2, 2).into(),
            b: Mat::identity(2, 2).into(),
            s: Mat::identity(2, 2).into(),
            r_scaled: Mat::zeros(2, 2),
            y0: Mat::identity(2, 2),
        };
        let are = solve_are_lti(&p).unwrap();
        assert!((are.y - Mat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn near_axis_hamiltonian_is_infeasible() {
        let p = scalar_problem(0.0, 1.0, 0.0, 0.0, 1.0);
        assert!(matches!(solve_are_lti(&p), Err(Error::NoStabilizingSolution(_))));
    }

    #[test]
    fn lyapunov_solver() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let c = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let x = solve_lyapunov(&a, &c).unwrap();
        assert!((&a * &x + &x * a.transpose() + &c).norm() < 1e-12);
    }
}
