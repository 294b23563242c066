//! Attack classes: admissibility of the class filter `G(s)`, minimal
//! realisation of the bias model `−G(s)/s`, and attack/disturbance signals.

mod signal;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

pub use signal::{
    generate_attack_signal, AttackSignalSpec, BiasSegment, Channel, CompiledSignal,
    DisturbanceSpec, SignalTerm,
};
pub(crate) use signal::{attack_salt, disturbance_salt};

use crate::error::{Error, Result};
use crate::mat::{block_diag, Mat};
use crate::model::TransferFunction;
use crate::numerics::poly;

/// Roots of `sD + N` must have real parts below this value.
pub const STABILITY_MARGIN: f64 = -1e-9;
/// Relative tolerance for cancelling common roots of numerator and denominator.
pub const CANCEL_TOL: f64 = 1e-8;

const QUAD_LO: f64 = 1e-4;
const QUAD_HI: f64 = 1e4;
const QUAD_RTOL: f64 = 1e-4;

/// Outcome of the admissibility check for `G(s) = N(s)/D(s)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityCertificate {
    /// All roots of `sD(s) + N(s)` lie strictly in the left half plane.
    pub stable: bool,
    /// `(1/π)∫₀^∞ |D/(jωD+N)|² dω`; infinite when unstable.
    pub g1: f64,
    /// `sup_ω |jωD/(jωD+N)|²`; infinite when unstable.
    pub g2: f64,
    /// Roots of `sD + N` as `[re, im]` pairs.
    pub roots: Vec<[f64; 2]>,
    /// The rightmost root when the check fails.
    pub offending_root: Option<[f64; 2]>,
}

fn degrees(g: &TransferFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    let num = poly::trim(&g.num);
    let den = poly::trim(&g.den);
    if den.is_empty() {
        return Err(Error::Invalid("denominator D(s) is identically zero".into()));
    }
    if !num.iter().chain(&den).all(|c| c.is_finite()) {
        return Err(Error::Invalid("transfer-function coefficients must be finite".into()));
    }
    if num.len() > den.len() {
        return Err(Error::ImproperTransfer {
            num_deg: num.len() - 1,
            den_deg: den.len() - 1,
        });
    }
    Ok((num, den))
}

fn sensitivity_sq(num: &[f64], den: &[f64], w: f64) -> f64 {
    let jw = Complex64::new(0.0, w);
    let d = poly::eval(den, jw);
    let n = poly::eval(num, jw);
    (jw * d / (jw * d + n)).norm_sqr()
}

fn tracking_sq(num: &[f64], den: &[f64], w: f64) -> f64 {
    let jw = Complex64::new(0.0, w);
    let d = poly::eval(den, jw);
    let n = poly::eval(num, jw);
    (d / (jw * d + n)).norm_sqr()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    // search in log-frequency
    let (mut la, mut lb) = (a.ln(), b.ln());
    let mut c = lb - r * (lb - la);
    let mut d = la + r * (lb - la);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    for _ in 0..100 {
        if fc > fd {
            lb = d;
            d = c;
            fd = fc;
            c = lb - r * (lb - la);
            fc = f(c.exp());
        } else {
            la = c;
            c = d;
            fc = fd;
            d = la + r * (lb - la);
            fd = f(d.exp());
        }
        if (lb - la).abs() < 1e-12 {
            break;
        }
    }
    a = la.exp();
    b = lb.exp();
    f(a).max(f(b)).max(fc).max(fd)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
        + adaptive(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    adaptive(&f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Admissibility check of the class filter `G = N/D`.
pub fn check_admissible_filter(g: &TransferFunction) -> Result<AdmissibilityCertificate> {
    let (num, den) = degrees(g)?;
    let charp = poly::add(&poly::mul(&den, &[1.0, 0.0]), &num);
    let roots = poly::roots(&charp);
    let rightmost = roots
        .iter()
        .copied()
        .max_by(|a, b| a.re.total_cmp(&b.re));
    let stable = roots.iter().all(|z| z.re < STABILITY_MARGIN);
    let root_pairs = roots.iter().map(|z| [z.re, z.im]).collect();
    if !stable {
        return Ok(AdmissibilityCertificate {
            stable,
            g1: f64::INFINITY,
            g2: f64::INFINITY,
            roots: root_pairs,
            offending_root: rightmost.map(|z| [z.re, z.im]),
        });
    }

    // g2: log grid, then golden-section refinement around the best sample
    let grid: Vec<f64> = (0..=800)
        .map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 800.0))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&w| sensitivity_sq(&num, &den, w)).collect();
    let best = (0..vals.len())
        .max_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap();
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_max(|w| sensitivity_sq(&num, &den, w), lo, hi);
    let g2 = refined.max(vals[best]).max(1.0);

    // g1: Simpson near zero, adaptive Simpson in log-frequency, 1/ω² tail
    let f = |w: f64| tracking_sq(&num, &den, w);
    let head = integrate(f, 0.0, QUAD_LO, 1e-14);
    let mid_rough = integrate(|u: f64| f(u.exp()) * u.exp(), QUAD_LO.ln(), QUAD_HI.ln(), 1e-6);
    let mid = integrate(
        |u: f64| f(u.exp()) * u.exp(),
        QUAD_LO.ln(),
        QUAD_HI.ln(),
        QUAD_RTOL * 1e-3 * mid_rough.abs().max(1e-300),
    );
    let tail = f(QUAD_HI) * QUAD_HI;
    let g1 = (head + mid + tail) / std::f64::consts::PI;

    Ok(AdmissibilityCertificate {
        stable,
        g1,
        g2,
        roots: root_pairs,
        offending_root: None,
    })
}

/// Minimal realisation `(Ω, Γ, Υ)` of `−G(s)/s`, replicated over `n_f` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasModel {
    pub omega: Mat,
    pub gamma: Mat,
    pub upsilon: Mat,
    pub certificate: AdmissibilityCertificate,
    /// Order of one scalar channel.
    pub channel_order: usize,
    pub n_f: usize,
}

impl BiasModel {
    /// Total state dimension `n_ε = n_f · channel_order`.
    pub fn order(&self) -> usize {
        self.omega.nrows()
    }

    /// Empty model for a trusted node.
    pub fn empty() -> Self {
        BiasModel {
            omega: Mat::zeros(0, 0),
            gamma: Mat::zeros(0, 0),
            upsilon: Mat::zeros(0, 0),
            certificate: AdmissibilityCertificate {
                stable: true,
                g1: 0.0,
                g2: 0.0,
                roots: vec![],
                offending_root: None,
            },
            channel_order: 0,
            n_f: 0,
        }
    }

    /// `Υ(jωI − Ω)⁻¹Γ` for the first channel.
    pub fn frequency_response(&self, w: f64) -> Complex64 {
        let k = self.channel_order;
        let om = self.omega.view((0, 0), (k, k));
        let a = DMatrix::<Complex64>::from_fn(k, k, |i, j| {
            let diag = if i == j { Complex64::new(0.0, w) } else { Complex64::new(0.0, 0.0) };
            diag - om[(i, j)]
        });
        let g = DMatrix::<Complex64>::from_fn(k, 1, |i, _| Complex64::new(self.gamma[(i, 0)], 0.0));
        let x = a.lu().solve(&g).expect("jω is not a pole");
        (0..k).map(|i| x[(i, 0)] * self.upsilon[(0, i)]).sum()
    }

    /// PBH rank test of controllability and observability at the poles.
    pub fn is_minimal(&self, tol: f64) -> bool {
        let n = self.order();
        if n == 0 {
            return true;
        }
        let eigs = crate::numerics::eigenvalues(&self.omega).unwrap_or_default();
        let scale = 1.0 + self.omega.norm() + self.gamma.norm() + self.upsilon.norm();
        let cplx = |m: &Mat| m.map(|v| Complex64::new(v, 0.0));
        eigs.iter().all(|&lam| {
            let shifted = DMatrix::<Complex64>::identity(n, n) * lam - cplx(&self.omega);
            let mut obs = DMatrix::<Complex64>::zeros(n + self.upsilon.nrows(), n);
            obs.view_mut((0, 0), (n, n)).copy_from(&shifted);
            obs.view_mut((n, 0), self.upsilon.shape()).copy_from(&cplx(&self.upsilon));
            let mut ctr = DMatrix::<Complex64>::zeros(n, n + self.gamma.ncols());
            ctr.view_mut((0, 0), (n, n)).copy_from(&shifted);
            ctr.view_mut((0, n), self.gamma.shape()).copy_from(&cplx(&self.gamma));
            let smin = |m: DMatrix<Complex64>| m.svd(false, false).singular_values.min();
            smin(obs) > tol * scale && smin(ctr.adjoint()) > tol * scale
        })
    }
}

fn cancel_common_roots(mut num: Vec<f64>, mut den: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    loop {
        let mut changed = false;
        for r in poly::roots(&den) {
            let scale: f64 = num
                .iter()
                .rev()
                .enumerate()
                .map(|(k, c)| c.abs() * r.norm().powi(k as i32))
                .sum::<f64>()
                .max(f64::MIN_POSITIVE);
            if poly::eval(&num, r).norm() <= CANCEL_TOL * scale {
                let factor = poly::root_factor(r, CANCEL_TOL);
                if factor.len() <= num.len() && factor.len() <= den.len() {
                    num = poly::div(&num, &factor);
                    den = poly::div(&den, &factor);
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            return (num, den);
        }
    }
}

/// Controllable-companion realisation of `−N(s)/(sD(s))` after common-root
/// cancellation, replicated block-diagonally `n_f` times.
pub fn realize_bias_model(g: &TransferFunction, n_f: usize) -> Result<BiasModel> {
    let (num, den) = degrees(g)?;
    if num.is_empty() {
        return Err(Error::DegenerateBias("G ≡ 0 leaves the detector without an integrator".into()));
    }
    let certificate = check_admissible_filter(g)?;
    if n_f == 0 {
        return Ok(BiasModel {
            certificate,
            ..BiasModel::empty()
        });
    }
    let (num, den) = cancel_common_roots(poly::scale(&num, -1.0), poly::mul(&den, &[1.0, 0.0]));
    let lead = den[0];
    let den: Vec<f64> = den.iter().map(|c| c / lead).collect();
    let num: Vec<f64> = num.iter().map(|c| c / lead).collect();
    let d = den.len() - 1;
    if d == 0 {
        return Err(Error::DegenerateBias("bias model has no dynamics after cancellation".into()));
    }

    // den = s^d + a_{d-1}s^{d-1} + … + a_0, num = Σ b_k s^k (k < d)
    let mut omega = Mat::zeros(d, d);
    for i in 0..d - 1 {
        omega[(i, i + 1)] = 1.0;
    }
    for j in 0..d {
        omega[(d - 1, j)] = -den[d - j];
    }
    let mut gamma = Mat::zeros(d, 1);
    gamma[(d - 1, 0)] = 1.0;
    let mut upsilon = Mat::zeros(1, d);
    for (k, c) in num.iter().rev().enumerate() {
        upsilon[(0, k)] = *c;
    }

    let rep = |m: &Mat| block_diag(&vec![m; n_f]);
    let model = BiasModel {
        omega: rep(&omega),
        gamma: rep(&gamma),
        upsilon: rep(&upsilon),
        certificate,
        channel_order: d,
        n_f,
    };
    if !model.is_minimal(CANCEL_TOL) {
        return Err(Error::DegenerateBias("realisation is not minimal".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::new(num, den)
    }

    fn assert_matches_transfer(bm: &BiasModel, g: &TransferFunction) {
        for k in 0..50 {
            let w = 10f64.powf(-2.0 + 5.0 * k as f64 / 49.0);
            let jw = Complex64::new(0.0, w);
            let expected = -(poly::eval(&g.num, jw) / poly::eval(&g.den, jw)) / jw;
            let got = bm.frequency_response(w);
            assert!((got - expected).norm() <= 1e-6 * expected.norm(), "ω={w}: {got} vs {expected}");
        }
    }

    #[test]
    fn example_class_is_stable_with_known_roots() {
        let c = check_admissible_filter(&tf(&[410.0], &[1.0, 40.0])).unwrap();
        assert!(c.stable);
        for r in &c.roots {
            assert!((r[0] + 20.0).abs() < 1e-9);
            assert!((r[1].abs() - 10f64.sqrt()).abs() < 1e-9);
        }
        assert!(c.g1.is_finite() && c.g2 >= 1.0);
    }

    #[test]
    fn negative_gain_is_unstable() {
        let c = check_admissible_filter(&tf(&[-1.0], &[1.0, 1.0])).unwrap();
        assert!(!c.stable);
        let r = c.offending_root.unwrap();
        assert!((r[0] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_gain_certificates() {
        for k in [0.5, 2.0, 410.0] {
            let c = check_admissible_filter(&tf(&[k], &[1.0])).unwrap();
            assert!(c.stable);
            assert!((c.g2 - 1.0).abs() < 1e-12);
            assert!((c.g1 - 1.0 / (2.0 * k)).abs() <= 1e-4 / (2.0 * k), "k={k}: {}", c.g1);
        }
    }

    #[test]
    fn improper_filter_rejected() {
        assert!(matches!(
            check_admissible_filter(&tf(&[1.0, 0.0, 1.0], &[1.0, 1.0])),
            Err(Error::ImproperTransfer { num_deg: 2, den_deg: 1 })
        ));
    }

    #[test]
    fn example_realisation() {
        let g = tf(&[410.0], &[1.0, 40.0]);
        let bm = realize_bias_model(&g, 1).unwrap();
        assert_eq!(bm.omega, Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -40.0]));
        assert_eq!(bm.gamma, Mat::from_row_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(bm.upsilon, Mat::from_row_slice(1, 2, &[-410.0, 0.0]));
        assert_matches_transfer(&bm, &g);
    }

    #[test]
    fn integrator_class_gives_double_integrator() {
        let g = tf(&[1.0], &[1.0, 0.0]);
        let bm = realize_bias_model(&g, 1).unwrap();
        assert_eq!(bm.order(), 2);
        assert_eq!(bm.omega, Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert_matches_transfer(&bm, &g);
    }

    #[test]
    fn common_root_cancels() {
        let k = 3.0;
        let g = tf(&[k, 2.0 * k], &[1.0, 2.0]);
        let bm = realize_bias_model(&g, 1).unwrap();
        assert_eq!(bm.order(), 1);
        assert!((bm.upsilon[(0, 0)] + k).abs() < 1e-12);
        assert!(bm.omega[(0, 0)].abs() < 1e-12);
        assert_matches_transfer(&bm, &g);
    }

    #[test]
    fn replication_and_zero_class() {
        let bm = realize_bias_model(&tf(&[410.0], &[1.0, 40.0]), 3).unwrap();
        assert_eq!(bm.order(), 6);
        assert_eq!(bm.upsilon.shape(), (3, 6));
        assert!(matches!(realize_bias_model(&tf(&[0.0], &[1.0]), 1), Err(Error::DegenerateBias(_))));
    }
}
