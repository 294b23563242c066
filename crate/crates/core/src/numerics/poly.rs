//! Real polynomials stored as coefficient vectors, highest power first.

use num_complex::Complex64;

use super::eig::eigenvalues;
use crate::mat::Mat;

/// Drops leading zeros; the zero polynomial becomes `[]`.
pub fn trim(p: &[f64]) -> Vec<f64> {
    let first = p.iter().position(|&c| c != 0.0).unwrap_or(p.len());
    p[first..].to_vec()
}

/// Degree of a trimmed polynomial; `None` for the zero polynomial.
pub fn degree(p: &[f64]) -> Option<usize> {
    let t = trim(p);
    (!t.is_empty()).then(|| t.len() - 1)
}

pub fn eval(p: &[f64], z: Complex64) -> Complex64 {
    p.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (k, &c) in a.iter().rev().enumerate() {
        out[n - 1 - k] += c;
    }
    for (k, &c) in b.iter().rev().enumerate() {
        out[n - 1 - k] += c;
    }
    out
}

pub fn scale(p: &[f64], s: f64) -> Vec<f64> {
    p.iter().map(|c| c * s).collect()
}

/// Quotient of `p / d`, discarding the remainder.
pub fn div(p: &[f64], d: &[f64]) -> Vec<f64> {
    let d = trim(d);
    let mut r = trim(p);
    if r.len() < d.len() {
        return vec![0.0];
    }
    let mut q = vec![0.0; r.len() - d.len() + 1];
    for k in 0..q.len() {
        let c = r[k] / d[0];
        q[k] = c;
        for (j, &dj) in d.iter().enumerate() {
            r[k + j] -= c * dj;
        }
    }
    q
}

/// Roots via eigenvalues of the companion matrix.
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let p = trim(p);
    if p.len() <= 1 {
        return vec![];
    }
    // zero roots are exact
    let nz = p.iter().rev().take_while(|&&c| c == 0.0).count();
    let core = &p[..p.len() - nz];
    let d = core.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); nz];
    if d == 0 {
        return out;
    }
    let mut comp = Mat::zeros(d, d);
    for j in 0..d {
        comp[(0, j)] = -core[j + 1] / core[0];
    }
    for i in 1..d {
        comp[(i, i - 1)] = 1.0;
    }
    out.extend(eigenvalues(&comp).expect("companion eigenvalues"));
    out
}

/// Real factor corresponding to `r`: `s − r` for real roots, the conjugate-pair quadratic otherwise.
pub fn root_factor(r: Complex64, imag_tol: f64) -> Vec<f64> {
    if r.im.abs() <= imag_tol * (1.0 + r.norm()) {
        vec![1.0, -r.re]
    } else {
        vec![1.0, -2.0 * r.re, r.norm_sqr()]
    }
}
