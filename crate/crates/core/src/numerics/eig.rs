use nalgebra::{Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mat::{asymmetry, symmetrize, Mat};

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn sym_eig_bounds(m: &Mat) -> Result<(f64, f64)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Invalid(format!(
            "sym_eig_bounds needs a non-empty square matrix, got {:?}",
            m.shape()
        )));
    }
    if asymmetry(m) > 1e-8 * m.norm() {
        return Err(Error::Invalid("sym_eig_bounds: matrix is not symmetric".into()));
    }
    let ev = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    Ok((ev.min(), ev.max()))
}

pub fn sym_min_eig(m: &Mat) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Diagonal similarity scaling (powers of two) that equalises row and column norms.
/// Returns the balanced matrix; eigenvalues are unchanged.
pub fn balance(m: &Mat) -> Mat {
    let n = m.nrows();
    let mut b = m.clone();
    let radix = 2.0f64;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / radix {
                cc *= radix;
                rr /= radix;
                f *= radix;
            }
            while cc >= rr * radix {
                cc /= radix;
                rr *= radix;
                f /= radix;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    b
}

/// All eigenvalues of a real square matrix (balanced Schur iteration).
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(vec![]);
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Invalid("eigenvalues of a non-finite matrix".into()));
    }
    let b = balance(m);
    let schur = Schur::try_new(b, f64::EPSILON, 2000 * n.max(10))
        .ok_or_else(|| Error::Invalid("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part of the eigenvalues; `−∞` for an empty matrix, NaN if the
/// eigenvalue iteration fails.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    match eigenvalues(m) {
        Ok(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::NAN,
    }
}

pub fn spectral_radius(m: &Mat) -> f64 {
    match eigenvalues(m) {
        Ok(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

/// PBH test: `[A − λI, B]` has full row rank at every eigenvalue with `Re λ ≥ 0`.
pub fn is_stabilizable(a: &Mat, b: &Mat, tol: f64) -> bool {
    let n = a.nrows();
    let Ok(eigs) = eigenvalues(a) else { return false };
    let scale = 1.0 + a.norm() + b.norm();
    eigs.iter().filter(|z| z.re >= -tol * scale).all(|&lam| {
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(n, n + b.ncols());
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(a[(i, j)], 0.0) - if i == j { lam } else { Complex64::new(0.0, 0.0) };
            }
            for j in 0..b.ncols() {
                m[(i, n + j)] = Complex64::new(b[(i, j)], 0.0);
            }
        }
        // row rank of an n×(n+m) matrix = rank of its n×n Gram matrix
        let gram = &m * m.adjoint();
        gram.svd(false, false).singular_values.min().sqrt() > tol * scale
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbh_detects_uncontrollable_unstable_mode() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(is_stabilizable(&a, &Mat::from_row_slice(2, 1, &[1.0, 0.0]), 1e-9));
        assert!(!is_stabilizable(&a, &Mat::from_row_slice(2, 1, &[0.0, 1.0]), 1e-9));
    }

    #[test]
    fn bounds_of_simple_matrices() {
        assert_eq!(sym_eig_bounds(&Mat::identity(6, 6)).unwrap(), (1.0, 1.0));
        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-2.0, 3.0]));
        let (lo, hi) = sym_eig_bounds(&d).unwrap();
        assert!((lo + 2.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(sym_eig_bounds(&m).is_err());
    }

    #[test]
    fn abscissa_cases() {
        let d = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        assert!((spectral_abscissa(&d) + 1.0).abs() < 1e-14);
        let rot = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&rot).abs() < 1e-14);
    }

    #[test]
    fn balancing_preserves_spectrum_of_badly_scaled_matrix() {
        let m = Mat::from_row_slice(3, 3, &[1.0, 1e8, 0.0, 1e-8, 2.0, 1e6, 0.0, 1e-6, 3.0]);
        let mut a: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
        a.sort_by(f64::total_cmp);
        let tr: f64 = a.iter().sum();
        assert!((tr - 6.0).abs() < 1e-9);
    }
}
