//! Dense matrix helpers shared across the crate, plus serde adapters that
//! store matrices as row-major nested arrays.

use nalgebra::DMatrix;

pub type Mat = DMatrix<f64>;

/// Row-major nested-array serde for `Mat`. An empty outer array is the 0×0 matrix.
pub mod rows {
    use super::Mat;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat, String> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|row| row.len() != c) {
            return Err(format!(
                "ragged matrix: row {bad} has {} entries, expected {c}",
                rows[bad].len()
            ));
        }
        Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

/// `Option<Mat>` variant of [`rows`].
pub mod rows_opt {
    use super::{rows, Mat};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(rows::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(|r| rows::from_rows(&r).map_err(D::Error::custom))
            .transpose()
    }
}

/// `Option<Vec<Mat>>` variant of [`rows`].
pub mod rows_vec_opt {
    use super::{rows, Mat};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Vec<Mat>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref()
            .map(|v| v.iter().map(rows::to_rows).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Mat>>, D::Error> {
        Option::<Vec<Vec<Vec<f64>>>>::deserialize(d)?
            .map(|v| {
                v.iter()
                    .map(|r| rows::from_rows(r).map_err(D::Error::custom))
                    .collect()
            })
            .transpose()
    }
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `M − Mᵀ`.
pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), b.shape()).copy_from(*b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let r = blocks.first().map_or(0, |b| b.nrows());
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let mut j = 0;
    for b in blocks {
        assert_eq!(b.nrows(), r, "hstack row mismatch");
        out.view_mut((0, j), b.shape()).copy_from(*b);
        j += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let c = blocks.first().map_or(0, |b| b.ncols());
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(r, c);
    let mut i = 0;
    for b in blocks {
        assert_eq!(b.ncols(), c, "vstack column mismatch");
        out.view_mut((i, 0), b.shape()).copy_from(*b);
        i += b.nrows();
    }
    out
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &Mat) -> Option<Mat> {
    nalgebra::Cholesky::new(m.clone()).map(|c| c.inverse())
}

/// Adds `sign · block` into `dst` at `(row, col)`.
pub fn add_block(dst: &mut Mat, row: usize, col: usize, block: &Mat, sign: f64) {
    let mut v = dst.view_mut((row, col), block.shape());
    v += block * sign;
}

/// 2-norm condition number estimate from singular values.
pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
