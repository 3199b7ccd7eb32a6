//! The standard symplectic matrix `J = [[0, I], [-I, 0]]` and checks against it.

use nalgebra::DMatrix;

use crate::error::Result;

/// `J v` for `v = (a, b)`: returns `(b, -a)`.
pub fn apply_j(v: &[f64]) -> Vec<f64> {
    let n = v.len() / 2;
    let mut out = Vec::with_capacity(v.len());
    out.extend_from_slice(&v[n..]);
    out.extend(v[..n].iter().map(|x| -x));
    out
}

pub fn j_matrix(dim: usize) -> DMatrix<f64> {
    let n = dim / 2;
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Entrywise max of `|AᵀJA - J|`.
pub fn symplectic_defect(a: &DMatrix<f64>) -> f64 {
    let j = j_matrix(a.nrows());
    (a.transpose() * &j * a - &j).amax()
}

/// Central-difference Jacobian of a fallible map.
pub fn central_jacobian<F>(f: F, z: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac: Option<DMatrix<f64>> = None;
    for k in 0..z.len() {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[k] += h;
        zm[k] -= h;
        let fp = f(&zp)?;
        let fm = f(&zm)?;
        let jm = jac.get_or_insert_with(|| DMatrix::zeros(fp.len(), z.len()));
        for i in 0..fp.len() {
            jm[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        let j = j_matrix(4);
        assert_eq!(&j * &j, -DMatrix::<f64>::identity(4, 4));
        assert_eq!(apply_j(&[1.0, 2.0, 3.0, 4.0]), vec![3.0, 4.0, -1.0, -2.0]);
    }

    #[test]
    fn shear_is_symplectic() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        assert!(symplectic_defect(&a) < 1e-15);
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!((symplectic_defect(&b) - 1.0).abs() < 1e-15);
    }
}
