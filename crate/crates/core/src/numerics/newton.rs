//! Newton's method for small dense systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Forward-difference step for the Jacobian when none is supplied.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 50,
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub root: DVector<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Solve `residual(z) = 0` from `guess` with an analytic Jacobian.
pub fn newton_solve<R, J>(
    residual: R,
    jacobian: J,
    guess: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonSolution>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "newton tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let mut z = guess;
    let mut r = residual(&z);
    let mut norm = r.norm();
    for it in 0..=opts.max_iter {
        if !norm.is_finite() {
            break;
        }
        if norm <= opts.tol {
            return Ok(NewtonSolution {
                root: z,
                iterations: it,
                residual_norm: norm,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let jac = jacobian(&z);
        let Some(step) = jac.lu().solve(&r) else {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: norm,
            });
        };
        z -= step;
        r = residual(&z);
        norm = r.norm();
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: norm,
    })
}

/// Newton where one call yields both the residual and its Jacobian.
///
/// On success the last call to `system` was made at the returned root.
pub fn newton_solve_joint<S>(
    mut system: S,
    guess: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonSolution>
where
    S: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "newton tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let mut z = guess;
    let mut norm = f64::NAN;
    for it in 0..=opts.max_iter {
        let (r, jac) = system(&z);
        norm = r.norm();
        if !norm.is_finite() {
            break;
        }
        if norm <= opts.tol {
            return Ok(NewtonSolution {
                root: z,
                iterations: it,
                residual_norm: norm,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let Some(step) = jac.lu().solve(&r) else {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: norm,
            });
        };
        z -= step;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: norm,
    })
}

/// Newton with a forward-difference Jacobian.
pub fn newton_solve_fd<R>(
    residual: R,
    guess: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonSolution>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
{
    let jac = |z: &DVector<f64>| fd_jacobian(&residual, z, opts.fd_step);
    newton_solve(&residual, jac, guess, opts)
}

/// Forward-difference Jacobian, column `j` = `(F(z + h e_j) - F(z)) / h`.
pub fn fd_jacobian<F>(f: F, z: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let f0 = f(z);
    let mut jac = DMatrix::zeros(f0.len(), z.len());
    for j in 0..z.len() {
        let mut zp = z.clone();
        zp[j] += h;
        let col = (f(&zp) - &f0) / h;
        jac.set_column(j, &col);
    }
    jac
}
