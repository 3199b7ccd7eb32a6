//! The isotopy `g_α` generated by `W_α = ⟨x', y⟩ + ℓ(α) V(x', y)`.
//!
//! `g_α(x, y) = (x', y')` with `x = x' + ℓ(α) ∂V/∂y(x', y)` and
//! `y' = y + ℓ(α) ∂V/∂x'(x', y)`, so `g_0 = id` and `g_α = g` for `α >= ξ`.
//! `X_α = ġ_α ∘ g_α⁻¹` is the (non-autonomous) vector field of the isotopy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::GeneratingPerturbation;
use crate::numerics::bump::BumpProfile;
use crate::numerics::newton::{newton_solve_joint, NewtonOptions};

#[derive(Debug, Clone)]
pub struct IsotopyFamily {
    perturbation: GeneratingPerturbation,
    profile: BumpProfile,
    newton: NewtonOptions,
}

// Blocks of the Hessian of V at (x', y); `rows`/`cols` select x' (0) or y (1).
fn block(h: &DMatrix<f64>, n: usize, rows: usize, cols: usize) -> DMatrix<f64> {
    h.view((rows * n, cols * n), (n, n)).into_owned()
}

fn contraction(e: Error) -> Error {
    match e {
        Error::NoConvergence {
            iterations,
            residual,
        } => Error::ContractionViolation(format!(
            "generating-function solve failed after {iterations} iterations (residual {residual:e})"
        )),
        other => other,
    }
}

impl IsotopyFamily {
    pub fn new(perturbation: GeneratingPerturbation, profile: BumpProfile) -> Result<Self> {
        if !matches!(profile, BumpProfile::Alpha { .. }) {
            return Err(Error::WrongProfile {
                expected: "alpha profile",
            });
        }
        Ok(IsotopyFamily {
            perturbation,
            profile,
            newton: NewtonOptions::default(),
        })
    }

    pub fn with_newton(mut self, newton: NewtonOptions) -> Self {
        self.newton = newton;
        self
    }

    pub fn perturbation(&self) -> &GeneratingPerturbation {
        &self.perturbation
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    pub fn half_dim(&self) -> usize {
        self.perturbation.half_dim()
    }

    /// `ξ`: `ℓ' = 0` outside `(0, ξ)`.
    pub fn rise(&self) -> f64 {
        match self.profile {
            BumpProfile::Alpha { rise } => rise,
            BumpProfile::Energy { .. } => unreachable!("checked in new"),
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        let d = 2 * self.half_dim();
        if z.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: z.len(),
            });
        }
        Ok(())
    }

    fn outside_support(&self, z: &[f64]) -> bool {
        let r = self.perturbation.support_radius();
        r.is_finite() && z.iter().map(|v| v * v).sum::<f64>() >= r * r
    }

    /// Newton on the unknown half of the generating argument `(x', y)`.
    ///
    /// `known` is the other half; the unknown sits first when
    /// `unknown_first`. Newton starts from `guess`, or from `target` when
    /// there is none. Returns the full argument with `∇V` and `Hess V`
    /// there.
    fn solve(
        &self,
        l: f64,
        known: &[f64],
        target: &[f64],
        unknown_first: bool,
        guess: Option<&[f64]>,
    ) -> Result<Solved> {
        let n = self.half_dim();
        let v = &self.perturbation;
        // Residual u + l ∂V/∂(other half) - target; the Jacobian block is
        // ∂²V/∂(other)∂(unknown).
        let (grad_off, row, col) = if unknown_first { (n, 1, 0) } else { (0, 0, 1) };
        let assemble = |u: &DVector<f64>| -> Vec<f64> {
            let mut p = Vec::with_capacity(2 * n);
            if unknown_first {
                p.extend_from_slice(u.as_slice());
                p.extend_from_slice(known);
            } else {
                p.extend_from_slice(known);
                p.extend_from_slice(u.as_slice());
            }
            p
        };
        let mut last: Option<(Vec<f64>, DMatrix<f64>)> = None;
        let system = |u: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
            match v.gradient_hessian(&assemble(u)) {
                Ok((g, h)) => {
                    let r = DVector::from_fn(n, |i, _| u[i] + l * g[grad_off + i] - target[i]);
                    let jac = DMatrix::from_fn(n, n, |i, j| {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        delta + l * h[(row * n + i, col * n + j)]
                    });
                    last = Some((g, h));
                    (r, jac)
                }
                Err(_) => {
                    last = None;
                    (
                        DVector::from_element(n, f64::NAN),
                        DMatrix::from_element(n, n, f64::NAN),
                    )
                }
            }
        };
        let sol = newton_solve_joint(
            system,
            DVector::from_column_slice(guess.unwrap_or(target)),
            &self.newton,
        )
            .map_err(contraction)?;
        let (grad, hess) = last.expect("converged system was evaluated at the root");
        Ok(Solved {
            point: assemble(&sol.root),
            grad,
            hess,
        })
    }

    /// `g_α(x, y)`.
    pub fn eval(&self, alpha: f64, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let l = self.profile.value(alpha);
        if l == 0.0 || self.outside_support(z) {
            return Ok(z.to_vec());
        }
        let n = self.half_dim();
        let (x, y) = z.split_at(n);
        let sol = self.solve(l, y, x, true, None)?;
        let mut out = sol.point[..n].to_vec();
        out.extend((0..n).map(|i| y[i] + l * sol.grad[i]));
        Ok(out)
    }

    /// `g_α⁻¹(x', y')`.
    pub fn inverse(&self, alpha: f64, zp: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(zp)?;
        let l = self.profile.value(alpha);
        if l == 0.0 || self.outside_support(zp) {
            return Ok(zp.to_vec());
        }
        let n = self.half_dim();
        let (xp, yp) = zp.split_at(n);
        let sol = self.solve(l, xp, yp, false, None)?;
        let mut out: Vec<f64> = (0..n).map(|i| xp[i] + l * sol.grad[n + i]).collect();
        out.extend_from_slice(&sol.point[n..]);
        Ok(out)
    }

    /// `X_α(z)` for each `α` in `alphas`, at one point.
    ///
    /// Meant for closely spaced `α`: after the first, each solve starts
    /// from the first-order prediction `y + Δα ∂y/∂α` of the previous one,
    /// so it typically needs a single Newton step.
    pub fn field_along_alpha(&self, alphas: &[f64], z: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(z)?;
        let n = self.half_dim();
        let (xp, yp) = z.split_at(n);
        let outside = self.outside_support(z);
        // (α, y, ∂y/∂α) of the last solve
        let mut prev: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        let mut out = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let [l, dl, _, _] = self.profile.derivatives(alpha);
            if dl == 0.0 || outside {
                out.push(vec![0.0; z.len()]);
                prev = None;
                continue;
            }
            let guess: Option<Vec<f64>> = prev
                .as_ref()
                .map(|(a, y, dy)| y.iter().zip(dy).map(|(v, d)| v + (alpha - a) * d).collect());
            let sol = self.solve(l, xp, yp, false, guess.as_deref())?;
            // y + ℓ ∂V/∂x'(x', y) = y' gives (I + ℓ V_x'y) ∂y/∂α = -ℓ' ∂V/∂x'.
            let jac = DMatrix::from_fn(n, n, |i, j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                delta + l * sol.hess[(i, n + j)]
            });
            let rhs = DVector::from_fn(n, |i, _| -dl * sol.grad[i]);
            let dy = jac.lu().solve(&rhs).ok_or_else(|| {
                Error::ContractionViolation("I + ℓ D_y∂V/∂x' is singular".into())
            })?;
            out.push(self.velocity_at(l, dl, &sol)?);
            prev = Some((alpha, sol.point[n..].to_vec(), dy.as_slice().to_vec()));
        }
        Ok(out)
    }

    /// The generating argument `(x', y)` of `g_α⁻¹(x', y')`.
    pub fn generating_argument(&self, alpha: f64, zp: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(zp)?;
        let l = self.profile.value(alpha);
        if l == 0.0 || self.outside_support(zp) {
            return Ok(zp.to_vec());
        }
        let n = self.half_dim();
        let (xp, yp) = zp.split_at(n);
        Ok(self.solve(l, xp, yp, false, None)?.point)
    }

    // ġ_α from the jet of V at the generating argument (x', y).
    fn velocity_at(&self, l: f64, dl: f64, sol: &Solved) -> Result<Vec<f64>> {
        let n = self.half_dim();
        let (grad, h) = (&sol.grad, &sol.hess);
        let a = DMatrix::identity(n, n) + block(h, n, 1, 0) * l;
        let rhs = DVector::from_fn(n, |i, _| -dl * grad[n + i]);
        let xdot = a.lu().solve(&rhs).ok_or_else(|| {
            Error::ContractionViolation("I + ℓ D_x'∂V/∂y is singular".into())
        })?;
        let ydot = DVector::from_fn(n, |i, _| dl * grad[i]) + block(h, n, 0, 0) * &xdot * l;
        let mut out = xdot.as_slice().to_vec();
        out.extend_from_slice(ydot.as_slice());
        Ok(out)
    }

    /// `ġ_α(x, y) = d/dα g_α(x, y)` by implicit differentiation.
    pub fn velocity(&self, alpha: f64, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let [l, dl, _, _] = self.profile.derivatives(alpha);
        if dl == 0.0 || self.outside_support(z) {
            return Ok(vec![0.0; z.len()]);
        }
        let n = self.half_dim();
        let (x, y) = z.split_at(n);
        let sol = self.solve(l, y, x, true, None)?;
        self.velocity_at(l, dl, &sol)
    }

    /// `X_α(z) = ġ_α(g_α⁻¹(z))`.
    ///
    /// `g_α⁻¹(x', y')` has generating argument `(x', y)`, so only the `y`
    /// solve is needed.
    pub fn vector_field(&self, alpha: f64, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let [l, dl, _, _] = self.profile.derivatives(alpha);
        if dl == 0.0 || self.outside_support(z) {
            return Ok(vec![0.0; z.len()]);
        }
        let n = self.half_dim();
        let (xp, yp) = z.split_at(n);
        let sol = self.solve(l, xp, yp, false, None)?;
        self.velocity_at(l, dl, &sol)
    }
}

struct Solved {
    point: Vec<f64>,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

/// `g = g_1`, the map generated by `V` itself.
pub fn map_from_generator(v: &GeneratingPerturbation, z: &[f64]) -> Result<Vec<f64>> {
    // ℓ ≡ 1 on [ξ, ∞) for any rise width; α = 1 lies there.
    let family = IsotopyFamily::new(v.clone(), BumpProfile::Alpha { rise: 0.5 })?;
    family.eval(1.0, z)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::generator::GeneratorFamily;

    fn shear(eps: f64) -> IsotopyFamily {
        let field = GeneratorFamily::LinearShear.build(1, eps, 1.0, 0).unwrap();
        IsotopyFamily::new(
            GeneratingPerturbation::unchecked(Arc::new(field)),
            BumpProfile::alpha(0.5).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn endpoints() {
        let f = shear(0.1);
        assert_eq!(f.eval(0.0, &[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        let g = f.eval(0.7, &[1.0, 1.0]).unwrap();
        assert!((g[0] - 1.0 / 1.1).abs() < 1e-14);
        assert!((g[1] - 1.1).abs() < 1e-14);
    }

    #[test]
    fn inverse_of_linear_shear() {
        let f = shear(0.1);
        let z = f.inverse(0.9, &[1.0, 1.0]).unwrap();
        assert!((z[0] - 1.1).abs() < 1e-14);
        assert!((z[1] - 1.0 / 1.1).abs() < 1e-14);
    }

    #[test]
    fn velocity_vanishes_off_the_rise() {
        let f = shear(0.1);
        assert_eq!(f.velocity(0.75, &[0.3, 0.2]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f.velocity(-0.1, &[0.3, 0.2]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f.vector_field(0.99, &[0.3, 0.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn wrong_profile_is_rejected() {
        let e = IsotopyFamily::new(
            GeneratingPerturbation::zero(1),
            BumpProfile::energy(0.5, 1.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(e, Error::WrongProfile { .. }));
    }

    #[test]
    fn singular_solve_reports_contraction_violation() {
        // ε = -1 makes x = (1 + ℓε) x' degenerate at ℓ = 1.
        let f = shear(-1.0);
        let e = f.eval(1.0, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::ContractionViolation(_)), "{e:?}");
    }

    #[test]
    fn alpha_sweep_matches_separate_solves() {
        let field = GeneratorFamily::RandomPoly.build(1, 0.05, 1.0, 3).unwrap();
        let iso = IsotopyFamily::new(
            GeneratingPerturbation::unchecked(Arc::new(field)),
            BumpProfile::alpha(0.5).unwrap(),
        )
        .unwrap();
        let z = [0.4, -0.35];
        let alphas = [-0.1, 0.2 - 1e-5, 0.2, 0.2 + 1e-5, 0.3, 0.7];
        let swept = iso.field_along_alpha(&alphas, &z).unwrap();
        for (a, f) in alphas.iter().zip(&swept) {
            let direct = iso.vector_field(*a, &z).unwrap();
            // Both solves stop at the Newton residual tolerance, not at the same iterate.
            for (p, q) in f.iter().zip(&direct) {
                assert!((p - q).abs() < 10.0 * iso.newton.tol, "α={a}: {p} vs {q}");
            }
        }
    }
}
