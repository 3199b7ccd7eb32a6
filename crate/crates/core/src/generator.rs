//! Generating perturbations `V(x', y)`.
//!
//! A near-identity symplectic map `g(x, y) = (x', y')` is generated by
//! `W(x', y) = ⟨x', y⟩ + V(x', y)` through `x = ∂W/∂y`, `y' = ∂W/∂x'`.
//! Only `∇V` and its Hessian enter the construction, so they are the
//! first-class evaluators here; the scalar `V` is optional.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bump::RadialCutoff;
use crate::numerics::grid::{cs_norm, GridDomain};
use crate::numerics::newton::{newton_solve_fd, NewtonOptions};
use crate::numerics::symplectic::{central_jacobian, symplectic_defect};

/// Contraction cap on `‖∇V‖_{C¹}`.
pub const CONTRACTION_CAP: f64 = 0.5;

/// Plateau fraction of the radial cutoff applied to the bundled families.
pub const CUTOFF_PLATEAU: f64 = 0.25;

/// Evaluators of `∇V` and `Hess V` on `R^{2n}`, arguments ordered `(x', y)`.
pub trait GeneratorField: Send + Sync + fmt::Debug {
    /// `n`, the number of `x'` (and `y`) coordinates.
    fn half_dim(&self) -> usize;
    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>>;
    /// Row-major `2n × 2n` Hessian.
    fn hessian(&self, z: &[f64]) -> Result<DMatrix<f64>>;
    /// Both at once; override when they share work.
    fn gradient_hessian(&self, z: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        Ok((self.gradient(z)?, self.hessian(z)?))
    }
    /// `∇V` vanishes outside this ball, when known.
    fn support_radius(&self) -> Option<f64>;
    /// Radii inside the support where `V` is smooth but not analytic.
    /// Quadratures along rays split there.
    fn break_radii(&self) -> Vec<f64> {
        Vec::new()
    }
    fn value(&self, _z: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    /// Value, gradient and row-major Hessian at `z`.
    pub fn jet(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let dim = z.len();
        let mut val = 0.0;
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        // powers[k * stride + e] = z_k^e
        let degree = self
            .terms
            .iter()
            .flat_map(|m| m.exponents.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        let stride = degree + 1;
        let mut powers = vec![1.0; dim * stride];
        for k in 0..dim {
            for e in 1..stride {
                powers[k * stride + e] = powers[k * stride + e - 1] * z[k];
            }
        }
        let mut pw = vec![(0.0, 0.0, 0.0); dim];
        for m in &self.terms {
            for (k, p) in pw.iter_mut().enumerate() {
                let e = m.exponents[k] as usize;
                let row = &powers[k * stride..];
                let ef = e as f64;
                *p = (
                    row[e],
                    if e >= 1 { ef * row[e - 1] } else { 0.0 },
                    if e >= 2 { ef * (ef - 1.0) * row[e - 2] } else { 0.0 },
                );
            }
            // coef · Π_{k ∉ {a, b}} z_k^{e_k}
            let rest = |a: usize, b: usize| -> f64 {
                let mut p = m.coef;
                for (k, q) in pw.iter().enumerate() {
                    if k != a && k != b {
                        p *= q.0;
                    }
                }
                p
            };
            val += rest(dim, dim);
            for i in 0..dim {
                if m.exponents[i] == 0 {
                    continue;
                }
                let ri = rest(i, dim);
                grad[i] += pw[i].1 * ri;
                hess[i * dim + i] += pw[i].2 * ri;
                for j in i + 1..dim {
                    if m.exponents[j] == 0 {
                        continue;
                    }
                    let h = pw[i].1 * pw[j].1 * rest(i, j);
                    hess[i * dim + j] += h;
                    hess[j * dim + i] += h;
                }
            }
        }
        (val, grad, hess)
    }
}

/// `V = scale · p(x', y) · χ(‖(x', y)‖)` with optional radial cutoff `χ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialGenerator {
    pub half_dim: usize,
    pub scale: f64,
    pub poly: Polynomial,
    pub cutoff: Option<RadialCutoff>,
}

impl PolynomialGenerator {
    fn jet(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let dim = z.len();
        let (p, mut grad, mut hess) = self.poly.jet(z);
        let Some(cut) = &self.cutoff else {
            grad.iter_mut().chain(hess.iter_mut()).for_each(|v| *v *= self.scale);
            return (self.scale * p, grad, hess);
        };
        let (c, gc, hc) = cut.jet(z);
        // Product rule, in place; the Hessian needs the polynomial gradient
        // before it is overwritten.
        for i in 0..dim {
            for j in 0..dim {
                let k = i * dim + j;
                hess[k] = self.scale * (c * hess[k] + grad[i] * gc[j] + gc[i] * grad[j] + p * hc[k]);
            }
        }
        for i in 0..dim {
            grad[i] = self.scale * (c * grad[i] + p * gc[i]);
        }
        (self.scale * p * c, grad, hess)
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != 2 * self.half_dim {
            return Err(Error::Dimension {
                expected: 2 * self.half_dim,
                got: z.len(),
            });
        }
        Ok(())
    }
}

impl GeneratorField for PolynomialGenerator {
    fn half_dim(&self) -> usize {
        self.half_dim
    }

    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        if self.outside_support(z) {
            return Ok(vec![0.0; z.len()]);
        }
        Ok(self.jet(z).1)
    }

    fn hessian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check(z)?;
        let dim = z.len();
        if self.outside_support(z) {
            return Ok(DMatrix::zeros(dim, dim));
        }
        Ok(DMatrix::from_row_slice(dim, dim, &self.jet(z).2))
    }

    fn gradient_hessian(&self, z: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check(z)?;
        let dim = z.len();
        if self.outside_support(z) {
            return Ok((vec![0.0; dim], DMatrix::zeros(dim, dim)));
        }
        let (_, g, h) = self.jet(z);
        // Symmetric, so the row-major buffer is also column-major.
        Ok((g, DMatrix::from_vec(dim, dim, h)))
    }

    fn support_radius(&self) -> Option<f64> {
        self.cutoff.map(|c| c.radius())
    }

    fn break_radii(&self) -> Vec<f64> {
        self.cutoff.iter().map(|c| c.plateau_radius()).collect()
    }

    fn value(&self, z: &[f64]) -> Option<f64> {
        if self.outside_support(z) {
            return Some(0.0);
        }
        Some(self.jet(z).0)
    }
}

impl PolynomialGenerator {
    fn outside_support(&self, z: &[f64]) -> bool {
        match &self.cutoff {
            Some(c) => z.iter().map(|v| v * v).sum::<f64>() >= c.radius() * c.radius(),
            None => self.scale == 0.0,
        }
    }
}

/// Bundled generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorFamily {
    /// `V = ε Σ x'_i y_i`, no cutoff.
    LinearShear,
    /// `V = ε Σ (x'_i³/3 + x'_i y_i²) · χ`.
    Cubic,
    /// Seeded polynomial with monomials of degree 2..=4, times `χ`.
    RandomPoly,
}

impl GeneratorFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorFamily::LinearShear => "linear-shear",
            GeneratorFamily::Cubic => "cubic",
            GeneratorFamily::RandomPoly => "random-poly",
        }
    }

    pub fn all() -> [GeneratorFamily; 3] {
        [
            GeneratorFamily::LinearShear,
            GeneratorFamily::Cubic,
            GeneratorFamily::RandomPoly,
        ]
    }

    pub fn polynomial(&self, n: usize, seed: u64) -> Polynomial {
        let dim = 2 * n;
        let unit = |k: usize, e: u32| {
            let mut v = vec![0u32; dim];
            v[k] = e;
            v
        };
        match self {
            GeneratorFamily::LinearShear => Polynomial {
                terms: (0..n)
                    .map(|i| {
                        let mut e = unit(i, 1);
                        e[n + i] = 1;
                        Monomial {
                            coef: 1.0,
                            exponents: e,
                        }
                    })
                    .collect(),
            },
            GeneratorFamily::Cubic => {
                let mut terms = Vec::new();
                for i in 0..n {
                    terms.push(Monomial {
                        coef: 1.0 / 3.0,
                        exponents: unit(i, 3),
                    });
                    let mut e = unit(i, 1);
                    e[n + i] = 2;
                    terms.push(Monomial {
                        coef: 1.0,
                        exponents: e,
                    });
                }
                Polynomial { terms }
            }
            GeneratorFamily::RandomPoly => random_polynomial(dim, seed),
        }
    }

    /// Build the generator field for `ε = scale`.
    pub fn build(
        &self,
        n: usize,
        scale: f64,
        cutoff_radius: f64,
        seed: u64,
    ) -> Result<PolynomialGenerator> {
        if n == 0 {
            return Err(Error::InvalidArgument("half dimension must be positive".into()));
        }
        let cutoff = match self {
            GeneratorFamily::LinearShear => None,
            _ => Some(RadialCutoff::new(CUTOFF_PLATEAU, cutoff_radius)?),
        };
        Ok(PolynomialGenerator {
            half_dim: n,
            scale,
            poly: self.polynomial(n, seed),
            cutoff,
        })
    }
}

/// All monomials of degree 2..=4 with coefficients uniform in [-1, 1],
/// normalized so the coefficients have unit ℓ¹ norm per degree.
fn random_polynomial(dim: usize, seed: u64) -> Polynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for degree in 2..=4usize {
        let start = terms.len();
        for e in crate::numerics::grid::multi_indices(dim, degree) {
            terms.push(Monomial {
                coef: rng.random_range(-1.0..=1.0),
                exponents: e.into_iter().map(|k| k as u32).collect(),
            });
        }
        let l1: f64 = terms[start..].iter().map(|m| m.coef.abs()).sum();
        if l1 > 0.0 {
            for m in &mut terms[start..] {
                m.coef /= l1;
            }
        }
    }
    Polynomial { terms }
}

/// `V` together with its support radius and measured `δ₁ = ‖∇V‖_{C¹}`.
#[derive(Clone)]
pub struct GeneratingPerturbation {
    field: Arc<dyn GeneratorField>,
    support_radius: f64,
    delta1: f64,
}

impl fmt::Debug for GeneratingPerturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratingPerturbation")
            .field("field", &self.field)
            .field("support_radius", &self.support_radius)
            .field("delta1", &self.delta1)
            .finish()
    }
}

impl GeneratingPerturbation {
    /// Measure `δ₁` over `domain` and enforce the contraction cap.
    pub fn measure(field: Arc<dyn GeneratorField>, domain: &GridDomain) -> Result<Self> {
        let delta1 = cs_norm(|z| field.gradient(z), domain, 1)?;
        if delta1 >= CONTRACTION_CAP {
            return Err(Error::ContractionViolation(format!(
                "‖∇V‖_C1 = {delta1:.6} is not below {CONTRACTION_CAP}"
            )));
        }
        Ok(Self::with_delta(field, delta1))
    }

    /// Skip the admissibility check; `δ₁` is recorded as NaN.
    pub fn unchecked(field: Arc<dyn GeneratorField>) -> Self {
        Self::with_delta(field, f64::NAN)
    }

    fn with_delta(field: Arc<dyn GeneratorField>, delta1: f64) -> Self {
        let support_radius = field.support_radius().unwrap_or(f64::INFINITY);
        GeneratingPerturbation {
            field,
            support_radius,
            delta1,
        }
    }

    /// `V ≡ 0` on `R^{2n}`.
    pub fn zero(n: usize) -> Self {
        let field = PolynomialGenerator {
            half_dim: n,
            scale: 0.0,
            poly: Polynomial::default(),
            cutoff: None,
        };
        GeneratingPerturbation {
            field: Arc::new(field),
            support_radius: 0.0,
            delta1: 0.0,
        }
    }

    pub fn half_dim(&self) -> usize {
        self.field.half_dim()
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn break_radii(&self) -> Vec<f64> {
        self.field.break_radii()
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn field(&self) -> &Arc<dyn GeneratorField> {
        &self.field
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.field.gradient(z)
    }

    pub fn hessian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.field.hessian(z)
    }

    pub fn gradient_hessian(&self, z: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.field.gradient_hessian(z)
    }

    pub fn value(&self, z: &[f64]) -> Option<f64> {
        self.field.value(z)
    }
}

/// Ball of radius `radius` in `R^{2n}` with a resolution suited to `n`.
pub fn default_domain(n: usize, radius: f64) -> Result<GridDomain> {
    let points = match 2 * n {
        2 => 41,
        4 => 11,
        _ => 7,
    };
    GridDomain::ball(vec![0.0; 2 * n], radius, points)
}

/// A black-box map `R^{2n} → R^{2n}`.
pub type MapFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// `∇V` recovered from a map: at `(x', y)`, solve `π₁g(x, y) = x'` for `x`,
/// then `∇V(x', y) = J(g(x, y) - (x, y))`.
pub struct FittedGenerator {
    map: MapFn,
    half_dim: usize,
    support: f64,
    newton: NewtonOptions,
    hessian_step: f64,
}

impl fmt::Debug for FittedGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedGenerator")
            .field("half_dim", &self.half_dim)
            .field("support", &self.support)
            .finish()
    }
}

impl FittedGenerator {
    fn source_point(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.half_dim;
        let (xp, y) = z.split_at(n);
        let residual = |x: &DVector<f64>| -> DVector<f64> {
            let mut p = x.as_slice().to_vec();
            p.extend_from_slice(y);
            match (self.map)(&p) {
                Ok(gz) => DVector::from_fn(n, |i, _| gz[i] - xp[i]),
                Err(_) => DVector::from_element(n, f64::NAN),
            }
        };
        let sol = newton_solve_fd(residual, DVector::from_column_slice(xp), &self.newton)
            .map_err(|e| Error::ContractionViolation(format!("π₁g(·, y) = x' not solvable: {e}")))?;
        let mut p = sol.root.as_slice().to_vec();
        p.extend_from_slice(y);
        Ok(p)
    }
}

impl GeneratorField for FittedGenerator {
    fn half_dim(&self) -> usize {
        self.half_dim
    }

    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.half_dim;
        if z.len() != 2 * n {
            return Err(Error::Dimension {
                expected: 2 * n,
                got: z.len(),
            });
        }
        let p = self.source_point(z)?;
        let gz = (self.map)(&p)?;
        // J(Δx, Δy) = (Δy, -Δx)
        let mut out = Vec::with_capacity(2 * n);
        out.extend((0..n).map(|i| gz[n + i] - p[n + i]));
        out.extend((0..n).map(|i| -(gz[i] - p[i])));
        Ok(out)
    }

    fn hessian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        central_jacobian(|q| self.gradient(q), z, self.hessian_step)
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.support)
    }
}

/// Recover the generating perturbation of a near-identity symplectic map.
///
/// `domain` is where smallness and symplecticity of `g` are checked and `δ₁`
/// is measured.
pub fn fit_generating_gradient(
    g: MapFn,
    rho: f64,
    domain: &GridDomain,
) -> Result<GeneratingPerturbation> {
    let dim = domain.dimension();
    if dim % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "section maps act on an even-dimensional space, got {dim}"
        )));
    }
    let displacement = |z: &[f64]| -> Result<Vec<f64>> {
        let gz = g(z)?;
        Ok(gz.iter().zip(z).map(|(a, b)| a - b).collect())
    };
    let c1 = cs_norm(displacement, domain, 1)?;
    if c1 >= CONTRACTION_CAP {
        return Err(Error::ContractionViolation(format!(
            "‖g - id‖_C1 = {c1:.6} is not below {CONTRACTION_CAP}"
        )));
    }
    for p in domain.points() {
        let jac = central_jacobian(|q| g(q), &p, 1e-5)?;
        let defect = symplectic_defect(&jac);
        if defect > 1e-4 {
            return Err(Error::InvalidMap(format!(
                "Jacobian at {p:?} fails the symplectic test by {defect:e}"
            )));
        }
    }
    let field = FittedGenerator {
        map: g,
        half_dim: dim / 2,
        support: rho,
        newton: NewtonOptions {
            tol: 1e-13,
            ..NewtonOptions::default()
        },
        hessian_step: 1e-5,
    };
    GeneratingPerturbation::measure(Arc::new(field), domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_jet_matches_fd() {
        let p = GeneratorFamily::RandomPoly.polynomial(2, 11);
        let z = [0.3, -0.2, 0.5, 0.1];
        let (_, g, h) = p.jet(&z);
        let step = 1e-6;
        for k in 0..4 {
            let mut zp = z;
            let mut zm = z;
            zp[k] += step;
            zm[k] -= step;
            let (vp, gp, _) = p.jet(&zp);
            let (vm, gm, _) = p.jet(&zm);
            assert!((g[k] - (vp - vm) / (2.0 * step)).abs() < 1e-8);
            for i in 0..4 {
                assert!((h[i * 4 + k] - (gp[i] - gm[i]) / (2.0 * step)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn cutoff_generator_vanishes_outside_support() {
        let v = GeneratorFamily::Cubic.build(1, 0.1, 1.0, 0).unwrap();
        assert_eq!(v.gradient(&[0.8, 0.7]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(v.hessian(&[1.0, 0.0]).unwrap(), DMatrix::zeros(2, 2));
        assert!(v.gradient(&[0.3, 0.2]).unwrap()[0] != 0.0);
    }

    #[test]
    fn large_scale_violates_contraction() {
        let field = Arc::new(GeneratorFamily::Cubic.build(1, 0.6, 1.0, 0).unwrap());
        let e = GeneratingPerturbation::measure(field, &default_domain(1, 1.0).unwrap())
            .unwrap_err();
        assert!(matches!(e, Error::ContractionViolation(_)));
    }

    #[test]
    fn dimension_is_checked() {
        let v = GeneratorFamily::Cubic.build(1, 0.1, 1.0, 0).unwrap();
        assert!(matches!(
            v.gradient(&[0.0, 0.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
    }
}
