//! The suspended Hamiltonian `H̃₀ = y_d + K_{x_d}(x, y) ℓ̃(y_d)` on `R^{2d}`.
//!
//! Phase points are ordered `(x_1, …, x_{d-1}, x_d, y_1, …, y_{d-1}, y_d)`;
//! `x_d` plays the role of the isotopy parameter `α` and `y_d` is its
//! conjugate. `K_α` is the Hamiltonian of `X_α`, normalized by the line
//! integral from the origin.

mod report;

pub use report::{norm_gap_report, NormGrids, NormReport};

use crate::error::{Error, Result};
use crate::isotopy::IsotopyFamily;
use crate::numerics::bump::BumpProfile;
use crate::numerics::quadrature::GaussLegendre;

/// Absolute agreement required between the 32- and 64-node estimates of `K`.
pub const QUADRATURE_CHECK_TOL: f64 = 1e-9;

/// Corrections applied when locating where a ray crosses a break radius.
const BREAK_ITERATIONS: usize = 4;

/// Step of the central difference in `α` for `∂K/∂x_d`.
pub const ALPHA_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct SuspendedHamiltonian {
    isotopy: IsotopyFamily,
    energy: BumpProfile,
    plateau: f64,
    rho: f64,
}

/// View of a phase point `z ∈ R^{2d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub x_d: f64,
    pub y: Vec<f64>,
    pub y_d: f64,
}

impl PhasePoint {
    pub fn from_slice(z: &[f64]) -> Result<Self> {
        if z.len() < 4 || z.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "phase points need even dimension >= 4, got {}",
                z.len()
            )));
        }
        let d = z.len() / 2;
        let n = d - 1;
        Ok(PhasePoint {
            x: z[..n].to_vec(),
            x_d: z[n],
            y: z[d..d + n].to_vec(),
            y_d: z[2 * d - 1],
        })
    }

    /// Section point `(x, y)` paired with `x_d = y_d = 0`.
    pub fn on_section(spatial: &[f64]) -> Self {
        let n = spatial.len() / 2;
        PhasePoint {
            x: spatial[..n].to_vec(),
            x_d: 0.0,
            y: spatial[n..].to_vec(),
            y_d: 0.0,
        }
    }

    pub fn spatial(&self) -> Vec<f64> {
        let mut s = self.x.clone();
        s.extend_from_slice(&self.y);
        s
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.push(self.x_d);
        z.extend_from_slice(&self.y);
        z.push(self.y_d);
        z
    }
}

/// `Π(x, x_d, y, y_d) = (x, y)`.
pub fn project(z: &[f64]) -> Vec<f64> {
    let d = z.len() / 2;
    let mut out = z[..d - 1].to_vec();
    out.extend_from_slice(&z[d..2 * d - 1]);
    out
}

impl SuspendedHamiltonian {
    pub fn new(isotopy: IsotopyFamily, plateau: f64, rho: f64) -> Result<Self> {
        let energy = BumpProfile::energy(plateau, rho)?;
        Ok(SuspendedHamiltonian {
            isotopy,
            energy,
            plateau,
            rho,
        })
    }

    pub fn isotopy(&self) -> &IsotopyFamily {
        &self.isotopy
    }

    pub fn energy_profile(&self) -> &BumpProfile {
        &self.energy
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    /// `d`; phase space is `R^{2d}`.
    pub fn degrees_of_freedom(&self) -> usize {
        self.isotopy.half_dim() + 1
    }

    fn k_active(&self, alpha: f64) -> bool {
        alpha > 0.0 && alpha < self.isotopy.rise()
    }

    // Panels of [0, 1] on which s ↦ X_α(s z) is analytic, so each one gets
    // spectral accuracy. Past the support radius the integrand vanishes and
    // the last panel stops there.
    fn panels(&self, alpha: f64, spatial: &[f64]) -> Result<Vec<(f64, f64)>> {
        let norm = spatial.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(vec![(0.0, 1.0)]);
        }
        let v = self.isotopy.perturbation();
        let support = v.support_radius();
        let end = if norm > support { support / norm } else { 1.0 };
        let arg_norm = |s: f64| -> Result<f64> {
            let zs: Vec<f64> = spatial.iter().map(|c| s * c).collect();
            let arg = self.isotopy.generating_argument(alpha, &zs)?;
            Ok(arg.iter().map(|c| c * c).sum::<f64>().sqrt())
        };
        let reach = arg_norm(end)?;
        let mut radii = v.break_radii();
        radii.sort_by(f64::total_cmp);
        let mut cuts = vec![0.0];
        for r in radii.into_iter().filter(|r| *r < reach) {
            // The argument moves with unit speed along the ray up to O(δ₁),
            // so this iteration contracts at that rate.
            let mut s = r / norm;
            for _ in 0..BREAK_ITERATIONS {
                s -= (arg_norm(s)? - r) / norm;
            }
            if s > cuts[cuts.len() - 1] && s < end {
                cuts.push(s);
            }
        }
        cuts.push(end);
        Ok(cuts.windows(2).map(|w| (w[0], w[1])).collect())
    }

    fn k_with(
        &self,
        rule: &GaussLegendre,
        panels: &[(f64, f64)],
        alpha: f64,
        spatial: &[f64],
    ) -> Result<f64> {
        let n = self.isotopy.half_dim();
        let (x, y) = spatial.split_at(n);
        let mut total = 0.0;
        for &(a, b) in panels {
            // ⟨X(s z), (y, -x)⟩
            total += rule.try_integrate(a, b, |s| {
                let zs: Vec<f64> = spatial.iter().map(|v| s * v).collect();
                let xf = self.isotopy.vector_field(alpha, &zs)?;
                let dot: f64 = (0..n).map(|i| xf[i] * y[i] - xf[n + i] * x[i]).sum();
                Ok::<f64, Error>(dot)
            })?;
        }
        Ok(total)
    }

    /// `K_α(x, y)` from the 32-node rule, without the convergence check.
    pub fn k_value(&self, alpha: f64, spatial: &[f64]) -> Result<f64> {
        if !self.k_active(alpha) {
            return Ok(0.0);
        }
        let panels = self.panels(alpha, spatial)?;
        self.k_with(GaussLegendre::standard(32), &panels, alpha, spatial)
    }

    /// `K_α(x, y) = ∫₀¹ ⟨X_α(s(x, y)), (y, -x)⟩ ds`, checked against the
    /// doubled rule.
    pub fn hamiltonian_k(&self, alpha: f64, spatial: &[f64]) -> Result<f64> {
        if spatial.len() != 2 * self.isotopy.half_dim() {
            return Err(Error::Dimension {
                expected: 2 * self.isotopy.half_dim(),
                got: spatial.len(),
            });
        }
        if !self.k_active(alpha) {
            return Ok(0.0);
        }
        let panels = self.panels(alpha, spatial)?;
        let estimate = self.k_with(GaussLegendre::standard(32), &panels, alpha, spatial)?;
        let refined = self.k_with(GaussLegendre::standard(64), &panels, alpha, spatial)?;
        if (estimate - refined).abs() > QUADRATURE_CHECK_TOL * refined.abs().max(1.0) {
            return Err(Error::Quadrature {
                nodes: 32,
                estimate,
                refined,
            });
        }
        Ok(estimate)
    }

    /// `∇_{(x,y)} K_α = -J X_α`.
    pub fn k_spatial_gradient(&self, alpha: f64, spatial: &[f64]) -> Result<Vec<f64>> {
        let n = self.isotopy.half_dim();
        let xf = self.isotopy.vector_field(alpha, spatial)?;
        // -J(a, b) = (-b, a)
        let mut out: Vec<f64> = xf[n..].iter().map(|v| -v).collect();
        out.extend_from_slice(&xf[..n]);
        Ok(out)
    }

    /// `∂K/∂α` by Richardson-refined central differences.
    ///
    /// The differences are taken under one fixed quadrature rule, which is
    /// the same as differencing `X_α` at each node and integrating once.
    pub fn dk_dalpha(&self, alpha: f64, spatial: &[f64]) -> Result<f64> {
        let h = ALPHA_FD_STEP;
        if alpha + h <= 0.0 || alpha - h >= self.isotopy.rise() {
            return Ok(0.0);
        }
        let n = self.isotopy.half_dim();
        let (x, y) = spatial.split_at(n);
        let alphas = [alpha - h, alpha - 0.5 * h, alpha + 0.5 * h, alpha + h];
        let panels = self.panels(alpha, spatial)?;
        let rule = GaussLegendre::standard(32);
        let mut total = 0.0;
        for &(a, b) in &panels {
            total += rule.try_integrate(a, b, |s| {
                let zs: Vec<f64> = spatial.iter().map(|v| s * v).collect();
                let f = self.isotopy.field_along_alpha(&alphas, &zs)?;
                let dot = |xf: &[f64]| -> f64 {
                    (0..n).map(|i| xf[i] * y[i] - xf[n + i] * x[i]).sum()
                };
                let d_h = (dot(&f[3]) - dot(&f[0])) / (2.0 * h);
                let d_half = (dot(&f[2]) - dot(&f[1])) / h;
                Ok::<f64, Error>((4.0 * d_half - d_h) / 3.0)
            })?;
        }
        Ok(total)
    }

    /// `H̃₀(z)`.
    pub fn value(&self, z: &[f64]) -> Result<f64> {
        let p = self.point(z)?;
        let lt = self.energy.value(p.y_d);
        if lt == 0.0 || !self.k_active(p.x_d) {
            return Ok(p.y_d);
        }
        Ok(p.y_d + self.k_value(p.x_d, &p.spatial())? * lt)
    }

    /// `H̃₀(z) - H₀(z)`, avoiding the cancellation against `y_d`.
    pub fn perturbation_value(&self, z: &[f64]) -> Result<f64> {
        let p = self.point(z)?;
        let lt = self.energy.value(p.y_d);
        if lt == 0.0 || !self.k_active(p.x_d) {
            return Ok(0.0);
        }
        Ok(self.k_value(p.x_d, &p.spatial())? * lt)
    }

    fn point(&self, z: &[f64]) -> Result<PhasePoint> {
        let d = self.degrees_of_freedom();
        if z.len() != 2 * d {
            return Err(Error::Dimension {
                expected: 2 * d,
                got: z.len(),
            });
        }
        PhasePoint::from_slice(z)
    }

    /// `∇H̃₀(z)` assembled from `-J X_α`, `∂K/∂x_d` and `ℓ̃'K`.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let p = self.point(z)?;
        let d = self.degrees_of_freedom();
        let n = d - 1;
        let mut grad = vec![0.0; 2 * d];
        grad[2 * d - 1] = 1.0;
        let [lt, dlt, _, _] = self.energy.derivatives(p.y_d);
        if lt == 0.0 && dlt == 0.0 {
            return Ok(grad);
        }
        let spatial = p.spatial();
        let dk = self.dk_dalpha(p.x_d, &spatial)?;
        if self.k_active(p.x_d) {
            let gk = self.k_spatial_gradient(p.x_d, &spatial)?;
            for i in 0..n {
                grad[i] = lt * gk[i];
                grad[d + i] = lt * gk[n + i];
            }
            if dlt != 0.0 {
                grad[2 * d - 1] += dlt * self.k_value(p.x_d, &spatial)?;
            }
        }
        grad[n] = lt * dk;
        Ok(grad)
    }

    /// `X_{H̃₀} = J ∇H̃₀`.
    pub fn vector_field(&self, z: &[f64]) -> Result<Vec<f64>> {
        let g = self.gradient(z)?;
        Ok(crate::numerics::symplectic::apply_j(&g))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::generator::{GeneratingPerturbation, GeneratorFamily};

    fn shear_hamiltonian(eps: f64) -> SuspendedHamiltonian {
        let field = GeneratorFamily::LinearShear.build(1, eps, 1.0, 0).unwrap();
        let iso = IsotopyFamily::new(
            GeneratingPerturbation::unchecked(Arc::new(field)),
            BumpProfile::alpha(0.5).unwrap(),
        )
        .unwrap();
        SuspendedHamiltonian::new(iso, 0.5, 1.0).unwrap()
    }

    #[test]
    fn k_vanishes_at_alpha_zero() {
        let s = shear_hamiltonian(0.1);
        assert_eq!(s.hamiltonian_k(0.0, &[0.4, 0.3]).unwrap(), 0.0);
        assert_eq!(s.hamiltonian_k(1.0, &[0.4, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn outside_block_is_the_model_hamiltonian() {
        let s = shear_hamiltonian(0.1);
        let z = [0.4, 2.0, 0.3, 0.1];
        assert_eq!(s.value(&z).unwrap(), 0.1);
        assert_eq!(s.gradient(&z).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.vector_field(&z).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        let far = [0.4, 0.2, 0.3, 1.5];
        assert_eq!(s.value(&far).unwrap(), 1.5);
    }

    fn cubic_hamiltonian() -> SuspendedHamiltonian {
        let field = GeneratorFamily::Cubic.build(1, 0.05, 1.0, 0).unwrap();
        let iso = IsotopyFamily::new(
            GeneratingPerturbation::unchecked(Arc::new(field)),
            BumpProfile::alpha(0.5).unwrap(),
        )
        .unwrap();
        SuspendedHamiltonian::new(iso, 0.5, 1.0).unwrap()
    }

    #[test]
    fn doubling_check_holds_across_the_cutoff_transition() {
        let s = cubic_hamiltonian();
        // Rays that cross the plateau edge of the cutoff, and one that ends
        // on the support sphere.
        for (a, z) in [
            (0.4025, [-0.839, 0.193]),
            (0.1, [0.3, 0.2]),
            (0.25, [0.0, -0.95]),
            (0.33, [0.6, 0.8]),
        ] {
            s.hamiltonian_k(a, &z).unwrap();
        }
        assert!(s.hamiltonian_k(0.25, &[0.6, 0.8]).unwrap().abs() < 1e-8);
    }

    #[test]
    fn dk_agrees_with_differences_of_k() {
        let s = cubic_hamiltonian();
        let (a, z, h) = (0.2, [0.45, -0.3], 1e-4);
        let fd = (s.hamiltonian_k(a + h, &z).unwrap() - s.hamiltonian_k(a - h, &z).unwrap()) / (2.0 * h);
        let dk = s.dk_dalpha(a, &z).unwrap();
        assert!((dk - fd).abs() < 1e-6 * dk.abs().max(1.0), "{dk} vs {fd}");
    }

    #[test]
    fn projection_drops_the_flow_pair() {
        assert_eq!(project(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 3.0]);
        let p = PhasePoint::from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(p.x, vec![1.0, 2.0]);
        assert_eq!(p.x_d, 3.0);
        assert_eq!(p.y_d, 6.0);
        assert_eq!(p.to_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }
}
