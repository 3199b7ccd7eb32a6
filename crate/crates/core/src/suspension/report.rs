use serde::{Deserialize, Serialize};

use super::{SuspendedHamiltonian, ALPHA_FD_STEP};
use crate::error::Result;
use crate::numerics::grid::{cs_seminorms, GridDomain};

/// Grid resolutions for [`norm_gap_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormGrids {
    /// Points per axis for the `ρ`-ball in `R^{2d-2}` (norms of `g - id`, `∇V`).
    pub map_points: usize,
    /// Points per axis for the block `[0, 1] × B_ρ` (norms of `K`, `X_K`).
    pub block_points: usize,
    /// Samples for the sups of `ℓ̃'`, `ℓ̃''`.
    pub profile_samples: usize,
}

impl Default for NormGrids {
    fn default() -> Self {
        NormGrids {
            map_points: 21,
            block_points: 9,
            profile_samples: 4001,
        }
    }
}

/// Estimated norms entering `‖H̃₀ - H₀‖_{C²} <= c (1 + ρ + 1/ρ + ρ‖g - id‖²_{C³}) ‖g - id‖_{C¹}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub rho: f64,
    pub nu: f64,
    pub g_minus_id_c0: f64,
    pub g_minus_id_c1: f64,
    pub g_minus_id_c3: f64,
    pub grad_v_c0: f64,
    pub grad_v_c1: f64,
    pub k_c0: f64,
    pub k_c1: f64,
    pub k_c2: f64,
    pub x_k_c0: f64,
    /// Componentwise sup of `∂X_K/∂α` over the block.
    pub x_k_dalpha_c0: f64,
    pub dk_dalpha_c0: f64,
    pub ell_tilde_d1_sup: f64,
    pub ell_tilde_d2_sup: f64,
    pub hamiltonian_gap_c2: f64,
    pub bracket: f64,
    /// `None` when `‖g - id‖_{C¹} = 0` (the 0/0 case).
    pub constant: Option<f64>,
    pub degenerate: bool,
}

impl NormReport {
    /// One `name value` pair per line.
    pub fn to_flat_text(&self) -> String {
        let constant = match self.constant {
            Some(c) => format!("{c:e}"),
            None => "degenerate".to_string(),
        };
        let rows: [(&str, String); 19] = [
            ("rho", format!("{:e}", self.rho)),
            ("nu", format!("{:e}", self.nu)),
            ("g_minus_id_c0", format!("{:e}", self.g_minus_id_c0)),
            ("g_minus_id_c1", format!("{:e}", self.g_minus_id_c1)),
            ("g_minus_id_c3", format!("{:e}", self.g_minus_id_c3)),
            ("grad_v_c0", format!("{:e}", self.grad_v_c0)),
            ("grad_v_c1", format!("{:e}", self.grad_v_c1)),
            ("k_c0", format!("{:e}", self.k_c0)),
            ("k_c1", format!("{:e}", self.k_c1)),
            ("k_c2", format!("{:e}", self.k_c2)),
            ("x_k_c0", format!("{:e}", self.x_k_c0)),
            ("x_k_dalpha_c0", format!("{:e}", self.x_k_dalpha_c0)),
            ("dk_dalpha_c0", format!("{:e}", self.dk_dalpha_c0)),
            ("ell_tilde_d1_sup", format!("{:e}", self.ell_tilde_d1_sup)),
            ("ell_tilde_d2_sup", format!("{:e}", self.ell_tilde_d2_sup)),
            ("hamiltonian_gap_c2", format!("{:e}", self.hamiltonian_gap_c2)),
            ("bracket", format!("{:e}", self.bracket)),
            ("constant", constant),
            ("degenerate", self.degenerate.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
    }
}

/// `1 + ρ + 1/ρ + ρ‖g - id‖²_{C³}`.
pub fn bracket_factor(rho: f64, g_minus_id_c3: f64) -> f64 {
    1.0 + rho + 1.0 / rho + rho * g_minus_id_c3 * g_minus_id_c3
}

/// Estimate the norms of the construction and the implied constant `c`.
///
/// `H̃₀ - H₀ = K_{x_d}(x, y) ℓ̃(y_d)` vanishes off `[0, 1] × B_ρ × [-ρ, ρ]`,
/// and on that product every partial factors as `∂^σK · ℓ̃^{(j)}`, so
/// `‖H̃₀ - H₀‖_{C²} = max(‖K‖_{C²}, ‖K‖_{C¹} sup|ℓ̃'|, ‖K‖_{C⁰} sup|ℓ̃''|)`.
pub fn norm_gap_report(s: &SuspendedHamiltonian, grids: &NormGrids) -> Result<NormReport> {
    let iso = s.isotopy();
    let n = iso.half_dim();
    let rho = s.rho();

    let ball = GridDomain::ball(vec![0.0; 2 * n], rho, grids.map_points)?;
    let displacement = |z: &[f64]| -> Result<Vec<f64>> {
        let g = iso.eval(1.0, z)?;
        Ok(g.iter().zip(z).map(|(a, b)| a - b).collect())
    };
    let g_semi = cs_seminorms(displacement, &ball, 3)?;
    let running = |v: &[f64], s: usize| v[..=s].iter().cloned().fold(0.0, f64::max);

    let grad_semi = cs_seminorms(|z| iso.perturbation().gradient(z), &ball, 1)?;

    let block = GridDomain::cylinder(vec![0.0; 2 * n + 1], rho, grids.block_points, 0, 0.0, 1.0)?;
    let k_fn = |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![s.k_value(p[0], &p[1..])?]) };
    let k_semi = cs_seminorms(k_fn, &block, 2)?;

    let mut x_k_c0 = 0.0f64;
    let mut x_k_dalpha = 0.0f64;
    let mut dk_c0 = 0.0f64;
    let h = ALPHA_FD_STEP;
    for p in block.points() {
        for v in iso.vector_field(p[0], &p[1..])? {
            x_k_c0 = x_k_c0.max(v.abs());
        }
        let up = iso.vector_field(p[0] + h, &p[1..])?;
        let down = iso.vector_field(p[0] - h, &p[1..])?;
        for (a, b) in up.iter().zip(&down) {
            x_k_dalpha = x_k_dalpha.max(((a - b) / (2.0 * h)).abs());
        }
        dk_c0 = dk_c0.max(s.dk_dalpha(p[0], &p[1..])?.abs());
    }

    let (mut d1, mut d2) = (0.0f64, 0.0f64);
    let m = grids.profile_samples.max(3) | 1;
    let nu = s.plateau();
    for i in 0..m {
        let y = nu * rho + (1.0 - nu) * rho * (i as f64) / ((m - 1) as f64);
        let d = s.energy_profile().derivatives(y);
        d1 = d1.max(d[1].abs());
        d2 = d2.max(d[2].abs());
    }

    let k_c0 = k_semi[0];
    let k_c1 = running(&k_semi, 1);
    let k_c2 = running(&k_semi, 2);
    let gap = k_c2.max(k_c1 * d1).max(k_c0 * d2);
    let g_c1 = running(&g_semi, 1);
    let g_c3 = running(&g_semi, 3);
    let bracket = bracket_factor(rho, g_c3);
    let degenerate = g_c1 == 0.0;
    let constant = if degenerate {
        None
    } else {
        Some(gap / (bracket * g_c1))
    };

    Ok(NormReport {
        rho,
        nu,
        g_minus_id_c0: g_semi[0],
        g_minus_id_c1: g_c1,
        g_minus_id_c3: g_c3,
        grad_v_c0: grad_semi[0],
        grad_v_c1: running(&grad_semi, 1),
        k_c0,
        k_c1,
        k_c2,
        x_k_c0,
        x_k_dalpha_c0: x_k_dalpha,
        dk_dalpha_c0: dk_c0,
        ell_tilde_d1_sup: d1,
        ell_tilde_d2_sup: d2,
        hamiltonian_gap_c2: gap,
        bracket,
        constant,
        degenerate,
    })
}
