//! Integration of the suspended flow and the time-one section map
//! `S₀ → S₁`, `(x, y) ↦ Π φ¹(x, 0, y, 0)`.

pub mod integrator;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::GaussLegendre;
use crate::suspension::{project, PhasePoint, SuspendedHamiltonian};
use integrator::{DenseStep, DormandPrince, IntegratorStats, StepControl};

pub use integrator::rk8_fixed;

pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-6;

/// Local error target as a fraction of the requested tolerance. The
/// continuous extension between steps is about 15 times less accurate
/// than the step endpoints, and sampled states must still meet `tol`.
pub const LOCAL_TOL_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub tol: f64,
    /// Uniformly spaced output samples, endpoints included.
    pub samples: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            tol: 1e-10,
            samples: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(t, z(t))`, times strictly increasing.
    pub samples: Vec<(f64, Vec<f64>)>,
    /// `H̃₀(z(t))` at each sample.
    pub energy: Vec<f64>,
    pub stats: IntegratorStats,
    pub tol: f64,
    /// Largest `|y_d|` seen on the dense output, not only at samples.
    pub max_abs_yd: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        &self.samples.last().expect("trajectory has samples").1
    }

    /// `max_t |H̃₀(z(t)) - H̃₀(z(0))|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// Columns `t, z1, …, z2d, energy`.
    pub fn to_csv(&self) -> String {
        let dim = self.samples.first().map(|s| s.1.len()).unwrap_or(0);
        let mut out = String::from("t");
        for i in 1..=dim {
            let _ = write!(out, ",z{i}");
        }
        out.push_str(",energy\n");
        for ((t, z), e) in self.samples.iter().zip(&self.energy) {
            let _ = write!(out, "{t:e}");
            for v in z {
                let _ = write!(out, ",{v:e}");
            }
            let _ = writeln!(out, ",{e:e}");
        }
        out
    }
}

/// Max `|y_d|` along a trajectory.
pub fn yd_excursion(traj: &Trajectory) -> f64 {
    traj.max_abs_yd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionRecord {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub exit_x_d: f64,
    pub exit_y_d: f64,
    pub excursion: f64,
    /// `‖Π φ¹(x, 0, y, 0) - g(x, y)‖`.
    pub residual: f64,
}

impl SectionRecord {
    pub fn csv_header(half_dim: usize) -> String {
        let mut h = String::new();
        for i in 1..=half_dim {
            let _ = write!(h, "x{i},");
        }
        for i in 1..=half_dim {
            let _ = write!(h, "y{i},");
        }
        for i in 1..=half_dim {
            let _ = write!(h, "out_x{i},");
        }
        for i in 1..=half_dim {
            let _ = write!(h, "out_y{i},");
        }
        h.push_str("exit_x_d,exit_y_d,residual,excursion");
        h
    }

    pub fn csv_row(&self) -> String {
        let mut r = String::new();
        for v in self.input.iter().chain(&self.output) {
            let _ = write!(r, "{v:e},");
        }
        let _ = write!(
            r,
            "{:e},{:e},{:e},{:e}",
            self.exit_x_d, self.exit_y_d, self.residual, self.excursion
        );
        r
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::InvalidArgument(format!(
            "integrator tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]"
        )));
    }
    Ok(())
}

/// The flowbox: `|x_i|, |y_i| <= 2ρ`, `x_d ∈ [-0.5, 1.5]`, `|y_d| <= ρ`.
fn chart_check(s: &SuspendedHamiltonian, z: &[f64]) -> std::result::Result<(), &'static str> {
    let d = z.len() / 2;
    let rho = s.rho();
    for (i, v) in z.iter().enumerate() {
        let ok = if i == d - 1 {
            (-0.5..=1.5).contains(v)
        } else if i == 2 * d - 1 {
            v.abs() <= rho
        } else {
            v.abs() <= 2.0 * rho
        };
        if !ok {
            return Err("chart box");
        }
    }
    Ok(())
}

fn run_flow(
    s: &SuspendedHamiltonian,
    z0: &[f64],
    t_final: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    check_tol(opts.tol)?;
    let d = s.degrees_of_freedom();
    if z0.len() != 2 * d {
        return Err(Error::Dimension {
            expected: 2 * d,
            got: z0.len(),
        });
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    if let Err(region) = chart_check(s, z0) {
        return Err(Error::InvalidArgument(format!(
            "initial state lies outside the {region}"
        )));
    }
    let yd_index = 2 * d - 1;
    let region = |z: &[f64]| chart_check(s, z);
    let rhs = |z: &[f64]| s.vector_field(z);
    let dp = DormandPrince::new(&rhs, StepControl::new(opts.tol * LOCAL_TOL_FACTOR));

    let n_samples = opts.samples.max(2);
    let times: Vec<f64> = (0..n_samples)
        .map(|k| t_final * k as f64 / (n_samples - 1) as f64)
        .collect();
    let mut samples = vec![(0.0, z0.to_vec())];
    let mut next = 1;
    let mut max_abs_yd = z0[yd_index].abs();
    let on_step = |step: &DenseStep| {
        for k in 1..=4 {
            let v = step.eval(step.t0 + step.h * k as f64 / 4.0);
            max_abs_yd = max_abs_yd.max(v[yd_index].abs());
        }
        while next < n_samples - 1 && times[next] <= step.t1() {
            samples.push((times[next], step.eval(times[next])));
            next += 1;
        }
    };
    let outcome = dp.run(z0, t_final, &region, on_step);
    let (z_final, stats) = match outcome {
        Ok(v) => v,
        Err(Error::DomainExit {
            region,
            t,
            last_state,
            ..
        }) => {
            let excursion = max_abs_yd.max(last_state[yd_index].abs());
            return Err(Error::DomainExit {
                region,
                t,
                last_state,
                excursion,
            });
        }
        Err(e) => return Err(e),
    };
    max_abs_yd = max_abs_yd.max(z_final[yd_index].abs());
    samples.push((t_final, z_final));
    let energy = samples
        .iter()
        .map(|(_, z)| s.value(z))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        samples,
        energy,
        stats,
        tol: opts.tol,
        max_abs_yd,
    })
}

/// Integrate `z' = X_{H̃₀}(z)` from `z0` over `[0, t_final]`.
pub fn integrate(
    s: &SuspendedHamiltonian,
    z0: &[f64],
    t_final: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    run_flow(s, z0, t_final, opts)
}

/// Integrate `(x, 0, y, 0)` for unit time and project to `S₁`.
///
/// A trajectory whose `|y_d|` leaves the energy plateau `νρ` is reported
/// as a domain exit carrying the measured excursion.
pub fn time_one_section_map(
    s: &SuspendedHamiltonian,
    spatial: &[f64],
    opts: &FlowOptions,
) -> Result<SectionRecord> {
    section_trajectory(s, spatial, opts).map(|(record, _)| record)
}

/// [`time_one_section_map`] together with the trajectory it came from.
pub fn section_trajectory(
    s: &SuspendedHamiltonian,
    spatial: &[f64],
    opts: &FlowOptions,
) -> Result<(SectionRecord, Trajectory)> {
    let d = s.degrees_of_freedom();
    if spatial.len() != 2 * (d - 1) {
        return Err(Error::Dimension {
            expected: 2 * (d - 1),
            got: spatial.len(),
        });
    }
    let z0 = PhasePoint::on_section(spatial).to_vec();
    let traj = run_flow(s, &z0, 1.0, opts)?;
    let end = traj.final_state().to_vec();
    if traj.max_abs_yd > s.plateau() * s.rho() {
        return Err(Error::DomainExit {
            region: "energy plateau",
            t: 1.0,
            last_state: end,
            excursion: traj.max_abs_yd,
        });
    }
    let output = project(&end);
    let target = s.isotopy().eval(1.0, spatial)?;
    let residual = output
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let record = SectionRecord {
        input: spatial.to_vec(),
        output,
        exit_x_d: end[d - 1],
        exit_y_d: end[2 * d - 1],
        excursion: traj.max_abs_yd,
        residual,
    };
    Ok((record, traj))
}

/// Panels per unit length for the `∫ ∂K/∂x_d` quadrature.
const CLOSED_FORM_PANELS: usize = 8;

/// Evaluate the flow on the plateau from the isotopy:
/// `(x, y) ↦ g_{x_d+t} ∘ g_{x_d}⁻¹ (x, y)`, `x_d ↦ x_d + t`,
/// `y_d ↦ y_d - ∫₀ᵗ ∂K_{x_d+s}/∂x_d (g_{x_d+s} ∘ g_{x_d}⁻¹(x, y)) ds`.
pub fn closed_form_flow(s: &SuspendedHamiltonian, z: &[f64], t: f64) -> Result<Vec<f64>> {
    let d = s.degrees_of_freedom();
    if z.len() != 2 * d {
        return Err(Error::Dimension {
            expected: 2 * d,
            got: z.len(),
        });
    }
    let p = PhasePoint::from_slice(z)?;
    let a0 = p.x_d;
    let a1 = a0 + t;
    if !(0.0..=1.0).contains(&a0) || !(0.0..=1.0).contains(&a1) {
        return Err(Error::InvalidArgument(format!(
            "closed-form flow needs x_d and x_d + t in [0, 1], got {a0} and {a1}"
        )));
    }
    if p.y_d.abs() > s.plateau() * s.rho() {
        return Err(Error::InvalidArgument(format!(
            "closed-form flow needs |y_d| <= νρ, got {}",
            p.y_d
        )));
    }
    if t == 0.0 {
        return Ok(z.to_vec());
    }
    let iso = s.isotopy();
    let base = iso.inverse(a0, &p.spatial())?;

    // ∂K/∂α vanishes off (0, ξ); integrate only over the overlap.
    let (lo, hi) = if a0 <= a1 { (a0, a1) } else { (a1, a0) };
    let lo_active = lo.max(0.0);
    let hi_active = hi.min(iso.rise());
    let mut integral = 0.0;
    if hi_active > lo_active {
        let rule = GaussLegendre::standard(32);
        let panels = ((hi_active - lo_active) * CLOSED_FORM_PANELS as f64).ceil().max(1.0) as usize;
        let width = (hi_active - lo_active) / panels as f64;
        for k in 0..panels {
            let pa = lo_active + k as f64 * width;
            integral += rule.try_integrate(pa, pa + width, |alpha| {
                let q = iso.eval(alpha, &base)?;
                s.dk_dalpha(alpha, &q)
            })?;
        }
        if a1 < a0 {
            integral = -integral;
        }
    }
    let moved = iso.eval(a1, &base)?;
    let n = d - 1;
    let mut out = moved[..n].to_vec();
    out.push(a1);
    out.extend_from_slice(&moved[n..]);
    out.push(p.y_d - integral);
    Ok(out)
}
