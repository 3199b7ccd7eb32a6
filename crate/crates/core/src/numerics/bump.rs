//! C^∞ bump profiles built from `h(t) = exp(-1/t)`.
//!
//! The base smoothstep is `S(u) = h(u) / (h(u) + h(1 - u))`, which is exactly
//! 0 for `u <= 0`, exactly 1 for `u >= 1`, and strictly increasing in between.
//! Writing `w(u) = 1/(1-u) - 1/u`, `S = σ(w)` with σ the logistic function,
//! which gives closed forms for the first three derivatives.

use crate::error::{Error, Result};

/// Highest derivative order the profiles evaluate.
pub const MAX_BUMP_ORDER: usize = 3;

/// Derivatives `S^{(k)}(u)`, `k = 0..=3`, of the base smoothstep.
pub fn smoothstep_derivatives(u: f64) -> [f64; 4] {
    if u <= 0.0 {
        return [0.0, 0.0, 0.0, 0.0];
    }
    if u >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let v = 1.0 - u;
    let w = 1.0 / v - 1.0 / u;
    let half = 0.5 * w;
    // σ(w) = (1 + tanh(w/2)) / 2 and σ' = 1 / (4 cosh²(w/2)) stay accurate
    // near both ends, unlike s(1 - s).
    let th = half.tanh();
    let s = 0.5 * (1.0 + th);
    let ch = half.cosh();
    let s1 = 0.25 / (ch * ch);
    if s1 == 0.0 || !s1.is_finite() {
        return [if u < 0.5 { 0.0 } else { 1.0 }, 0.0, 0.0, 0.0];
    }
    // σ'' = σ'(1 - 2σ) = -σ' tanh(w/2), σ''' = σ'(tanh² - 2σ')
    let s2 = -s1 * th;
    let s3 = s1 * (th * th - 2.0 * s1);

    let w1 = 1.0 / (u * u) + 1.0 / (v * v);
    let w2 = 2.0 / (v * v * v) - 2.0 / (u * u * u);
    let w3 = 6.0 / (v * v * v * v) + 6.0 / (u * u * u * u);

    let d1 = s1 * w1;
    let d2 = s2 * w1 * w1 + s1 * w2;
    let d3 = s3 * w1 * w1 * w1 + 3.0 * s2 * w1 * w2 + s1 * w3;
    [s, d1, d2, d3]
}

/// The two bump shapes used by the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BumpProfile {
    /// `ℓ`: 0 for `α <= 0`, 1 for `α >= rise`, strictly increasing between.
    Alpha { rise: f64 },
    /// `ℓ̃`: 1 for `|y| <= plateau * radius`, 0 for `|y| >= radius`.
    Energy { plateau: f64, radius: f64 },
}

impl BumpProfile {
    pub fn alpha(rise: f64) -> Result<Self> {
        if !(rise > 0.0 && rise < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha profile rise width must lie in (0, 1), got {rise}"
            )));
        }
        Ok(BumpProfile::Alpha { rise })
    }

    pub fn energy(plateau: f64, radius: f64) -> Result<Self> {
        if !(plateau > 0.0 && plateau < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "energy profile plateau fraction must lie in (0, 1), got {plateau}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "energy profile radius must be positive, got {radius}"
            )));
        }
        Ok(BumpProfile::Energy { plateau, radius })
    }

    /// Value and first three derivatives at `t`.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        match *self {
            BumpProfile::Alpha { rise } => {
                let [s0, s1, s2, s3] = smoothstep_derivatives(t / rise);
                let k = 1.0 / rise;
                [s0, s1 * k, s2 * k * k, s3 * k * k * k]
            }
            BumpProfile::Energy { plateau, radius } => {
                let width = (1.0 - plateau) * radius;
                let a = t.abs();
                if a <= plateau * radius {
                    return [1.0, 0.0, 0.0, 0.0];
                }
                if a >= radius {
                    return [0.0, 0.0, 0.0, 0.0];
                }
                let [s0, s1, s2, s3] = smoothstep_derivatives((radius - a) / width);
                // d/dt of (radius - |t|)/width is -sign(t)/width
                let k = -t.signum() / width;
                [s0, s1 * k, s2 * k * k, s3 * k * k * k]
            }
        }
    }

    /// Value (`order = 0`) or derivative of the profile at `t`.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        if order > MAX_BUMP_ORDER {
            return Err(Error::UnsupportedOrder {
                order,
                max: MAX_BUMP_ORDER,
            });
        }
        Ok(self.derivatives(t)[order])
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivatives(t)[0]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.derivatives(t)[1]
    }
}

/// Free-function form of [`BumpProfile::eval`].
pub fn eval_bump(profile: &BumpProfile, t: f64, order: usize) -> Result<f64> {
    profile.eval(t, order)
}

/// Dense-sample estimate of `sup|ℓ̃'|` and `sup|ℓ̃''|` against the budgets
/// `2/((1-ν)ρ)` and `4/((1-ν)ρ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpCertificate {
    pub sup_first: f64,
    pub sup_second: f64,
    pub bound_first: f64,
    pub bound_second: f64,
    pub pass_first: bool,
    pub pass_second: bool,
    /// `4/((1-ν)ρ)²`: no C² transition over the rise width can get below this.
    pub second_derivative_floor: f64,
}

/// Relative slack for the budget comparison. The exp-smoothstep attains the
/// first-derivative budget exactly at its midpoint.
const BUDGET_SLACK: f64 = 1e-12;

pub const MIN_CERTIFY_SAMPLES: usize = 1000;

pub fn certify_bump_norms(profile: &BumpProfile, samples: usize) -> Result<BumpCertificate> {
    let BumpProfile::Energy { plateau, radius } = *profile else {
        return Err(Error::WrongProfile {
            expected: "energy profile",
        });
    };
    if samples < MIN_CERTIFY_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_CERTIFY_SAMPLES} samples, got {samples}"
        )));
    }
    // The profile is even, so sampling the transition on one side suffices.
    // An odd sample count puts a node on the midpoint of the transition.
    let n = samples | 1;
    let lo = plateau * radius;
    let hi = radius;
    let (mut sup1, mut sup2) = (0.0f64, 0.0f64);
    for i in 0..n {
        let y = lo + (hi - lo) * (i as f64) / ((n - 1) as f64);
        let d = profile.derivatives(y);
        sup1 = sup1.max(d[1].abs());
        sup2 = sup2.max(d[2].abs());
    }
    let width = (1.0 - plateau) * radius;
    let bound_first = 2.0 / width;
    let bound_second = 4.0 / ((1.0 - plateau) * radius * radius);
    Ok(BumpCertificate {
        sup_first: sup1,
        sup_second: sup2,
        bound_first,
        bound_second,
        pass_first: sup1 <= bound_first * (1.0 + BUDGET_SLACK),
        pass_second: sup2 <= bound_second * (1.0 + BUDGET_SLACK),
        second_derivative_floor: 4.0 / (width * width),
    })
}

/// Radial cutoff `χ(z) = ℓ̃(‖z‖)` with closed-form gradient and Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCutoff {
    profile: BumpProfile,
    plateau_radius: f64,
    radius: f64,
}

impl RadialCutoff {
    pub fn new(plateau: f64, radius: f64) -> Result<Self> {
        let profile = BumpProfile::energy(plateau, radius)?;
        Ok(RadialCutoff {
            profile,
            plateau_radius: plateau * radius,
            radius,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn plateau_radius(&self) -> f64 {
        self.plateau_radius
    }

    /// Value, gradient and Hessian (row-major, `dim × dim`) at `z`.
    pub fn jet(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let dim = z.len();
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        if r <= self.plateau_radius {
            return (1.0, grad, hess);
        }
        if r >= self.radius {
            return (0.0, grad, hess);
        }
        let [c0, c1, c2, _] = self.profile.derivatives(r);
        for i in 0..dim {
            grad[i] = c1 * z[i] / r;
        }
        // Hess χ = χ'' ẑẑᵀ + χ'/r (I - ẑẑᵀ)
        for i in 0..dim {
            for j in 0..dim {
                let uu = z[i] * z[j] / (r * r);
                let delta = if i == j { 1.0 } else { 0.0 };
                hess[i * dim + j] = c2 * uu + c1 / r * (delta - uu);
            }
        }
        (c0, grad, hess)
    }
}
