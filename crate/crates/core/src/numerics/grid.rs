//! Grid sampling domains and finite-difference estimates of C^s norms.
//!
//! `‖F‖_{C^s}` is the max over components `F_i` and multi-indices `|σ| <= s`
//! of `sup_D |∂^σ F_i|`. Derivatives are second-order central differences;
//! mixed partials use tensor products of the one-dimensional stencils.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAX_NORM_ORDER: usize = 3;

/// Shape of the sampled region.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainShape {
    /// Closed ball of `radius` about `center`.
    Ball,
    /// Coordinate `axis` ranges over `[lo, hi]`; the remaining coordinates lie
    /// in the closed ball of `radius` about the corresponding center entries.
    Cylinder { axis: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    pub center: Vec<f64>,
    pub radius: f64,
    pub points_per_axis: usize,
    /// Overrides the per-order step rule when set.
    pub fd_step: Option<f64>,
    pub shape: DomainShape,
}

impl GridDomain {
    pub fn ball(center: Vec<f64>, radius: f64, points_per_axis: usize) -> Result<Self> {
        let d = GridDomain {
            center,
            radius,
            points_per_axis,
            fd_step: None,
            shape: DomainShape::Ball,
        };
        d.validate()?;
        Ok(d)
    }

    /// `[lo, hi]` along `axis` times the ball of `radius` in the other
    /// coordinates. `center[axis]` is ignored.
    pub fn cylinder(
        center: Vec<f64>,
        radius: f64,
        points_per_axis: usize,
        axis: usize,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        let d = GridDomain {
            center,
            radius,
            points_per_axis,
            fd_step: None,
            shape: DomainShape::Cylinder { axis, lo, hi },
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        self.fd_step = Some(h);
        self.validate()?;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    fn validate(&self) -> Result<()> {
        if self.center.is_empty() {
            return Err(Error::InvalidArgument("grid dimension must be positive".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid radius must be positive, got {}",
                self.radius
            )));
        }
        if self.points_per_axis < 2 {
            return Err(Error::Resolution(format!(
                "need at least 2 points per axis, got {}",
                self.points_per_axis
            )));
        }
        if let DomainShape::Cylinder { axis, lo, hi } = self.shape {
            if axis >= self.center.len() {
                return Err(Error::InvalidArgument(format!(
                    "cylinder axis {axis} out of range for dimension {}",
                    self.center.len()
                )));
            }
            if !(hi > lo) {
                return Err(Error::InvalidArgument(format!(
                    "cylinder interval [{lo}, {hi}] is empty"
                )));
            }
        }
        let spacing = self.radius / self.points_per_axis as f64;
        for order in 1..=MAX_NORM_ORDER {
            let h = self.step_for_order(order);
            if !(h > 0.0) || h > spacing {
                return Err(Error::Resolution(format!(
                    "finite-difference step {h:e} exceeds radius/points-per-axis = {spacing:e}"
                )));
            }
        }
        Ok(())
    }

    /// Step used for derivatives of total order `order`: `1e-3·radius` for
    /// first derivatives, `1e-2·radius` for second and third.
    pub fn step_for_order(&self, order: usize) -> f64 {
        if let Some(h) = self.fd_step {
            return h;
        }
        if order <= 1 {
            1e-3 * self.radius
        } else {
            1e-2 * self.radius
        }
    }

    /// Grid nodes inside the domain, in a fixed order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let dim = self.dimension();
        let n = self.points_per_axis;
        let axis_value = |axis: usize, i: usize| -> f64 {
            let frac = i as f64 / (n - 1) as f64;
            match self.shape {
                DomainShape::Cylinder { axis: a, lo, hi } if a == axis => lo + (hi - lo) * frac,
                _ => self.center[axis] - self.radius + 2.0 * self.radius * frac,
            }
        };
        let in_domain = |p: &[f64]| -> bool {
            let r2: f64 = p
                .iter()
                .enumerate()
                .filter(|(k, _)| match self.shape {
                    DomainShape::Cylinder { axis, .. } => *k != axis,
                    DomainShape::Ball => true,
                })
                .map(|(k, v)| (v - self.center[k]).powi(2))
                .sum();
            r2 <= self.radius * self.radius * (1.0 + 1e-12)
        };
        let mut out = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let p: Vec<f64> = (0..dim).map(|k| axis_value(k, idx[k])).collect();
            if in_domain(&p) {
                out.push(p);
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// `count` uniform random points from the domain.
    pub fn sample<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        let dim = self.dimension();
        let ball_axes: Vec<usize> = (0..dim)
            .filter(|k| !matches!(self.shape, DomainShape::Cylinder { axis, .. } if axis == *k))
            .collect();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let mut p = self.center.clone();
            let offs: Vec<f64> = ball_axes
                .iter()
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            if offs.iter().map(|v| v * v).sum::<f64>() > 1.0 {
                continue;
            }
            for (o, &k) in offs.iter().zip(&ball_axes) {
                p[k] += self.radius * o;
            }
            if let DomainShape::Cylinder { axis, lo, hi } = self.shape {
                p[axis] = rng.random_range(lo..=hi);
            }
            out.push(p);
        }
        out
    }
}

/// All multi-indices of length `dim` with total order exactly `order`.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(dim, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, order, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// Central stencil for the `order`-th derivative as (offset, weight·h^order).
fn stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => unreachable!("stencil order checked by caller"),
    }
}

/// Per-order seminorms `N_k = max_i max_{|σ|=k} sup |∂^σ F_i|`, `k = 0..=s`.
///
/// `cs_norm(F, s)` is the running max of these.
pub fn cs_seminorms<F>(f: F, domain: &GridDomain, s: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if s > MAX_NORM_ORDER {
        return Err(Error::Resolution(format!(
            "C^{s} needs stencils beyond order {MAX_NORM_ORDER}"
        )));
    }
    let dim = domain.dimension();
    let by_order: Vec<Vec<Vec<usize>>> = (0..=s).map(|k| multi_indices(dim, k)).collect();
    let steps: Vec<f64> = (0..=s).map(|k| domain.step_for_order(k)).collect();
    let points = domain.points();
    if points.is_empty() {
        return Err(Error::Resolution("grid contains no points".into()));
    }

    let per_point: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| point_seminorms(&f, p, &by_order, &steps))
        .collect::<Result<_>>()?;

    let mut out = vec![0.0f64; s + 1];
    for local in &per_point {
        for (o, v) in out.iter_mut().zip(local) {
            *o = o.max(*v);
        }
    }
    Ok(out)
}

fn point_seminorms<F>(
    f: &F,
    p: &[f64],
    by_order: &[Vec<Vec<usize>>],
    steps: &[f64],
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let dim = p.len();
    // Memo keyed by (step class, integer offsets); the centre is shared.
    let mut memo: HashMap<(usize, Vec<i32>), Vec<f64>> = HashMap::new();
    let mut eval = |class: usize, h: f64, offs: &[i32]| -> Result<Vec<f64>> {
        let key = (if offs.iter().all(|&o| o == 0) { 0 } else { class }, offs.to_vec());
        if let Some(v) = memo.get(&key) {
            return Ok(v.clone());
        }
        let q: Vec<f64> = p
            .iter()
            .zip(offs)
            .map(|(x, &o)| x + o as f64 * h)
            .collect();
        let v = f(&q)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampled map returned a non-finite value at {q:?}"
            )));
        }
        memo.insert(key, v.clone());
        Ok(v)
    };

    let mut out = Vec::with_capacity(by_order.len());
    for (order, sigmas) in by_order.iter().enumerate() {
        let h = steps[order];
        // Step class: 1 for first derivatives, 2 for higher orders.
        let class = order.min(2);
        let scale = h.powi(order as i32);
        let mut best = 0.0f64;
        for sigma in sigmas {
            // Tensor product of per-axis stencils.
            let mut acc: Option<Vec<f64>> = None;
            let mut offs = vec![0i32; dim];
            let axes: Vec<&'static [(i32, f64)]> = sigma.iter().map(|&k| stencil(k)).collect();
            let mut idx = vec![0usize; dim];
            'outer: loop {
                let mut w = 1.0;
                for k in 0..dim {
                    let (o, c) = axes[k][idx[k]];
                    offs[k] = o;
                    w *= c;
                }
                let v = eval(class, h, &offs)?;
                match acc.as_mut() {
                    None => acc = Some(v.iter().map(|x| w * x).collect()),
                    Some(a) => a.iter_mut().zip(&v).for_each(|(a, x)| *a += w * x),
                }
                let mut k = 0;
                loop {
                    if k == dim {
                        break 'outer;
                    }
                    idx[k] += 1;
                    if idx[k] < axes[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
            if let Some(a) = acc {
                for x in a {
                    best = best.max((x / scale).abs());
                }
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Finite-difference estimate of `‖F‖_{C^s}` over the grid.
pub fn cs_norm<F>(f: F, domain: &GridDomain, s: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    Ok(cs_seminorms(f, domain, s)?
        .into_iter()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disc(n: usize) -> GridDomain {
        GridDomain::ball(vec![0.0, 0.0], 1.0, n).unwrap()
    }

    #[test]
    fn zero_map_has_zero_norm() {
        let n = cs_norm(|_| Ok(vec![0.0, 0.0]), &unit_disc(11), 2).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn doubling_map() {
        let n = cs_norm(|p| Ok(vec![2.0 * p[0], 2.0 * p[1]]), &unit_disc(11), 1).unwrap();
        assert!((n - 2.0).abs() < 1e-10, "{n}");
    }

    #[test]
    fn square_map_second_order() {
        let n = cs_norm(|p| Ok(vec![p[0] * p[0], 0.0]), &unit_disc(11), 2).unwrap();
        assert!((n - 2.0).abs() < 1e-8, "{n}");
    }

    #[test]
    fn third_order_stencil_is_exact_on_cubics() {
        let semi = cs_seminorms(|p| Ok(vec![p[0] * p[0] * p[1] / 2.0]), &unit_disc(5), 3).unwrap();
        // ∂²ₓ∂ᵧ (x²y/2) = 1
        assert!((semi[3] - 1.0).abs() < 1e-6, "{semi:?}");
    }

    #[test]
    fn order_four_is_a_resolution_error() {
        let e = cs_norm(|_| Ok(vec![0.0]), &unit_disc(5), 4).unwrap_err();
        assert!(matches!(e, Error::Resolution(_)));
    }

    #[test]
    fn too_fine_grid_is_rejected() {
        assert!(matches!(
            GridDomain::ball(vec![0.0], 1.0, 500),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn grid_covers_closed_ball() {
        let pts = unit_disc(11).points();
        assert!(pts.iter().any(|p| (p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15));
        assert!(pts.iter().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-12));
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(2, 3).len(), 4);
        assert_eq!(multi_indices(4, 0), vec![vec![0, 0, 0, 0]]);
    }

    #[test]
    fn cylinder_spans_interval() {
        let d = GridDomain::cylinder(vec![0.0, 0.0, 0.0], 1.0, 5, 0, 0.0, 1.0).unwrap();
        let pts = d.points();
        assert!(pts.iter().any(|p| p[0] == 0.0));
        assert!(pts.iter().any(|p| p[0] == 1.0));
    }
}
