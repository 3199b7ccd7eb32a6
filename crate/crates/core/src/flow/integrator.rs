//! Explicit Runge–Kutta integrators for autonomous systems `z' = F(z)`.
//!
//! [`DormandPrince`] is the adaptive 5(4) pair with its 4th-order continuous
//! extension; [`rk8_fixed`] runs the 8th-order weights of the DOP853 tableau
//! with a fixed step, for cross-checks.

use crate::error::{Error, Result};

// Dormand–Prince 5(4)
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn new(tol: f64) -> Self {
        StepControl {
            tol,
            initial_step: 1e-2,
            max_step: 0.1,
            max_steps: 200_000,
        }
    }
}

/// Dense output on one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    cont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [c0, c1, c2, c3, c4] = &self.cont;
        (0..c0.len())
            .map(|i| c0[i] + s * (c1[i] + s1 * (c2[i] + s * (c3[i] + s1 * c4[i]))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Outcome of a step check: `Err` carries the name of the violated region.
pub type RegionCheck<'a> = dyn Fn(&[f64]) -> std::result::Result<(), &'static str> + 'a;

pub struct DormandPrince<'a> {
    rhs: &'a (dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a),
    control: StepControl,
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    (0..y.len())
        .map(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
        .collect()
}

impl<'a> DormandPrince<'a> {
    pub fn new(rhs: &'a (dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a), control: StepControl) -> Self {
        DormandPrince { rhs, control }
    }

    /// Integrate from `(0, z0)` to `t_final`, calling `on_step` for every
    /// accepted step. `region` is checked at each accepted state; on the
    /// first violation the crossing is located on the dense output and a
    /// domain-exit error is returned with the boundary state.
    pub fn run(
        &self,
        z0: &[f64],
        t_final: f64,
        region: &RegionCheck<'_>,
        mut on_step: impl FnMut(&DenseStep),
    ) -> Result<(Vec<f64>, IntegratorStats)> {
        let tol = self.control.tol;
        let mut stats = IntegratorStats::default();
        let mut t = 0.0;
        let mut y = z0.to_vec();
        if t_final == 0.0 {
            return Ok((y, stats));
        }
        let mut k1 = (self.rhs)(&y)?;
        stats.evaluations += 1;
        let mut h = self.control.initial_step.min(t_final);
        let mut steps = 0;
        while t < t_final {
            steps += 1;
            if steps > self.control.max_steps {
                return Err(Error::Stiffness { t, step: h });
            }
            let last = t + h >= t_final;
            if last {
                h = t_final - t;
            }
            if h < 1e-14 * t_final.max(1.0) && !last {
                return Err(Error::Stiffness { t, step: h });
            }
            let k2 = (self.rhs)(&axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = (self.rhs)(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = (self.rhs)(&axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = (self.rhs)(&axpy(
                &y,
                h,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            ))?;
            let k6 = (self.rhs)(&axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ))?;
            let y_new = axpy(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = (self.rhs)(&y_new)?;
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..y.len() {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = tol + tol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / y.len() as f64).sqrt();

            if err <= 1.0 {
                let ydiff: Vec<f64> = (0..y.len()).map(|i| y_new[i] - y[i]).collect();
                let bspl: Vec<f64> = (0..y.len()).map(|i| h * k1[i] - ydiff[i]).collect();
                let c3: Vec<f64> = (0..y.len()).map(|i| ydiff[i] - h * k7[i] - bspl[i]).collect();
                let c4: Vec<f64> = (0..y.len())
                    .map(|i| {
                        h * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i])
                    })
                    .collect();
                let dense = DenseStep {
                    t0: t,
                    h,
                    cont: [y.clone(), ydiff, bspl, c3, c4],
                };
                if let Err(name) = region(&y_new) {
                    return Err(locate_exit(&dense, region, name));
                }
                on_step(&dense);
                stats.accepted += 1;
                t = if last { t_final } else { t + h };
                y = y_new;
                k1 = k7;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h * fac).min(self.control.max_step);
            } else {
                stats.rejected += 1;
                let fac = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h *= fac;
            }
        }
        Ok((y, stats))
    }
}

// Bisect the dense interpolant for the first state outside the region.
fn locate_exit(step: &DenseStep, region: &RegionCheck<'_>, name: &'static str) -> Error {
    let (mut lo, mut hi) = (step.t0, step.t1());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if region(&step.eval(mid)).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Error::DomainExit {
        region: name,
        t: hi,
        last_state: step.eval(hi),
        excursion: f64::NAN,
    }
}

// 8th-order weights of the DOP853 tableau (stages 1..12); autonomous
// systems need no abscissae.
#[rustfmt::skip]
const R8_A: [[f64; 11]; 12] = [
    [0.0; 11],
    [5.26001519587677318785587544488E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.97250569845378994544595329183E-2, 5.91751709536136983633785987549E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.95875854768068491816892993775E-2, 0.0, 8.87627564304205475450678981324E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.41365134159266685502369798665E-1, 0.0, -8.84549479328286085344864962717E-1, 9.24834003261792003115737966543E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7037037037037037037037037037E-2, 0.0, 0.0, 1.70828608729473871279604482173E-1, 1.25467687566822425016691814123E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7109375E-2, 0.0, 0.0, 1.70252211019544039314978060272E-1, 6.02165389804559606850219397283E-2, -1.7578125E-2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.70920001185047927108779319836E-2, 0.0, 0.0, 1.70383925712239993810214054705E-1, 1.07262030446373284651809199168E-1, -1.53194377486244017527936158236E-2, 8.27378916381402288758473766002E-3, 0.0, 0.0, 0.0, 0.0],
    [6.24110958716075717114429577812E-1, 0.0, 0.0, -3.36089262944694129406857109825E0, -8.68219346841726006818189891453E-1, 2.75920996994467083049415600797E1, 2.01540675504778934086186788979E1, -4.34898841810699588477366255144E1, 0.0, 0.0, 0.0],
    [4.77662536438264365890433908527E-1, 0.0, 0.0, -2.48811461997166764192642586468E0, -5.90290826836842996371446475743E-1, 2.12300514481811942347288949897E1, 1.52792336328824235832596922938E1, -3.32882109689848629194453265587E1, -2.03312017085086261358222928593E-2, 0.0, 0.0],
    [-9.3714243008598732571704021658E-1, 0.0, 0.0, 5.18637242884406370830023853209E0, 1.09143734899672957818500254654E0, -8.14978701074692612513997267357E0, -1.85200656599969598641566180701E1, 2.27394870993505042818970056734E1, 2.49360555267965238987089396762E0, -3.0467644718982195003823669022E0, 0.0],
    [2.27331014751653820792359768449E0, 0.0, 0.0, -1.05344954667372501984066689879E1, -2.00087205822486249909675718444E0, -1.79589318631187989172765950534E1, 2.79488845294199600508499808837E1, -2.85899827713502369474065508674E0, -8.87285693353062954433549289258E0, 1.23605671757943030647266201528E1, 6.43392746015763530355970484046E-1],
];

const R8_B: [f64; 12] = [
    5.42937341165687622380535766363E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566E0,
    1.89151789931450038304281599044E0,
    -5.8012039600105847814672114227E0,
    3.1116436695781989440891606237E-1,
    -1.52160949662516078556178806805E-1,
    2.01365400804030348374776537501E-1,
    4.47106157277725905176885569043E-2,
];

/// Fixed-step 8th-order integration of an autonomous system.
pub fn rk8_fixed<F>(rhs: F, z0: &[f64], t_final: f64, steps: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("rk8 needs at least one step".into()));
    }
    let h = t_final / steps as f64;
    let dim = z0.len();
    let mut y = z0.to_vec();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(12);
    for _ in 0..steps {
        k.clear();
        for s in 0..12 {
            let stage: Vec<f64> = (0..dim)
                .map(|i| y[i] + h * (0..s).map(|j| R8_A[s][j] * k[j][i]).sum::<f64>())
                .collect();
            k.push(rhs(&stage)?);
        }
        for i in 0..dim {
            y[i] += h * (0..12).map(|s| R8_B[s] * k[s][i]).sum::<f64>();
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![z[1], -z[0]])
    }

    #[test]
    fn dopri_harmonic_oscillator() {
        let dp = DormandPrince::new(&oscillator, StepControl::new(1e-11));
        let (y, stats) = dp.run(&[1.0, 0.0], 2.0, &|_| Ok(()), |_| {}).unwrap();
        assert!((y[0] - 2.0f64.cos()).abs() < 1e-9);
        assert!((y[1] + 2.0f64.sin()).abs() < 1e-9);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn dense_output_interpolates() {
        let dp = DormandPrince::new(&oscillator, StepControl::new(1e-10));
        let mut worst = 0.0f64;
        dp.run(&[1.0, 0.0], 3.0, &|_| Ok(()), |step| {
            let t = step.t0 + 0.37 * step.h;
            let v = step.eval(t);
            worst = worst.max((v[0] - t.cos()).abs());
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn rk8_converges_at_eighth_order() {
        let exact = 1.0f64.cos();
        let e1 = (rk8_fixed(oscillator, &[1.0, 0.0], 1.0, 4).unwrap()[0] - exact).abs();
        let e2 = (rk8_fixed(oscillator, &[1.0, 0.0], 1.0, 8).unwrap()[0] - exact).abs();
        let rate = (e1 / e2).log2();
        assert!(rate > 7.0, "observed order {rate}");
    }

    #[test]
    fn region_exit_is_located() {
        let drift = |_: &[f64]| -> Result<Vec<f64>> { Ok(vec![1.0]) };
        let dp = DormandPrince::new(&drift, StepControl::new(1e-10));
        let e = dp
            .run(&[0.0], 2.0, &|z| if z[0] > 1.0 { Err("box") } else { Ok(()) }, |_| {})
            .unwrap_err();
        match e {
            Error::DomainExit { t, last_state, .. } => {
                assert!((t - 1.0).abs() < 1e-9);
                assert!((last_state[0] - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }
}
