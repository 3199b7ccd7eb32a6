use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{Check, CheckStatus, VerificationReport};
use crate::error::{Error, Result};
use crate::flow::{closed_form_flow, integrate, rk8_fixed, section_trajectory, SectionRecord, Trajectory};
use crate::generator::{GeneratingPerturbation, GeneratorFamily, CONTRACTION_CAP};
use crate::isotopy::IsotopyFamily;
use crate::numerics::bump::{certify_bump_norms, BumpProfile};
use crate::numerics::faa_di_bruno::faa_di_bruno_table;
use crate::numerics::grid::{cs_norm, GridDomain};
use crate::numerics::symplectic::{apply_j, central_jacobian, symplectic_defect};
use crate::suspension::{norm_gap_report, project, NormReport, PhasePoint, SuspendedHamiltonian};

/// Fixed RK8 steps for section-map Jacobians; the map must be smooth in
/// the initial point, which an adaptive step sequence is not.
pub const JACOBIAN_RK8_STEPS: usize = 40;
/// Central-difference step for section-map Jacobians.
pub const JACOBIAN_FD_STEP: f64 = 1e-3;
/// `|K|` allowed on the `ρ`-sphere and outside the support.
const K_SUPPORT_TOL: f64 = 1e-8;

const NUMERICS: &str = "core_numerics";
const ISOTOPY: &str = "generating_isotopy";
const SUSPENSION: &str = "suspension";
const FLOW: &str = "flow_integration";
const PIPELINE: &str = "cli_pipeline";

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Points of the section `S₀` used by `suspend`: `k` radii times `k`
/// directions in the closed ball of radius `radius`. In the plane the
/// directions are equally spaced angles; above it they are seeded.
pub fn section_grid(half_dim: usize, radius: f64, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = 2 * half_dim;
    let directions: Vec<Vec<f64>> = if dim == 2 {
        (0..k)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / k as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EC7_10);
        (0..k)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let n = euclid(&v);
                if n > 1e-3 && n <= 1.0 {
                    break v.iter().map(|x| x / n).collect();
                }
            })
            .collect()
    };
    let mut pts = Vec::with_capacity(k * k);
    for i in 0..k {
        let r = radius * (i + 1) as f64 / k as f64;
        for d in &directions {
            pts.push(d.iter().map(|x| r * x).collect());
        }
    }
    pts
}

/// Write `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::from(e)
    })
}

/// Section runs over a point set, with per-point failures kept.
pub struct SectionRuns {
    pub records: Vec<SectionRecord>,
    pub trajectories: Vec<Trajectory>,
    pub failures: Vec<(Vec<f64>, Error)>,
}

pub fn run_sections(s: &SuspendedHamiltonian, points: &[Vec<f64>], cfg: &ExperimentConfig) -> SectionRuns {
    let opts = cfg.flow_options();
    let results: Vec<Result<(SectionRecord, Trajectory)>> = points
        .par_iter()
        .map(|p| section_trajectory(s, p, &opts))
        .collect();
    let mut runs = SectionRuns {
        records: Vec::new(),
        trajectories: Vec::new(),
        failures: Vec::new(),
    };
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok((rec, tr)) => {
                runs.records.push(rec);
                runs.trajectories.push(tr);
            }
            Err(e) => runs.failures.push((p.clone(), e.at(FLOW, "time_one_section_map"))),
        }
    }
    runs
}

fn section_checks(s: &SuspendedHamiltonian, runs: &SectionRuns, cfg: &ExperimentConfig) -> Vec<Check> {
    let tol = cfg.integrator.tol;
    let mut checks = Vec::new();
    if let Some((p, e)) = runs.failures.first() {
        let mut c = Check::errored(FLOW, "section_map_runs", e);
        c.measured = runs.failures.len() as f64;
        c.threshold = 0.0;
        checks.push(c.with_detail(format!(
            "{} of {} runs failed; first at {:?}: {e}",
            runs.failures.len(),
            runs.failures.len() + runs.records.len(),
            p
        )));
    }
    let max_of = |f: &dyn Fn(&SectionRecord) -> f64| runs.records.iter().map(f).fold(0.0, f64::max);
    checks.push(Check::at_most(
        FLOW,
        "section_residual",
        max_of(&|r| r.residual),
        (10.0 * tol).max(1e-6),
    ));
    checks.push(Check::at_most(
        FLOW,
        "unit_drift_speed",
        max_of(&|r| (r.exit_x_d - 1.0).abs()),
        10.0 * tol,
    ));
    let nu_rho = s.plateau() * s.rho();
    let excursion = max_of(&|r| r.excursion);
    checks.push(Check::at_most(FLOW, "yd_excursion", excursion, nu_rho));
    let drift = runs
        .trajectories
        .iter()
        .map(|t| t.energy_drift())
        .fold(0.0, f64::max);
    checks.push(Check::at_most(FLOW, "energy_conservation", drift, 10.0 * tol));
    checks.push(fixed_point_check(s, cfg));
    checks
}

fn fixed_point_check(s: &SuspendedHamiltonian, cfg: &ExperimentConfig) -> Check {
    let n = s.isotopy().half_dim();
    let origin = vec![0.0; 2 * n];
    let g0 = match s.isotopy().eval(1.0, &origin) {
        Ok(v) => v,
        Err(e) => return Check::errored(ISOTOPY, "fixed_point", &e),
    };
    if euclid(&g0) > 0.0 {
        return Check::degenerate(FLOW, "fixed_point", "g does not fix the origin");
    }
    let z0 = vec![0.0; 2 * (n + 1)];
    match integrate(s, &z0, 1.0, &cfg.flow_options()) {
        Ok(tr) => {
            let mut target = vec![0.0; 2 * (n + 1)];
            target[n] = 1.0;
            let err: Vec<f64> = tr.final_state().iter().zip(&target).map(|(a, b)| a - b).collect();
            Check::at_most(FLOW, "fixed_point", euclid(&err), 1e-8)
        }
        Err(e) => Check::errored(FLOW, "fixed_point", &e),
    }
}

fn norm_checks(norms: &NormReport) -> Check {
    match norms.constant {
        Some(c) => Check::at_most(SUSPENSION, "norm_constant_finite", c, f64::MAX),
        None => Check::degenerate(SUSPENSION, "norm_constant_finite", "g = id, the ratio is 0/0"),
    }
}

/// Output of [`run_suspension`].
pub struct SuspensionOutcome {
    pub report: VerificationReport,
    pub runs: Option<SectionRuns>,
    pub points: Vec<Vec<f64>>,
}

impl SuspensionOutcome {
    pub fn section_csv(&self) -> String {
        let n = self.report.config.half_dim();
        let mut out = SectionRecord::csv_header(n);
        out.push('\n');
        if let Some(runs) = &self.runs {
            for r in &runs.records {
                out.push_str(&r.csv_row());
                out.push('\n');
            }
        }
        out
    }

    /// Report, section records, norms and the first few trajectories.
    pub fn write(&self, dir: &Path, exported_trajectories: usize) -> Result<()> {
        write_atomic(&dir.join("report.json"), &self.report.to_json())?;
        if let Some(norms) = &self.report.norms {
            write_atomic(&dir.join("norms.txt"), &norms.to_flat_text())?;
        }
        if let Some(runs) = &self.runs {
            write_atomic(&dir.join("section_records.csv"), &self.section_csv())?;
            for (k, tr) in runs.trajectories.iter().take(exported_trajectories).enumerate() {
                write_atomic(&dir.join(format!("trajectory_{k:03}.csv")), &tr.to_csv())?;
            }
        }
        Ok(())
    }
}

/// Build `g → g_α → K → H̃₀`, run the section map over the grid and
/// estimate the norms.
pub fn run_suspension(cfg: &ExperimentConfig) -> Result<SuspensionOutcome> {
    cfg.validate()?;
    let mut report = VerificationReport::new("suspend", cfg);
    let s = match cfg.hamiltonian() {
        Ok(s) => s,
        Err(e) => {
            report.fail_with(&e);
            return Ok(SuspensionOutcome {
                report,
                runs: None,
                points: Vec::new(),
            });
        }
    };
    report.push(Check::at_most(
        ISOTOPY,
        "contraction_margin",
        s.isotopy().perturbation().delta1(),
        CONTRACTION_CAP,
    ));
    let points = section_grid(
        cfg.half_dim(),
        0.5 * cfg.model.rho,
        cfg.grids.section_points,
        cfg.seed,
    );
    let runs = run_sections(&s, &points, cfg);
    report.extend(section_checks(&s, &runs, cfg));
    match norm_gap_report(&s, &cfg.norm_grids()) {
        Ok(norms) => {
            report.push(norm_checks(&norms));
            report.norms = Some(norms);
        }
        Err(e) => report.push(Check::errored(SUSPENSION, "norm_gap_report", &e)),
    }
    Ok(SuspensionOutcome {
        report,
        runs: Some(runs),
        points,
    })
}

pub fn run_norms(cfg: &ExperimentConfig) -> Result<NormReport> {
    cfg.validate()?;
    let s = cfg.hamiltonian()?;
    norm_gap_report(&s, &cfg.norm_grids()).map_err(|e| e.at(SUSPENSION, "norm_gap_report"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub rho: f64,
    pub nu: f64,
    pub status: CheckStatus,
    pub g_minus_id_c1: f64,
    pub g_minus_id_c3: f64,
    pub bracket: f64,
    pub hamiltonian_gap_c2: f64,
    /// NaN when degenerate or failed.
    pub constant: f64,
    pub section_residual: f64,
    pub yd_excursion: f64,
    pub failure: Option<String>,
}

impl SweepRow {
    fn failed(epsilon: f64, rho: f64, nu: f64, err: String) -> Self {
        SweepRow {
            epsilon,
            rho,
            nu,
            status: CheckStatus::Fail,
            g_minus_id_c1: f64::NAN,
            g_minus_id_c3: f64::NAN,
            bracket: f64::NAN,
            hamiltonian_gap_c2: f64::NAN,
            constant: f64::NAN,
            section_residual: f64::NAN,
            yd_excursion: f64::NAN,
            failure: Some(err),
        }
    }
}

fn sweep_row(cfg: &ExperimentConfig, epsilon: f64, rho: f64, nu: f64) -> SweepRow {
    let c = cfg.with_parameters(epsilon, rho, nu);
    let outcome = match run_suspension(&c) {
        Ok(o) => o,
        Err(e) => return SweepRow::failed(epsilon, rho, nu, e.to_string()),
    };
    let r = &outcome.report;
    if let Some(f) = &r.failure {
        return SweepRow::failed(epsilon, rho, nu, f.clone());
    }
    let measured = |name: &str| {
        r.checks
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.measured)
            .unwrap_or(f64::NAN)
    };
    let norms = r.norms.as_ref();
    let failure = r
        .failed_checks()
        .next()
        .map(|c| format!("{}/{}", c.module, c.name));
    SweepRow {
        epsilon,
        rho,
        nu,
        status: r.overall,
        g_minus_id_c1: norms.map_or(f64::NAN, |n| n.g_minus_id_c1),
        g_minus_id_c3: norms.map_or(f64::NAN, |n| n.g_minus_id_c3),
        bracket: norms.map_or(f64::NAN, |n| n.bracket),
        hamiltonian_gap_c2: norms.map_or(f64::NAN, |n| n.hamiltonian_gap_c2),
        constant: norms.and_then(|n| n.constant).unwrap_or(f64::NAN),
        section_residual: measured("section_residual"),
        yd_excursion: measured("yd_excursion"),
        failure,
    }
}

/// One row per `(ε, ρ, ν)`; empty lists fall back to the base value, but
/// at least one list must be given.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sw = &cfg.sweep;
    if sw.epsilon.is_empty() && sw.rho.is_empty() && sw.nu.is_empty() {
        return Err(Error::Config("sweep needs at least one non-empty list".into()));
    }
    let or_base = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let mut combos = Vec::new();
    for &e in &or_base(&sw.epsilon, cfg.generator.epsilon) {
        for &r in &or_base(&sw.rho, cfg.model.rho) {
            for &n in &or_base(&sw.nu, cfg.model.nu) {
                combos.push((e, r, n));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sw.threads)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows = pool.install(|| {
        combos
            .par_iter()
            .map(|&(e, r, n)| sweep_row(cfg, e, r, n))
            .collect()
    });
    Ok(rows)
}

fn csv_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "epsilon,rho,nu,status,g_minus_id_c1,g_minus_id_c3,bracket,hamiltonian_gap_c2,constant,section_residual,yd_excursion,failure\n",
    );
    for r in rows {
        let status = match r.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Degenerate => "degenerate",
        };
        let failure = r.failure.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        let _ = writeln!(
            out,
            "{},{},{},{status},{},{},{},{},{},{},{},\"{failure}\"",
            csv_num(r.epsilon),
            csv_num(r.rho),
            csv_num(r.nu),
            csv_num(r.g_minus_id_c1),
            csv_num(r.g_minus_id_c3),
            csv_num(r.bracket),
            csv_num(r.hamiltonian_gap_c2),
            csv_num(r.constant),
            csv_num(r.section_residual),
            csv_num(r.yd_excursion),
        );
    }
    out
}

/// Set partitions of `{1, …, r}` grouped by block-size profile
/// `(k_1, …, k_r)`, by enumerating restricted growth strings.
pub fn set_partition_profiles(r: usize) -> BTreeMap<Vec<u32>, u64> {
    let mut out = BTreeMap::new();
    let mut a = vec![0usize; r];
    loop {
        let blocks = a.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; blocks];
        for &b in &a {
            sizes[b] += 1;
        }
        let mut k = vec![0u32; r];
        for s in sizes {
            k[s - 1] += 1;
        }
        *out.entry(k).or_insert(0) += 1;
        // next restricted growth string: a[i] <= 1 + max(a[..i])
        let mut i = r;
        loop {
            if i <= 1 {
                return out;
            }
            i -= 1;
            let prefix_max = a[..i].iter().copied().max().unwrap_or(0);
            if a[i] <= prefix_max {
                a[i] += 1;
                for v in &mut a[i + 1..] {
                    *v = 0;
                }
                break;
            }
        }
    }
}

fn faa_di_bruno_check() -> Check {
    let mut mismatches = 0usize;
    for r in 1..=5 {
        let table = match faa_di_bruno_table(r) {
            Ok(t) => t,
            Err(e) => return Check::errored(NUMERICS, "faa_di_bruno_set_partitions", &e),
        };
        let got: BTreeMap<Vec<u32>, u64> = table
            .entries
            .iter()
            .map(|e| (e.multiplicities.clone(), e.coefficient))
            .collect();
        if got != set_partition_profiles(r) || got.len() != table.entries.len() {
            mismatches += 1;
        }
    }
    Check::at_most(NUMERICS, "faa_di_bruno_set_partitions", mismatches as f64, 0.0)
}

fn numerics_checks(cfg: &ExperimentConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    match BumpProfile::alpha(cfg.model.xi) {
        Ok(l) => checks.push(Check::holds(
            NUMERICS,
            "alpha_profile_endpoints",
            l.value(0.0) == 0.0 && l.value(cfg.model.xi) == 1.0 && l.value(1.0) == 1.0,
        )),
        Err(e) => checks.push(Check::errored(NUMERICS, "alpha_profile_endpoints", &e)),
    }
    let cert = BumpProfile::energy(cfg.model.nu, cfg.model.rho)
        .and_then(|p| certify_bump_norms(&p, cfg.grids.profile_samples.max(1000)));
    match cert {
        Ok(c) => {
            let first = if c.pass_first {
                Check::at_most(NUMERICS, "energy_profile_first_derivative", c.sup_first, c.bound_first)
                    .with_detail("attained at the midpoint, compared with 1e-12 relative slack")
            } else {
                Check::at_most(NUMERICS, "energy_profile_first_derivative", c.sup_first, c.bound_first)
            };
            // Reported as measured: the budget lies below the floor that any
            // C² transition over this width must exceed.
            let second = Check::at_most(
                NUMERICS,
                "energy_profile_second_derivative",
                c.sup_second,
                c.bound_second,
            )
            .with_detail(format!(
                "every profile exceeds {:.6e} here",
                c.second_derivative_floor
            ));
            checks.push(first);
            checks.push(second);
        }
        Err(e) => checks.push(Check::errored(NUMERICS, "energy_profile_certificate", &e)),
    }
    checks.push(faa_di_bruno_check());
    let lin = GridDomain::ball(vec![0.0, 0.0], 1.0, 21)
        .and_then(|d| cs_norm(|z| Ok(vec![2.0 * z[0], 2.0 * z[1]]), &d, 1));
    match lin {
        Ok(v) => checks.push(Check::at_most(NUMERICS, "cs_norm_linear_map", (v - 2.0).abs(), 1e-6)),
        Err(e) => checks.push(Check::errored(NUMERICS, "cs_norm_linear_map", &e)),
    }
    checks
}

/// Uniform point in the closed ball of radius `r` about the origin.
pub fn random_ball_point<R: Rng>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if euclid(&v) <= 1.0 {
            return v.iter().map(|x| r * x).collect();
        }
    }
}

/// Apply `f` to each sample and keep the worst value; the first error
/// turns the check into a failure.
fn worst_over<T, F>(module: &str, name: &str, samples: &[T], threshold: f64, f: F) -> Check
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let results: Vec<Result<f64>> = samples.par_iter().map(&f).collect();
    let mut worst = 0.0f64;
    for r in results {
        match r {
            Ok(v) if v.is_nan() => worst = f64::NAN,
            Ok(v) => worst = worst.max(v),
            Err(e) => return Check::errored(module, name, &e),
        }
    }
    Check::at_most(module, name, worst, threshold)
}

fn isotopy_checks(s: &SuspendedHamiltonian, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Vec<Check> {
    let iso = s.isotopy();
    let v = iso.perturbation();
    let n = iso.half_dim();
    let rho = s.rho();
    let mut checks = vec![Check::at_most(ISOTOPY, "contraction_margin", v.delta1(), CONTRACTION_CAP)];

    let m = cfg.grids.isotopy_samples;
    let pts: Vec<Vec<f64>> = (0..m).map(|_| random_ball_point(rng, 2 * n, rho)).collect();
    let pairs: Vec<(f64, Vec<f64>)> = pts.iter().map(|p| (rng.random_range(0.0..=1.0), p.clone())).collect();

    let h = 1e-5;
    let few = &pts[..(m / 10).max(1)];
    checks.push(worst_over(ISOTOPY, "generator_derivatives", few, 1e-6, |z| {
        let (g, hs) = v.gradient_hessian(z)?;
        let mut worst = 0.0f64;
        for j in 0..2 * n {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            if let (Some(a), Some(b)) = (v.value(&zp), v.value(&zm)) {
                worst = worst.max(((a - b) / (2.0 * h) - g[j]).abs());
            }
            let (gp, gm) = (v.gradient(&zp)?, v.gradient(&zm)?);
            for i in 0..2 * n {
                worst = worst.max(((gp[i] - gm[i]) / (2.0 * h) - hs[(i, j)]).abs());
                worst = worst.max((hs[(i, j)] - hs[(j, i)]).abs());
            }
        }
        Ok(worst)
    }));

    let xi = iso.rise();
    checks.push(worst_over(ISOTOPY, "isotopy_endpoints", few, 0.0, |z| {
        let at_zero = sup_norm_diff(&iso.eval(0.0, z)?, z);
        let at_rise = sup_norm_diff(&iso.eval(xi, z)?, &iso.eval(1.0, z)?);
        Ok(at_zero.max(at_rise))
    }));
    checks.push(worst_over(ISOTOPY, "inverse_round_trip", &pairs, 1e-10, |(a, z)| {
        let back = iso.inverse(*a, &iso.eval(*a, z)?)?;
        Ok(sup_norm_diff(&back, z))
    }));
    checks.push(worst_over(ISOTOPY, "isotopy_symplecticity", &pairs, 1e-6, |(a, z)| {
        let jac = central_jacobian(|p: &[f64]| iso.eval(*a, p), z, h)?;
        Ok(symplectic_defect(&jac))
    }));
    checks.push(worst_over(ISOTOPY, "velocity_vs_alpha_fd", &pairs, 1e-6, |(a, z)| {
        let vel = iso.velocity(*a, z)?;
        let gp = iso.eval(a + h, z)?;
        let gm = iso.eval(a - h, z)?;
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(p, q)| (p - q) / (2.0 * h)).collect();
        Ok(sup_norm_diff(&vel, &fd))
    }));
    checks
}

fn suspension_checks(s: &SuspendedHamiltonian, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Vec<Check> {
    let iso = s.isotopy();
    let n = iso.half_dim();
    let rho = s.rho();
    let m = cfg.grids.isotopy_samples;
    let pairs: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|_| {
            let a = rng.random_range(0.0..=1.0);
            (a, random_ball_point(rng, 2 * n, rho))
        })
        .collect();
    let mut checks = Vec::new();
    let h = 1e-5;
    checks.push(worst_over(SUSPENSION, "k_exactness", &pairs, 1e-5, |(a, z)| {
        s.hamiltonian_k(*a, z)?;
        let mut fd = vec![0.0; 2 * n];
        for (j, slot) in fd.iter_mut().enumerate() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            *slot = (s.k_value(*a, &zp)? - s.k_value(*a, &zm)?) / (2.0 * h);
        }
        // ∇K + J X
        let jx = apply_j(&iso.vector_field(*a, z)?);
        let r: Vec<f64> = fd.iter().zip(&jx).map(|(p, q)| p + q).collect();
        Ok(euclid(&r))
    }));
    let few = &pairs[..(m / 10).max(1)];
    checks.push(worst_over(SUSPENSION, "k_support", few, K_SUPPORT_TOL, |(a, z)| {
        let support = iso.perturbation().support_radius();
        let off_rise = [-0.1, 0.0, iso.rise(), 1.0]
            .iter()
            .map(|&a| s.hamiltonian_k(a, z).map(f64::abs))
            .collect::<Result<Vec<_>>>()?;
        let mut worst = off_rise.into_iter().fold(0.0, f64::max);
        let norm = euclid(z);
        if support.is_finite() && norm > 0.0 {
            // On the sphere of radius ρ and past the support.
            for r in [rho, rho.max(support) * 1.5] {
                let w: Vec<f64> = z.iter().map(|v| v * r / norm).collect();
                worst = worst.max(s.hamiltonian_k(*a, &w)?.abs());
            }
        }
        Ok(worst)
    }));
    // Phase points across the block, including the energy transition layer.
    let states: Vec<Vec<f64>> = few
        .iter()
        .map(|(a, z)| {
            let yd = rng.random_range(-rho..=rho);
            let mut p = PhasePoint::on_section(z);
            p.x_d = *a;
            p.y_d = yd;
            p.to_vec()
        })
        .collect();
    checks.push(worst_over(SUSPENSION, "hamiltonian_gradient_fd", &states, 1e-5, |z| {
        let g = s.gradient(z)?;
        let mut worst = 0.0f64;
        let hh = 1e-6;
        for j in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += hh;
            zm[j] -= hh;
            let fd = (s.value(&zp)? - s.value(&zm)?) / (2.0 * hh);
            worst = worst.max((fd - g[j]).abs());
        }
        Ok(worst)
    }));
    checks.push(worst_over(SUSPENSION, "model_outside_block", &states, 0.0, |z| {
        let mut out = z.clone();
        let d = z.len() / 2;
        out[d - 1] = 1.0 + out[d - 1].abs();
        let mut e = vec![0.0; z.len()];
        e[d - 1] = 1.0;
        let vf = s.vector_field(&out)?;
        Ok((s.value(&out)? - out[2 * d - 1]).abs().max(sup_norm_diff(&vf, &e)))
    }));
    checks
}

fn flow_extra_checks(s: &SuspendedHamiltonian, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, points: &[Vec<f64>]) -> Vec<Check> {
    let n = s.isotopy().half_dim();
    let rho = s.rho();
    let nu_rho = s.plateau() * rho;
    let mut checks = Vec::new();
    let rk8_map = |p: &[f64]| -> Result<Vec<f64>> {
        let z0 = PhasePoint::on_section(p).to_vec();
        let end = rk8_fixed(|z| s.vector_field(z), &z0, 1.0, JACOBIAN_RK8_STEPS)?;
        Ok(project(&end))
    };
    checks.push(worst_over(FLOW, "section_map_symplecticity", points, 1e-5, |p| {
        let jac = central_jacobian(rk8_map, p, JACOBIAN_FD_STEP)?;
        Ok(symplectic_defect(&jac))
    }));
    let probes = &points[..points.len().min(4)];
    checks.push(worst_over(FLOW, "rk8_cross_check", probes, 1e-8, |p| {
        let adaptive = crate::flow::time_one_section_map(s, p, &cfg.flow_options())?;
        Ok(sup_norm_diff(&adaptive.output, &rk8_map(p)?))
    }));

    // Admissible states: x_d, x_d + t in [0, 1], y_d well inside the plateau.
    let states: Vec<(Vec<f64>, f64)> = (0..cfg.grids.trajectories)
        .map(|_| {
            let sp = random_ball_point(rng, 2 * n, 0.5 * rho);
            let mut p = PhasePoint::on_section(&sp);
            p.x_d = rng.random_range(0.0..0.9);
            p.y_d = rng.random_range(-0.25 * nu_rho..=0.25 * nu_rho);
            let t = rng.random_range(0.05..=(1.0 - p.x_d));
            (p.to_vec(), t)
        })
        .collect();
    let opts = cfg.flow_options();
    checks.push(worst_over(FLOW, "closed_form_agreement", &states, 1e-7, |(z, t)| {
        let tr = integrate(s, z, *t, &opts)?;
        if tr.max_abs_yd > nu_rho {
            return Err(Error::DomainExit {
                region: "energy plateau",
                t: *t,
                last_state: tr.final_state().to_vec(),
                excursion: tr.max_abs_yd,
            });
        }
        let cf = closed_form_flow(s, z, *t)?;
        Ok(sup_norm_diff(&cf, tr.final_state()))
    }));
    checks
}

/// Closed forms of the linear shear `V = ε x'y` in the plane, against the
/// generic evaluators.
pub fn linear_shear_closed_form_error(eps: f64, xi: f64) -> Result<f64> {
    let field = GeneratorFamily::LinearShear.build(1, eps, 1.0, 0)?;
    let iso = IsotopyFamily::new(
        GeneratingPerturbation::unchecked(Arc::new(field)),
        BumpProfile::alpha(xi)?,
    )?;
    let s = SuspendedHamiltonian::new(iso, 0.5, 1.0)?;
    let iso = s.isotopy();
    let prof = iso.profile();
    let mut worst = 0.0f64;
    for &alpha in &[0.0, 0.1, 0.2, 0.25, 0.35, 0.45, 0.5, 0.8, 1.0] {
        let [l, dl, _, _] = prof.derivatives(alpha);
        let q = 1.0 + l * eps;
        for &(u, v) in &[(1.0, 1.0), (0.3, -0.2), (-0.7, 0.4), (0.0, 0.5)] {
            let g = iso.eval(alpha, &[u, v])?;
            worst = worst.max(sup_norm_diff(&g, &[u / q, q * v]));
            let x = iso.vector_field(alpha, &[u, v])?;
            let cx = [-dl * eps * u / q, dl * eps * v / q];
            worst = worst.max(sup_norm_diff(&x, &cx));
            let k = s.hamiltonian_k(alpha, &[u, v])?;
            worst = worst.max((k - (-dl * eps * u * v / q)).abs());
        }
    }
    Ok(worst)
}

/// Every invariant, deterministic in the seed.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let mut report = VerificationReport::new("verify", cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.extend(numerics_checks(cfg));
    let round_trip = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).map(|c| &c == cfg);
    report.push(Check::holds(PIPELINE, "config_round_trip", matches!(round_trip, Ok(true))));
    match linear_shear_closed_form_error(0.1, cfg.model.xi) {
        Ok(e) => report.push(Check::at_most(PIPELINE, "linear_shear_closed_forms", e, 1e-8)),
        Err(e) => report.push(Check::errored(PIPELINE, "linear_shear_closed_forms", &e)),
    }
    let s = match cfg.hamiltonian() {
        Ok(s) => s,
        Err(e) => {
            report.fail_with(&e);
            return Ok(report);
        }
    };
    report.extend(isotopy_checks(&s, cfg, &mut rng));
    report.extend(suspension_checks(&s, cfg, &mut rng));
    let points = section_grid(cfg.half_dim(), 0.5 * cfg.model.rho, cfg.grids.section_points, cfg.seed);
    let runs = run_sections(&s, &points, cfg);
    report.extend(section_checks(&s, &runs, cfg));
    report.extend(flow_extra_checks(&s, cfg, &mut rng, &points));
    match norm_gap_report(&s, &cfg.norm_grids()) {
        Ok(norms) => {
            report.push(norm_checks(&norms));
            report.extend(plateau_checks(&norms, cfg.half_dim()));
            report.norms = Some(norms);
        }
        Err(e) => report.push(Check::errored(SUSPENSION, "norm_gap_report", &e)),
    }
    Ok(report)
}

// min(ρ‖X_K‖₀, νρ): the two plateau bounds on |∂K/∂x_d|.
// Bounds on |∂K/∂x_d| and |K| in terms of the field X_K.
fn plateau_checks(norms: &NormReport, n: usize) -> Vec<Check> {
    let rho = norms.rho;
    // |⟨X, J z⟩| ≤ |X|₂ |z|₂ and |X|₂ ≤ √(2n) times the componentwise sup.
    let spread = ((2 * n) as f64).sqrt();
    vec![
        Check::at_most(SUSPENSION, "plateau_dk_bound", norms.dk_dalpha_c0, rho * norms.x_k_c0),
        Check::at_most(SUSPENSION, "plateau_dk_below_nu_rho", norms.dk_dalpha_c0, norms.nu * rho),
        Check::at_most(
            SUSPENSION,
            "plateau_dk_alpha_derivative_bound",
            norms.dk_dalpha_c0,
            spread * rho * norms.x_k_dalpha_c0,
        ),
        Check::at_most(SUSPENSION, "k_size_bound", norms.k_c0, rho * norms.x_k_c0),
    ]
}

/// A single section run from `(ρ/4, 0, …)` with its trajectory.
pub struct Demo {
    pub record: SectionRecord,
    pub trajectory: Trajectory,
}

pub fn run_demo(cfg: &ExperimentConfig) -> Result<Demo> {
    cfg.validate()?;
    let s = cfg.hamiltonian()?;
    let mut p = vec![0.0; 2 * cfg.half_dim()];
    p[0] = 0.25 * cfg.model.rho;
    p[cfg.half_dim()] = 0.25 * cfg.model.rho;
    let (record, trajectory) = section_trajectory(&s, &p, &cfg.flow_options())
        .map_err(|e| e.at(FLOW, "time_one_section_map"))?;
    Ok(Demo { record, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        let bell = [1u64, 2, 5, 15, 52, 203];
        for (r, b) in (1..=6).zip(bell) {
            assert_eq!(set_partition_profiles(r).values().sum::<u64>(), b);
        }
        let three = set_partition_profiles(3);
        assert_eq!(three[&vec![3, 0, 0]], 1);
        assert_eq!(three[&vec![1, 1, 0]], 3);
        assert_eq!(three[&vec![0, 0, 1]], 1);
    }

    #[test]
    fn planar_section_grid() {
        let pts = section_grid(1, 0.5, 10, 0);
        assert_eq!(pts.len(), 100);
        let rmax = pts.iter().map(|p| euclid(p)).fold(0.0, f64::max);
        assert!((rmax - 0.5).abs() < 1e-15);
        assert_eq!(section_grid(2, 0.5, 3, 9), section_grid(2, 0.5, 3, 9));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(run_sweep(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn linear_shear_closed_forms_hold() {
        assert!(linear_shear_closed_form_error(0.1, 0.5).unwrap() <= 1e-8);
    }
}
