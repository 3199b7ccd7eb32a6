//! Acceptance suite: one line per criterion.
//!
//! Runs without the libtest harness so the lines always print. The process
//! fails on any unexpected FAIL, and also when a criterion listed in
//! `UNATTAINABLE` starts passing, so that list cannot go stale.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hamsuspend::flow::{closed_form_flow, integrate, time_one_section_map};
use hamsuspend::generator::GeneratorFamily;
use hamsuspend::numerics::faa_di_bruno_table;
use hamsuspend::pipeline::run::SectionRuns;
use hamsuspend::pipeline::{run_suspension, ExperimentConfig};
use hamsuspend::{norm_gap_report, Error, PhasePoint, Result, SuspendedHamiltonian, Trajectory};

/// Criteria that fail for structural reasons; see the README.
const UNATTAINABLE: &[(u32, &str)] = &[(
    8,
    "the bracket grows like ρ‖g−id‖²_C3 ≈ ρ(1e3·ε)² once ε ≳ 1e-3, so c cannot stay within a factor 10",
)];

const SEED: u64 = 7;
const RUNTIME_BUDGET_SECS: f64 = 120.0;

struct Outcome {
    measured: f64,
    tol: f64,
    pass: bool,
    detail: String,
}

impl Outcome {
    fn at_most(measured: f64, tol: f64, detail: impl Into<String>) -> Self {
        Outcome {
            measured,
            tol,
            pass: measured <= tol,
            detail: detail.into(),
        }
    }
}

fn config(family: GeneratorFamily, eps: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.model.d = 2;
    c.model.rho = 1.0;
    c.model.nu = 0.5;
    c.model.xi = 0.5;
    c.integrator.tol = 1e-10;
    c.generator.family = family;
    c.generator.epsilon = eps;
    c
}

fn ball_point(rng: &mut ChaCha8Rng, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..2).map(|_| rng.random_range(-radius..=radius)).collect();
        if v[0] * v[0] + v[1] * v[1] <= radius * radius {
            return v;
        }
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

// Central-difference Jacobian, row-major.
fn jacobian<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: F, z: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    let m = z.len();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut p = z.to_vec();
        let mut q = z.to_vec();
        p[j] += h;
        q[j] -= h;
        let (fp, fq) = (f(&p)?, f(&q)?);
        cols.push(fp.iter().zip(&fq).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    Ok((0..m).map(|i| (0..m).map(|j| cols[j][i]).collect()).collect())
}

// max |AᵀJA − J| with J(a, b) = (b, −a).
fn symplectic_defect(a: &[Vec<f64>]) -> f64 {
    let m = a.len();
    let n = m / 2;
    let j = |r: usize, c: usize| -> f64 {
        if r < n && c == r + n {
            1.0
        } else if r >= n && c + n == r {
            -1.0
        } else {
            0.0
        }
    };
    let mut worst = 0.0f64;
    for r in 0..m {
        for c in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                for l in 0..m {
                    s += a[k][r] * j(k, l) * a[l][c];
                }
            }
            worst = worst.max((s - j(r, c)).abs());
        }
    }
    worst
}

struct Realization {
    family: GeneratorFamily,
    eps: f64,
    runs: SectionRuns,
    points: Vec<Vec<f64>>,
    hamiltonian: SuspendedHamiltonian,
}

fn realize(family: GeneratorFamily, eps: f64) -> Result<Realization> {
    let cfg = config(family, eps);
    let outcome = run_suspension(&cfg)?;
    if let Some(f) = &outcome.report.failure {
        return Err(Error::Config(f.clone()));
    }
    let runs = outcome.runs.ok_or_else(|| Error::Config("no section runs".into()))?;
    Ok(Realization {
        family,
        eps,
        runs,
        points: outcome.points,
        hamiltonian: cfg.hamiltonian()?,
    })
}

// Defect of the generating-function equations x = x' + ∂V/∂y(x', y),
// y' = y + ∂V/∂x'(x', y) at an (input, output) pair.
fn generating_defect(s: &SuspendedHamiltonian, input: &[f64], output: &[f64]) -> Result<f64> {
    let v = s.isotopy().perturbation();
    let grad = v.gradient(&[output[0], input[1]])?;
    Ok((input[0] - output[0] - grad[1]).abs().max((output[1] - input[1] - grad[0]).abs()))
}

fn criterion_1(all: &[(Realization, f64)]) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    let mut count = usize::MAX;
    let mut times = Vec::new();
    for (r, secs) in all {
        if !r.runs.failures.is_empty() {
            let (p, e) = &r.runs.failures[0];
            return Err(Error::Config(format!("{} ε={} at {p:?}: {e}", r.family.name(), r.eps)));
        }
        count = count.min(r.runs.records.len());
        for rec in &r.runs.records {
            worst = worst
                .max(rec.residual)
                .max(generating_defect(&r.hamiltonian, &rec.input, &rec.output)?);
        }
        slowest = slowest.max(*secs);
        if r.eps == 0.05 {
            times.push(format!("{} {secs:.0}s", r.family.name()));
        }
    }
    let mut o = Outcome::at_most(
        worst,
        1e-6,
        format!("{count} points per run; {} (budget {RUNTIME_BUDGET_SECS}s)", times.join(", ")),
    );
    o.pass &= count == 100 && slowest <= RUNTIME_BUDGET_SECS;
    Ok(o)
}

fn criterion_2(s: &SuspendedHamiltonian) -> Result<Outcome> {
    let tr = integrate(s, &[0.0; 4], 1.0, &config(GeneratorFamily::Cubic, 0.05).flow_options())?;
    let err = sup_diff(tr.final_state(), &[0.0, 1.0, 0.0, 0.0]);
    Ok(Outcome::at_most(err, 1e-8, "cubic ε=0.05 from the origin"))
}

// Admissible block states: x_d and x_d + t in [0, 1], y_d inside the plateau.
fn admissible_states(rng: &mut ChaCha8Rng, count: usize) -> Vec<(Vec<f64>, f64)> {
    (0..count)
        .map(|_| {
            let sp = ball_point(rng, 0.5);
            let mut p = PhasePoint::on_section(&sp);
            p.x_d = rng.random_range(0.0..0.9);
            p.y_d = rng.random_range(-0.125..=0.125);
            let t = rng.random_range(0.05..=(1.0 - p.x_d));
            (p.to_vec(), t)
        })
        .collect()
}

fn criterion_3(sections: &[Trajectory], block: &[Trajectory]) -> Outcome {
    let worst = sections
        .iter()
        .chain(block)
        .map(Trajectory::energy_drift)
        .fold(0.0, f64::max);
    Outcome::at_most(
        worst,
        1e-9,
        format!("{} section runs and {} block trajectories", sections.len(), block.len()),
    )
}

fn criterion_4(s: &SuspendedHamiltonian, points: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let iso = s.isotopy();
    let mut isotopy_worst = 0.0f64;
    for _ in 0..1000 {
        let a = rng.random_range(0.0..=1.0);
        let z = ball_point(rng, 1.0);
        let jac = jacobian(|p| iso.eval(a, p), &z, 1e-5)?;
        isotopy_worst = isotopy_worst.max(symplectic_defect(&jac));
    }
    let opts = config(GeneratorFamily::Cubic, 0.05).flow_options();
    let mut map_worst = 0.0f64;
    for p in points.iter().take(100) {
        let jac = jacobian(|q| Ok(time_one_section_map(s, q, &opts)?.output), p, 1e-3)?;
        map_worst = map_worst.max(symplectic_defect(&jac));
    }
    let mut o = Outcome::at_most(
        isotopy_worst,
        1e-6,
        format!("g_α over 1000 pairs; section map {map_worst:.2e} (tol 1e-5) over {} points", points.len().min(100)),
    );
    o.pass &= map_worst <= 1e-5;
    Ok(o)
}

fn criterion_5(s: &SuspendedHamiltonian, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let iso = s.isotopy();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = rng.random_range(0.0..=1.0);
        let z = ball_point(rng, 1.0);
        s.hamiltonian_k(a, &z)?;
        let mut grad = [0.0; 2];
        for (j, g) in grad.iter_mut().enumerate() {
            let mut p = z.clone();
            let mut q = z.clone();
            p[j] += h;
            q[j] -= h;
            *g = (s.hamiltonian_k(a, &p)? - s.hamiltonian_k(a, &q)?) / (2.0 * h);
        }
        let x = iso.vector_field(a, &z)?;
        // ∇K + J X with J(a, b) = (b, −a)
        let r = [grad[0] + x[1], grad[1] - x[0]];
        worst = worst.max(r[0].hypot(r[1]));
    }
    Ok(Outcome::at_most(worst, 1e-5, "cubic ε=0.05, 1000 pairs"))
}

fn criterion_6(s: &SuspendedHamiltonian, states: &[(Vec<f64>, f64)]) -> Result<(Outcome, Vec<Trajectory>)> {
    let opts = config(GeneratorFamily::Cubic, 0.05).flow_options();
    let mut worst = 0.0f64;
    let mut trajectories = Vec::new();
    for (z, t) in states {
        let tr = integrate(s, z, *t, &opts)?;
        if tr.max_abs_yd > 0.5 {
            return Err(Error::Config(format!("state {z:?} left the plateau")));
        }
        worst = worst.max(sup_diff(&closed_form_flow(s, z, *t)?, tr.final_state()));
        trajectories.push(tr);
    }
    Ok((
        Outcome::at_most(worst, 1e-7, format!("{} admissible states", states.len())),
        trajectories,
    ))
}

fn criterion_7(all: &[(Realization, f64)]) -> Outcome {
    let eps = 0.05;
    let worst = all
        .iter()
        .filter(|(r, _)| r.eps == eps)
        .flat_map(|(r, _)| r.runs.records.iter().map(|rec| rec.excursion))
        .fold(0.0, f64::max);
    let nu_rho: f64 = 0.5;
    Outcome::at_most(worst, nu_rho.min(10.0 * eps), "ε=0.05, every family; bound min(νρ, 10ε)")
}

fn criterion_8() -> Result<Outcome> {
    let mut constants = Vec::new();
    let mut slopes = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let cfg = config(GeneratorFamily::Cubic, eps);
        let norms = norm_gap_report(&cfg.hamiltonian()?, &cfg.norm_grids())?;
        let c = norms
            .constant
            .ok_or_else(|| Error::Config(format!("degenerate norms at ε={eps}")))?;
        constants.push(c);
        slopes.push(norms.hamiltonian_gap_c2 / norms.g_minus_id_c1);
    }
    let spread = |v: &[f64]| {
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(Outcome::at_most(
        spread(&constants),
        10.0,
        format!(
            "c = {:.2e}..{:.2e}; ‖H̃₀−H₀‖_C2/‖g−id‖_C1 spread {:.3}",
            constants.iter().cloned().fold(f64::INFINITY, f64::min),
            constants.iter().cloned().fold(0.0, f64::max),
            spread(&slopes)
        ),
    ))
}

// Oracle profile: ℓ(α) = h(u)/(h(u) + h(1 − u)), u = α/ξ, h(t) = e^{−1/t}.
fn ell(alpha: f64, xi: f64) -> (f64, f64) {
    let h = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let dh = |t: f64| if t > 0.0 { (-1.0 / t).exp() / (t * t) } else { 0.0 };
    let u = alpha / xi;
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, b) = (h(u), h(1.0 - u));
    let d = (dh(u) * b + a * dh(1.0 - u)) / ((a + b) * (a + b));
    (a / (a + b), d / xi)
}

fn criterion_9() -> Result<Outcome> {
    let eps = 0.1;
    let xi = 0.5;
    let cfg = config(GeneratorFamily::LinearShear, eps);
    let s = cfg.hamiltonian()?;
    let iso = s.isotopy();
    let mut worst = 0.0f64;
    for alpha in [0.0, 0.05, 0.125, 0.25, 0.3, 0.4, 0.49, 0.5, 0.75, 1.0] {
        let (l, dl) = ell(alpha, xi);
        let q = 1.0 + l * eps;
        for (u, v) in [(1.0, 1.0), (0.3, -0.2), (-0.7, 0.4), (0.0, 0.5), (0.6, 0.6)] {
            worst = worst.max(sup_diff(&iso.eval(alpha, &[u, v])?, &[u / q, q * v]));
            worst = worst.max(sup_diff(&iso.inverse(alpha, &[u, v])?, &[u * q, v / q]));
            let x = iso.vector_field(alpha, &[u, v])?;
            worst = worst.max(sup_diff(&x, &[-dl * eps * u / q, dl * eps * v / q]));
            let k = s.hamiltonian_k(alpha, &[u, v])?;
            worst = worst.max((k + dl * eps * u * v / q).abs());
        }
    }
    let rec = time_one_section_map(&s, &[1.0, 1.0], &cfg.flow_options())?;
    let map_err = sup_diff(&rec.output, &[1.0 / 1.1, 1.1]);
    Ok(Outcome::at_most(
        worst.max(map_err),
        1e-8,
        format!("ε=0.1; section map at (1, 1) off by {map_err:.2e}"),
    ))
}

// Set partitions of {1..r} as restricted growth strings, grouped by the
// count of blocks of each size.
fn partition_profiles(r: usize) -> std::collections::BTreeMap<Vec<u32>, u64> {
    fn walk(pos: usize, r: usize, labels: &mut Vec<usize>, out: &mut std::collections::BTreeMap<Vec<u32>, u64>) {
        if pos == r {
            let blocks = labels.iter().max().map_or(0, |m| m + 1);
            let mut sizes = vec![0usize; blocks];
            for &b in labels.iter() {
                sizes[b] += 1;
            }
            let mut k = vec![0u32; r];
            for s in sizes {
                k[s - 1] += 1;
            }
            *out.entry(k).or_insert(0) += 1;
            return;
        }
        let next = labels.iter().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            labels.push(b);
            walk(pos + 1, r, labels, out);
            labels.pop();
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(0, r, &mut Vec::new(), &mut out);
    out
}

fn criterion_10() -> Result<Outcome> {
    let mut mismatches = 0usize;
    for r in 1..=5 {
        let table = faa_di_bruno_table(r)?;
        let got: std::collections::BTreeMap<Vec<u32>, u64> = table
            .entries
            .iter()
            .map(|e| (e.multiplicities.clone(), e.coefficient))
            .collect();
        if got != partition_profiles(r) || got.len() != table.entries.len() {
            mismatches += 1;
        }
    }
    Ok(Outcome::at_most(mismatches as f64, 0.0, "orders 1..=5, exact"))
}

fn criterion_11() -> Result<Outcome> {
    let dir = std::env::temp_dir().join(format!("hamsuspend-acceptance-{}", std::process::id()));
    let config_path = dir.join("reduced.toml");
    std::fs::create_dir_all(&dir)?;
    // Reduced grids keep the two runs short; every stage still executes.
    std::fs::write(
        &config_path,
        "seed = 11\n[grids]\nsection_points = 3\ntrajectories = 4\nisotopy_samples = 20\nmap_points = 9\nblock_points = 5\nprofile_samples = 101\n",
    )?;
    let out = dir.join("out");
    let mut reports = Vec::new();
    for _ in 0..2 {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_hamsuspend"))
            .args(["verify", "--quiet", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out)
            .status()?;
        if status.code().is_none_or(|c| c == 2) {
            return Err(Error::Config(format!("verify exited with {status}")));
        }
        reports.push(std::fs::read(out.join("verify_report.json"))?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    let differing = reports[0].iter().zip(&reports[1]).filter(|(a, b)| a != b).count()
        + reports[0].len().abs_diff(reports[1].len());
    Ok(Outcome::at_most(
        differing as f64,
        0.0,
        format!("two `verify` runs, {} bytes each", reports[0].len()),
    ))
}

fn main() -> ExitCode {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut lines: Vec<(u32, &str, Result<Outcome>)> = Vec::new();

    let mut all = Vec::new();
    let mut failure = None;
    for family in GeneratorFamily::all() {
        let start = Instant::now();
        let mut per_family = Vec::new();
        for eps in [0.01, 0.05] {
            match realize(family, eps) {
                Ok(r) => per_family.push(r),
                Err(e) => failure = Some(e),
            }
        }
        let secs = start.elapsed().as_secs_f64();
        all.extend(per_family.into_iter().map(|r| (r, secs)));
    }
    let c1 = match failure {
        Some(e) => Err(e),
        None => criterion_1(&all),
    };
    lines.push((1, "section_map_realization", c1));

    let cubic = all
        .iter()
        .find(|(r, _)| r.family == GeneratorFamily::Cubic && r.eps == 0.05)
        .map(|(r, _)| r);
    let states = admissible_states(&mut rng, 100);
    let (c6, block) = match cubic.map(|r| criterion_6(&r.hamiltonian, &states)) {
        Some(Ok((o, t))) => (Ok(o), t),
        Some(Err(e)) => (Err(e), Vec::new()),
        None => (Err(Error::Config("cubic ε=0.05 run missing".into())), Vec::new()),
    };
    match cubic {
        Some(r) => {
            lines.push((2, "fixed_point", criterion_2(&r.hamiltonian)));
            lines.push((3, "energy_conservation", Ok(criterion_3(&r.runs.trajectories, &block))));
            lines.push((4, "symplecticity", criterion_4(&r.hamiltonian, &r.points, &mut rng)));
            lines.push((5, "k_exactness", criterion_5(&r.hamiltonian, &mut rng)));
        }
        None => {
            for (id, name) in [(2, "fixed_point"), (3, "energy_conservation"), (4, "symplecticity"), (5, "k_exactness")] {
                lines.push((id, name, Err(Error::Config("cubic ε=0.05 run missing".into()))));
            }
        }
    }
    lines.push((6, "closed_form_flow", c6));
    lines.push((7, "yd_confinement", Ok(criterion_7(&all))));
    lines.push((8, "norm_bound_scaling", criterion_8()));
    lines.push((9, "linear_shear_closed_forms", criterion_9()));
    lines.push((10, "faa_di_bruno_partitions", criterion_10()));
    lines.push((11, "determinism", criterion_11()));

    let mut unexpected = 0;
    for (id, name, result) in &lines {
        let known = UNATTAINABLE.iter().find(|(k, _)| k == id).map(|(_, why)| *why);
        let (pass, text) = match result {
            Ok(o) => (
                o.pass,
                format!("measured={:.3e} tol={:.1e} ({})", o.measured, o.tol, o.detail),
            ),
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        let mut line = format!("C{id:<2} {verdict} {name} {text}");
        if let Some(why) = known {
            line.push_str(&format!(" [expected: {why}]"));
        }
        println!("{line}");
        if pass == known.is_some() {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        println!("acceptance: all outcomes as expected");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {unexpected} unexpected outcome(s)");
        ExitCode::FAILURE
    }
}
