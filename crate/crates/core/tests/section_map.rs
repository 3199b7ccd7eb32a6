use std::sync::Arc;

use hamsuspend::flow::{closed_form_flow, integrate, section_trajectory, time_one_section_map};
use hamsuspend::generator::{GeneratingPerturbation, GeneratorFamily};
use hamsuspend::numerics::bump::BumpProfile;
use hamsuspend::{Error, FlowOptions, IsotopyFamily, SuspendedHamiltonian};

fn hamiltonian(family: GeneratorFamily, eps: f64) -> SuspendedHamiltonian {
    let field = family.build(1, eps, 1.0, 7).unwrap();
    let iso = IsotopyFamily::new(
        GeneratingPerturbation::unchecked(Arc::new(field)),
        BumpProfile::alpha(0.5).unwrap(),
    )
    .unwrap();
    SuspendedHamiltonian::new(iso, 0.5, 1.0).unwrap()
}

#[test]
fn linear_shear_section_point() {
    let s = hamiltonian(GeneratorFamily::LinearShear, 0.1);
    let rec = time_one_section_map(&s, &[1.0, 1.0], &FlowOptions::default()).unwrap();
    assert!((rec.output[0] - 1.0 / 1.1).abs() <= 1e-7);
    assert!((rec.output[1] - 1.1).abs() <= 1e-7);
    assert!(rec.residual <= 1e-7);
    assert!((rec.exit_x_d - 1.0).abs() <= 1e-9);
}

#[test]
fn cubic_fixes_the_origin() {
    let s = hamiltonian(GeneratorFamily::Cubic, 0.05);
    let tr = integrate(&s, &[0.0; 4], 1.0, &FlowOptions::default()).unwrap();
    let end = tr.final_state();
    let err = ((end[0]).powi(2) + (end[1] - 1.0).powi(2) + end[2].powi(2) + end[3].powi(2)).sqrt();
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn cubic_section_residual_and_energy() {
    let s = hamiltonian(GeneratorFamily::Cubic, 0.05);
    let start = std::time::Instant::now();
    let (rec, tr) = section_trajectory(&s, &[0.3, -0.35], &FlowOptions::default()).unwrap();
    eprintln!(
        "cubic section point: {:?}, {} rhs evaluations",
        start.elapsed(),
        tr.stats.evaluations
    );
    assert!(rec.residual <= 1e-6, "{:e}", rec.residual);
    assert!(tr.energy_drift() <= 1e-9, "{:e}", tr.energy_drift());
    assert!(rec.excursion <= 0.5);
}

#[test]
fn closed_form_matches_integration() {
    let s = hamiltonian(GeneratorFamily::RandomPoly, 0.05);
    let z = [0.2, 0.1, -0.3, 0.02];
    let t = 0.7;
    let a = closed_form_flow(&s, &z, t).unwrap();
    let b = integrate(&s, &z, t, &FlowOptions::default()).unwrap();
    let err = a
        .iter()
        .zip(b.final_state())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-7, "{err:e}");
}

#[test]
fn large_generator_leaves_the_plateau() {
    // Far past the contraction cap; the solve itself may already fail.
    let s = hamiltonian(GeneratorFamily::Cubic, 3.0);
    match time_one_section_map(&s, &[0.45, 0.0], &FlowOptions::default()) {
        Err(Error::DomainExit { excursion, .. }) => assert!(excursion > 0.5),
        Err(Error::ContractionViolation(_)) => {}
        other => panic!("expected a domain exit, got {other:?}"),
    }
}
