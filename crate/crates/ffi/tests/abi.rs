use std::ffi::{CStr, CString};
use std::ptr;

use hamsuspend_ffi::*;

fn model(toml: &str) -> *mut HsModel {
    let text = CString::new(toml).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { hs_model_from_toml(text.as_ptr(), &mut m) };
    assert_eq!(st, HsStatus::Ok, "{}", last_error());
    m
}

fn last_error() -> String {
    let need = unsafe { hs_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; need];
    unsafe { hs_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn default_model_round_trips_the_isotopy() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hs_model_new_default(&mut m) }, HsStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { hs_model_half_dim(m, &mut n) }, HsStatus::Ok);
    assert_eq!(n, 1);
    let z = [0.3, -0.2];
    let mut g = [0.0; 2];
    let mut back = [0.0; 2];
    unsafe {
        assert_eq!(hs_isotopy_eval(m, 0.4, z.as_ptr(), 2, g.as_mut_ptr()), HsStatus::Ok);
        assert_eq!(hs_isotopy_inverse(m, 0.4, g.as_ptr(), 2, back.as_mut_ptr()), HsStatus::Ok);
        hs_model_free(m);
    }
    assert!(g != z);
    assert!((back[0] - z[0]).abs() < 1e-12 && (back[1] - z[1]).abs() < 1e-12);
}

#[test]
fn linear_shear_section_map() {
    let m = model("[generator]\nfamily = \"linear-shear\"\nepsilon = 0.1\n");
    let z = [1.0, 1.0];
    let mut out = [0.0; 2];
    let mut residual = f64::NAN;
    let st = unsafe { hs_section_map(m, z.as_ptr(), 2, out.as_mut_ptr(), &mut residual) };
    unsafe { hs_model_free(m) };
    assert_eq!(st, HsStatus::Ok, "{}", last_error());
    assert!((out[0] - 1.0 / 1.1).abs() < 1e-7);
    assert!((out[1] - 1.1).abs() < 1e-7);
    assert!(residual < 1e-7);
}

#[test]
fn hamiltonian_is_the_model_outside_the_block() {
    let m = model("");
    // (x, x_d, y, y_d) with x_d past the isotopy's rise.
    let z = [0.1, 0.9, 0.2, 0.3];
    let mut h = 0.0;
    let mut grad = [0.0; 4];
    let mut field = [0.0; 4];
    let mut k = f64::NAN;
    unsafe {
        assert_eq!(hs_hamiltonian_value(m, z.as_ptr(), 4, &mut h), HsStatus::Ok);
        assert_eq!(hs_hamiltonian_gradient(m, z.as_ptr(), 4, grad.as_mut_ptr()), HsStatus::Ok);
        assert_eq!(hs_hamiltonian_field(m, z.as_ptr(), 4, field.as_mut_ptr()), HsStatus::Ok);
        assert_eq!(hs_k_value(m, 0.9, [0.1, 0.2].as_ptr(), 2, &mut k), HsStatus::Ok);
        hs_model_free(m);
    }
    assert_eq!(h, 0.3);
    assert_eq!(grad, [0.0, 0.0, 0.0, 1.0]);
    assert_eq!(field, [0.0, 1.0, 0.0, 0.0]);
    assert_eq!(k, 0.0);
}

#[test]
fn field_matches_the_gradient() {
    let m = model("");
    let z = [0.2, 0.3, -0.1, 0.05];
    let mut grad = [0.0; 4];
    let mut field = [0.0; 4];
    unsafe {
        hs_hamiltonian_gradient(m, z.as_ptr(), 4, grad.as_mut_ptr());
        hs_hamiltonian_field(m, z.as_ptr(), 4, field.as_mut_ptr());
        hs_model_free(m);
    }
    // J(a, b) = (b, -a)
    let expected = [grad[2], grad[3], -grad[0], -grad[1]];
    for (a, b) in field.iter().zip(expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut out = [0.0; 2];
    let st = unsafe { hs_isotopy_eval(ptr::null(), 0.1, [0.0, 0.0].as_ptr(), 2, out.as_mut_ptr()) };
    assert_eq!(st, HsStatus::NullPointer);
    assert!(last_error().contains("model"));

    let m = model("");
    let st = unsafe { hs_isotopy_field(m, 0.1, [0.0; 3].as_ptr(), 3, out.as_mut_ptr()) };
    assert_eq!(st, HsStatus::Dimension);
    assert!(last_error().contains("expected 2, got 3"));
    let st = unsafe { hs_isotopy_field(m, 0.1, [0.0; 2].as_ptr(), 2, ptr::null_mut()) };
    assert_eq!(st, HsStatus::NullPointer);
    let st = unsafe { hs_isotopy_field(m, 0.1, [0.0; 2].as_ptr(), 2, out.as_mut_ptr()) };
    assert_eq!(st, HsStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { hs_model_free(m) };

    let mut m = ptr::null_mut();
    let bad = CString::new("[model]\nd = 9").unwrap();
    assert_eq!(unsafe { hs_model_from_toml(bad.as_ptr(), &mut m) }, HsStatus::Config);
    assert!(m.is_null());
    let big = CString::new("[generator]\nepsilon = 0.6").unwrap();
    assert_eq!(unsafe { hs_model_from_toml(big.as_ptr(), &mut m) }, HsStatus::Contraction);
    assert!(last_error().starts_with("generating_isotopy/check_contraction"));
}

#[test]
fn truncated_error_copy() {
    unsafe { hs_model_half_dim(ptr::null(), ptr::null_mut()) };
    let full = last_error();
    let mut buf = [1 as std::ffi::c_char; 4];
    let need = unsafe { hs_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(need, full.len() + 1);
    assert_eq!(buf[3], 0);
    let head = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert_eq!(head, &full[..3]);
}

#[test]
fn status_names() {
    let name = |s| unsafe { CStr::from_ptr(hs_status_name(s)) }.to_str().unwrap();
    assert_eq!(name(HsStatus::Ok), "ok");
    assert_eq!(name(HsStatus::DomainExit), "domain exit");
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hamsuspend.h")).unwrap();
    for f in [
        "hs_model_new_default",
        "hs_model_from_toml",
        "hs_model_free",
        "hs_model_half_dim",
        "hs_isotopy_eval",
        "hs_isotopy_inverse",
        "hs_isotopy_field",
        "hs_k_value",
        "hs_hamiltonian_value",
        "hs_hamiltonian_gradient",
        "hs_hamiltonian_field",
        "hs_section_map",
        "hs_last_error",
        "hs_status_name",
        "typedef struct HsModel HsModel",
        "HS_STATUS_DOMAIN_EXIT = 9",
    ] {
        assert!(header.contains(f), "{f}");
    }
}
