use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use polynorm_ffi::*;

fn last_error() -> String {
    let p = pn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    pn_string_free(p);
    s
}

fn motzkin() -> *mut PnForm {
    let exps: [u32; 12] = [4, 2, 0, 2, 4, 0, 2, 2, 2, 0, 0, 6];
    let coeffs = [1.0, 1.0, -3.0, 1.0];
    let mut f = ptr::null_mut();
    let st = unsafe { pn_form_new(3, 6, exps.as_ptr(), coeffs.as_ptr(), 4, &mut f) };
    assert_eq!(st, PnStatus::Ok);
    f
}

#[test]
fn form_round_trip_and_eval() {
    unsafe {
        let f = motzkin();
        assert_eq!(pn_form_n_vars(f), 3);
        assert_eq!(pn_form_degree(f), 6);
        let mut v = 0.0;
        assert_eq!(pn_form_eval(f, [1.0, 1.0, 1.0].as_ptr(), 3, &mut v), PnStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(pn_form_eval(f, [2.0, 1.0, 1.0].as_ptr(), 3, &mut v), PnStatus::Ok);
        assert_eq!(v, 16.0 + 4.0 - 12.0 + 1.0);
        assert_eq!(pn_form_eval(f, [1.0].as_ptr(), 1, &mut v), PnStatus::InvalidInput);
        assert!(last_error().contains("coordinates"));

        let mut s = ptr::null_mut();
        assert_eq!(pn_form_to_json(f, &mut s), PnStatus::Ok);
        let json = CString::new(take_string(s)).unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(pn_form_from_json(json.as_ptr(), &mut g), PnStatus::Ok);
        assert_eq!(pn_form_eval(g, [2.0, 1.0, 1.0].as_ptr(), 3, &mut v), PnStatus::Ok);
        assert_eq!(v, 9.0);
        pn_form_free(g);
        pn_form_free(f);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut f = ptr::null_mut();
        let bad = CString::new("{\"n_vars\": 2,").unwrap();
        assert_eq!(pn_form_from_json(bad.as_ptr(), &mut f), PnStatus::Parse);
        assert!(f.is_null());
        assert_eq!(pn_form_from_json(ptr::null(), &mut f), PnStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut v = 0.0;
        assert_eq!(pn_form_eval(ptr::null(), ptr::null(), 0, &mut v), PnStatus::NullPointer);
        let exps = [1u32, 0];
        assert_eq!(
            pn_form_new(2, 2, exps.as_ptr(), [1.0].as_ptr(), 1, &mut f),
            PnStatus::InvalidInput
        );
        pn_form_free(ptr::null_mut());
        pn_string_free(ptr::null_mut());
    }
}

#[test]
fn motzkin_needs_a_multiplier() {
    unsafe {
        let f = motzkin();
        let mut verdict = PnVerdict::Undecided;
        assert_eq!(pn_is_sos(f, 0, 0, &mut verdict), PnStatus::Ok);
        assert_eq!(verdict, PnVerdict::NotSos);
        assert_eq!(pn_is_sos(f, 1, 0, &mut verdict), PnStatus::Ok);
        assert_eq!(verdict, PnVerdict::Sos);

        let mut rep = ptr::null_mut();
        assert_eq!(pn_certify(f, 0, 2, 0, 0, &mut rep), PnStatus::Ok);
        assert_eq!(pn_report_outcome(rep), PnOutcome::Refuted);
        let mut s = ptr::null_mut();
        assert_eq!(pn_report_to_json(rep, &mut s), PnStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take_string(s)).unwrap();
        assert!(v.is_object());
        pn_report_free(rep);
        pn_form_free(f);
    }
}

#[test]
fn moment_forms_are_certified_norms() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(pn_moment_form_pnorm(1.0, 2, 4, &mut f), PnStatus::Ok);
        let mut rep = ptr::null_mut();
        assert_eq!(pn_certify(f, 0, 1, 0, 0, &mut rep), PnStatus::Ok);
        assert_eq!(pn_report_outcome(rep), PnOutcome::Certified);
        pn_report_free(rep);
        pn_form_free(f);
        assert_eq!(pn_moment_form_pnorm(0.5, 2, 4, &mut f), PnStatus::InvalidInput);
    }
    let expected = 4.0 / 6.0 * (2.0f64 / 6.0).sqrt();
    assert!((pn_approx_factor(2, 4) - expected).abs() < 1e-15);
}

#[test]
fn family_bounds_and_certificates() {
    unsafe {
        let data = [0.5, 0.0, 0.0, 0.5, 0.0, 0.25, -0.25, 0.0];
        let mut fam = ptr::null_mut();
        assert_eq!(pn_family_new(2, 2, data.as_ptr(), &mut fam), PnStatus::Ok);
        let mut lb = 0.0;
        assert_eq!(pn_jsr_lower_bound(fam, 4, &mut lb), PnStatus::Ok);
        assert!((lb - 0.5).abs() < 1e-12);
        let mut rep = ptr::null_mut();
        assert_eq!(pn_jsr_certify(fam, [2u32].as_ptr(), 1, &mut rep), PnStatus::Ok);
        assert_eq!(pn_report_outcome(rep), PnOutcome::Certified);
        pn_report_free(rep);
        assert_eq!(pn_jsr_certify(fam, [3u32].as_ptr(), 1, &mut rep), PnStatus::InvalidInput);
        assert_eq!(pn_jsr_lower_bound(fam, 0, &mut lb), PnStatus::InvalidInput);
        pn_family_free(fam);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(pn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/polynorm.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let mut count = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            count += 1;
        }
    }
    assert!(count >= 15);
    for ty in ["typedef struct PnForm PnForm;", "typedef struct PnFamily PnFamily;", "PN_STATUS_OK = 0"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(dir.join("include/polynorm.h"))
        .output()
    else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
