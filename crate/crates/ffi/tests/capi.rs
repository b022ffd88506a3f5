use std::ffi::{CStr, CString};
use std::ptr;

use bellcert_ffi::*;

fn last_error() -> String {
    let p = bc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn builtin(name: &str) -> *mut BcExpression {
    let name = CString::new(name).unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { bc_expression_builtin(name.as_ptr(), &mut e) }, BcStatus::Ok);
    e
}

fn quick() -> BcSeesawConfig {
    BcSeesawConfig {
        restarts: 8,
        ..bc_seesaw_config_default()
    }
}

#[test]
fn classical_and_seesaw_values() {
    let chsh = builtin("chsh");
    let mut v = 0.0;
    unsafe {
        assert_eq!(bc_classical_bound(chsh, &mut v), BcStatus::Ok);
        assert_eq!(v, 2.0);
        assert_eq!(bc_seesaw(chsh, 2, 1, quick(), &mut v), BcStatus::Ok);
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-6);
        bc_expression_free(chsh);
    }
    assert!(bc_last_error().is_null());
}

#[test]
fn errors_map_to_status_codes() {
    let bad = CString::new("nope").unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { bc_expression_builtin(bad.as_ptr(), &mut e) }, BcStatus::InvalidInput);
    assert!(e.is_null());
    assert!(last_error().contains("nope"));

    assert_eq!(unsafe { bc_expression_builtin(ptr::null(), &mut e) }, BcStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { bc_classical_bound(ptr::null(), &mut v) }, BcStatus::NullPointer);

    let chsh = builtin("chsh");
    assert_eq!(unsafe { bc_seesaw(chsh, 2, 0, quick(), &mut v) }, BcStatus::InvalidInput);
    let junk = CString::new("{\"name\": 3").unwrap();
    assert_eq!(unsafe { bc_expression_from_json(junk.as_ptr(), &mut e) }, BcStatus::InvalidInput);
    unsafe { bc_expression_free(chsh) };
    // freeing null is a no-op
    unsafe {
        bc_expression_free(ptr::null_mut());
        bc_certificate_free(ptr::null_mut());
        bc_string_free(ptr::null_mut());
    }
}

#[test]
fn certificate_roundtrip_and_bound() {
    let chsh = builtin("chsh");
    let mut cert = ptr::null_mut();
    assert_eq!(unsafe { bc_certify(chsh, 2, quick(), &mut cert) }, BcStatus::Ok);
    let mut flag = false;
    let mut eps = 0.0;
    unsafe {
        assert_eq!(bc_certificate_is_nondegenerate(cert, &mut flag), BcStatus::Ok);
        assert_eq!(bc_certificate_eps1_max(cert, &mut eps), BcStatus::Ok);
    }

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { bc_certificate_to_json(cert, &mut json) }, BcStatus::Ok);
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { bc_certificate_from_json(json, &mut again) }, BcStatus::Ok);
    let mut eps_again = 0.0;
    unsafe { bc_certificate_eps1_max(again, &mut eps_again) };
    assert_eq!(eps, eps_again);
    let doc: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(doc["nondegenerate"], flag);
    let (c_q, c2) = (doc["c_q"].as_f64().unwrap(), doc["c2"].as_f64().unwrap());
    assert!((eps - (c_q - c2 / 2.0)).abs() < 1e-12);

    // uniform correlation: no violation, so no bound, but still a success
    let p = vec![vec![vec![vec![0.25; 2]; 2]; 2]; 2];
    let corr = serde_json::json!({"scenario": {"nx": 2, "ny": 2, "na": 2, "nb": 2}, "p": p}).to_string();
    let corr = CString::new(corr).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { bc_bound(chsh, cert, corr.as_ptr(), 2, &mut out) };
    assert_eq!(status, BcStatus::Ok, "{}", if status == BcStatus::Ok { String::new() } else { last_error() });
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["ic_lower_ebits"].is_null());
    assert_eq!(v["certified"], false);

    unsafe {
        bc_string_free(out);
        bc_string_free(json);
        bc_certificate_free(again);
        bc_certificate_free(cert);
        bc_expression_free(chsh);
    }
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/bellcert.h")).unwrap();
    for sym in ["bc_last_error", "bc_seesaw", "bc_certify", "bc_bound", "typedef struct BcExpression BcExpression"] {
        assert!(header.contains(sym), "{sym}");
    }
}
