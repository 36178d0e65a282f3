use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use persuade::fixtures;
use persuade::io::{game_to_string, policy_to_string};
use persuade::TieRule;
use persuade_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = persuade_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn nonunique() -> (*mut PersuadeGame, *mut PersuadePolicy) {
    let (game, policy) = fixtures::nonunique_equilibrium_game();
    let gj = cstr(&game_to_string(&game, Some(&TieRule::sender_favoring(2))));
    let pj = cstr(&policy_to_string(&policy));
    let mut g = ptr::null_mut();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            persuade_game_from_json(gj.as_ptr(), &mut g),
            PersuadeStatus::Ok
        );
        assert_eq!(
            persuade_policy_from_json(pj.as_ptr(), &mut p),
            PersuadeStatus::Ok
        );
    }
    (g, p)
}

#[test]
fn dims_and_utilities() {
    let (g, p) = nonunique();
    let (mut n, mut s, mut k, mut a) = (0, 0, 0, 0);
    let mut u = [0.0; 3];
    unsafe {
        assert_eq!(
            persuade_game_dims(g, &mut n, &mut s, &mut k, &mut a),
            PersuadeStatus::Ok
        );
        assert_eq!(
            persuade_ex_ante(g, p, PersuadeTie::Stored, u.as_mut_ptr(), 3),
            PersuadeStatus::Ok
        );
    }
    assert_eq!(n, 2);
    let expected = {
        let (game, policy) = fixtures::nonunique_equilibrium_game();
        persuade::game::ex_ante_utilities(&game, &policy, &TieRule::sender_favoring(2)).unwrap()
    };
    assert_eq!(&u[..2], expected.senders.as_slice());
    assert_eq!(u[2], expected.receiver);
    unsafe {
        persuade_policy_free(p);
        persuade_game_free(g);
    }
}

#[test]
fn verify_and_best_response() {
    let (g, p) = nonunique();
    let mut verdict = PersuadeVerdict::Refuted;
    let mut gap = f64::NAN;
    let mut br = 0.0;
    let mut u = [0.0; 3];
    unsafe {
        assert_eq!(
            persuade_verify_nash(g, p, PersuadeTie::Stored, &mut verdict, &mut gap),
            PersuadeStatus::Ok
        );
        assert_eq!(
            persuade_best_response(g, p, 0, PersuadeTie::Stored, &mut br, ptr::null_mut(), 0),
            PersuadeStatus::Ok
        );
        persuade_ex_ante(g, p, PersuadeTie::Stored, u.as_mut_ptr(), 3);
    }
    assert_eq!(verdict, PersuadeVerdict::Exact);
    assert!(gap <= 1e-7);
    assert!((br - u[0]).abs() <= 1e-7);
    unsafe {
        persuade_policy_free(p);
        persuade_game_free(g);
    }
}

#[test]
fn full_revelation_roundtrips_through_json() {
    let (g, p) = nonunique();
    let mut fr = ptr::null_mut();
    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(persuade_full_revelation(g, &mut fr), PersuadeStatus::Ok);
        assert_eq!(persuade_policy_to_json(fr, &mut json), PersuadeStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        assert!(text.contains("persuade-policy/1"));
        let mut back = ptr::null_mut();
        let c = cstr(&text);
        assert_eq!(
            persuade_policy_from_json(c.as_ptr(), &mut back),
            PersuadeStatus::Ok
        );
        assert_eq!((*back).clone_policy(), (*fr).clone_policy());
        persuade_string_free(json);
        persuade_policy_free(back);
        persuade_policy_free(fr);
        persuade_policy_free(p);
        persuade_game_free(g);
    }
}

#[test]
fn errors_are_reported() {
    let mut g = ptr::null_mut();
    let bad = cstr("{\"format\":\"nope\"}");
    unsafe {
        assert_eq!(
            persuade_game_from_json(ptr::null(), &mut g),
            PersuadeStatus::NullPointer
        );
        assert!(last_error().contains("null"));
        assert_eq!(
            persuade_game_from_json(bad.as_ptr(), &mut g),
            PersuadeStatus::Parse
        );
        assert!(g.is_null());
        assert!(!last_error().is_empty());
    }
    let (g, p) = nonunique();
    let mut u = [0.0; 1];
    let mut br = 0.0;
    let wrong = [0.5; 3];
    let mut q = ptr::null_mut();
    unsafe {
        assert_eq!(
            persuade_ex_ante(g, p, PersuadeTie::Stored, u.as_mut_ptr(), 1),
            PersuadeStatus::BufferTooSmall
        );
        assert_eq!(
            persuade_best_response(g, p, 9, PersuadeTie::Stored, &mut br, ptr::null_mut(), 0),
            PersuadeStatus::InvalidArgument
        );
        assert_eq!(
            persuade_policy_from_array(g, wrong.as_ptr(), wrong.len(), &mut q),
            PersuadeStatus::InvalidArgument
        );
        // success clears the previous message
        let mut n = 0;
        assert_eq!(
            persuade_game_dims(g, &mut n, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            PersuadeStatus::Ok
        );
        assert!(persuade_last_error().is_null());
        persuade_policy_free(p);
        persuade_game_free(g);
    }
}

#[test]
fn policy_from_array_matches_json() {
    let (g, p) = nonunique();
    let (_, policy) = fixtures::nonunique_equilibrium_game();
    let flat: Vec<f64> = policy
        .iter()
        .flat_map(|s| s.matrix().as_slice().to_vec())
        .collect();
    let mut q = ptr::null_mut();
    unsafe {
        assert_eq!(
            persuade_policy_from_array(g, flat.as_ptr(), flat.len(), &mut q),
            PersuadeStatus::Ok
        );
        assert_eq!((*q).clone_policy(), (*p).clone_policy());
        persuade_policy_free(q);
        persuade_policy_free(p);
        persuade_game_free(g);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(persuade_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/persuade.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "persuade_game_from_json",
        "persuade_verify_nash",
        "persuade_best_response",
        "persuade_full_revelation",
        "persuade_last_error",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(status.success());
}
