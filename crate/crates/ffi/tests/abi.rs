use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use entrogame_ffi::*;

fn game(kind: EgGameKind) -> *mut EgGame {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { eg_game_new(kind as u32, &mut g) }, EgStatus::Ok);
    g
}

fn source(json: &str) -> *mut EgSource {
    let json = CString::new(json).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { eg_source_from_json(json.as_ptr(), &mut s) }, EgStatus::Ok);
    s
}

fn last_error() -> String {
    let p = eg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const MARKOV_Q02: &str = r#"{"kind":"markov","k":1,"p1_given":{"0":0.2,"1":0.8}}"#;

#[test]
fn loss_and_entropy_round_trip() {
    let g = game(EgGameKind::LogLoss);
    let s = source(MARKOV_Q02);
    unsafe {
        let mut v = 0.0;
        assert_eq!(eg_loss_eval(g, 1, 0.5, &mut v), EgStatus::Ok);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(eg_loss_eval(g, 1, 0.0, &mut v), EgStatus::Ok);
        assert_eq!(v, f64::INFINITY);

        let mut rate = 0.0;
        let mut at = 0i64;
        assert_eq!(eg_entropy_rate(g, s, 1e-9, 20, &mut rate, &mut at), EgStatus::Ok);
        assert!((rate - 0.500402).abs() < 1e-6);
        assert_eq!(at, 1);

        let mut h2 = 0.0;
        assert_eq!(eg_n_step_entropy(g, s, 2, &mut h2), EgStatus::Ok);
        assert!((h2 - (std::f64::consts::LN_2 + rate)).abs() < 1e-12);

        let w = [0u8, 1];
        let mut p = 0.0;
        assert_eq!(eg_string_probability(s, w.as_ptr(), w.len(), &mut p), EgStatus::Ok);
        assert!((p - 0.1).abs() < 1e-15);
        assert_eq!(eg_conditional_next_probability(s, w.as_ptr(), 1, &mut p), EgStatus::Ok);
        assert!((p - 0.2).abs() < 1e-15);

        let mut gamma = 0.0;
        assert_eq!(eg_optimal_prediction(g, 0.3, &mut gamma), EgStatus::Ok);
        assert!((gamma - 0.3).abs() < 1e-12);
        eg_source_free(s);
        eg_game_free(g);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let g = game(EgGameKind::SquareLoss);
    unsafe {
        let mut v = 0.0;
        assert_eq!(eg_loss_eval(g, 0, 1.5, &mut v), EgStatus::Domain);
        assert!(last_error().contains("1.5"));
        assert_eq!(eg_loss_eval(g, 0, 0.5, ptr::null_mut()), EgStatus::NullPointer);
        assert_eq!(eg_loss_eval(ptr::null(), 0, 0.5, &mut v), EgStatus::NullPointer);

        let mut out = ptr::null_mut();
        assert_eq!(eg_game_new(7, &mut out), EgStatus::InvalidArgument);

        let bad = CString::new("{\"kind\":\"bernoulli\"}").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(eg_source_from_json(bad.as_ptr(), &mut s), EgStatus::InvalidArgument);
        assert!(s.is_null());

        // two absorbing states: no unique stationary law
        let reducible = source(r#"{"kind":"markov","k":1,"p1_given":{"0":0.0,"1":1.0}}"#);
        let mut rate = 0.0;
        let mut at = 0;
        assert_eq!(eg_entropy_rate(g, reducible, 1e-9, 10, &mut rate, &mut at), EgStatus::NotErgodic);
        assert!(last_error().contains("ergodic"));

        let s = source(MARKOV_Q02);
        let mut h = 0.0;
        assert_eq!(eg_n_step_entropy(g, s, 40, &mut h), EgStatus::TooLarge);
        let w = [2u8];
        assert_eq!(eg_string_probability(s, w.as_ptr(), 1, &mut h), EgStatus::InvalidArgument);
        eg_source_free(s);
        eg_source_free(reducible);
        eg_game_free(g);
    }
}

#[test]
fn mixability_calls() {
    let log = game(EgGameKind::LogLoss);
    let abs = game(EgGameKind::AbsoluteLoss);
    unsafe {
        let mut mixable = false;
        assert_eq!(eg_mixability_test(log, 1.0, 2001, &mut mixable), EgStatus::Ok);
        assert!(mixable);
        assert_eq!(eg_mixability_test(abs, 1.0, 2001, &mut mixable), EgStatus::Ok);
        assert!(!mixable);
        let mut eta = 0.0;
        let mut found = false;
        assert_eq!(eg_max_mixability_eta(log, 2001, 1e-3, &mut eta, &mut found), EgStatus::Ok);
        assert!(found && (eta - 1.0).abs() < 0.01);
        assert_eq!(eg_max_mixability_eta(abs, 2001, 1e-3, &mut eta, &mut found), EgStatus::Ok);
        assert!(!found);
        eg_game_free(log);
        eg_game_free(abs);
    }
}

#[test]
fn aggregator_lifecycle() {
    let g = game(EgGameKind::LogLoss);
    let pool = CString::new(r#"{"experts":[{"kind":"constant","gamma":0.5},{"kind":"constant","gamma":1.0}],"eta":1.0}"#).unwrap();
    unsafe {
        let mut agg = ptr::null_mut();
        assert_eq!(eg_aggregator_new(g, pool.as_ptr(), &mut agg), EgStatus::Ok);
        assert_eq!(eg_aggregator_len(agg), 2);
        let mut gamma = 0.0;
        assert_eq!(eg_aggregator_predict(agg, &mut gamma), EgStatus::Ok);
        assert!((gamma - 0.75).abs() < 1e-9);
        assert_eq!(eg_aggregator_update(agg, 1), EgStatus::Ok);
        let mut w = [0.0; 2];
        assert_eq!(eg_aggregator_weights(agg, w.as_mut_ptr(), 2), EgStatus::Ok);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(eg_aggregator_weights(agg, w.as_mut_ptr(), 1), EgStatus::InvalidArgument);
        assert_eq!(eg_aggregator_update(agg, 3), EgStatus::InvalidArgument);
        eg_aggregator_free(agg);

        let mut refused = ptr::null_mut();
        let fast = CString::new(r#"{"experts":[{"kind":"constant","gamma":0.5}],"eta":3.0}"#).unwrap();
        assert_eq!(eg_aggregator_new(g, fast.as_ptr(), &mut refused), EgStatus::NotMixable);
        eg_game_free(g);
    }
}

#[test]
fn custom_table_game() {
    let json = CString::new(r#"{"kind":"table","grid":[0.0,0.5,1.0],"loss0":[0.0,0.25,1.0],"loss1":[1.0,0.25,0.0],"convex_in_gamma":true}"#).unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(eg_game_from_json(json.as_ptr(), &mut g), EgStatus::Ok);
        let mut v = 0.0;
        assert_eq!(eg_loss_eval(g, 0, 0.75, &mut v), EgStatus::Ok);
        assert!((v - 0.625).abs() < 1e-15);
        eg_game_free(g);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/entrogame.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "eg_game_new",
        "eg_game_from_json",
        "eg_game_free",
        "eg_loss_eval",
        "eg_source_from_json",
        "eg_source_free",
        "eg_string_probability",
        "eg_conditional_next_probability",
        "eg_n_step_entropy",
        "eg_entropy_rate",
        "eg_optimal_prediction",
        "eg_mixability_test",
        "eg_max_mixability_eta",
        "eg_aggregator_new",
        "eg_aggregator_predict",
        "eg_aggregator_update",
        "eg_aggregator_weights",
        "eg_aggregator_free",
        "eg_last_error_message",
        "EG_GAME_KIND_LOG_LOSS",
        "typedef struct EgGame EgGame",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(header()).status() else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(status.success());
}
