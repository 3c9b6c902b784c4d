mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use coinflip_core::filter::*;
use coinflip_core::probcore::{fid, ProbVec};
use coinflip_core::protocol::{ProtocolParams, ProtocolView, RoundSpec};
use coinflip_core::reduce::{solve_bias, Party, SolverOptions};
use coinflip_core::Result;
use common::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn embedded_protocol_strategy_values() {
    let p = ProtocolParams::embedded_example();
    assert_abs_diff_eq!(eval_strategy(&p, "F1").unwrap(), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(eval_strategy(&p, "F2").unwrap(), 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(eval_strategy(&p, "F6").unwrap(), 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(eval_strategy(&p, "F7").unwrap(), 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(eval_strategy(&p, "F12").unwrap(), 2.0 / 3.0, epsilon = 1e-5);
    assert!(eval_strategy(&p, "F4").is_err(), "F4 needs |A| = |B|");
    assert!(eval_strategy(&p, "G1").is_err());
    assert!(eval_strategy(&p, "F99").is_err());
}

#[test]
fn g7_with_uninformative_alpha() {
    let a = ratio(&[1, 2, 3, 4], 10);
    let p = ProtocolParams::new(RoundSpec::six(2, 2), a.clone(), a, ratio(&[1, 1, 1, 1], 4), ratio(&[4, 3, 2, 1], 10))
        .unwrap();
    let want = 0.5 * (1.0 + fid(p.beta[0].as_f64(), p.beta[1].as_f64()));
    assert_abs_diff_eq!(eval_strategy(&p, "G7").unwrap(), want, epsilon = 1e-12);
}

#[test]
fn filter_rejections() {
    let p = ProtocolParams::embedded_example();
    let out = run_filter_codes(&p, &FOUR_ROUND_ORDER, DEFAULT_THRESHOLD, SolverOptions::default()).unwrap();
    assert_eq!(out.rejected_at.as_deref(), Some("F2"));
    assert!(!out.passed);
    assert_eq!(out.values.len(), 2);

    let b = ratio(&[1, 3], 4);
    let same = ProtocolParams::new(RoundSpec::four(2, 2), ratio(&[1, 0], 1), ratio(&[0, 1], 1), b.clone(), b).unwrap();
    let out = run_filter_codes(&same, &FOUR_ROUND_ORDER, DEFAULT_THRESHOLD, SolverOptions::default()).unwrap();
    assert_eq!(out.rejected_at.as_deref(), Some("F1"));
    assert_abs_diff_eq!(out.values[0].1, 1.0, epsilon = 1e-12);
}

#[test]
fn six_round_quarter_protocols_pass_below_three_quarters() {
    for p in six_round_quarter() {
        let out = run_filter_codes(&p, &SIX_ROUND_ORDER, 0.7501, SolverOptions::default()).unwrap();
        assert!(out.passed);
        for (code, v) in &out.values {
            if code.starts_with('G') {
                assert!(*v < 0.75, "{code} = {v}");
            }
        }
    }
}

#[test]
fn registry_resolution_and_catalog() {
    let r = StrategyRegistry::standard();
    assert!(r.resolve(&["F1", "F2"], 1).is_ok());
    assert!(r.resolve(&["G1"], 1).is_err());
    assert!(r.resolve(&["F1"], 2).is_err());
    assert!(r.resolve(&["SDPA0"], 2).is_ok());
    assert!(r.resolve(&["nope"], 1).is_err());
    let cat = r.catalog();
    for code in FOUR_ROUND_ORDER.iter().chain(SIX_ROUND_ORDER.iter()) {
        assert!(cat.iter().any(|row| row.code == *code), "{code} missing");
    }
    let f2 = cat.iter().find(|row| row.code == "F2").unwrap();
    assert_eq!(f2.dependence, Dependence::AlphaOnly);
    assert_eq!(f2.party, Party::Bob);
}

struct Constant;

impl CheatStrategy for Constant {
    fn code(&self) -> &str {
        "HALF"
    }
    fn party(&self) -> Party {
        Party::Alice
    }
    fn outcome(&self) -> u8 {
        0
    }
    fn rounds(&self) -> Option<usize> {
        None
    }
    fn dependence(&self) -> Dependence {
        Dependence::Both
    }
    fn formula(&self) -> &str {
        "1/2"
    }
    fn evaluate(&self, _: &ProtocolView<'_>, _: &mut dyn CheatOracle) -> Result<f64> {
        Ok(0.5)
    }
}

#[test]
fn custom_strategies_plug_in() {
    let mut r = StrategyRegistry::standard();
    r.register(Arc::new(Constant));
    let stages = r.resolve(&["HALF", "F2"], 1).unwrap();
    let p = ProtocolParams::embedded_example();
    let out = run_filter(&p.view(), &stages, DEFAULT_THRESHOLD, &mut NoOracle).unwrap();
    assert_eq!(out.values[0], ("HALF".to_string(), 0.5));
    assert_eq!(out.rejected_at.as_deref(), Some("F2"));
    let sdp = r.resolve(&["SDPA0"], 1).unwrap();
    assert!(run_filter(&p.view(), &sdp, DEFAULT_THRESHOLD, &mut NoOracle).is_err());
}

fn index(party: Party, c: u8) -> usize {
    match party {
        Party::Alice => c as usize,
        Party::Bob => 2 + c as usize,
    }
}

fn check_lower_bounds(p: &ProtocolParams, order: &[&str]) {
    let (_, certs) = solve_bias(p, SolverOptions::default()).unwrap();
    let r = StrategyRegistry::standard();
    let view = p.view();
    let mut oracle = SolverOracle::new(SolverOptions::default());
    for s in r.resolve(order, p.spec.n).unwrap() {
        if !s.applicable(&view) {
            continue;
        }
        let v = s.evaluate(&view, &mut oracle).unwrap();
        let up = certs[index(s.party(), s.outcome())].upper;
        assert!(v <= up + 1e-6, "{} = {v} above P* upper {up} on {p:?}", s.code());
    }
}

#[test]
fn filter_values_lower_bound_optimum() {
    let mut rng = StdRng::seed_from_u64(21);
    for _ in 0..15 {
        check_lower_bounds(&random_protocol(&mut rng, &[3], &[3]), &FOUR_ROUND_ORDER);
        check_lower_bounds(&random_protocol(&mut rng, &[2], &[3]), &FOUR_ROUND_ORDER);
        check_lower_bounds(&random_protocol(&mut rng, &[2, 2], &[2, 2]), &SIX_ROUND_ORDER);
    }
    let e = ProtocolParams::new(RoundSpec::four(2, 2), ProbVec::unit(2, 0), ProbVec::unit(2, 1), ProbVec::uniform(2), ProbVec::uniform(2)).unwrap();
    check_lower_bounds(&e, &FOUR_ROUND_ORDER);
}
