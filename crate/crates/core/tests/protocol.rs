use coinflip_core::probcore::ProbVec;
use coinflip_core::protocol::*;
use coinflip_core::Error;

#[test]
fn embedded_protocol_is_valid() {
    let p = ProtocolParams::embedded_example();
    validate(&p).unwrap();
    assert_eq!(p.spec.rounds(), 4);
    assert_eq!(p.alpha[0].to_strings(), vec!["1/2", "0", "1/2"]);
}

#[test]
fn rejects_bad_sums_and_lengths() {
    let file = |alpha0: &[&str], beta0: &[&str]| ProtocolFile {
        rounds: 4,
        a_dims: vec![3],
        b_dims: vec![2],
        alpha0: alpha0.iter().map(|s| s.to_string()).collect(),
        alpha1: vec!["0".into(), "1/2".into(), "1/2".into()],
        beta0: beta0.iter().map(|s| s.to_string()).collect(),
        beta1: vec!["0".into(), "1".into()],
    };
    assert!(file(&["1/2", "0", "1/2"], &["1", "0"]).into_params().is_ok());
    match file(&["0.4", "0", "0.5"], &["1", "0"]).into_params() {
        Err(Error::Invalid(errs)) => assert_eq!(errs.len(), 1),
        other => panic!("expected invalid, got {other:?}"),
    }
    match file(&["0.4", "0", "0.5"], &["1", "0", "0"]).into_params() {
        Err(Error::Invalid(errs)) => assert_eq!(errs.len(), 2, "{errs:?}"),
        other => panic!("expected invalid, got {other:?}"),
    }
}

#[test]
fn json_round_trip() {
    let p = ProtocolParams::embedded_example();
    let back = ProtocolParams::from_json(&p.to_json()).unwrap();
    assert_eq!(p, back);
    assert!(ProtocolParams::from_json("{").is_err());
}

#[test]
fn round_specs() {
    assert_eq!(RoundSpec::six(2, 3).rounds(), 6);
    assert!(RoundSpec::new(vec![2], vec![2, 2]).is_err());
    assert!(RoundSpec::new(vec![0], vec![2]).is_err());
    let wrong = ProtocolParams::new(
        RoundSpec::four(2, 2),
        ProbVec::uniform(2),
        ProbVec::uniform(3),
        ProbVec::uniform(2),
        ProbVec::uniform(2),
    );
    assert!(wrong.is_err());
}

#[test]
fn mesh_gap_examples() {
    let r = mesh_gap_bound(5, 2000).unwrap();
    assert!((r.mesh_gap - 0.1).abs() < 1e-15);
    for d in 1..=9u64 {
        assert_eq!(mesh_gap_bound(d, 1).unwrap().min_n_for_claim, 2184 * d);
        assert_eq!(mesh_gap_bound(d * d, 1).unwrap().min_n_for_claim, 2184 * d * d);
    }
    assert!(mesh_gap_bound(0, 10).is_err());
}

#[test]
fn qubit_bounds() {
    assert!((qubit_lower_bound(true, true).unwrap() - 0.7487).abs() < 1e-3);
    assert!((qubit_lower_bound(false, true).unwrap() - 0.7140).abs() < 1e-3);
    assert!((qubit_lower_bound(true, false).unwrap() - 0.7040).abs() < 1e-3);
    assert!(qubit_lower_bound(false, false).is_err());
}
