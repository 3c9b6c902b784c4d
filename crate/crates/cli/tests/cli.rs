use std::path::PathBuf;
use std::process::{Command, Output};

use coinflip_core::protocol::ProtocolParams;
use coinflip_core::search::parse_stage_counts;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coinflip")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("coinflip-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn embedded_file() -> PathBuf {
    let path = scratch("embedded.json");
    std::fs::write(&path, ProtocolParams::embedded_example().to_json()).unwrap();
    path
}

#[test]
fn solve_prints_probabilities_and_bias() {
    let p = embedded_file();
    let o = bin(&["solve", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for tag in ["PA0 0.75", "PA1 0.75", "PB0 0.75", "PB1 0.75", "bias 0.25"] {
        assert!(out.contains(tag), "{tag} missing from {out}");
    }
}

#[test]
fn filter_exit_codes() {
    let p = embedded_file();
    let o = bin(&["filter", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("rejected at F2"));
    let o = bin(&["filter", p.to_str().unwrap(), "--order", "F1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("passed all stages"));
    let o = bin(&["filter", p.to_str().unwrap(), "--order", "G1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn search_writes_report() {
    let out = scratch("d3n5.csv");
    let o = bin(&["search", "--rounds", "4", "--d-a", "3", "--d-b", "3", "--nu", "1/5", "--shards", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let counts: Vec<u128> = parse_stage_counts(&text).unwrap().into_iter().map(|(_, c)| c).collect();
    assert_eq!(&counts[..9], &[194_481, 4356, 1254, 665, 49, 29, 28, 28, 0]);
}

#[test]
fn search_with_survivors_exits_two() {
    let out = scratch("loose.csv");
    let o = bin(&[
        "search", "--rounds", "4", "--d-a", "2", "--d-b", "3", "--nu", "1/4", "--threshold", "0.95", "--max-survivors", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("alpha0,alpha1,beta0,beta1,PA0,PA1,PB0,PB1,bias"));
    assert!(text.contains("survivors,58"));
}

#[test]
fn offset_and_six_round_search() {
    let out = scratch("offset.csv");
    let o = bin(&["search", "--rounds", "6", "--d-a", "2", "--d-b", "2", "--nu", "1/3", "--offset-seed", "5", "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 2)));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("seed,5"));
    let o = bin(&["search", "--rounds", "5", "--d-a", "2", "--d-b", "2", "--nu", "1/3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    let o = bin(&["search", "--rounds", "4", "--d-a", "2", "--d-b", "2", "--nu", "2/3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zoom_around_embedded_protocol() {
    let p = embedded_file();
    let out = scratch("zoom.csv");
    let o = bin(&["zoom", "--center", p.to_str().unwrap(), "--radius", "2nu", "--step", "1/100", "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    let counts = parse_stage_counts(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(counts[0].0, "Protocols");
    let o = bin(&["zoom", "--center", p.to_str().unwrap(), "--radius", "0.015", "--step", "1/100", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn canonical_is_idempotent() {
    let p = embedded_file();
    let o = bin(&["canonical", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let once = stdout(&o);
    let again_path = scratch("canonical.json");
    std::fs::write(&again_path, &once).unwrap();
    let again = stdout(&bin(&["canonical", again_path.to_str().unwrap()]));
    assert_eq!(once, again);
    assert!(ProtocolParams::from_json(&once).is_ok());
}

#[test]
fn bounds() {
    let o = bin(&["bound", "--qubit", "1,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0.7487"));
    let o = bin(&["bound", "--mesh", "5", "2000"]);
    let out = stdout(&o);
    assert!(out.contains("0.100000000000") && out.contains("10920"), "{out}");
    assert_eq!(bin(&["bound"]).status.code(), Some(1));
    assert_eq!(bin(&["bound", "--qubit", "0,0"]).status.code(), Some(1));
}

#[test]
fn bad_inputs_fail() {
    assert_eq!(bin(&["solve", "/nonexistent/protocol.json"]).status.code(), Some(1));
    let bad = scratch("bad.json");
    std::fs::write(&bad, r#"{"rounds":4,"a_dims":[2],"b_dims":[2],"alpha0":["1/2","1/3"],"alpha1":["0","1"],"beta0":["1","0"],"beta1":["0","1"]}"#)
        .unwrap();
    let o = bin(&["solve", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid"));
}
