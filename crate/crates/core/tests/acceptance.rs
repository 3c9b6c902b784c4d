//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any fail.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use coinflip_core::filter::{run_filter_codes, CheatStrategy, SolverOracle, StrategyRegistry, FOUR_ROUND_ORDER, SIX_ROUND_ORDER};
use coinflip_core::probcore::{eta_tau, fvdg_check, parse_rational, tdist};
use coinflip_core::protocol::{mesh_gap_bound, qubit_lower_bound, ProtocolParams};
use coinflip_core::reduce::{brute_force_value, solve_bias, solve_cheating, Party, SolverOptions};
use coinflip_core::search::{funnel_factored_count, run_search, FunnelReport, SearchConfig};
use coinflip_core::symmetry::{apply_moves, canonicalize, equivalent, Moves, SideMoves};
use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const VALUE_TOL: f64 = 1e-4;
const KITAEV_TOL: f64 = 1e-4;
const FILTER_SLACK: f64 = 1e-6;
const SANDWICH_TOL: f64 = 1e-12;
const LEMMA_TOL: f64 = 1e-12;
const INVARIANCE_TOL: f64 = 1e-5;
const QUBIT_TOL: f64 = 1e-3;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> std::result::Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

fn stage_counts(r: &FunnelReport, from: usize, len: usize) -> Vec<u128> {
    r.stages.iter().skip(from).take(len).map(|&(_, c)| c).collect()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let (bias, certs) = solve_bias(&ProtocolParams::embedded_example(), SolverOptions::default()).map_err(|e| e.to_string())?;
    for c in &certs {
        ensure((c.value - 0.75).abs() <= VALUE_TOL, format!("{:?}{} = {}", c.party, c.outcome, c.value))?;
    }
    ensure((bias - 0.25).abs() <= VALUE_TOL, format!("bias {bias}"))?;
    let t = within(start, Duration::from_secs(5))?;
    Ok(format!("four cheating probabilities 0.75, bias {bias:.6} in {t:.2?}"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let cfg = SearchConfig { threads: Some(1), certify: false, ..SearchConfig::mesh(1, 3, 3, 5) };
    let r = run_search(&cfg).map_err(|e| e.to_string())?;
    let got = stage_counts(&r, 1, 8);
    let want = vec![4356, 1254, 665, 49, 29, 28, 28, 0];
    ensure(got == want, format!("counts {got:?}, expected {want:?}"))?;
    let t = within(start, Duration::from_secs(120))?;
    Ok(format!("{got:?} single-threaded in {t:.2?}"))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let sym = funnel_factored_count::<&str>(2, 500, &[]).map_err(|e| e.to_string())?;
    let f1 = funnel_factored_count(2, 500, &["F1"]).map_err(|e| e.to_string())?;
    let f2 = funnel_factored_count(2, 500, &["F1", "F2"]).map_err(|e| e.to_string())?;
    ensure(sym == 63_001u128 * 63_001 && sym == 3_969_126_001, format!("Symmetry {sym}"))?;
    ensure(f1 == 96_706_535, format!("F1 {f1}"))?;
    ensure(f2 == 72_336_875, format!("F2 {f2}"))?;
    let cfg = SearchConfig { order: vec!["F1".into(), "F2".into(), "F3".into()], certify: false, ..SearchConfig::mesh(1, 2, 2, 500) };
    let r = run_search(&cfg).map_err(|e| e.to_string())?;
    ensure(r.count("F2") == Some(f2), format!("full pass F2 {:?}", r.count("F2")))?;
    let f3 = r.count("F3").unwrap_or(0);
    ensure(f3 == 5, format!("F3 {f3}"))?;
    let t = within(start, Duration::from_secs(30 * 60))?;
    Ok(format!("Symmetry {sym}, F1 {f1}, F2 {f2}, F3 {f3} in {t:.2?}"))
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let cfg = SearchConfig { certify: false, ..SearchConfig::mesh(2, 2, 2, 3) };
    let r = run_search(&cfg).map_err(|e| e.to_string())?;
    let got = stage_counts(&r, 1, 9);
    let want = vec![6400, 3200, 2320, 1725, 714, 210, 210, 30, 0];
    ensure(got == want, format!("counts {got:?}, expected {want:?}"))?;
    ensure(r.survivor_count == 0, format!("{} survivors", r.survivor_count))?;
    Ok(format!("{got:?}, exact including Symmetry, in {:.2?}", start.elapsed()))
}

fn criterion_5() -> Check {
    let mut worst = 0.0f64;
    let mut worst_g = 0.0f64;
    for (i, p) in six_round_quarter().iter().enumerate() {
        let start = Instant::now();
        let (bias, _) = solve_bias(p, SolverOptions::default()).map_err(|e| e.to_string())?;
        let pmax = bias + 0.5;
        ensure((pmax - 0.75).abs() <= VALUE_TOL, format!("protocol {i}: max cheating {pmax}"))?;
        let out = run_filter_codes(p, &SIX_ROUND_ORDER, 0.7501, SolverOptions::default()).map_err(|e| e.to_string())?;
        for (code, v) in out.values.iter().filter(|(c, _)| c.starts_with('G')) {
            ensure(*v < 0.75, format!("protocol {i}: {code} = {v}"))?;
            worst_g = worst_g.max(*v);
        }
        within(start, Duration::from_secs(60)).map_err(|e| format!("protocol {i}: {e}"))?;
        worst = worst.max((pmax - 0.75).abs());
    }
    Ok(format!("4 protocols, |max P* - 0.75| <= {worst:.2e}, largest G value {worst_g:.6}"))
}

fn criterion_6() -> Check {
    let want = [((true, true), 0.7487), ((false, true), 0.7140), ((true, false), 0.7040)];
    for ((a, b), w) in want {
        let v = qubit_lower_bound(a, b).map_err(|e| e.to_string())?;
        ensure((v - w).abs() <= QUBIT_TOL, format!("qubit({a},{b}) = {v}, expected {w}"))?;
    }
    for d in 1..=20u64 {
        let n = mesh_gap_bound(d, 1).map_err(|e| e.to_string())?.min_n_for_claim;
        ensure(n == 2184 * d, format!("D={d}: N >= {n}"))?;
        let n = mesh_gap_bound(d * d, 1).map_err(|e| e.to_string())?.min_n_for_claim;
        ensure(n == 2184 * d * d, format!("D={}: N >= {n}", d * d))?;
    }
    Ok("qubit bounds 0.7487 / 0.7140 / 0.7040, mesh thresholds 2184·d and 2184·d²".into())
}

fn cert_index(party: Party, c: u8) -> usize {
    match party {
        Party::Alice => c as usize,
        Party::Bob => 2 + c as usize,
    }
}

fn random_moves(rng: &mut StdRng, p: &ProtocolParams) -> Moves {
    let side = |rng: &mut StdRng, dims: &[usize]| SideMoves {
        swap: rng.gen_bool(0.5),
        perms: dims
            .iter()
            .map(|&d| {
                let mut v: Vec<usize> = (0..d).collect();
                v.shuffle(rng);
                v
            })
            .collect(),
    };
    Moves { alpha: side(rng, p.spec.a_dims.dims()), beta: side(rng, p.spec.b_dims.dims()) }
}

fn criterion_7() -> Check {
    let opts = SolverOptions::default();
    let registry = StrategyRegistry::standard();
    let mut rng = StdRng::seed_from_u64(0xacce);

    // Kitaev product and filter lower bounds on the same random protocols.
    let mut min_product = f64::INFINITY;
    let mut filter_checks = 0usize;
    for i in 0..200 {
        let (p, order): (ProtocolParams, &[&str]) = match i % 4 {
            0 | 1 => (random_protocol(&mut rng, &[3], &[3]), &FOUR_ROUND_ORDER),
            2 => (random_protocol(&mut rng, &[2], &[3]), &FOUR_ROUND_ORDER),
            _ => (random_protocol(&mut rng, &[2, 2], &[2, 2]), &SIX_ROUND_ORDER),
        };
        let (_, certs) = solve_bias(&p, opts).map_err(|e| e.to_string())?;
        for c in 0..2 {
            let prod = certs[c].upper * certs[2 + c].upper;
            min_product = min_product.min(prod);
            ensure(prod >= 0.5 - KITAEV_TOL, format!("Kitaev product {prod} on {p:?}"))?;
        }
        let view = p.view();
        let mut oracle = SolverOracle::new(opts);
        let stages: Vec<std::sync::Arc<dyn CheatStrategy>> = registry.resolve(order, p.spec.n).map_err(|e| e.to_string())?;
        for s in stages.iter().filter(|s| s.applicable(&view)) {
            let v = s.evaluate(&view, &mut oracle).map_err(|e| e.to_string())?;
            let up = certs[cert_index(s.party(), s.outcome())].upper;
            ensure(v <= up + FILTER_SLACK, format!("{} = {v} above upper {up} on {p:?}", s.code()))?;
            filter_checks += 1;
        }
    }

    // Sandwich and the η + τ = 1 + Δ identity.
    for _ in 0..10_000 {
        let len = rng.gen_range(1..=8);
        let (p, q) = (random_dist(&mut rng, len, 1000), random_dist(&mut rng, len, 1000));
        let (lower, delta, upper) = fvdg_check(&p, &q).map_err(|e| e.to_string())?;
        ensure(lower <= delta + SANDWICH_TOL && delta <= upper + SANDWICH_TOL, "sandwich")?;
        let (eta, tau) = eta_tau(p.as_f64(), q.as_f64());
        let d = tdist(p.as_f64(), q.as_f64());
        ensure((eta + tau - 1.0 - d).abs() <= LEMMA_TOL, format!("η+τ = {} vs 1+Δ = {}", eta + tau, 1.0 + d))?;
    }

    // Grid search against the solver on small instances.
    for i in 0..50 {
        let p = random_protocol(&mut rng, &[2], &[2]);
        let (party, step) = if i % 2 == 0 { (Party::Bob, 0.01) } else { (Party::Alice, 0.1) };
        for c in 0..2 {
            let grid = brute_force_value(&p, party, c, step).map_err(|e| e.to_string())?;
            let cert = solve_cheating(&p, party, c, opts).map_err(|e| e.to_string())?;
            ensure(
                grid <= cert.upper + 1e-9 && cert.value - grid <= 2.0 * step,
                format!("{party:?}{c}: grid {grid}, solver {} (upper {})", cert.value, cert.upper),
            )?;
        }
    }

    // Canonical form.
    for i in 0..1000 {
        let p = if i % 2 == 0 { random_protocol(&mut rng, &[4], &[3]) } else { random_protocol(&mut rng, &[2, 3], &[3, 2]) };
        let once = canonicalize(&p).params;
        ensure(canonicalize(&once).params == once, format!("not idempotent on {p:?}"))?;
    }
    let mut max_shift = 0.0f64;
    for i in 0..20 {
        let p = if i % 2 == 0 { random_protocol(&mut rng, &[3], &[3]) } else { random_protocol(&mut rng, &[2, 2], &[2, 2]) };
        let moved = apply_moves(&p, &random_moves(&mut rng, &p));
        ensure(equivalent(&p, &moved).map_err(|e| e.to_string())?, "moved protocol not equivalent")?;
        let (b0, _) = solve_bias(&p, opts).map_err(|e| e.to_string())?;
        let (b1, _) = solve_bias(&moved, opts).map_err(|e| e.to_string())?;
        max_shift = max_shift.max((b0 - b1).abs());
        ensure((b0 - b1).abs() <= INVARIANCE_TOL, format!("bias {b0} vs {b1}"))?;
    }
    Ok(format!(
        "min Kitaev product {min_product:.6}, {filter_checks} filter bounds, 10^4 sandwich pairs, 100 grid checks, max bias shift {max_shift:.1e}"
    ))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let step = parse_rational("1/10000000000").map_err(|e| e.to_string())?;
    let radius = &step * parse_rational("2").map_err(|e| e.to_string())?;
    let cfg = SearchConfig { certify: false, ..SearchConfig::zoom(four_round_zoom_center(), radius, step) };
    let r = run_search(&cfg).map_err(|e| e.to_string())?;
    ensure(r.survivor_count == 0, format!("{} survivors ({} undecided)", r.survivor_count, r.undecided))?;
    let t = within(start, Duration::from_secs(600))?;
    let protocols = r.count("Protocols").unwrap_or(0);
    Ok(format!("{protocols} protocols, 0 survivors in {t:.2?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("1 embedded protocol values", criterion_1),
        ("2 four-round funnel d=3 N=5", criterion_2),
        ("3 factored counts d=2 N=500", criterion_3),
        ("4 six-round funnel d=2 N=3", criterion_4),
        ("5 six-round bias-1/4 protocols", criterion_5),
        ("6 analytic bounds", criterion_6),
        ("7 property suite", criterion_7),
        ("8 zoom regression", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
