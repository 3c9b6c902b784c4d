use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use coinflip_core::filter::{default_order, run_filter_codes, DEFAULT_THRESHOLD};
use coinflip_core::probcore::{parse_rational, Rational};
use coinflip_core::protocol::{mesh_gap_bound, qubit_lower_bound, ProtocolParams};
use coinflip_core::reduce::{solve_bias, SolverOptions};
use coinflip_core::search::{run_search, FunnelReport, SearchConfig};
use coinflip_core::symmetry::{canonicalize, SideMoves};
use num_traits::{One, ToPrimitive};

/// Analysis and exhaustive search of bit-commitment coin-flipping protocols.
///
/// Exit status: 0 when the command completes, 2 when protocols survive the
/// filter, 1 on error.
#[derive(Parser)]
#[command(name = "coinflip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal cheating probabilities and bias of one protocol.
    Solve {
        protocol: PathBuf,
        /// Solver stopping gap.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Run the staged filter on one protocol.
    Filter {
        protocol: PathBuf,
        /// Comma separated stage codes; defaults to the standard order.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Sweep a mesh of protocols and write a funnel report.
    Search(SearchArgs),
    /// Search a small ball around a protocol at a finer step.
    Zoom(ZoomArgs),
    /// Canonical representative of a protocol's symmetry class.
    Canonical { protocol: PathBuf },
    /// Analytic bounds.
    Bound {
        /// Mesh approximation bound for commitment dimension D and mesh size N.
        #[arg(long, num_args = 2, value_names = ["D", "N"], conflicts_with = "qubit")]
        mesh: Option<Vec<u64>>,
        /// Four-round qubit bound; flags say which of Alice, Bob send qubits (e.g. 1,0).
        #[arg(long, value_name = "A,B", value_parser = parse_flags)]
        qubit: Option<(bool, bool)>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Comma separated stage codes; defaults to the standard order.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<String>>,
    #[arg(long, default_value_t = 64)]
    shards: usize,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    max_survivors: usize,
    /// Skip certifying survivors with the solver.
    #[arg(long)]
    no_certify: bool,
    /// Resume file for completed shards.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_parser = ["4", "6"])]
    rounds: String,
    #[arg(long)]
    d_a: usize,
    #[arg(long)]
    d_b: usize,
    /// Mesh fineness as 1/N.
    #[arg(long, value_parser = parse_nu)]
    nu: u32,
    /// Shift the mesh by a random offset drawn from this seed.
    #[arg(long)]
    offset_seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ZoomArgs {
    #[arg(long)]
    center: PathBuf,
    /// Ball radius, either a multiple of the step such as `2nu` or a number.
    #[arg(long)]
    radius: String,
    /// Grid step, e.g. 1/10000000000.
    #[arg(long)]
    step: String,
    #[arg(long, default_value_t = 0.75)]
    threshold: f64,
    #[command(flatten)]
    run: RunArgs,
}

fn parse_nu(s: &str) -> std::result::Result<u32, String> {
    let r = parse_rational(s).map_err(|e| e.to_string())?;
    if !r.numer().is_one() {
        return Err(format!("expected 1/N, got {s}"));
    }
    r.denom().to_u32().filter(|&n| n > 0).ok_or_else(|| format!("mesh size out of range in {s}"))
}

fn parse_flags(s: &str) -> std::result::Result<(bool, bool), String> {
    let flag = |t: &str| match t.trim() {
        "1" | "true" | "qubit" => Ok(true),
        "0" | "false" | "classical" => Ok(false),
        other => Err(format!("expected 0/1, got {other:?}")),
    };
    let (a, b) = s.split_once(',').ok_or("expected two flags such as 1,0")?;
    Ok((flag(a)?, flag(b)?))
}

fn parse_radius(s: &str, step: &Rational) -> Result<Rational> {
    let t = s.trim();
    match t.strip_suffix("nu") {
        Some(k) => {
            let k = if k.is_empty() { Rational::one() } else { parse_rational(k)? };
            Ok(k * step)
        }
        None => Ok(parse_rational(t)?),
    }
}

fn load(path: &Path) -> Result<ProtocolParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ProtocolParams::from_json(&text).with_context(|| format!("in {}", path.display()))?)
}

fn describe_moves(who: &str, m: &SideMoves) -> String {
    format!("{who}: swap {}, permutations {:?}", m.swap, m.perms)
}

fn run(cfg: SearchConfig, run: RunArgs) -> Result<ExitCode> {
    let cfg = SearchConfig {
        order: run.order.unwrap_or(cfg.order),
        shards: run.shards,
        threads: run.threads,
        max_survivors: run.max_survivors,
        certify: !run.no_certify,
        checkpoint: run.checkpoint,
        ..cfg
    };
    let report = run_search(&cfg)?;
    report.write(&run.out)?;
    print_report(&report);
    Ok(if report.survivor_count > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn print_report(r: &FunnelReport) {
    for (stage, count) in &r.stages {
        println!("{stage:>10} {count}");
    }
    println!("survivors {} (undecided {})", r.survivor_count, r.undecided);
    if r.truncated() {
        println!("survivor list truncated to {}", r.survivors.len());
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { protocol, tol } => {
            let p = load(&protocol)?;
            let opts = SolverOptions { tol, ..SolverOptions::default() };
            let (bias, certs) = solve_bias(&p, opts)?;
            for c in &certs {
                println!("P{}{} {:.12} (upper {:.12}, gap {:.1e})", c.party, c.outcome, c.value, c.upper, c.gap);
            }
            println!("bias {bias:.12}");
        }
        Command::Filter { protocol, order, threshold } => {
            let p = load(&protocol)?;
            let order = order.unwrap_or_else(|| default_order(p.spec.n).iter().map(|s| s.to_string()).collect());
            let out = run_filter_codes(&p, &order, threshold, SolverOptions::default())?;
            for (code, v) in &out.values {
                println!("{code:>6} {v:.12}");
            }
            match &out.rejected_at {
                Some(code) => println!("rejected at {code}"),
                None => {
                    println!("passed all stages");
                    return Ok(ExitCode::from(2));
                }
            }
        }
        Command::Search(a) => {
            let n = if a.rounds == "4" { 1 } else { 2 };
            let base = match a.offset_seed {
                Some(seed) => SearchConfig::offset(n, a.d_a, a.d_b, a.nu, seed),
                None => SearchConfig::mesh(n, a.d_a, a.d_b, a.nu),
            };
            return run(SearchConfig { threshold: a.threshold, ..base }, a.run);
        }
        Command::Zoom(a) => {
            let center = load(&a.center)?;
            let step = parse_rational(&a.step)?;
            let radius = parse_radius(&a.radius, &step)?;
            let cfg = SearchConfig { threshold: a.threshold, ..SearchConfig::zoom(center, radius, step) };
            return run(cfg, a.run);
        }
        Command::Canonical { protocol } => {
            let c = canonicalize(&load(&protocol)?);
            println!("{}", c.params.to_json());
            eprintln!("{}", describe_moves("alpha", &c.applied.alpha));
            eprintln!("{}", describe_moves("beta", &c.applied.beta));
        }
        Command::Bound { mesh, qubit } => match (mesh, qubit) {
            (Some(m), None) => {
                let r = mesh_gap_bound(m[0], m[1])?;
                println!("mesh gap 2*sqrt(D/N) = {:.12}", r.mesh_gap);
                println!("N per unit of D: {}", r.per_dimension);
                println!("N needed for D = {}: {}", m[0], r.min_n_for_claim);
                println!("{}", r.context);
            }
            (None, Some((a, b))) => {
                println!("max(PA0, PB0) >= {:.6}", qubit_lower_bound(a, b)?);
            }
            _ => bail!("give exactly one of --mesh D N or --qubit A,B"),
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // Exit status 2 is reserved for survivors, so usage errors map to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
