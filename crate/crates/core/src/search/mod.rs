//! Staged search over meshes of protocols.
//!
//! Pair-only stages at the front of the filter order are evaluated once per
//! `(α0, α1)` or `(β0, β1)` pair and combined by counting; later stages run
//! per protocol. Work is split into shards over the α-pair range.

mod gen;
mod report;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gen::{
    compositions, draw_offset, gen_mesh, gen_offset_mesh, gen_zoom_mesh, mesh_size, mesh_vec, zoom_lists,
    zoom_vectors,
};
pub use report::{parse_stage_counts, SurvivorRecord};

use crate::error::{Error, Result};
use crate::filter::{
    default_order, run_filter, CheatStrategy, Dependence, FilterOutcome, SolverOracle, StrategyRegistry,
    DEFAULT_THRESHOLD,
};
use crate::probcore::{format_rational, ProbVec, Rational};
use crate::protocol::{ProtocolParams, ProtocolView, RoundSpec};
use crate::reduce::{solve_bias, SolverOptions};
use crate::symmetry::is_canonical_side;

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    /// The `1/N` mesh modulo local permutations and swaps.
    Mesh,
    /// The offset mesh; only the swap symmetry is used.
    Offset { delta: Rational, seed: Option<u64> },
    /// Every candidate in a ball around `center`, no symmetry reduction.
    Zoom { center: ProtocolParams, radius: Rational, step: Rational },
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub a_dims: Vec<usize>,
    pub b_dims: Vec<usize>,
    pub mesh_n: u32,
    pub threshold: f64,
    pub order: Vec<String>,
    pub mode: Mode,
    pub solver: SolverOptions,
    pub shards: usize,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Survivors kept in the report; the count is always exact.
    pub max_survivors: usize,
    /// Solve all four cheating problems for each kept survivor.
    pub certify: bool,
    pub checkpoint: Option<PathBuf>,
}

impl SearchConfig {
    /// Mesh search with `n` commitment exchanges and per-round sizes `d_a`, `d_b`.
    pub fn mesh(n: usize, d_a: usize, d_b: usize, mesh_n: u32) -> Self {
        SearchConfig {
            a_dims: vec![d_a; n],
            b_dims: vec![d_b; n],
            mesh_n,
            threshold: DEFAULT_THRESHOLD,
            order: default_order(n).iter().map(|s| s.to_string()).collect(),
            mode: Mode::Mesh,
            solver: SolverOptions::default(),
            shards: 64,
            threads: None,
            max_survivors: 10_000,
            certify: true,
            checkpoint: None,
        }
    }

    /// Offset-mesh search with `δ` drawn from `seed`.
    pub fn offset(n: usize, d_a: usize, d_b: usize, mesh_n: u32, seed: u64) -> Self {
        let delta = draw_offset(mesh_n, seed);
        SearchConfig { mode: Mode::Offset { delta, seed: Some(seed) }, ..Self::mesh(n, d_a, d_b, mesh_n) }
    }

    /// Zoom search around `center` at threshold 3/4.
    pub fn zoom(center: ProtocolParams, radius: Rational, step: Rational) -> Self {
        let n = center.spec.n;
        SearchConfig {
            a_dims: center.spec.a_dims.dims().to_vec(),
            b_dims: center.spec.b_dims.dims().to_vec(),
            threshold: 0.75,
            mode: Mode::Zoom { center, radius, step },
            ..Self::mesh(n, 1, 1, 1)
        }
    }

    pub fn validate(&self) -> Result<RoundSpec> {
        let spec = RoundSpec::new(self.a_dims.clone(), self.b_dims.clone())?;
        if self.mesh_n == 0 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Domain("threshold must lie in (0, 1)".into()));
        }
        if self.shards == 0 {
            return Err(Error::Domain("shard count must be positive".into()));
        }
        if let Mode::Zoom { center, .. } = &self.mode {
            crate::protocol::validate(center)?;
            if center.spec != spec {
                return Err(Error::Shape("zoom center does not match the configured dims".into()));
            }
        }
        Ok(spec)
    }

    fn fingerprint(&self) -> String {
        format!(
            "{:?}|{:?}|{}|{}|{:?}|{:?}|{:?}|{}",
            self.a_dims, self.b_dims, self.mesh_n, self.threshold, self.order, self.mode, self.solver, self.shards
        )
    }
}

/// Per-stage counts and the surviving protocols of one search.
#[derive(Clone, Debug)]
pub struct FunnelReport {
    /// `(name, count)` from `Protocols` and `Symmetry` through every stage.
    pub stages: Vec<(String, u128)>,
    pub survivor_count: u64,
    pub undecided: u64,
    pub survivors: Vec<SurvivorRecord>,
    /// Extra `(key, value)` facts such as the offset and its seed.
    pub meta: Vec<(String, String)>,
}

impl FunnelReport {
    pub fn count(&self, stage: &str) -> Option<u128> {
        self.stages.iter().find(|(s, _)| s == stage).map(|&(_, c)| c)
    }

    pub fn truncated(&self) -> bool {
        (self.survivors.len() as u64) < self.survivor_count
    }
}

/// The two distributions of one party: candidate lists and admitted pairs.
struct Side {
    first: Vec<ProbVec>,
    second: Vec<ProbVec>,
    pairs: Vec<(u32, u32)>,
    /// Size of the candidate product before symmetry reduction.
    raw: u128,
}

impl Side {
    fn get(&self, i: usize) -> [&[f64]; 2] {
        let (a, b) = self.pairs[i];
        [self.first[a as usize].as_f64(), self.second[b as usize].as_f64()]
    }

    fn params(&self, i: usize) -> [ProbVec; 2] {
        let (a, b) = self.pairs[i];
        [self.first[a as usize].clone(), self.second[b as usize].clone()]
    }
}

fn mesh_side(dims: &[usize], n_mesh: u32) -> Side {
    let total: usize = dims.iter().product();
    let nums = compositions(n_mesh, total);
    let mut pairs = Vec::new();
    for (i, v0) in nums.iter().enumerate() {
        for (j, v1) in nums.iter().enumerate() {
            if is_canonical_side(v0, v1, dims) {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    let vecs: Vec<ProbVec> = nums.iter().map(|v| mesh_vec(v, n_mesh)).collect();
    let raw = (vecs.len() as u128).pow(2);
    Side { first: vecs.clone(), second: vecs, pairs, raw }
}

fn offset_side(total: usize, n_mesh: u32, delta: &Rational) -> Result<Side> {
    let vecs = gen_offset_mesh(total, n_mesh, delta)?;
    let mut pairs = Vec::new();
    for (i, v0) in vecs.iter().enumerate() {
        for (j, v1) in vecs.iter().enumerate() {
            if v1.max_entry() <= v0.max_entry() {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    let raw = (vecs.len() as u128).pow(2);
    Ok(Side { first: vecs.clone(), second: vecs, pairs, raw })
}

fn product_side(first: Vec<ProbVec>, second: Vec<ProbVec>) -> Side {
    let pairs = (0..first.len() as u32).flat_map(|i| (0..second.len() as u32).map(move |j| (i, j))).collect();
    let raw = first.len() as u128 * second.len() as u128;
    Side { first, second, pairs, raw }
}

fn build_sides(cfg: &SearchConfig) -> Result<(Side, Side)> {
    let (ta, tb) = (cfg.a_dims.iter().product(), cfg.b_dims.iter().product());
    match &cfg.mode {
        Mode::Mesh => Ok((mesh_side(&cfg.a_dims, cfg.mesh_n), mesh_side(&cfg.b_dims, cfg.mesh_n))),
        Mode::Offset { delta, .. } => Ok((offset_side(ta, cfg.mesh_n, delta)?, offset_side(tb, cfg.mesh_n, delta)?)),
        Mode::Zoom { center, radius, step } => {
            let [a0, a1, b0, b1] = zoom_lists(center, radius, step)?;
            Ok((product_side(a0, a1), product_side(b0, b1)))
        }
    }
}

/// Results of one shard, also the unit of checkpointing.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ShardResult {
    shard: usize,
    rejected: Vec<u64>,
    passed: u64,
    undecided: u64,
    /// `(α-pair, β-pair, undecided)` of the first kept survivors.
    hits: Vec<(u32, u32, bool)>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    fingerprint: String,
}

const PASS: usize = usize::MAX;

struct Plan<'a> {
    cfg: &'a SearchConfig,
    alpha: &'a Side,
    beta: &'a Side,
    stages: Vec<Arc<dyn CheatStrategy>>,
    /// Number of leading stages that read only one side.
    prefix: usize,
    alpha_fail: Vec<usize>,
    /// `beta_hist[k]`: β-pairs first failing prefix stage `k`.
    beta_hist: Vec<u64>,
    /// `beta_from[k]`: β-pairs failing at stage `k` or later, or passing.
    beta_from: Vec<u64>,
    beta_pass: Vec<u32>,
}

impl<'a> Plan<'a> {
    fn view(&self, ai: usize, bi: usize) -> ProtocolView<'_> {
        ProtocolView { a_dims: &self.cfg.a_dims, b_dims: &self.cfg.b_dims, alpha: self.alpha.get(ai), beta: self.beta.get(bi) }
    }

    fn new(cfg: &'a SearchConfig, alpha: &'a Side, beta: &'a Side, n: usize) -> Result<Self> {
        let registry = StrategyRegistry::standard();
        let mut stages = registry.resolve(&cfg.order, n)?;
        if alpha.pairs.is_empty() || beta.pairs.is_empty() {
            return Err(Error::Domain("empty candidate set".into()));
        }
        let sample = ProtocolView { a_dims: &cfg.a_dims, b_dims: &cfg.b_dims, alpha: alpha.get(0), beta: beta.get(0) };
        stages.retain(|s| s.applicable(&sample));
        let prefix = stages.iter().take_while(|s| s.dependence() != Dependence::Both).count();
        let first_fail = |dep: Dependence, view: &ProtocolView<'_>| -> Result<usize> {
            for (k, s) in stages[..prefix].iter().enumerate() {
                if s.dependence() == dep && s.evaluate(view, &mut crate::filter::NoOracle)? > cfg.threshold {
                    return Ok(k);
                }
            }
            Ok(PASS)
        };
        let alpha_fail = (0..alpha.pairs.len())
            .into_par_iter()
            .map(|ai| {
                let v = ProtocolView { alpha: alpha.get(ai), ..sample };
                first_fail(Dependence::AlphaOnly, &v)
            })
            .collect::<Result<Vec<_>>>()?;
        let beta_fail = (0..beta.pairs.len())
            .into_par_iter()
            .map(|bi| {
                let v = ProtocolView { beta: beta.get(bi), ..sample };
                first_fail(Dependence::BetaOnly, &v)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut beta_hist = vec![0u64; prefix + 1];
        let mut beta_pass = Vec::new();
        for (bi, &f) in beta_fail.iter().enumerate() {
            if f == PASS {
                beta_hist[prefix] += 1;
                beta_pass.push(bi as u32);
            } else {
                beta_hist[f] += 1;
            }
        }
        let mut beta_from = vec![0u64; prefix + 1];
        let mut acc = 0;
        for k in (0..=prefix).rev() {
            acc += beta_hist[k];
            beta_from[k] = acc;
        }
        Ok(Plan { cfg, alpha, beta, stages, prefix, alpha_fail, beta_hist, beta_from, beta_pass })
    }

    fn run_shard(&self, shard: usize, range: std::ops::Range<usize>) -> ShardResult {
        let mut res =
            ShardResult { shard, rejected: vec![0; self.stages.len()], passed: 0, undecided: 0, hits: Vec::new() };
        for ai in range {
            let fail = self.alpha_fail[ai];
            let upto = fail.min(self.prefix);
            for k in 0..upto {
                res.rejected[k] += self.beta_hist[k];
            }
            if fail != PASS {
                res.rejected[fail] += self.beta_from[fail];
                continue;
            }
            for &bi in &self.beta_pass {
                let view = self.view(ai, bi as usize);
                let mut oracle = SolverOracle::new(self.cfg.solver);
                let mut rejected = None;
                let mut undecided = false;
                for (k, s) in self.stages.iter().enumerate().skip(self.prefix) {
                    match s.evaluate(&view, &mut oracle) {
                        Ok(v) if v > self.cfg.threshold => {
                            rejected = Some(k);
                            break;
                        }
                        Ok(_) => {}
                        Err(_) => {
                            undecided = true;
                            break;
                        }
                    }
                }
                match rejected {
                    Some(k) => res.rejected[k] += 1,
                    None => {
                        res.passed += 1;
                        res.undecided += undecided as u64;
                        if res.hits.len() < self.cfg.max_survivors {
                            res.hits.push((ai as u32, bi, undecided));
                        }
                    }
                }
            }
        }
        res
    }

    fn survivor(&self, spec: &RoundSpec, ai: usize, bi: usize, undecided: bool) -> SurvivorRecord {
        let [a0, a1] = self.alpha.params(ai);
        let [b0, b1] = self.beta.params(bi);
        let params = ProtocolParams { spec: spec.clone(), alpha: [a0, a1], beta: [b0, b1] };
        let outcome: Option<FilterOutcome> =
            run_filter(&params.view(), &self.stages, self.cfg.threshold, &mut SolverOracle::new(self.cfg.solver)).ok();
        let certificates = if self.cfg.certify { solve_bias(&params, self.cfg.solver).ok().map(|(_, c)| c) } else { None };
        SurvivorRecord { params, outcome, certificates, undecided }
    }
}

fn load_checkpoint(path: &PathBuf, fingerprint: &str) -> Result<Vec<ShardResult>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut lines = BufReader::new(file).lines();
    let Some(first) = lines.next() else { return Ok(Vec::new()) };
    let header: CheckpointHeader =
        serde_json::from_str(&first?).map_err(|e| Error::Parse(format!("checkpoint header: {e}")))?;
    if header.fingerprint != fingerprint {
        return Err(Error::Refused("checkpoint belongs to a different search configuration".into()));
    }
    let mut done = Vec::new();
    for line in lines {
        // A torn final line from an interrupted write is ignored.
        if let Ok(r) = serde_json::from_str::<ShardResult>(&line?) {
            done.push(r);
        }
    }
    Ok(done)
}

fn open_checkpoint(path: &PathBuf, fingerprint: &str, fresh: bool) -> Result<File> {
    if fresh {
        let mut f = File::create(path)?;
        let header = serde_json::to_string(&CheckpointHeader { fingerprint: fingerprint.to_string() })
            .map_err(|e| Error::Io(e.to_string()))?;
        writeln!(f, "{header}")?;
        return Ok(f);
    }
    let mut f = OpenOptions::new().append(true).open(path)?;
    // Terminate a possibly torn last line so new records start cleanly.
    writeln!(f)?;
    Ok(f)
}

/// Runs the staged search described by `cfg`.
pub fn run_search(cfg: &SearchConfig) -> Result<FunnelReport> {
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Io(e.to_string()))?
            .install(|| run_search_inner(cfg)),
        None => run_search_inner(cfg),
    }
}

fn run_search_inner(cfg: &SearchConfig) -> Result<FunnelReport> {
    let spec = cfg.validate()?;
    let (alpha, beta) = build_sides(cfg)?;
    let plan = Plan::new(cfg, &alpha, &beta, spec.n)?;
    let total = alpha.pairs.len();
    let shards = cfg.shards.min(total).max(1);
    let range = |s: usize| s * total / shards..(s + 1) * total / shards;

    let fingerprint = cfg.fingerprint();
    let mut done: Vec<Option<ShardResult>> = vec![None; shards];
    let writer = match &cfg.checkpoint {
        Some(path) => {
            let prior = load_checkpoint(path, &fingerprint)?;
            let fresh = prior.is_empty() && !path.exists();
            for r in prior {
                if r.shard < shards && r.rejected.len() == plan.stages.len() {
                    let s = r.shard;
                    done[s] = Some(r);
                }
            }
            Some(Mutex::new(open_checkpoint(path, &fingerprint, fresh)?))
        }
        None => None,
    };

    let todo: Vec<usize> = (0..shards).filter(|&s| done[s].is_none()).collect();
    let fresh: Vec<ShardResult> = todo
        .par_iter()
        .map(|&s| {
            let r = plan.run_shard(s, range(s));
            if let Some(w) = &writer {
                let line = serde_json::to_string(&r).map_err(|e| Error::Io(format!("shard {s}: {e}")))?;
                let mut f = w.lock().expect("checkpoint lock");
                writeln!(f, "{line}").map_err(|e| Error::Io(format!("shard {s}: {e}")))?;
                f.flush().map_err(|e| Error::Io(format!("shard {s}: {e}")))?;
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    for r in fresh {
        let s = r.shard;
        done[s] = Some(r);
    }

    let mut rejected = vec![0u64; plan.stages.len()];
    let (mut passed, mut undecided) = (0u64, 0u64);
    let mut hits = Vec::new();
    for r in done.into_iter().map(|r| r.expect("every shard finished")) {
        for (acc, x) in rejected.iter_mut().zip(&r.rejected) {
            *acc += x;
        }
        passed += r.passed;
        undecided += r.undecided;
        hits.extend(r.hits);
    }
    hits.sort_unstable();
    hits.truncate(cfg.max_survivors);

    let symmetric = alpha.pairs.len() as u128 * beta.pairs.len() as u128;
    let mut stages = vec![("Protocols".to_string(), alpha.raw * beta.raw), ("Symmetry".to_string(), symmetric)];
    let mut left = symmetric;
    for (s, &r) in plan.stages.iter().zip(&rejected) {
        left -= r as u128;
        stages.push((s.code().to_string(), left));
    }
    debug_assert_eq!(left, passed as u128);

    let survivors = hits
        .par_iter()
        .map(|&(ai, bi, und)| plan.survivor(&spec, ai as usize, bi as usize, und))
        .collect();

    let mut meta = vec![("threshold".to_string(), cfg.threshold.to_string())];
    match &cfg.mode {
        Mode::Mesh => meta.push(("mesh".into(), format!("1/{}", cfg.mesh_n))),
        Mode::Offset { delta, seed } => {
            meta.push(("mesh".into(), format!("1/{}", cfg.mesh_n)));
            meta.push(("delta".into(), format_rational(delta)));
            if let Some(s) = seed {
                meta.push(("seed".into(), s.to_string()));
            }
        }
        Mode::Zoom { radius, step, .. } => {
            meta.push(("radius".into(), format_rational(radius)));
            meta.push(("step".into(), format_rational(step)));
        }
    }
    Ok(FunnelReport { stages, survivor_count: passed, undecided, survivors, meta })
}

/// Four-round mesh counts after a prefix of the pair-only stages, obtained
/// as (passing β-pairs) × (passing α-pairs).
pub fn funnel_factored_count<S: AsRef<str>>(d: usize, n_mesh: u32, prefix: &[S]) -> Result<u128> {
    let mut check_alpha = false;
    let mut check_beta = false;
    for code in prefix {
        match code.as_ref() {
            "F1" => check_beta = true,
            "F2" => check_alpha = true,
            other => {
                return Err(Error::Refused(format!("{other} reads all four distributions and cannot be factored")))
            }
        }
    }
    if d == 0 || n_mesh == 0 {
        return Err(Error::Domain("d and N must be positive".into()));
    }
    let side = mesh_side(&[d], n_mesh);
    let registry = StrategyRegistry::standard();
    let count = |code: &str, check: bool| -> Result<u128> {
        if !check {
            return Ok(side.pairs.len() as u128);
        }
        let s = registry.get(code).expect("registered");
        let dims = [d];
        let n = (0..side.pairs.len())
            .into_par_iter()
            .map(|i| {
                // The stage reads only one side, so the pair fills both.
                let pair = side.get(i);
                let view = ProtocolView { a_dims: &dims, b_dims: &dims, alpha: pair, beta: pair };
                s.evaluate(&view, &mut crate::filter::NoOracle).map(|v| (v <= DEFAULT_THRESHOLD) as u128)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(n.into_iter().sum())
    };
    Ok(count("F1", check_beta)? * count("F2", check_alpha)?)
}
