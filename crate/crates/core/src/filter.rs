//! Closed-form cheating strategies and the staged protocol filter.
//!
//! Each strategy sits behind [`CheatStrategy`] and is registered by its code
//! in a [`StrategyRegistry`]; filter orders are lists of codes resolved at
//! runtime. Outcome-1 variants are the outcome-0 formula applied to the
//! protocol with `β0` and `β1` exchanged.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{argmax2_into, eta_tau, fid, hull2, lambda2, root_fid, tdist};
use crate::protocol::{ProtocolParams, ProtocolView};
use crate::reduce::{solve_view, Party, SolverOptions};

pub const DEFAULT_THRESHOLD: f64 = 0.7499;

pub const FOUR_ROUND_ORDER: [&str; 17] = [
    "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11", "SDPA0", "F12", "SDPB0", "SDPA1", "F13",
    "SDPB1",
];

pub const SIX_ROUND_ORDER: [&str; 16] = [
    "G1", "G2", "G3", "G4", "G5", "G6", "G7", "G8", "G9", "G10", "SDPB0", "G11", "SDPA0", "SDPB1", "G12", "SDPA1",
];

pub fn default_order(n: usize) -> &'static [&'static str] {
    if n == 2 {
        &SIX_ROUND_ORDER
    } else {
        &FOUR_ROUND_ORDER
    }
}

/// Which distributions a stage reads; lets the search cache pair-only stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Dependence {
    AlphaOnly,
    BetaOnly,
    Both,
}

/// Source of optimal cheating values for the solver-backed stages.
pub trait CheatOracle {
    /// Certified upper bound on `P*_{party,c}`.
    fn upper(&mut self, view: &ProtocolView<'_>, party: Party, c: u8) -> Result<f64>;
}

/// Oracle for filters made only of closed-form stages.
pub struct NoOracle;

impl CheatOracle for NoOracle {
    fn upper(&mut self, _: &ProtocolView<'_>, party: Party, c: u8) -> Result<f64> {
        Err(Error::Refused(format!("no solver available for P*_{party},{c}")))
    }
}

/// Runs the reduced-problem solver once per `(party, c)` and caches it.
pub struct SolverOracle {
    pub opts: SolverOptions,
    cache: HashMap<(Party, u8), f64>,
}

impl SolverOracle {
    pub fn new(opts: SolverOptions) -> Self {
        SolverOracle { opts, cache: HashMap::new() }
    }
}

impl CheatOracle for SolverOracle {
    fn upper(&mut self, view: &ProtocolView<'_>, party: Party, c: u8) -> Result<f64> {
        if let Some(&v) = self.cache.get(&(party, c)) {
            return Ok(v);
        }
        let sol = solve_view(*view, party, c, self.opts)?;
        let up = sol.upper();
        self.cache.insert((party, c), up);
        Ok(up)
    }
}

/// A cheating strategy whose success probability lower-bounds `P*_{party,c}`.
pub trait CheatStrategy: Send + Sync {
    fn code(&self) -> &str;
    fn party(&self) -> Party;
    fn outcome(&self) -> u8;
    /// Number of commitment exchanges the formula is written for; `None`
    /// when it applies to every round structure.
    fn rounds(&self) -> Option<usize>;
    fn dependence(&self) -> Dependence;
    fn formula(&self) -> &str;
    fn applicable(&self, _view: &ProtocolView<'_>) -> bool {
        true
    }
    fn evaluate(&self, view: &ProtocolView<'_>, oracle: &mut dyn CheatOracle) -> Result<f64>;
}

type Formula = fn(&ProtocolView<'_>) -> f64;

struct ClosedForm {
    code: &'static str,
    party: Party,
    outcome: u8,
    rounds: Option<usize>,
    dependence: Dependence,
    formula: &'static str,
    f: Formula,
    needs_equal_dims: bool,
}

impl CheatStrategy for ClosedForm {
    fn code(&self) -> &str {
        self.code
    }
    fn party(&self) -> Party {
        self.party
    }
    fn outcome(&self) -> u8 {
        self.outcome
    }
    fn rounds(&self) -> Option<usize> {
        self.rounds
    }
    fn dependence(&self) -> Dependence {
        self.dependence
    }
    fn formula(&self) -> &str {
        self.formula
    }
    fn applicable(&self, view: &ProtocolView<'_>) -> bool {
        !self.needs_equal_dims || view.a_dims == view.b_dims
    }
    fn evaluate(&self, view: &ProtocolView<'_>, _: &mut dyn CheatOracle) -> Result<f64> {
        let v = if self.outcome == 0 { (self.f)(view) } else { (self.f)(&view.swap_beta()) };
        Ok(v)
    }
}

/// The optimal value itself, from the oracle.
struct Optimal {
    code: &'static str,
    party: Party,
    outcome: u8,
}

impl CheatStrategy for Optimal {
    fn code(&self) -> &str {
        self.code
    }
    fn party(&self) -> Party {
        self.party
    }
    fn outcome(&self) -> u8 {
        self.outcome
    }
    fn rounds(&self) -> Option<usize> {
        None
    }
    fn dependence(&self) -> Dependence {
        Dependence::Both
    }
    fn formula(&self) -> &str {
        match self.party {
            Party::Alice => "P*_A,c (reduced problem, certified upper bound)",
            Party::Bob => "P*_B,c (reduced problem, certified upper bound)",
        }
    }
    fn evaluate(&self, view: &ProtocolView<'_>, oracle: &mut dyn CheatOracle) -> Result<f64> {
        oracle.upper(view, self.party, self.outcome)
    }
}

/// `1 / (2 P*)` of the other party.
struct Kitaev {
    code: &'static str,
    party: Party,
    outcome: u8,
    rounds: usize,
}

impl CheatStrategy for Kitaev {
    fn code(&self) -> &str {
        self.code
    }
    fn party(&self) -> Party {
        self.party
    }
    fn outcome(&self) -> u8 {
        self.outcome
    }
    fn rounds(&self) -> Option<usize> {
        Some(self.rounds)
    }
    fn dependence(&self) -> Dependence {
        Dependence::Both
    }
    fn formula(&self) -> &str {
        "1/(2 P*) of the other party"
    }
    fn evaluate(&self, view: &ProtocolView<'_>, oracle: &mut dyn CheatOracle) -> Result<f64> {
        let other = match self.party {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        };
        let up = oracle.upper(view, other, self.outcome)?;
        Ok(1.0 / (2.0 * up))
    }
}

fn first_marginal(v: &[f64], dims: &[usize]) -> Vec<f64> {
    let rest: usize = dims[1..].iter().product();
    v.chunks(rest).map(|c| c.iter().sum()).collect()
}

fn f1(v: &ProtocolView<'_>) -> f64 {
    0.5 + 0.5 * root_fid(v.beta[0], v.beta[1])
}

fn f2(v: &ProtocolView<'_>) -> f64 {
    if v.n() == 1 {
        0.5 + 0.5 * tdist(v.alpha[0], v.alpha[1])
    } else {
        let m0 = first_marginal(v.alpha[0], v.a_dims);
        let m1 = first_marginal(v.alpha[1], v.a_dims);
        0.5 + 0.5 * tdist(&m0, &m1)
    }
}

fn f3(v: &ProtocolView<'_>) -> f64 {
    (0.5 + 0.5 * root_fid(v.alpha[0], v.alpha[1])) * (0.5 + 0.5 * tdist(v.beta[0], v.beta[1]))
}

fn f4(v: &ProtocolView<'_>) -> f64 {
    0.5 * (fid(v.alpha[0], v.beta[0]) + fid(v.alpha[1], v.beta[1]))
}

fn f6(v: &ProtocolView<'_>) -> f64 {
    let (eta, tau) = eta_tau(v.beta[0], v.beta[1]);
    0.5 * lambda2(eta, tau, fid(v.alpha[0], v.alpha[1]))
}

fn f7(v: &ProtocolView<'_>) -> f64 {
    let f = fid(v.beta[0], v.beta[1]);
    0.5 * v.alpha[0].iter().zip(v.alpha[1]).map(|(&x, &y)| lambda2(x, y, f)).sum::<f64>()
}

fn f8(v: &ProtocolView<'_>) -> f64 {
    let nb = v.beta[0].len();
    let mut vx = vec![0.0; nb];
    let mut u = [vec![0.0; nb], vec![0.0; nb]];
    for (&x0, &x1) in v.alpha[0].iter().zip(v.alpha[1]) {
        if x0 + x1 <= 0.0 {
            continue;
        }
        argmax2_into(x0, x1, v.beta[0], v.beta[1], &mut vx);
        for y in 0..nb {
            u[0][y] += x0 * vx[y];
            u[1][y] += x1 * vx[y];
        }
    }
    0.5 * (fid(&u[0], v.beta[0]) + fid(&u[1], v.beta[1]))
}

fn improved_eigen(v: &ProtocolView<'_>) -> f64 {
    let (eta, tau) = eta_tau(v.beta[0], v.beta[1]);
    let mut point = vec![0.0; v.alpha[0].len()];
    argmax2_into(eta, tau, v.alpha[0], v.alpha[1], &mut point);
    v.beta[0]
        .iter()
        .zip(v.beta[1])
        .map(|(&b0, &b1)| hull2(0.5 * b0, v.alpha[0], 0.5 * b1, v.alpha[1], &point))
        .sum()
}

fn g3(v: &ProtocolView<'_>) -> f64 {
    let (kappa, zeta) = eta_tau(v.alpha[0], v.alpha[1]);
    let m0 = first_marginal(v.beta[0], v.b_dims);
    let m1 = first_marginal(v.beta[1], v.b_dims);
    0.5 * lambda2(kappa, zeta, fid(&m0, &m1))
}

fn g4(v: &ProtocolView<'_>) -> f64 {
    let a0 = first_marginal(v.alpha[0], v.a_dims);
    let a1 = first_marginal(v.alpha[1], v.a_dims);
    let m0 = first_marginal(v.beta[0], v.b_dims);
    let m1 = first_marginal(v.beta[1], v.b_dims);
    (0.5 + 0.5 * root_fid(&a0, &a1)) * (0.5 + 0.5 * tdist(&m0, &m1))
}

fn g6(v: &ProtocolView<'_>) -> f64 {
    let a0 = first_marginal(v.alpha[0], v.a_dims);
    let a1 = first_marginal(v.alpha[1], v.a_dims);
    let m0 = first_marginal(v.beta[0], v.b_dims);
    let m1 = first_marginal(v.beta[1], v.b_dims);
    let (eta, tau) = eta_tau(&m0, &m1);
    0.5 * lambda2(eta, tau, fid(&a0, &a1))
}

fn g7(v: &ProtocolView<'_>) -> f64 {
    let (kappa, zeta) = eta_tau(v.alpha[0], v.alpha[1]);
    let m = [first_marginal(v.beta[0], v.b_dims), first_marginal(v.beta[1], v.b_dims)];
    let nb1 = v.b_dims[0];
    let nb2: usize = v.b_dims[1..].iter().product();
    let mut c = vec![0.0; nb1];
    argmax2_into(kappa, zeta, &m[0], &m[1], &mut c);
    // The conditional p̃ depends on x only through g(x).
    let mut ptilde = [vec![0.0; nb1 * nb2], vec![0.0; nb1 * nb2]];
    for g in 0..2 {
        for y1 in 0..nb1 {
            for y2 in 0..nb2 {
                let i = y1 * nb2 + y2;
                ptilde[g][i] = if m[g][y1] > 0.0 {
                    c[y1] * v.beta[g][i] / m[g][y1]
                } else {
                    c[y1] / nb2 as f64
                };
            }
        }
    }
    let mut u = [vec![0.0; nb1 * nb2], vec![0.0; nb1 * nb2]];
    for (&x0, &x1) in v.alpha[0].iter().zip(v.alpha[1]) {
        let g = if x0 >= x1 { 0 } else { 1 };
        for i in 0..nb1 * nb2 {
            u[0][i] += x0 * ptilde[g][i];
            u[1][i] += x1 * ptilde[g][i];
        }
    }
    0.5 * (fid(&u[0], v.beta[0]) + fid(&u[1], v.beta[1]))
}

/// Row of the exported strategy catalog.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogRow {
    pub code: String,
    pub party: Party,
    pub outcome: u8,
    pub rounds: Option<usize>,
    pub dependence: Dependence,
    pub formula: String,
}

/// Strategies registered by code.
#[derive(Clone, Default)]
pub struct StrategyRegistry {
    entries: BTreeMap<String, Arc<dyn CheatStrategy>>,
}

impl StrategyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, s: Arc<dyn CheatStrategy>) {
        self.entries.insert(s.code().to_string(), s);
    }

    pub fn get(&self, code: &str) -> Option<Arc<dyn CheatStrategy>> {
        self.entries.get(code).cloned()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// Resolves an order of codes for protocols with `n` exchanges.
    pub fn resolve<S: AsRef<str>>(&self, order: &[S], n: usize) -> Result<Vec<Arc<dyn CheatStrategy>>> {
        order
            .iter()
            .map(|c| {
                let c = c.as_ref();
                let s = self.get(c).ok_or_else(|| Error::Domain(format!("unknown strategy code {c}")))?;
                match s.rounds() {
                    Some(r) if r != n => Err(Error::Domain(format!(
                        "strategy {c} is written for {r} exchange(s), protocol has {n}"
                    ))),
                    _ => Ok(s),
                }
            })
            .collect()
    }

    pub fn catalog(&self) -> Vec<CatalogRow> {
        self.entries
            .values()
            .map(|s| CatalogRow {
                code: s.code().to_string(),
                party: s.party(),
                outcome: s.outcome(),
                rounds: s.rounds(),
                dependence: s.dependence(),
                formula: s.formula().to_string(),
            })
            .collect()
    }

    /// Every strategy of the four- and six-round filters.
    pub fn standard() -> Self {
        use Dependence::*;
        use Party::*;
        let mut r = Self::new();
        let mut closed = |code, party, outcome, rounds, dependence, formula, f: Formula| {
            r.register(Arc::new(ClosedForm {
                code,
                party,
                outcome,
                rounds,
                dependence,
                formula,
                f,
                needs_equal_dims: code == "F4" || code == "F5",
            }));
        };
        let four = Some(1);
        let six = Some(2);
        closed("F1", Bob, 0, four, BetaOnly, "1/2 + 1/2 sqrt F(b0,b1)", f1);
        closed("F2", Bob, 0, four, AlphaOnly, "1/2 + 1/2 D(a0,a1)", f2);
        closed("F3", Alice, 0, four, Both, "(1/2 + 1/2 sqrt F(a0,a1)) (1/2 + 1/2 D(b0,b1))", f3);
        closed("F4", Bob, 0, four, Both, "1/2 sum_a F(a_a, b_a)", f4);
        closed("F5", Bob, 1, four, Both, "1/2 sum_a F(a_a, b_{1-a})", f4);
        closed("F6", Alice, 0, four, Both, "1/2 lmax(eta sqrt a0 sqrt a0^T + tau sqrt a1 sqrt a1^T)", f6);
        closed("F7", Bob, 0, four, Both, "1/2 sum_x lmax(sum_a a_{a,x} sqrt b_a sqrt b_a^T)", f7);
        closed("F8", Bob, 0, four, Both, "1/2 sum_a F(sum_x a_{a,x} v_x, b_a)", f8);
        closed("F9", Bob, 1, four, Both, "F8 with b0 and b1 exchanged", f8);
        closed("F10", Alice, 0, four, Both, "sum_y conc{1/2 b_{0,y} F(.,a0), 1/2 b_{1,y} F(.,a1)}(v)", improved_eigen);
        closed("F11", Alice, 1, four, Both, "F10 with b0 and b1 exchanged", improved_eigen);
        closed("G1", Bob, 0, six, BetaOnly, "1/2 + 1/2 sqrt F(b0,b1)", f1);
        closed("G2", Bob, 0, six, AlphaOnly, "1/2 + 1/2 D(Tr_A2 a0, Tr_A2 a1)", f2);
        closed("G3", Bob, 0, six, Both, "1/2 lmax(kappa sqrt m0 sqrt m0^T + zeta sqrt m1 sqrt m1^T), m_a = Tr_B2 b_a", g3);
        closed("G4", Alice, 0, six, Both, "(1/2 + 1/2 sqrt F(Tr_A2 a0, Tr_A2 a1)) (1/2 + 1/2 D(Tr_B2 b0, Tr_B2 b1))", g4);
        closed("G5", Alice, 0, six, Both, "1/2 lmax(eta sqrt a0 sqrt a0^T + tau sqrt a1 sqrt a1^T)", f6);
        closed("G6", Alice, 0, six, Both, "1/2 lmax(eta' sqrt Tr_A2 a0 (.)^T + tau' sqrt Tr_A2 a1 (.)^T)", g6);
        closed("G7", Bob, 0, six, Both, "1/2 sum_a F(sum_x a_{a,x} p2~(x), b_a)", g7);
        closed("G8", Bob, 1, six, Both, "G7 with b0 and b1 exchanged", g7);
        closed("G9", Alice, 0, six, Both, "sum_y conc{1/2 b_{0,y} F(.,a0), 1/2 b_{1,y} F(.,a1)}(v)", improved_eigen);
        closed("G10", Alice, 1, six, Both, "G9 with b0 and b1 exchanged", improved_eigen);
        for (code, party, outcome) in [("SDPA0", Alice, 0), ("SDPA1", Alice, 1), ("SDPB0", Bob, 0), ("SDPB1", Bob, 1)] {
            r.register(Arc::new(Optimal { code, party, outcome }));
        }
        for (code, party, outcome, rounds) in
            [("F12", Bob, 0, 1), ("F13", Bob, 1, 1), ("G11", Alice, 0, 2), ("G12", Alice, 1, 2)]
        {
            r.register(Arc::new(Kitaev { code, party, outcome, rounds }));
        }
        r
    }
}

/// Stage values of one protocol and the first stage exceeding the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub values: Vec<(String, f64)>,
    pub rejected_at: Option<String>,
    pub passed: bool,
}

/// Evaluates `stages` in order, stopping at the first value strictly above
/// `threshold`. Stages that do not apply to the protocol's shape are skipped.
pub fn run_filter(
    view: &ProtocolView<'_>,
    stages: &[Arc<dyn CheatStrategy>],
    threshold: f64,
    oracle: &mut dyn CheatOracle,
) -> Result<FilterOutcome> {
    let mut values = Vec::with_capacity(stages.len());
    for s in stages {
        if !s.applicable(view) {
            continue;
        }
        let v = s.evaluate(view, oracle)?;
        values.push((s.code().to_string(), v));
        if v > threshold {
            return Ok(FilterOutcome { values, rejected_at: Some(s.code().to_string()), passed: false });
        }
    }
    Ok(FilterOutcome { values, rejected_at: None, passed: true })
}

/// [`run_filter`] with codes resolved against the standard registry and the
/// reduced-problem solver behind the optimal stages.
pub fn run_filter_codes<S: AsRef<str>>(
    params: &ProtocolParams,
    order: &[S],
    threshold: f64,
    opts: SolverOptions,
) -> Result<FilterOutcome> {
    let stages = StrategyRegistry::standard().resolve(order, params.spec.n)?;
    run_filter(&params.view(), &stages, threshold, &mut SolverOracle::new(opts))
}

/// Value of a single strategy.
pub fn eval_strategy(params: &ProtocolParams, code: &str) -> Result<f64> {
    let s = StrategyRegistry::standard().resolve(&[code], params.spec.n)?.remove(0);
    let view = params.view();
    if !s.applicable(&view) {
        return Err(Error::Domain(format!("{code} needs |A_i| = |B_i|")));
    }
    s.evaluate(&view, &mut SolverOracle::new(SolverOptions::default()))
}
