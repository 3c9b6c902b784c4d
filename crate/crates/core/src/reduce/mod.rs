//! Optimal cheating probabilities as fidelity maximization over the cheating
//! polytopes, solved by pairwise Frank–Wolfe.

mod brute;
mod tree;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probcore::{golden_max, GRAD_CLAMP};
use crate::protocol::{ProtocolParams, ProtocolView};
use tree::GameTree;

pub use brute::brute_force_value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Party {
    Alice,
    Bob,
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Party::Alice => "A",
            Party::Bob => "B",
        })
    }
}

/// Bob's chain `p_1..p_n`; `p_j` is indexed by `A_1×B_1×···×A_j×B_j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BobStrategy {
    pub p: Vec<Vec<f64>>,
}

/// Alice's chain `s_1..s_n` (`s_j` over `A_1×B_1×···×B_{j−1}×A_j`) and the
/// final split `s_final` over `{0,1}×A×B`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AliceStrategy {
    pub s_chain: Vec<Vec<f64>>,
    pub s_final: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Strategy {
    Alice(AliceStrategy),
    Bob(BobStrategy),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheatCertificate {
    pub party: Party,
    pub outcome: u8,
    pub value: f64,
    pub gap: f64,
    pub upper: f64,
    pub iterations: usize,
    pub strategy: Strategy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-7, max_iter: 20_000 }
    }
}

impl SolverOptions {
    /// Tighter setting for borderline protocols.
    pub fn accurate() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 200_000 }
    }
}

/// Solver output on the leaf coordinates.
#[derive(Clone, Debug)]
pub struct RawSolution {
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub point: Vec<f64>,
}

impl RawSolution {
    pub fn upper(&self) -> f64 {
        self.value + self.gap.max(0.0)
    }
}

/// Sum of fidelities for one party, evaluated on leaf coordinates.
pub(crate) struct Objective<'a> {
    party: Party,
    view: ProtocolView<'a>,
    c: usize,
    pub tree: GameTree,
    leaf_x: Vec<usize>,
    leaf_y: Vec<usize>,
    na: usize,
    nb: usize,
}

fn index_of(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &s)| acc * s + d)
}

impl<'a> Objective<'a> {
    pub fn new(view: ProtocolView<'a>, party: Party, c: u8) -> Self {
        let tree = match party {
            Party::Bob => GameTree::bob(view.a_dims, view.b_dims),
            Party::Alice => GameTree::alice(view.a_dims, view.b_dims),
        };
        let n = view.n();
        let mut leaf_x = Vec::with_capacity(tree.leaves);
        let mut leaf_y = Vec::with_capacity(tree.leaves);
        for leaf in 0..tree.leaves {
            let d = tree.digits(leaf);
            let xs: Vec<usize> = (0..n).map(|j| d[2 * j]).collect();
            let ys: Vec<usize> = (0..n).map(|j| d[2 * j + 1]).collect();
            leaf_x.push(index_of(&xs, view.a_dims));
            leaf_y.push(index_of(&ys, view.b_dims));
        }
        Objective {
            party,
            view,
            c: c as usize & 1,
            tree,
            leaf_x,
            leaf_y,
            na: view.a_dims.iter().product(),
            nb: view.b_dims.iter().product(),
        }
    }

    /// Alice's leaves end with the bit `a`, so leaf `2i + a` pairs with
    /// `leaf_x[2i + a]`.
    fn value_and_grad(&self, r: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match self.party {
            Party::Bob => self.bob_eval(r, grad),
            Party::Alice => self.alice_eval(r, grad),
        }
    }

    pub fn value(&self, r: &[f64]) -> f64 {
        self.value_and_grad(r, None)
    }

    pub fn grad(&self, r: &[f64], g: &mut [f64]) -> f64 {
        self.value_and_grad(r, Some(g))
    }

    fn bob_eval(&self, r: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let nb = self.nb;
        let mut u = [vec![0.0; nb], vec![0.0; nb]];
        for (leaf, &w) in r.iter().enumerate() {
            let (x, y) = (self.leaf_x[leaf], self.leaf_y[leaf]);
            u[0][y] += self.view.alpha[0][x] * w;
            u[1][y] += self.view.alpha[1][x] * w;
        }
        let mut total = 0.0;
        let mut roots = [0.0; 2];
        for a in 0..2 {
            let beta = self.view.beta[a ^ self.c];
            let s: f64 = u[a].iter().zip(beta).map(|(&x, &b)| (x.max(0.0) * b).sqrt()).sum();
            roots[a] = s;
            total += s * s;
        }
        if let Some(g) = grad {
            let mut dfdu = [vec![0.0; nb], vec![0.0; nb]];
            for a in 0..2 {
                let beta = self.view.beta[a ^ self.c];
                for y in 0..nb {
                    dfdu[a][y] = partial(roots[a], beta[y], u[a][y]);
                }
            }
            for (leaf, gl) in g.iter_mut().enumerate() {
                let (x, y) = (self.leaf_x[leaf], self.leaf_y[leaf]);
                *gl = 0.5 * (self.view.alpha[0][x] * dfdu[0][y] + self.view.alpha[1][x] * dfdu[1][y]);
            }
        }
        0.5 * total
    }

    fn alice_eval(&self, r: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (na, nb) = (self.na, self.nb);
        // roots[a * nb + y] = Σ_x √(s^{(a,y)}_x α_{a,x})
        let mut roots = vec![0.0; 2 * nb];
        for (leaf, &w) in r.iter().enumerate() {
            let a = leaf & 1;
            let (x, y) = (self.leaf_x[leaf], self.leaf_y[leaf]);
            roots[a * nb + y] += (w.max(0.0) * self.view.alpha[a][x]).sqrt();
        }
        let mut total = 0.0;
        for a in 0..2 {
            let beta = self.view.beta[a ^ self.c];
            for y in 0..nb {
                let s = roots[a * nb + y];
                total += beta[y] * s * s;
            }
        }
        if let Some(g) = grad {
            for (leaf, gl) in g.iter_mut().enumerate() {
                let a = leaf & 1;
                let (x, y) = (self.leaf_x[leaf], self.leaf_y[leaf]);
                let wy = self.view.beta[a ^ self.c][y];
                *gl = if wy == 0.0 { 0.0 } else { 0.5 * wy * partial(roots[a * nb + y], self.view.alpha[a][x], r[leaf]) };
            }
        }
        let _ = na;
        0.5 * total
    }

    fn bob_strategy(&self, r: &[f64]) -> BobStrategy {
        let (a_dims, b_dims) = (self.view.a_dims, self.view.b_dims);
        let n = a_dims.len();
        let mut chain = vec![r.to_vec()];
        for j in (1..n).rev() {
            let cur = chain.last().unwrap();
            let block = a_dims[j] * b_dims[j];
            let prev: Vec<f64> = cur
                .chunks(block)
                .map(|c| c.iter().sum::<f64>() / a_dims[j] as f64)
                .collect();
            chain.push(prev);
        }
        chain.reverse();
        BobStrategy { p: chain }
    }

    fn alice_strategy(&self, r: &[f64]) -> AliceStrategy {
        let (a_dims, b_dims) = (self.view.a_dims, self.view.b_dims);
        let n = a_dims.len();
        let (na, nb) = (self.na, self.nb);
        let mut s_final = vec![0.0; 2 * na * nb];
        for (leaf, &w) in r.iter().enumerate() {
            let a = leaf & 1;
            s_final[a * na * nb + self.leaf_x[leaf] * nb + self.leaf_y[leaf]] = w;
        }
        // s_n(x1,y1,...,xn) = Σ_a r(...,xn,yn,a), averaged over yn.
        let bn = b_dims[n - 1];
        let s_n: Vec<f64> = r.chunks(2 * bn).map(|c| c.iter().sum::<f64>() / bn as f64).collect();
        let mut chain = vec![s_n];
        for j in (1..n).rev() {
            let cur = chain.last().unwrap();
            let block = b_dims[j - 1] * a_dims[j];
            let prev: Vec<f64> = cur
                .chunks(block)
                .map(|c| c.iter().sum::<f64>() / b_dims[j - 1] as f64)
                .collect();
            chain.push(prev);
        }
        chain.reverse();
        AliceStrategy { s_chain: chain, s_final }
    }

    pub fn strategy(&self, r: &[f64]) -> Strategy {
        match self.party {
            Party::Bob => Strategy::Bob(self.bob_strategy(r)),
            Party::Alice => Strategy::Alice(self.alice_strategy(r)),
        }
    }

    /// Leaf coordinates of a strategy record, checking its constraints.
    pub fn leaves_of(&self, strat: &Strategy) -> Result<Vec<f64>> {
        let r = match (self.party, strat) {
            (Party::Bob, Strategy::Bob(b)) => {
                let p_n = b.p.last().ok_or_else(|| Error::Shape("empty Bob chain".into()))?;
                if b.p.len() != self.view.n() || p_n.len() != self.tree.leaves {
                    return Err(Error::Shape("Bob strategy does not match the round spec".into()));
                }
                check_bob_chain(self.view.a_dims, self.view.b_dims, &b.p)?;
                p_n.clone()
            }
            (Party::Alice, Strategy::Alice(s)) => {
                if s.s_final.len() != self.tree.leaves || s.s_chain.len() != self.view.n() {
                    return Err(Error::Shape("Alice strategy does not match the round spec".into()));
                }
                let (na, nb) = (self.na, self.nb);
                let r: Vec<f64> = (0..self.tree.leaves)
                    .map(|leaf| s.s_final[(leaf & 1) * na * nb + self.leaf_x[leaf] * nb + self.leaf_y[leaf]])
                    .collect();
                check_alice_chain(self.view.a_dims, self.view.b_dims, &s.s_chain, &r)?;
                r
            }
            _ => return Err(Error::Shape("strategy belongs to the other party".into())),
        };
        let bad = self.tree.infeasibility(&r);
        if bad > FEAS_TOL {
            return Err(Error::Infeasible(format!("constraint violation {bad:e}")));
        }
        Ok(r)
    }
}

const FEAS_TOL: f64 = 1e-9;

fn check_bob_chain(a_dims: &[usize], b_dims: &[usize], p: &[Vec<f64>]) -> Result<()> {
    let mut parent = vec![1.0];
    for (j, pj) in p.iter().enumerate() {
        let (a, b) = (a_dims[j], b_dims[j]);
        if pj.len() != parent.len() * a * b {
            return Err(Error::Shape(format!("p_{} has the wrong length", j + 1)));
        }
        for (h, &ph) in parent.iter().enumerate() {
            for x in 0..a {
                let off = (h * a + x) * b;
                let s: f64 = pj[off..off + b].iter().sum();
                if (s - ph).abs() > FEAS_TOL {
                    return Err(Error::Infeasible(format!("marginal of p_{} off by {:e}", j + 1, s - ph)));
                }
            }
        }
        parent = pj.clone();
    }
    Ok(())
}

fn check_alice_chain(a_dims: &[usize], b_dims: &[usize], s: &[Vec<f64>], leaves: &[f64]) -> Result<()> {
    let n = a_dims.len();
    let total: f64 = s[0].iter().sum();
    if s[0].len() != a_dims[0] || (total - 1.0).abs() > FEAS_TOL {
        return Err(Error::Infeasible("s_1 is not a distribution".into()));
    }
    for j in 1..n {
        let (bp, a) = (b_dims[j - 1], a_dims[j]);
        if s[j].len() != s[j - 1].len() * bp * a {
            return Err(Error::Shape(format!("s_{} has the wrong length", j + 1)));
        }
        for (h, &sh) in s[j - 1].iter().enumerate() {
            for y in 0..bp {
                let off = (h * bp + y) * a;
                let t: f64 = s[j][off..off + a].iter().sum();
                if (t - sh).abs() > FEAS_TOL {
                    return Err(Error::Infeasible(format!("marginal of s_{} off by {:e}", j + 1, t - sh)));
                }
            }
        }
    }
    let bn = b_dims[n - 1];
    for (h, &sh) in s[n - 1].iter().enumerate() {
        for y in 0..bn {
            let off = (h * bn + y) * 2;
            let t = leaves[off] + leaves[off + 1];
            if (t - sh).abs() > FEAS_TOL {
                return Err(Error::Infeasible(format!("final split off by {:e}", t - sh)));
            }
        }
    }
    Ok(())
}

/// `∂/∂u_y (Σ √(u β))² = 2(Σ√(uβ))·½√(β_y/u_y)`, clamped near `u_y = 0`.
#[inline]
fn partial(root: f64, reference: f64, u: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else if u <= 0.0 {
        GRAD_CLAMP
    } else {
        (root * (reference / u).sqrt()).min(GRAD_CLAMP)
    }
}

/// `½ Σ_a F(Σ_x α_{a,x} p_n(x,·), β_{a⊕c})`.
pub fn bob_objective(params: &ProtocolParams, c: u8, strat: &BobStrategy) -> Result<f64> {
    let obj = Objective::new(params.view(), Party::Bob, c);
    let r = obj.leaves_of(&Strategy::Bob(strat.clone()))?;
    Ok(obj.value(&r))
}

/// `½ Σ_a Σ_y β_{a⊕c,y} F(s^{(a,y)}, α_a)`.
pub fn alice_objective(params: &ProtocolParams, c: u8, strat: &AliceStrategy) -> Result<f64> {
    let obj = Objective::new(params.view(), Party::Alice, c);
    let r = obj.leaves_of(&Strategy::Alice(strat.clone()))?;
    Ok(obj.value(&r))
}

fn check_gradient_len(len: usize, want: usize) -> Result<()> {
    if len != want {
        return Err(Error::Shape(format!("gradient length {len}, expected {want}")));
    }
    Ok(())
}

/// Vertex of Bob's polytope maximizing `⟨gradient, p_n⟩`.
pub fn lmo_bob(params: &ProtocolParams, gradient: &[f64]) -> Result<BobStrategy> {
    let obj = Objective::new(params.view(), Party::Bob, 0);
    check_gradient_len(gradient.len(), obj.tree.leaves)?;
    let mut r = vec![0.0; obj.tree.leaves];
    obj.tree.lmo(gradient, &mut r);
    Ok(obj.bob_strategy(&r))
}

/// Vertex of Alice's polytope maximizing `⟨gradient, s⟩`, with the gradient
/// indexed like `s_final`.
pub fn lmo_alice(params: &ProtocolParams, gradient: &[f64]) -> Result<AliceStrategy> {
    let obj = Objective::new(params.view(), Party::Alice, 0);
    check_gradient_len(gradient.len(), obj.tree.leaves)?;
    let (na, nb) = (obj.na, obj.nb);
    let g: Vec<f64> = (0..obj.tree.leaves)
        .map(|leaf| gradient[(leaf & 1) * na * nb + obj.leaf_x[leaf] * nb + obj.leaf_y[leaf]])
        .collect();
    let mut r = vec![0.0; obj.tree.leaves];
    obj.tree.lmo(&g, &mut r);
    Ok(obj.alice_strategy(&r))
}

/// Pairwise Frank–Wolfe on a float view.
pub fn solve_view(view: ProtocolView<'_>, party: Party, c: u8, opts: SolverOptions) -> Result<RawSolution> {
    let obj = Objective::new(view, party, c);
    let (value, gap, iterations, point) = pairwise_fw(&obj, opts)?;
    Ok(RawSolution { value, gap, iterations, point })
}

fn pairwise_fw(obj: &Objective<'_>, opts: SolverOptions) -> Result<(f64, f64, usize, Vec<f64>)> {
    let m = obj.tree.leaves;
    let mut x = vec![0.0; m];
    obj.tree.realize(&obj.tree.uniform_behavior(), &mut x);
    let mut atoms: Vec<(Vec<f64>, f64)> = vec![(x.clone(), 1.0)];
    let mut fx = obj.value(&x);
    let mut g = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut trial = vec![0.0; m];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..=opts.max_iter {
        iterations = it;
        obj.grad(&x, &mut g);
        obj.tree.lmo(&g, &mut s);
        gap = dot(&g, &s) - dot(&g, &x);
        if !gap.is_finite() || !fx.is_finite() {
            return Err(Error::Numerical(format!("non-finite objective or gap at iteration {it}")));
        }
        if gap <= opts.tol || it == opts.max_iter {
            break;
        }
        let away = atoms
            .iter()
            .enumerate()
            .min_by(|p, q| dot(&g, &p.1 .0).total_cmp(&dot(&g, &q.1 .0)))
            .map(|(i, _)| i)
            .unwrap();
        let gmax = atoms[away].1;
        for i in 0..m {
            d[i] = s[i] - atoms[away].0[i];
        }
        let mut line = |t: f64, d: &[f64]| {
            for i in 0..m {
                trial[i] = x[i] + t * d[i];
            }
            obj.value(&trial)
        };
        let (gamma, fv) = golden_max(|t| line(t, &d), 0.0, gmax, 80);
        if fv > fx {
            let drop = gamma >= gmax;
            atoms[away].1 -= gamma;
            if drop || atoms[away].1 <= 0.0 {
                atoms.swap_remove(away);
            }
            match atoms.iter_mut().find(|a| a.0 == s) {
                Some(a) => a.1 += gamma,
                None => atoms.push((s.clone(), gamma)),
            }
            for i in 0..m {
                x[i] += gamma * d[i];
            }
            fx = fv;
            continue;
        }
        for i in 0..m {
            d[i] = s[i] - x[i];
        }
        let (gamma, fv) = golden_max(|t| line(t, &d), 0.0, 1.0, 80);
        if fv <= fx {
            break;
        }
        for a in atoms.iter_mut() {
            a.1 *= 1.0 - gamma;
        }
        atoms.retain(|a| a.1 > 0.0);
        match atoms.iter_mut().find(|a| a.0 == s) {
            Some(a) => a.1 += gamma,
            None => atoms.push((s.clone(), gamma)),
        }
        for i in 0..m {
            x[i] += gamma * d[i];
        }
        fx = fv;
    }
    Ok((fx, gap.max(0.0), iterations, x))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve_cheating(params: &ProtocolParams, party: Party, c: u8, opts: SolverOptions) -> Result<CheatCertificate> {
    let view = params.view();
    let obj = Objective::new(view, party, c);
    let (value, gap, iterations, point) = pairwise_fw(&obj, opts)?;
    Ok(CheatCertificate {
        party,
        outcome: c & 1,
        value,
        gap,
        upper: value + gap,
        iterations,
        strategy: obj.strategy(&point),
    })
}

/// Bias and the four certificates in the order `(A,0), (A,1), (B,0), (B,1)`.
pub fn solve_bias(params: &ProtocolParams, opts: SolverOptions) -> Result<(f64, [CheatCertificate; 4])> {
    let certs = [
        solve_cheating(params, Party::Alice, 0, opts)?,
        solve_cheating(params, Party::Alice, 1, opts)?,
        solve_cheating(params, Party::Bob, 0, opts)?,
        solve_cheating(params, Party::Bob, 1, opts)?,
    ];
    let max = certs.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    Ok((max - 0.5, certs))
}
