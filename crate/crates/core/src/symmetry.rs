//! Canonical representatives under local index permutations and the swaps
//! `α0 ↔ α1`, `β0 ↔ β1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probcore::ProbVec;
use crate::protocol::ProtocolParams;
use crate::search::compositions;

/// Moves applied to one side (Alice's or Bob's pair of distributions).
/// `perms[k][i]` is the old index placed at position `i` of axis `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SideMoves {
    pub swap: bool,
    pub perms: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Moves {
    pub alpha: SideMoves,
    pub beta: SideMoves,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    pub params: ProtocolParams,
    pub applied: Moves,
}

fn stable_order<K: Ord>(len: usize, key: impl Fn(usize) -> K) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.sort_by_key(|&i| key(i));
    idx
}

/// Applies per-axis permutations to a row-major vector.
pub fn permute<T: Clone>(v: &[T], dims: &[usize], perms: &[Vec<usize>]) -> Vec<T> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        let src = idx.iter().zip(perms).zip(dims).fold(0, |acc, ((&i, p), &d)| acc * d + p[i]);
        out.push(v[src].clone());
        for a in (0..dims.len()).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

/// Canonicalizing moves for one side.
///
/// The pair is swapped when the second vector has the strictly larger
/// maximum. With one axis the indices are stably sorted by the first vector.
/// With two axes the second axis is sorted by the last row holding the
/// maximum, then the first axis by the last column. Longer round structures
/// only use the swap.
pub fn side_moves<T: Ord + Clone>(v0: &[T], v1: &[T], dims: &[usize]) -> SideMoves {
    let swap = v1.iter().max() > v0.iter().max();
    let w = if swap { v1 } else { v0 };
    let mut perms: Vec<Vec<usize>> = dims.iter().map(|&d| (0..d).collect()).collect();
    match dims.len() {
        1 => perms[0] = stable_order(dims[0], |i| &w[i]),
        2 => {
            let (d1, d2) = (dims[0], dims[1]);
            let top = w.iter().max().expect("nonempty");
            let row = (0..d1).rev().find(|&i| w[i * d2..(i + 1) * d2].contains(top)).expect("max present");
            perms[1] = stable_order(d2, |j| &w[row * d2 + j]);
            let last = perms[1][d2 - 1];
            perms[0] = stable_order(d1, |i| &w[i * d2 + last]);
        }
        _ => {}
    }
    SideMoves { swap, perms }
}

fn apply_side<T: Clone>(v0: &[T], v1: &[T], dims: &[usize], m: &SideMoves) -> (Vec<T>, Vec<T>) {
    let (a, b) = if m.swap { (v1, v0) } else { (v0, v1) };
    (permute(a, dims, &m.perms), permute(b, dims, &m.perms))
}

fn apply_side_prob(v: &[ProbVec; 2], dims: &[usize], m: &SideMoves) -> [ProbVec; 2] {
    let (a, b) = if m.swap { (&v[1], &v[0]) } else { (&v[0], &v[1]) };
    let order = permute(&(0..a.len()).collect::<Vec<_>>(), dims, &m.perms);
    [a.permuted(&order), b.permuted(&order)]
}

/// Applies explicit moves to a protocol.
pub fn apply_moves(params: &ProtocolParams, moves: &Moves) -> ProtocolParams {
    ProtocolParams {
        spec: params.spec.clone(),
        alpha: apply_side_prob(&params.alpha, params.spec.a_dims.dims(), &moves.alpha),
        beta: apply_side_prob(&params.beta, params.spec.b_dims.dims(), &moves.beta),
    }
}

pub fn canonicalize(params: &ProtocolParams) -> CanonicalForm {
    let moves = Moves {
        alpha: side_moves(params.alpha[0].entries(), params.alpha[1].entries(), params.spec.a_dims.dims()),
        beta: side_moves(params.beta[0].entries(), params.beta[1].entries(), params.spec.b_dims.dims()),
    };
    CanonicalForm { params: apply_moves(params, &moves), applied: moves }
}

/// Whether a pair of numerator vectors is its own canonical form.
pub fn is_canonical_side<T: Ord + Clone>(v0: &[T], v1: &[T], dims: &[usize]) -> bool {
    let m = side_moves(v0, v1, dims);
    let (a, b) = apply_side(v0, v1, dims, &m);
    a == v0 && b == v1
}

/// Canonical pairs of mesh numerator vectors (entries sum to `n_mesh`).
pub fn canonical_side_pairs(dims: &[usize], n_mesh: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    let total: usize = dims.iter().product();
    let mesh = compositions(n_mesh, total);
    let mut out = Vec::new();
    for v0 in &mesh {
        for v1 in &mesh {
            if is_canonical_side(v0, v1, dims) {
                out.push((v0.clone(), v1.clone()));
            }
        }
    }
    out
}

/// Number of canonical `(α0, α1)` pairs on the `1/N` mesh with `|A_i| = d`.
pub fn count_canonical_pairs(d: usize, n_mesh: u32, rounds: usize) -> Result<u64> {
    if !(1..=2).contains(&rounds) {
        return Err(Error::Domain("only one or two exchanges are supported".into()));
    }
    if d == 0 || n_mesh == 0 {
        return Err(Error::Domain("d and N must be positive".into()));
    }
    Ok(canonical_side_pairs(&vec![d; rounds], n_mesh).len() as u64)
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Lexicographically least image of a pair over its whole orbit.
fn orbit_key(v: &[ProbVec; 2], dims: &[usize]) -> (Vec<ProbVec>, Vec<ProbVec>) {
    let idx: Vec<usize> = (0..v[0].len()).collect();
    let mut perms: Vec<Vec<usize>> = dims.iter().map(|&d| (0..d).collect()).collect();
    let mut best: Option<(Vec<ProbVec>, Vec<ProbVec>)> = None;
    loop {
        let order = permute(&idx, dims, &perms);
        for swap in [false, true] {
            let (a, b) = if swap { (&v[1], &v[0]) } else { (&v[0], &v[1]) };
            let cand = (vec![a.permuted(&order)], vec![b.permuted(&order)]);
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
        let mut k = 0;
        loop {
            if k == perms.len() {
                return best.expect("at least one candidate");
            }
            if next_permutation(&mut perms[k]) {
                break;
            }
            perms[k].sort_unstable();
            k += 1;
        }
    }
}

/// Whether two protocols are related by local permutations and swaps.
pub fn equivalent(p1: &ProtocolParams, p2: &ProtocolParams) -> Result<bool> {
    if p1.spec != p2.spec {
        return Err(Error::Shape("protocols have different round specs".into()));
    }
    let (a, b) = (p1.spec.a_dims.dims(), p1.spec.b_dims.dims());
    Ok(orbit_key(&p1.alpha, a) == orbit_key(&p2.alpha, a) && orbit_key(&p1.beta, b) == orbit_key(&p2.beta, b))
}
