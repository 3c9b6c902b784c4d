//! Candidate distributions: the `1/N` mesh, the offset mesh and zoom balls.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::probcore::{ProbVec, Rational};
use crate::protocol::ProtocolParams;

/// All ways to write `total` as an ordered sum of `parts` nonnegative
/// integers, in lexicographic order.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if parts == 0 {
        return out;
    }
    let mut cur = vec![0u32; parts];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
    }
    rec(0, total, &mut cur, &mut out);
    out
}

/// Converts mesh numerators `v / n_mesh` to a probability vector.
pub fn mesh_vec(v: &[u32], n_mesh: u32) -> ProbVec {
    ProbVec::new(v.iter().map(|&x| Rational::new(BigInt::from(x), BigInt::from(n_mesh))).collect())
        .expect("compositions sum to the mesh size")
}

/// Every probability vector of length `d` with entries in `{0, 1/N, ..., 1}`.
pub fn gen_mesh(d: usize, n_mesh: u32) -> impl Iterator<Item = ProbVec> {
    compositions(n_mesh, d).into_iter().map(move |v| mesh_vec(&v, n_mesh))
}

/// Number of mesh vectors, `C(d+N−1, N)`.
pub fn mesh_size(d: usize, n_mesh: u32) -> u128 {
    let (n, k) = (d as u128 + n_mesh as u128 - 1, n_mesh as u128);
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Offset `δ ∈ (0, 1/(2N))` drawn from a seeded generator.
pub fn draw_offset(n_mesh: u32, seed: u64) -> Rational {
    const GRAIN: u64 = 1 << 32;
    let k = ChaCha8Rng::seed_from_u64(seed).gen_range(1..GRAIN);
    Rational::new(BigInt::from(k), BigInt::from(2 * n_mesh as u64) * BigInt::from(GRAIN))
}

/// Vectors whose first `d−1` entries lie in `{δ, δ+ν, ..., δ+1−ν}` and whose
/// last entry completes the sum, keeping only nonnegative completions.
pub fn gen_offset_mesh(d: usize, n_mesh: u32, delta: &Rational) -> Result<Vec<ProbVec>> {
    let nu = Rational::new(BigInt::one(), BigInt::from(n_mesh));
    if !delta.is_positive() || delta * Rational::from_integer(2.into()) >= nu {
        return Err(Error::Domain("offset must lie in (0, 1/(2N))".into()));
    }
    let grid: Vec<Rational> = (0..n_mesh).map(|j| delta + &nu * Rational::from_integer(j.into())).collect();
    Ok(complete_products(&vec![grid; d.saturating_sub(1)]))
}

/// Cartesian product of per-entry candidates with the final entry set to the
/// complement; only valid probability vectors are kept.
fn complete_products(choices: &[Vec<Rational>]) -> Vec<ProbVec> {
    let mut out = Vec::new();
    let mut cur: Vec<Rational> = Vec::with_capacity(choices.len() + 1);
    fn rec(i: usize, sum: &Rational, choices: &[Vec<Rational>], cur: &mut Vec<Rational>, out: &mut Vec<ProbVec>) {
        if sum > &Rational::one() {
            return;
        }
        if i == choices.len() {
            cur.push(Rational::one() - sum);
            out.push(ProbVec::new(cur.clone()).expect("complement keeps the sum exact"));
            cur.pop();
            return;
        }
        for c in &choices[i] {
            cur.push(c.clone());
            rec(i + 1, &(sum + c), choices, cur, out);
            cur.pop();
        }
    }
    rec(0, &Rational::zero(), choices, &mut cur, &mut out);
    out
}

/// Candidates within `radius_steps·step` of `center`, entry by entry, with
/// the last entry adjusted so the vector sums to one.
pub fn zoom_vectors(center: &ProbVec, radius_steps: u32, step: &Rational) -> Result<Vec<ProbVec>> {
    if !step.is_positive() {
        return Err(Error::Domain("step must be positive".into()));
    }
    let r = radius_steps as i64;
    let one = Rational::one();
    let choices: Vec<Vec<Rational>> = center.entries()[..center.len() - 1]
        .iter()
        .map(|e| {
            (-r..=r)
                .map(|j| e + step * Rational::from_integer(j.into()))
                .filter(|v| !v.is_negative() && v <= &one)
                .collect()
        })
        .collect();
    Ok(complete_products(&choices))
}

/// The four per-distribution candidate lists of a zoom ball.
pub fn zoom_lists(center: &ProtocolParams, radius: &Rational, step: &Rational) -> Result<[Vec<ProbVec>; 4]> {
    if !step.is_positive() {
        return Err(Error::Domain("step must be positive".into()));
    }
    let k = radius / step;
    if !k.is_integer() || k.is_negative() {
        return Err(Error::Domain("radius must be a nonnegative multiple of the step".into()));
    }
    let k: u32 = k.to_integer().try_into().map_err(|_| Error::Domain("radius too large".into()))?;
    Ok([
        zoom_vectors(&center.alpha[0], k, step)?,
        zoom_vectors(&center.alpha[1], k, step)?,
        zoom_vectors(&center.beta[0], k, step)?,
        zoom_vectors(&center.beta[1], k, step)?,
    ])
}

/// Every protocol of the zoom ball around `center`.
pub fn gen_zoom_mesh(
    center: &ProtocolParams,
    radius: &Rational,
    step: &Rational,
) -> Result<impl Iterator<Item = ProtocolParams>> {
    let [a0, a1, b0, b1] = zoom_lists(center, radius, step)?;
    let spec = center.spec.clone();
    Ok(a0.into_iter().flat_map(move |x0| {
        let (a1, b0, b1, spec) = (a1.clone(), b0.clone(), b1.clone(), spec.clone());
        a1.into_iter().flat_map(move |x1| {
            let (x0, b0, b1, spec) = (x0.clone(), b0.clone(), b1.clone(), spec.clone());
            b0.into_iter().flat_map(move |y0| {
                let (x0, x1, b1, spec) = (x0.clone(), x1.clone(), b1.clone(), spec.clone());
                b1.into_iter().map(move |y1| ProtocolParams {
                    spec: spec.clone(),
                    alpha: [x0.clone(), x1.clone()],
                    beta: [y0.clone(), y1],
                })
            })
        })
    }))
}
