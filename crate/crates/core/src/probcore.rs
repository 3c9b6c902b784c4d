//! Probability vectors over exact rationals, distance measures and the
//! rank-2 spectral closed forms used by the strategy formulas.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Gradient magnitude used where a square root singularity would appear.
pub const GRAD_CLAMP: f64 = 1e12;

/// Parses `"num/den"`, an integer, or a finite decimal such as `"0.125"` into
/// an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {t:?}")))?;
        let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {t:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {t:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = body[i + 1..].parse().map_err(|_| Error::Parse(format!("bad exponent in {t:?}")))?;
            (&body[..i], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("bad number {t:?}")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("bad number {t:?}")));
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().unwrap() };
    let scale = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Serializes a rational as `"num/den"` (or `"num"` for integers).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A probability vector with exact rational entries and a cached float view.
#[derive(Clone)]
pub struct ProbVec {
    entries: Vec<Rational>,
    floats: Vec<f64>,
}

impl ProbVec {
    pub fn new(entries: Vec<Rational>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Shape("empty probability vector".into()));
        }
        if let Some(i) = entries.iter().position(|e| e.is_negative()) {
            return Err(Error::Domain(format!("entry {i} is negative ({})", format_rational(&entries[i]))));
        }
        let total: Rational = entries.iter().sum();
        if !total.is_one() {
            return Err(Error::Domain(format!("entries sum to {}, not 1", format_rational(&total))));
        }
        let floats = entries.iter().map(rational_to_f64).collect();
        Ok(ProbVec { entries, floats })
    }

    /// Builds `nums[i] / den`.
    pub fn from_ratio(nums: &[i64], den: i64) -> Result<Self> {
        if den <= 0 {
            return Err(Error::Domain("denominator must be positive".into()));
        }
        Self::new(nums.iter().map(|&n| Rational::new(n.into(), den.into())).collect())
    }

    pub fn parse(items: &[&str]) -> Result<Self> {
        Self::new(items.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?)
    }

    pub fn uniform(d: usize) -> Self {
        let e = Rational::new(BigInt::one(), BigInt::from(d));
        Self::new(vec![e; d]).expect("uniform vector is valid")
    }

    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![Rational::zero(); d];
        v[i] = Rational::one();
        Self::new(v).expect("unit vector is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn as_f64(&self) -> &[f64] {
        &self.floats
    }

    /// Entry `i` of the result is entry `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        ProbVec {
            entries: perm.iter().map(|&i| self.entries[i].clone()).collect(),
            floats: perm.iter().map(|&i| self.floats[i]).collect(),
        }
    }

    pub fn max_entry(&self) -> &Rational {
        self.entries.iter().max().expect("nonempty")
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.entries.iter().map(format_rational).collect()
    }
}

impl PartialEq for ProbVec {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for ProbVec {}

impl PartialOrd for ProbVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ProbVec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.entries.cmp(&other.entries)
    }
}

impl std::hash::Hash for ProbVec {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.entries.hash(state);
    }
}

impl fmt::Debug for ProbVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.to_strings().join(", "))
    }
}

/// Sizes of the message spaces of the successive rounds.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexShape {
    dims: Vec<usize>,
}

impl IndexShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape("index shape needs at least one axis".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Shape("axis of size zero".into()));
        }
        Ok(IndexShape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn axes(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("length {} vs {}", p.len(), q.len())));
    }
    if p.iter().chain(q).any(|&x| x < 0.0 || x.is_nan()) {
        return Err(Error::Domain("negative entry".into()));
    }
    Ok(())
}

/// `(Σ √(p_x q_x))²`.
pub fn fidelity(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(fid(p, q))
}

/// `½ Σ |p_x − q_x|`.
pub fn trace_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("length {} vs {}", p.len(), q.len())));
    }
    Ok(tdist(p, q))
}

/// Unchecked fidelity.
#[inline]
pub fn fid(p: &[f64], q: &[f64]) -> f64 {
    let s = root_fid(p, q);
    s * s
}

/// Unchecked `Σ √(p_x q_x)`.
#[inline]
pub fn root_fid(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum()
}

/// Unchecked trace distance.
#[inline]
pub fn tdist(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Sums `v` over the axes listed in `drop` (0-based).
pub fn marginal(v: &[f64], shape: &IndexShape, drop: &[usize]) -> Result<Vec<f64>> {
    if v.len() != shape.total() {
        return Err(Error::Shape(format!("vector length {} vs shape total {}", v.len(), shape.total())));
    }
    if let Some(&a) = drop.iter().find(|&&a| a >= shape.axes()) {
        return Err(Error::Shape(format!("axis {a} out of range")));
    }
    let dims = shape.dims();
    let kept: Vec<usize> = (0..dims.len()).filter(|a| !drop.contains(a)).collect();
    let out_len: usize = kept.iter().map(|&a| dims[a]).product();
    let mut out = vec![0.0; out_len];
    let mut idx = vec![0usize; dims.len()];
    for &x in v {
        let mut o = 0;
        for &a in &kept {
            o = o * dims[a] + idx[a];
        }
        out[o] += x;
        for a in (0..dims.len()).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(out)
}

/// Splits `Σ_y max_a β_{a,y}` into the part won by β0 (ties included) and the
/// part won by β1.
pub fn eta_tau(b0: &[f64], b1: &[f64]) -> (f64, f64) {
    let mut eta = 0.0;
    let mut tau = 0.0;
    for (&x, &y) in b0.iter().zip(b1) {
        if x >= y {
            eta += x;
        } else {
            tau += y;
        }
    }
    (eta, tau)
}

/// Largest eigenvalue of `η√p√pᵀ + τ√q√qᵀ` given `F(p,q)`.
#[inline]
pub fn lambda2(eta: f64, tau: f64, f: f64) -> f64 {
    let d = eta - tau;
    0.5 * (eta + tau + (d * d + 4.0 * eta * tau * f).max(0.0).sqrt())
}

/// Largest eigenvalue of `η√p√pᵀ + τ√q√qᵀ`.
pub fn rank2_lambda_max(eta: f64, tau: f64, p: &[f64], q: &[f64]) -> Result<f64> {
    if eta < 0.0 || tau < 0.0 {
        return Err(Error::Domain("weights must be nonnegative".into()));
    }
    check_pair(p, q)?;
    Ok(lambda2(eta, tau, fid(p, q)))
}

/// Entry-wise square of the normalized principal eigenvector of
/// `η√p√pᵀ + τ√q√qᵀ`, the maximizer of `ηF(v,p) + τF(v,q)` over the simplex.
pub fn rank2_argmax(eta: f64, tau: f64, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if eta < 0.0 || tau < 0.0 {
        return Err(Error::Domain("weights must be nonnegative".into()));
    }
    if eta + tau <= 0.0 {
        return Err(Error::Domain("degenerate input: η = τ = 0".into()));
    }
    check_pair(p, q)?;
    let mut out = vec![0.0; p.len()];
    argmax2_into(eta, tau, p, q, &mut out);
    Ok(out)
}

/// Unchecked [`rank2_argmax`] writing into `out`.
pub fn argmax2_into(eta: f64, tau: f64, p: &[f64], q: &[f64], out: &mut [f64]) {
    let s = root_fid(p, q);
    let np: f64 = p.iter().sum::<f64>().sqrt();
    let nq: f64 = q.iter().sum::<f64>().sqrt();
    let (a, b) = if tau <= 0.0 || nq == 0.0 {
        (1.0, 0.0)
    } else if eta <= 0.0 || np == 0.0 {
        (0.0, 1.0)
    } else {
        // Work with unit vectors u = √p/np, w = √q/nq.
        let e = eta * np * np;
        let t = tau * nq * nq;
        let c = s / (np * nq);
        let lam = lambda2(e, t, c * c);
        let (ca, cb) = if e * c >= t * c && e * c > 0.0 {
            (e * c, lam - e)
        } else if t * c > 0.0 {
            (lam - t, t * c)
        } else if e >= t {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        (ca / np, cb / nq)
    };
    let mut total = 0.0;
    for ((o, &x), &y) in out.iter_mut().zip(p).zip(q) {
        let r = a * x.sqrt() + b * y.sqrt();
        *o = r * r;
        total += *o;
    }
    if total > 0.0 {
        for o in out.iter_mut() {
            *o /= total;
        }
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`; the endpoints are
/// compared with the interior estimate.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

fn check_hull(c0: f64, a0: &[f64], c1: f64, a1: &[f64], v: &[f64]) -> Result<()> {
    if c0 < 0.0 || c1 < 0.0 {
        return Err(Error::Domain("weights must be nonnegative".into()));
    }
    check_pair(a0, a1)?;
    check_pair(a0, v)
}

/// `max { c0 F(s,a0) + c1 F(v−s,a1) : 0 ≤ s ≤ v }`.
pub fn hull_two_fidelities(c0: f64, a0: &[f64], c1: f64, a1: &[f64], v: &[f64]) -> Result<f64> {
    check_hull(c0, a0, c1, a1, v)?;
    Ok(hull2(c0, a0, c1, a1, v))
}

/// Unchecked [`hull_two_fidelities`].
///
/// Every maximizer lies on the upper-right frontier of the achievable
/// `(√F(s,a0), √F(v−s,a1))` pairs, which is traced by one angle; the angle is
/// scanned and the best local maxima are refined by golden section.
pub fn hull2(c0: f64, a0: &[f64], c1: f64, a1: &[f64], v: &[f64]) -> f64 {
    if c1 == 0.0 {
        return c0 * fid(v, a0);
    }
    if c0 == 0.0 {
        return c1 * fid(v, a1);
    }
    let n = v.len();
    let mut pa = Vec::with_capacity(n);
    let mut pb = Vec::with_capacity(n);
    let mut r0 = Vec::with_capacity(n);
    let mut r1 = Vec::with_capacity(n);
    for i in 0..n {
        if v[i] > 0.0 && (a0[i] > 0.0 || a1[i] > 0.0) {
            pa.push((v[i] * a0[i]).sqrt());
            pb.push((v[i] * a1[i]).sqrt());
            r0.push(a0[i].sqrt());
            r1.push(a1[i].sqrt());
        }
    }
    if pa.is_empty() {
        return 0.0;
    }
    let g = |w: f64| -> f64 {
        let (m0, m1) = (w.cos(), w.sin());
        let (mut f0, mut f1) = (0.0, 0.0);
        for i in 0..pa.len() {
            let n0 = m0 * r0[i];
            let n1 = m1 * r1[i];
            let h = n0.hypot(n1);
            if h > 0.0 {
                f0 += pa[i] * n0 / h;
                f1 += pb[i] * n1 / h;
            } else if r0[i] == 0.0 {
                f1 += pb[i];
            } else {
                f0 += pa[i];
            }
        }
        c0 * f0 * f0 + c1 * f1 * f1
    };
    const SCAN: usize = 96;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let step = half_pi / SCAN as f64;
    let vals: Vec<f64> = (0..=SCAN).map(|k| g(k as f64 * step)).collect();
    let mut peaks: Vec<usize> = (0..=SCAN)
        .filter(|&k| (k == 0 || vals[k] >= vals[k - 1]) && (k == SCAN || vals[k] >= vals[k + 1]))
        .collect();
    peaks.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let mut best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for &k in peaks.iter().take(3) {
        let lo = (k as f64 - 1.0).max(0.0) * step;
        let hi = ((k + 1) as f64 * step).min(half_pi);
        let (_, fx) = golden_max(g, lo, hi, 80);
        best = best.max(fx);
    }
    best
}

/// Conditional-gradient evaluation of the same hull over the box `[0, v]`.
pub fn hull_two_fidelities_cg(c0: f64, a0: &[f64], c1: f64, a1: &[f64], v: &[f64]) -> Result<f64> {
    check_hull(c0, a0, c1, a1, v)?;
    let n = v.len();
    let obj = |s: &[f64]| -> f64 {
        let f0: f64 = (0..n).map(|i| (s[i] * a0[i]).sqrt()).sum();
        let f1: f64 = (0..n).map(|i| ((v[i] - s[i]).max(0.0) * a1[i]).sqrt()).sum();
        c0 * f0 * f0 + c1 * f1 * f1
    };
    let mut s: Vec<f64> = v.iter().map(|x| 0.5 * x).collect();
    let mut cur = obj(&s);
    let mut grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for _ in 0..5000 {
        let f0: f64 = (0..n).map(|i| (s[i] * a0[i]).sqrt()).sum();
        let f1: f64 = (0..n).map(|i| ((v[i] - s[i]).max(0.0) * a1[i]).sqrt()).sum();
        for i in 0..n {
            let rest = (v[i] - s[i]).max(0.0);
            let g0 = if a0[i] == 0.0 {
                0.0
            } else if s[i] > 0.0 {
                (c0 * f0 * (a0[i] / s[i]).sqrt()).min(GRAD_CLAMP)
            } else {
                GRAD_CLAMP
            };
            let g1 = if a1[i] == 0.0 {
                0.0
            } else if rest > 0.0 {
                (c1 * f1 * (a1[i] / rest).sqrt()).min(GRAD_CLAMP)
            } else {
                GRAD_CLAMP
            };
            grad[i] = g0 - g1;
        }
        let mut gap = 0.0;
        for i in 0..n {
            let target = if grad[i] > 0.0 { v[i] } else { 0.0 };
            dir[i] = target - s[i];
            gap += grad[i] * dir[i];
        }
        if gap <= 1e-9 {
            break;
        }
        let (gamma, val) = golden_max(
            |t| {
                for i in 0..n {
                    trial[i] = s[i] + t * dir[i];
                }
                obj(&trial)
            },
            0.0,
            1.0,
            80,
        );
        if val <= cur {
            break;
        }
        for i in 0..n {
            s[i] += gamma * dir[i];
        }
        cur = val;
    }
    Ok(cur)
}

/// Returns `(1 − √F, Δ, √(1 − F))` and checks the sandwich.
pub fn fvdg_check(p: &ProbVec, q: &ProbVec) -> Result<(f64, f64, f64)> {
    let (p, q) = (p.as_f64(), q.as_f64());
    check_pair(p, q)?;
    let f = fid(p, q).min(1.0);
    let lower = 1.0 - f.sqrt();
    let delta = tdist(p, q);
    let upper = (1.0 - f).max(0.0).sqrt();
    if lower > delta + 1e-12 || delta > upper + 1e-12 {
        return Err(Error::Numerical(format!("sandwich violated: {lower} ≤ {delta} ≤ {upper}")));
    }
    Ok((lower, delta, upper))
}

/// Dual vector `y(ε)` for the fidelity program; `⟨y(ε), q⟩ ≥ F(p,q)` and tends
/// to `F(p,q)` as `ε → 0`.
pub fn fidelity_dual_vector(p: &[f64], q: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_pair(p, q)?;
    if eps <= 0.0 {
        return Err(Error::Domain("ε must be positive".into()));
    }
    let r = root_fid(p, q);
    let l1: f64 = p.iter().sum();
    Ok(p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            if b == 0.0 {
                (r + eps) * l1 / eps
            } else if a == 0.0 {
                eps
            } else {
                (r + eps) * (a / b).sqrt()
            }
        })
        .collect())
}
