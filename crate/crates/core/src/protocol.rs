//! Protocol parameters, the protocol file format and the analytic bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{parse_rational, IndexShape, ProbVec};

/// Round structure: `n` commitment exchanges with per-round message sizes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RoundSpec {
    pub n: usize,
    pub a_dims: IndexShape,
    pub b_dims: IndexShape,
}

impl RoundSpec {
    pub fn new(a_dims: Vec<usize>, b_dims: Vec<usize>) -> Result<Self> {
        let a_dims = IndexShape::new(a_dims)?;
        let b_dims = IndexShape::new(b_dims)?;
        if a_dims.axes() != b_dims.axes() {
            return Err(Error::Shape(format!(
                "Alice has {} rounds but Bob has {}",
                a_dims.axes(),
                b_dims.axes()
            )));
        }
        Ok(RoundSpec { n: a_dims.axes(), a_dims, b_dims })
    }

    /// Four-round spec with `|A| = a`, `|B| = b`.
    pub fn four(a: usize, b: usize) -> Self {
        Self::new(vec![a], vec![b]).expect("positive dims")
    }

    /// Six-round spec with `|A_i| = a`, `|B_i| = b`.
    pub fn six(a: usize, b: usize) -> Self {
        Self::new(vec![a, a], vec![b, b]).expect("positive dims")
    }

    /// Total number of messages, `2n + 2`.
    pub fn rounds(&self) -> usize {
        2 * self.n + 2
    }
}

/// The four distributions `(α0, α1, β0, β1)` of one protocol.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProtocolParams {
    pub spec: RoundSpec,
    pub alpha: [ProbVec; 2],
    pub beta: [ProbVec; 2],
}

/// Borrowed float view of a protocol used by all numeric code.
#[derive(Clone, Copy, Debug)]
pub struct ProtocolView<'a> {
    pub a_dims: &'a [usize],
    pub b_dims: &'a [usize],
    pub alpha: [&'a [f64]; 2],
    pub beta: [&'a [f64]; 2],
}

impl<'a> ProtocolView<'a> {
    pub fn n(&self) -> usize {
        self.a_dims.len()
    }

    /// The same protocol with `β0` and `β1` exchanged.
    pub fn swap_beta(&self) -> Self {
        ProtocolView { beta: [self.beta[1], self.beta[0]], ..*self }
    }
}

impl ProtocolParams {
    pub fn new(spec: RoundSpec, alpha0: ProbVec, alpha1: ProbVec, beta0: ProbVec, beta1: ProbVec) -> Result<Self> {
        let p = ProtocolParams { spec, alpha: [alpha0, alpha1], beta: [beta0, beta1] };
        let errs = p.length_errors();
        if errs.is_empty() {
            Ok(p)
        } else {
            Err(Error::Invalid(errs))
        }
    }

    fn length_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let (na, nb) = (self.spec.a_dims.total(), self.spec.b_dims.total());
        for (name, v, want) in [
            ("alpha0", &self.alpha[0], na),
            ("alpha1", &self.alpha[1], na),
            ("beta0", &self.beta[0], nb),
            ("beta1", &self.beta[1], nb),
        ] {
            if v.len() != want {
                errs.push(format!("{name} has length {} but the round spec needs {want}", v.len()));
            }
        }
        errs
    }

    pub fn view(&self) -> ProtocolView<'_> {
        ProtocolView {
            a_dims: self.spec.a_dims.dims(),
            b_dims: self.spec.b_dims.dims(),
            alpha: [self.alpha[0].as_f64(), self.alpha[1].as_f64()],
            beta: [self.beta[0].as_f64(), self.beta[1].as_f64()],
        }
    }

    /// The three-round calibration protocol whose four cheating probabilities
    /// all equal 3/4.
    pub fn embedded_example() -> Self {
        let h = |v: &[i64]| ProbVec::from_ratio(v, 2).unwrap();
        ProtocolParams::new(
            RoundSpec::four(3, 2),
            h(&[1, 0, 1]),
            h(&[0, 1, 1]),
            ProbVec::unit(2, 0),
            ProbVec::unit(2, 1),
        )
        .unwrap()
    }

    pub fn to_file(&self) -> ProtocolFile {
        ProtocolFile {
            rounds: self.spec.rounds(),
            a_dims: self.spec.a_dims.dims().to_vec(),
            b_dims: self.spec.b_dims.dims().to_vec(),
            alpha0: self.alpha[0].to_strings(),
            alpha1: self.alpha[1].to_strings(),
            beta0: self.beta[0].to_strings(),
            beta1: self.beta[1].to_strings(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ProtocolFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        f.into_params()
    }
}

/// Checks every invariant of a protocol record.
pub fn validate(params: &ProtocolParams) -> Result<()> {
    let errs = params.length_errors();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(errs))
    }
}

/// On-disk protocol record; distributions are exact fractions `"num/den"`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProtocolFile {
    pub rounds: usize,
    pub a_dims: Vec<usize>,
    pub b_dims: Vec<usize>,
    pub alpha0: Vec<String>,
    pub alpha1: Vec<String>,
    pub beta0: Vec<String>,
    pub beta1: Vec<String>,
}

impl ProtocolFile {
    /// Converts to validated parameters, reporting every violated invariant.
    pub fn into_params(self) -> Result<ProtocolParams> {
        let mut errs = Vec::new();
        let spec = match RoundSpec::new(self.a_dims.clone(), self.b_dims.clone()) {
            Ok(s) => {
                if s.rounds() != self.rounds {
                    errs.push(format!("rounds = {} does not match {} axes", self.rounds, s.n));
                }
                Some(s)
            }
            Err(e) => {
                errs.push(e.to_string());
                None
            }
        };
        let mut vecs = Vec::new();
        for (name, items) in [
            ("alpha0", &self.alpha0),
            ("alpha1", &self.alpha1),
            ("beta0", &self.beta0),
            ("beta1", &self.beta1),
        ] {
            let want = spec.as_ref().map(|s| if name.starts_with('a') { s.a_dims.total() } else { s.b_dims.total() });
            if let Some(want) = want.filter(|&w| w != items.len()) {
                errs.push(format!("{name} has length {} but the round spec needs {want}", items.len()));
            }
            let parsed: Result<Vec<_>> = items.iter().map(|s| parse_rational(s)).collect();
            match parsed.and_then(ProbVec::new) {
                Ok(v) => vecs.push(Some(v)),
                Err(e) => {
                    errs.push(format!("{name}: {e}"));
                    vecs.push(None);
                }
            }
        }
        if let (Some(spec), [Some(a0), Some(a1), Some(b0), Some(b1)]) = (&spec, &vecs[..]) {
            if errs.is_empty() {
                return ProtocolParams::new(spec.clone(), a0.clone(), a1.clone(), b0.clone(), b1.clone());
            }
        }
        Err(Error::Invalid(errs))
    }
}

/// Result of the mesh approximation bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub mesh_gap: f64,
    /// Mesh fineness needed per unit of commitment dimension.
    pub per_dimension: u64,
    pub min_n_for_claim: u64,
    pub context: String,
}

/// Bias the mesh search certifies against.
pub const SEARCH_BIAS: f64 = 0.2499;
/// Optimal bias `(√2 − 1)/2` rounded as printed alongside the fineness claim.
pub const OPTIMAL_BIAS_ROUNDED: f64 = 0.2071;

/// `2√(D/N)` and the mesh fineness needed for the search to separate from
/// the optimal bias.
pub fn mesh_gap_bound(d: u64, n: u64) -> Result<BoundReport> {
    if d == 0 || n == 0 {
        return Err(Error::Domain("D and N must be positive".into()));
    }
    let mesh_gap = 2.0 * (d as f64 / n as f64).sqrt();
    let margin = SEARCH_BIAS - OPTIMAL_BIAS_ROUNDED;
    let per_dimension = (4.0 / (margin * margin)).ceil() as u64;
    Ok(BoundReport {
        mesh_gap,
        per_dimension,
        min_n_for_claim: per_dimension * d,
        context: format!(
            "bias change at most 2*sqrt(D/N); searching below {SEARCH_BIAS} separates from {OPTIMAL_BIAS_ROUNDED} once N >= {per_dimension}*D"
        ),
    })
}

/// Alice's lower bound on `P*_{A,0}` when Bob's two cheating bounds both
/// equal `p`.
fn alice_bound(p: f64, alice_is_qubit: bool, bob_is_qubit: bool) -> f64 {
    let slack = 2.0 - 2.0 * p;
    let root_f_alpha = if alice_is_qubit { slack.sqrt() } else { slack };
    let delta_beta = if bob_is_qubit { 4.0 * p * (1.0 - p) } else { slack };
    0.25 * (1.0 + root_f_alpha.min(1.0)) * (1.0 + delta_beta.min(1.0))
}

/// Lower bound on `max{P*_{A,0}, P*_{B,0}}` for four-round protocols where
/// the flagged parties send qubits.
pub fn qubit_lower_bound(alice_is_qubit: bool, bob_is_qubit: bool) -> Result<f64> {
    if !alice_is_qubit && !bob_is_qubit {
        return Err(Error::Domain("at least one party must be a qubit".into()));
    }
    let h = |p: f64| alice_bound(p, alice_is_qubit, bob_is_qubit);
    const GRID: usize = 1_000_000;
    let at = |k: usize| 0.5 + 0.5 * k as f64 / GRID as f64;
    let mut best = (0, f64::INFINITY);
    for k in 0..=GRID {
        let p = at(k);
        let m = p.max(h(p));
        if m < best.1 {
            best = (k, m);
        }
    }
    // The two curves cross where p = h(p); refine that crossing.
    let (mut lo, mut hi) = (at(best.0.saturating_sub(1)), at((best.0 + 1).min(GRID)));
    if lo - h(lo) > 0.0 || hi - h(hi) < 0.0 {
        return Ok(best.1);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid - h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    Ok(p.max(h(p)))
}
