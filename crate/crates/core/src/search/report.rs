//! The delimited report: stage counts, then survivors, then run facts.

use std::fmt::Write as _;
use std::path::Path;

use super::FunnelReport;
use crate::error::{Error, Result};
use crate::filter::FilterOutcome;
use crate::probcore::ProbVec;
use crate::protocol::ProtocolParams;
use crate::reduce::CheatCertificate;

/// A protocol that passed every stage, or whose evaluation failed.
#[derive(Clone, Debug)]
pub struct SurvivorRecord {
    pub params: ProtocolParams,
    pub outcome: Option<FilterOutcome>,
    /// `(A,0), (A,1), (B,0), (B,1)` when certification ran and succeeded.
    pub certificates: Option<[CheatCertificate; 4]>,
    pub undecided: bool,
}

impl SurvivorRecord {
    /// `max_c,party P*.upper − 1/2`.
    pub fn bias(&self) -> Option<f64> {
        self.certificates.as_ref().map(|c| c.iter().map(|c| c.upper).fold(f64::NEG_INFINITY, f64::max) - 0.5)
    }
}

fn rational_cell(v: &ProbVec) -> String {
    v.to_strings().join(" ")
}

fn prob_cell(x: Option<f64>) -> String {
    match x {
        Some(x) => format!("{x:.11e}"),
        None => "NA".into(),
    }
}

impl FunnelReport {
    /// Serializes the report. Probabilities carry 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,count\n");
        for (s, c) in &self.stages {
            let _ = writeln!(out, "{s},{c}");
        }
        out.push('\n');
        out.push_str("alpha0,alpha1,beta0,beta1,PA0,PA1,PB0,PB1,bias\n");
        for r in &self.survivors {
            let p = &r.params;
            let probs: Vec<String> = (0..4)
                .map(|i| prob_cell(r.certificates.as_ref().map(|c| c[i].upper)))
                .collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                rational_cell(&p.alpha[0]),
                rational_cell(&p.alpha[1]),
                rational_cell(&p.beta[0]),
                rational_cell(&p.beta[1]),
                probs.join(","),
                prob_cell(r.bias())
            );
        }
        out.push('\n');
        out.push_str("key,value\n");
        let _ = writeln!(out, "survivors,{}", self.survivor_count);
        let _ = writeln!(out, "undecided,{}", self.undecided);
        let _ = writeln!(out, "listed,{}", self.survivors.len());
        for (k, v) in &self.meta {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Reads the `stage,count` section of a report.
pub fn parse_stage_counts(text: &str) -> Result<Vec<(String, u128)>> {
    let mut lines = text.lines();
    if lines.next() != Some("stage,count") {
        return Err(Error::Parse("report must start with stage,count".into()));
    }
    lines
        .take_while(|l| !l.is_empty())
        .map(|l| {
            let (s, c) = l.split_once(',').ok_or_else(|| Error::Parse(format!("bad stage line {l:?}")))?;
            let c = c.parse().map_err(|_| Error::Parse(format!("bad count in {l:?}")))?;
            Ok((s.to_string(), c))
        })
        .collect()
}
