use super::tree::Owner;
use super::{Objective, Party};
use crate::error::{Error, Result};
use crate::protocol::ProtocolParams;

const MAX_FREE_DIMENSION: usize = 6;

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Best objective over all behavioral strategies whose conditional
/// probabilities are multiples of `grid_step`.
pub fn brute_force_value(params: &ProtocolParams, party: Party, c: u8, grid_step: f64) -> Result<f64> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Domain("grid step must lie in (0, 1]".into()));
    }
    let obj = Objective::new(params.view(), party, c);
    let tree = &obj.tree;
    let dim = tree.free_dimension();
    if dim > MAX_FREE_DIMENSION {
        return Err(Error::Refused(format!(
            "free dimension {dim} exceeds {MAX_FREE_DIMENSION}"
        )));
    }
    let steps = (1.0 / grid_step).round() as usize;
    // One entry per cheater decision node: (level, node, candidate list).
    let mut nodes: Vec<(usize, usize, Vec<Vec<f64>>)> = Vec::new();
    for k in 0..tree.depth() {
        if tree.owners[k] != Owner::Cheater {
            continue;
        }
        let cands: Vec<Vec<f64>> = compositions(steps, tree.sizes[k])
            .into_iter()
            .map(|v| v.into_iter().map(|i| i as f64 / steps as f64).collect())
            .collect();
        for p in 0..tree.nodes(k) {
            nodes.push((k, p, cands.clone()));
        }
    }
    let mut behavior = tree.uniform_behavior();
    let mut pick = vec![0usize; nodes.len()];
    let mut r = vec![0.0; tree.leaves];
    let mut best = f64::NEG_INFINITY;
    loop {
        for (i, (k, p, cands)) in nodes.iter().enumerate() {
            let size = tree.sizes[*k];
            behavior[*k][p * size..(p + 1) * size].copy_from_slice(&cands[pick[i]]);
        }
        tree.realize(&behavior, &mut r);
        best = best.max(obj.value(&r));
        let mut i = 0;
        loop {
            if i == nodes.len() {
                return Ok(best);
            }
            pick[i] += 1;
            if pick[i] < nodes[i].2.len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}
