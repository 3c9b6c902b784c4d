#![allow(dead_code)]

use coinflip_core::probcore::ProbVec;
use coinflip_core::protocol::{ProtocolParams, RoundSpec};
use rand::Rng;

pub fn ratio(v: &[i64], den: i64) -> ProbVec {
    ProbVec::from_ratio(v, den).unwrap()
}

/// The four six-round protocols with `|A_i| = |B_i| = 2` and bias 1/4.
pub fn six_round_quarter() -> Vec<ProtocolParams> {
    let mut out = Vec::new();
    for a1 in [[1, 1, 0, 1], [1, 1, 1, 0]] {
        for (b0, b1) in [([0, 3, 0, 9], [0, 3, 9, 0]), ([1, 2, 0, 9], [1, 2, 9, 0])] {
            out.push(
                ProtocolParams::new(
                    RoundSpec::six(2, 2),
                    ratio(&[0, 1, 1, 1], 3),
                    ratio(&a1, 3),
                    ratio(&b0, 12),
                    ratio(&b1, 12),
                )
                .unwrap(),
            );
        }
    }
    out
}

/// First four-round near-optimal protocol used for zooming.
pub fn four_round_zoom_center() -> ProtocolParams {
    ProtocolParams::new(
        RoundSpec::four(5, 5),
        ratio(&[0, 0, 0, 1, 1], 2),
        ratio(&[0, 0, 1, 0, 1], 2),
        ProbVec::unit(5, 4),
        ProbVec::unit(5, 3),
    )
    .unwrap()
}

/// Random distribution with denominator `den`, sometimes with zero entries.
pub fn random_dist(rng: &mut impl Rng, len: usize, den: i64) -> ProbVec {
    let mut w: Vec<i64> = (0..len).map(|_| if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..10) }).collect();
    if w.iter().all(|&x| x == 0) {
        w[rng.gen_range(0..len)] = 1;
    }
    let total: i64 = w.iter().sum();
    // Scale onto the fixed denominator, putting the rounding slack on the largest entry.
    let mut nums: Vec<i64> = w.iter().map(|x| x * den / total).collect();
    let slack = den - nums.iter().sum::<i64>();
    let imax = (0..len).max_by_key(|&i| w[i]).unwrap();
    nums[imax] += slack;
    ProbVec::from_ratio(&nums, den).unwrap()
}

pub fn random_protocol(rng: &mut impl Rng, a_dims: &[usize], b_dims: &[usize]) -> ProtocolParams {
    let spec = RoundSpec::new(a_dims.to_vec(), b_dims.to_vec()).unwrap();
    let (na, nb) = (spec.a_dims.total(), spec.b_dims.total());
    ProtocolParams::new(
        spec,
        random_dist(rng, na, 1000),
        random_dist(rng, na, 1000),
        random_dist(rng, nb, 1000),
        random_dist(rng, nb, 1000),
    )
    .unwrap()
}
