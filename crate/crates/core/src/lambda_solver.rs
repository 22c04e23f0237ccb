//! Fairness multiplier for a fixed `theta`.
//!
//! With `u = 1 / lambda`, a positive multiplier caps group one at `p1 * u`
//! and floors group zero at `1 - p0 * u`. Between consecutive breakpoints
//! (the `u` at which the cap or floor reaches another base probability) the
//! gap between the truncated group means is linear in `u`, so the root is
//! found by walking both sorted lists towards smaller `u`, always taking the
//! nearer breakpoint, and solving the linear piece that brackets zero.

use crate::error::{Error, Result};
use crate::model_core::{predictor_probability, ConstraintSide, GroupRates};

/// Base probabilities of the two sides of one constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProbs {
    pub e1: Vec<f64>,
    pub e0: Vec<f64>,
}

impl GroupProbs {
    pub fn new(e1: Vec<f64>, e0: Vec<f64>) -> Result<Self> {
        if e1.is_empty() || e0.is_empty() {
            return Err(Error::EmptyGroup);
        }
        if e1.iter().chain(&e0).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        Ok(GroupProbs { e1, e0 })
    }
}

/// Means of the truncated predictor probabilities of each group at `lambda`.
pub fn truncated_group_means(probs: &GroupProbs, rates: GroupRates, lambda: f64) -> (f64, f64) {
    group_means(&probs.e1, &probs.e0, rates, lambda)
}

pub(crate) fn group_means(e1: &[f64], e0: &[f64], rates: GroupRates, lambda: f64) -> (f64, f64) {
    let m1 = e1
        .iter()
        .map(|&p| predictor_probability(p, ConstraintSide::Gamma1, lambda, rates))
        .sum::<f64>()
        / e1.len() as f64;
    let m0 = e0
        .iter()
        .map(|&p| predictor_probability(p, ConstraintSide::Gamma0, lambda, rates))
        .sum::<f64>()
        / e0.len() as f64;
    (m1, m0)
}

/// The multiplier that equalizes the truncated group means.
pub fn solve_lambda(probs: &GroupProbs, rates: GroupRates) -> Result<f64> {
    solve_lambda_slices(&probs.e1, &probs.e0, rates)
}

pub(crate) fn solve_lambda_slices(e1: &[f64], e0: &[f64], rates: GroupRates) -> Result<f64> {
    if e1.is_empty() || e0.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut s1 = e1.to_vec();
    let mut s0 = e0.to_vec();
    s1.sort_by(f64::total_cmp);
    s0.sort_by(f64::total_cmp);
    // Summing in sorted order makes identical multisets compare exactly equal.
    let mean1 = s1.iter().sum::<f64>() / s1.len() as f64;
    let mean0 = s0.iter().sum::<f64>() / s0.len() as f64;
    if mean1 == mean0 {
        return Ok(0.0);
    }
    if mean1 > mean0 {
        s1.reverse();
        Ok(solve_positive(&s1, &s0, rates.p_gamma1, rates.p_gamma0))
    } else {
        // flip the group roles and negate
        s0.reverse();
        Ok(-solve_positive(&s0, &s1, rates.p_gamma0, rates.p_gamma1))
    }
}

/// Requires mean(hi) > mean(lo); `hi` sorted decreasing, `lo` increasing.
fn solve_positive(hi: &[f64], lo: &[f64], p1: f64, p0: f64) -> f64 {
    let n1 = hi.len() as f64;
    let n0 = lo.len() as f64;
    // suffix sums of the still-untruncated entries
    let tail1 = suffix_sums(hi);
    let tail0 = suffix_sums(lo);
    let (mut k1, mut k0) = (0usize, 0usize);

    let gap = |u: f64, k1: usize, k0: usize| {
        (tail1[k1] + k1 as f64 * p1 * u) / n1 - (tail0[k0] + k0 as f64 * (1.0 - p0 * u)) / n0
    };

    loop {
        let next1 = hi.get(k1).map(|&p| p / p1);
        let next0 = lo.get(k0).map(|&p| (1.0 - p) / p0);
        let take_hi = match (next1, next0) {
            (Some(a), Some(b)) => a >= b,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let u_next = if take_hi { next1.unwrap() } else { next0.unwrap() };
        // Before the first move the gap is the (positive) raw mean gap.
        if (k1 + k0 > 0 && gap(u_next, k1, k0) <= 0.0) || u_next <= 0.0 {
            break;
        }
        if take_hi {
            k1 += 1;
        } else {
            k0 += 1;
        }
    }

    let slope = k1 as f64 * p1 / n1 + k0 as f64 * p0 / n0;
    let u = (tail0[k0] / n0 + k0 as f64 / n0 - tail1[k1] / n1) / slope;
    1.0 / u
}

fn suffix_sums(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len() + 1];
    for i in (0..v.len()).rev() {
        out[i] = out[i + 1] + v[i];
    }
    out
}
