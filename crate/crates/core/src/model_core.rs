//! Parametric distributions of the fair predictor.
//!
//! The feature function is fixed to `phi(x, 1) = [x; 1]` and `phi(x, 0) = 0`,
//! so the untruncated ("base") probability of a positive decision is the
//! logistic sigmoid of `theta . [x; 1]`. The predictor clamps that base
//! probability per group according to the fairness multiplier, and the
//! approximator is a quadratic reshaping of the clamped predictor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `f64` strictly below one.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Moment-matching weights, one per feature including the trailing bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn zeros(dim: usize) -> Self {
        Theta(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `theta . x` for an already bias-augmented feature vector.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                actual: x.len(),
            });
        }
        let s = dot(&self.0, x);
        if !s.is_finite() {
            return Err(Error::NonFinite("score"));
        }
        Ok(s)
    }
}

/// Which side of a fairness constraint an example falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintSide {
    Gamma1,
    Gamma0,
    Neither,
}

/// Empirical frequencies of the two sides of one constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub p_gamma1: f64,
    pub p_gamma0: f64,
}

impl GroupRates {
    pub fn new(p_gamma1: f64, p_gamma0: f64) -> Result<Self> {
        for p in [p_gamma1, p_gamma0] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "group rate {p} outside (0, 1]"
                )));
            }
        }
        Ok(GroupRates { p_gamma1, p_gamma0 })
    }

    pub fn swapped(self) -> Self {
        GroupRates {
            p_gamma1: self.p_gamma0,
            p_gamma0: self.p_gamma1,
        }
    }

    fn rate(&self, side: ConstraintSide) -> Option<f64> {
        match side {
            ConstraintSide::Gamma1 => Some(self.p_gamma1),
            ConstraintSide::Gamma0 => Some(self.p_gamma0),
            ConstraintSide::Neither => None,
        }
    }
}

/// Clamp applied to the base probability of one (side, multiplier) pair.
///
/// A cap bounds the probability from above (the approximator reaches one
/// there); a floor bounds it from below (the approximator reaches zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    Cap(f64),
    Floor(f64),
}

impl Truncation {
    pub fn value(self) -> f64 {
        match self {
            Truncation::Cap(v) | Truncation::Floor(v) => v,
        }
    }

    /// Whether `rho` sits at or beyond the bound. Ties count as truncated.
    pub fn binds(self, rho: f64) -> bool {
        match self {
            Truncation::Cap(c) => rho >= c,
            Truncation::Floor(f) => rho <= f,
        }
    }

    pub fn apply(self, rho: f64) -> f64 {
        match self {
            Truncation::Cap(c) => rho.min(c),
            Truncation::Floor(f) => rho.max(f),
        }
    }
}

/// The clamp for `side` at multiplier `lambda`, or `None` when the side is
/// unconstrained or `lambda` is exactly zero.
pub fn truncation(side: ConstraintSide, lambda: f64, rates: GroupRates) -> Option<Truncation> {
    if lambda == 0.0 {
        return None;
    }
    match (side, lambda > 0.0) {
        (ConstraintSide::Neither, _) => None,
        (ConstraintSide::Gamma1, true) => Some(Truncation::Cap(rates.p_gamma1 / lambda)),
        (ConstraintSide::Gamma0, true) => Some(Truncation::Floor(1.0 - rates.p_gamma0 / lambda)),
        (ConstraintSide::Gamma1, false) => Some(Truncation::Floor(1.0 + rates.p_gamma1 / lambda)),
        (ConstraintSide::Gamma0, false) => Some(Truncation::Cap(-rates.p_gamma0 / lambda)),
    }
}

/// Numerically stable logistic function, kept strictly inside (0, 1).
pub fn sigmoid(s: f64) -> f64 {
    let p = if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

/// `log(1 + e^s)` without overflow.
pub fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Base probability of a positive decision from the two class scores.
///
/// Only the score difference matters.
pub fn base_probability_from_scores(score_pos: f64, score_neg: f64) -> Result<f64> {
    let d = score_pos - score_neg;
    if !d.is_finite() {
        return Err(Error::NonFinite("score"));
    }
    Ok(sigmoid(d))
}

/// `e^{theta . phi(x,1)} / Z_theta(x)` for a bias-augmented `x`.
pub fn base_probability(theta: &Theta, x: &[f64]) -> Result<f64> {
    let s = theta.score(x)?;
    Ok(sigmoid(s))
}

/// Truncated predictor probability `P(yhat = 1 | x, a, y)`.
pub fn predictor_probability(rho_e: f64, side: ConstraintSide, lambda: f64, rates: GroupRates) -> f64 {
    match truncation(side, lambda, rates) {
        Some(t) => t.apply(rho_e).clamp(0.0, 1.0),
        None => rho_e,
    }
}

/// Approximator probability `Q(yhat = 1 | x, a, y)` from the predictor's.
pub fn approximator_probability(p_hat: f64, side: ConstraintSide, lambda: f64, rates: GroupRates) -> f64 {
    let Some(rate) = rates.rate(side) else {
        return p_hat;
    };
    let slope = match side {
        ConstraintSide::Gamma1 => lambda / rate,
        _ => -lambda / rate,
    };
    (p_hat * (1.0 + slope * (1.0 - p_hat))).clamp(0.0, 1.0)
}

/// Samples `(P, Q)` pairs of the reshaping function for a given `lambda / p`.
///
/// The predictor axis covers the feasible range for that multiplier, so a
/// binding cap or floor appears as the last or first sample.
pub fn reshaping_curve(lambda_over_p: f64, side: ConstraintSide, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("n_points must be at least 2".into()));
    }
    if !lambda_over_p.is_finite() {
        return Err(Error::NonFinite("lambda_over_p"));
    }
    let unit = GroupRates {
        p_gamma1: 1.0,
        p_gamma0: 1.0,
    };
    let (lo, hi) = match truncation(side, lambda_over_p, unit) {
        Some(Truncation::Cap(c)) => (0.0, c.min(1.0)),
        Some(Truncation::Floor(f)) => (f.max(0.0), 1.0),
        None => (0.0, 1.0),
    };
    let last = (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            let p = if i + 1 == n_points {
                hi
            } else {
                lo + (hi - lo) * (i as f64 / last)
            };
            (p, approximator_probability(p, side, lambda_over_p, unit))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(p1: f64, p0: f64) -> GroupRates {
        GroupRates::new(p1, p0).unwrap()
    }

    #[test]
    fn base_probability_examples() {
        let theta = Theta(vec![1.0, 0.0]);
        assert_eq!(base_probability(&theta, &[0.0, 1.0]).unwrap(), 0.5);
        let theta = Theta(vec![3f64.ln()]);
        assert!((base_probability(&theta, &[1.0]).unwrap() - 0.75).abs() < 1e-15);
        let p = base_probability(&Theta(vec![50.0]), &[1.0]).unwrap();
        assert!(p > 1.0 - 1e-15 && p < 1.0);
        let p = base_probability(&Theta(vec![-800.0]), &[1.0]).unwrap();
        assert!(p > 0.0 && p < 1e-300);
    }

    #[test]
    fn base_probability_dimension_mismatch() {
        let err = base_probability(&Theta(vec![1.0, 2.0]), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, actual: 1 }));
        let err = base_probability(&Theta(vec![f64::INFINITY]), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn shift_invariance() {
        for c in [-30.0, -1.0, 0.0, 2.5, 100.0] {
            let a = base_probability_from_scores(1.3, -0.4).unwrap();
            let b = base_probability_from_scores(1.3 + c, -0.4 + c).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn predictor_examples() {
        // p/lambda = 0.5
        assert_eq!(predictor_probability(0.8, ConstraintSide::Gamma1, 1.0, rates(0.5, 0.5)), 0.5);
        assert_eq!(predictor_probability(0.3, ConstraintSide::Gamma0, 1.0, rates(0.5, 0.5)), 0.5);
        for side in [ConstraintSide::Gamma1, ConstraintSide::Gamma0, ConstraintSide::Neither] {
            assert_eq!(predictor_probability(0.7, side, 0.0, rates(0.3, 0.2)), 0.7);
        }
        // negative multiplier: floor on group one, cap on group zero
        assert_eq!(predictor_probability(0.1, ConstraintSide::Gamma1, -1.0, rates(0.5, 0.5)), 0.5);
        assert_eq!(predictor_probability(0.9, ConstraintSide::Gamma0, -1.0, rates(0.5, 0.5)), 0.5);
    }

    #[test]
    fn approximator_examples() {
        let q = approximator_probability(0.5, ConstraintSide::Gamma1, 0.4, rates(0.4, 0.6));
        assert!((q - 0.75).abs() < 1e-15);
        assert_eq!(approximator_probability(0.42, ConstraintSide::Neither, 3.0, rates(0.4, 0.6)), 0.42);
        let r = rates(0.3, 0.6);
        let lambda = 0.9;
        let cap = predictor_probability(0.99, ConstraintSide::Gamma1, lambda, r);
        assert!((cap - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(approximator_probability(cap, ConstraintSide::Gamma1, lambda, r), 1.0);
    }

    #[test]
    fn truncation_endpoints_hit_bounds() {
        let r = rates(0.3, 0.45);
        for lambda in [0.5, 1.0, 3.7, -0.5, -1.0, -3.7] {
            for side in [ConstraintSide::Gamma1, ConstraintSide::Gamma0] {
                let Some(t) = truncation(side, lambda, r) else { panic!() };
                let v = t.value();
                if !(0.0..=1.0).contains(&v) {
                    continue;
                }
                let q = approximator_probability(v, side, lambda, r);
                match t {
                    Truncation::Cap(_) => assert!((q - 1.0).abs() < 1e-12, "{side:?} {lambda}"),
                    Truncation::Floor(_) => assert!(q.abs() < 1e-12, "{side:?} {lambda}"),
                }
            }
        }
    }

    #[test]
    fn curve_examples() {
        let ident = reshaping_curve(0.0, ConstraintSide::Gamma1, 11).unwrap();
        assert!(ident.iter().all(|(p, q)| p == q));
        let curve = reshaping_curve(2.0, ConstraintSide::Gamma1, 21).unwrap();
        assert_eq!(*curve.last().unwrap(), (0.5, 1.0));
        let curve = reshaping_curve(1.0, ConstraintSide::Gamma1, 101).unwrap();
        assert!(curve.iter().any(|&(p, q)| p == 0.5 && (q - 0.75).abs() < 1e-15));
        assert!(reshaping_curve(1.0, ConstraintSide::Gamma1, 1).is_err());
    }

    #[test]
    fn curves_are_monotone() {
        for r in [-3.0, -1.0, -0.2, 0.0, 0.5, 1.0, 2.0, 7.0] {
            for side in [ConstraintSide::Gamma1, ConstraintSide::Gamma0, ConstraintSide::Neither] {
                let c = reshaping_curve(r, side, 200).unwrap();
                for w in c.windows(2) {
                    assert!(w[1].0 >= w[0].0);
                    assert!(w[1].1 >= w[0].1 - 1e-15, "r={r} {side:?}");
                }
            }
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
