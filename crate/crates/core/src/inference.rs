//! Label-free predictions from a trained model.
//!
//! Demographic parity constrains `P(yhat | x, a)` directly. The label-dependent
//! criteria only define `P(yhat | x, a, y)`, so the true label is marginalized
//! out using the approximator's own estimate of `P(y | x, a)`.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fairness::CriterionKind;
use crate::model_core::{approximator_probability, predictor_probability, sigmoid};
use crate::training::Model;

pub const DECISION_THRESHOLD: f64 = 0.5;

const MIN_DENOMINATOR: f64 = 1e-12;

/// Per-label conditionals behind a label-dependent prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditionals {
    /// `P(yhat = 1 | x, a, y = 1)`
    pub p_given_pos: f64,
    /// `P(yhat = 1 | x, a, y = 0)`
    pub p_given_neg: f64,
    /// `Q(yhat = 1 | x, a, y = 1)`
    pub q_given_pos: f64,
    /// `Q(yhat = 1 | x, a, y = 0)`
    pub q_given_neg: f64,
    /// Marginal `Q(yhat = 1 | x, a)` used as the label weight.
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub prob_positive: f64,
    pub hard_label: u8,
    pub conditionals: Option<Conditionals>,
}

impl Prediction {
    fn new(prob_positive: f64, conditionals: Option<Conditionals>) -> Self {
        Prediction {
            prob_positive,
            hard_label: u8::from(prob_positive > DECISION_THRESHOLD),
            conditionals,
        }
    }
}

fn rho(model: &Model, x: &[f64]) -> Result<f64> {
    Ok(sigmoid(model.theta.score(x)?))
}

fn check_group(a: u8) -> Result<()> {
    if a > 1 {
        return Err(Error::InvalidArgument(format!("protected attribute {a} must be 0 or 1")));
    }
    Ok(())
}

/// `(P, Q)` of a positive decision given the true label `y`.
fn conditional(model: &Model, rho: f64, a: u8, y: u8) -> (f64, f64) {
    match model.clamp_for(a, y) {
        Some((side, lambda, rates)) => {
            let p = predictor_probability(rho, side, lambda, rates);
            (p, approximator_probability(p, side, lambda, rates))
        }
        None => (rho, rho),
    }
}

/// Prediction for a model whose constraint does not involve the label.
///
/// `x` is bias-augmented, as stored in a [`Dataset`].
pub fn predict_dp(model: &Model, x: &[f64], a: u8) -> Result<Prediction> {
    if model.kind().is_label_dependent() {
        return Err(Error::CriterionMismatch {
            trained: model.kind().to_string(),
            requested: "direct prediction",
        });
    }
    check_group(a)?;
    let rho = rho(model, x)?;
    // the label is ignored by the membership rule, so either value works
    let (p, _) = conditional(model, rho, a, 0);
    Ok(Prediction::new(p, None))
}

fn marginal_from(q_pos: f64, q_neg: f64) -> Result<f64> {
    let denom = (1.0 - q_pos) + q_neg;
    if denom < MIN_DENOMINATOR {
        return Err(Error::DegenerateDenominator(denom));
    }
    Ok((q_neg / denom).clamp(0.0, 1.0))
}

/// The approximator's marginal `Q(yhat = 1 | x, a)`.
pub fn marginal_q(model: &Model, x: &[f64], a: u8) -> Result<f64> {
    if !model.kind().is_label_dependent() {
        return Err(Error::CriterionMismatch {
            trained: model.kind().to_string(),
            requested: "label marginalization",
        });
    }
    check_group(a)?;
    let rho = rho(model, x)?;
    let (_, q_pos) = conditional(model, rho, a, 1);
    let (_, q_neg) = conditional(model, rho, a, 0);
    marginal_from(q_pos, q_neg)
}

pub fn predict_label_dependent(model: &Model, x: &[f64], a: u8) -> Result<Prediction> {
    if !model.kind().is_label_dependent() {
        return Err(Error::CriterionMismatch {
            trained: model.kind().to_string(),
            requested: "label marginalization",
        });
    }
    check_group(a)?;
    let rho = rho(model, x)?;
    let (p_pos, q_pos) = conditional(model, rho, a, 1);
    let (p_neg, q_neg) = conditional(model, rho, a, 0);
    let q = marginal_from(q_pos, q_neg)?;
    let prob = (p_pos * q + p_neg * (1.0 - q)).clamp(0.0, 1.0);
    Ok(Prediction::new(
        prob,
        Some(Conditionals {
            p_given_pos: p_pos,
            p_given_neg: p_neg,
            q_given_pos: q_pos,
            q_given_neg: q_neg,
            q,
        }),
    ))
}

/// Dispatches on the model's criterion.
pub fn predict(model: &Model, x: &[f64], a: u8) -> Result<Prediction> {
    if model.kind().is_label_dependent() {
        predict_label_dependent(model, x, a)
    } else {
        predict_dp(model, x, a)
    }
}

/// Like [`predict`], but a degenerate marginalization falls back to the base
/// sigmoid. The flag reports whether the fallback was used.
pub fn predict_or_base(model: &Model, x: &[f64], a: u8) -> Result<(Prediction, bool)> {
    match predict(model, x, a) {
        Err(Error::DegenerateDenominator(_)) => Ok((Prediction::new(rho(model, x)?, None), true)),
        other => other.map(|p| (p, false)),
    }
}

pub fn predict_batch(model: &Model, data: &Dataset) -> Result<Vec<Prediction>> {
    check_dim(model, data)?;
    (0..data.len())
        .into_par_iter()
        .map(|i| predict(model, data.row(i), data.group(i)))
        .collect()
}

/// Batch version of [`predict_or_base`]; returns the number of fallbacks.
pub fn predict_batch_or_base(model: &Model, data: &Dataset) -> Result<(Vec<Prediction>, usize)> {
    check_dim(model, data)?;
    let out: Vec<(Prediction, bool)> = (0..data.len())
        .into_par_iter()
        .map(|i| predict_or_base(model, data.row(i), data.group(i)))
        .collect::<Result<_>>()?;
    let fallbacks = out.iter().filter(|(_, f)| *f).count();
    Ok((out.into_iter().map(|(p, _)| p).collect(), fallbacks))
}

fn check_dim(model: &Model, data: &Dataset) -> Result<()> {
    if model.theta.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.theta.len(),
            actual: data.dim(),
        });
    }
    Ok(())
}

impl Model {
    /// Whether predictions reduce to the base sigmoid.
    pub fn is_unconstrained(&self) -> bool {
        self.kind() == CriterionKind::Unconstrained || self.lambdas.0.iter().all(|&l| l == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{empirical_rates_from, FairnessSpec};
    use crate::model_core::Theta;
    use crate::optim::StopReason;
    use crate::training::{LambdaSet, TrainConfig, TrainDiagnostics};

    fn model(kind: CriterionKind, theta: Vec<f64>, lambdas: Vec<f64>) -> Model {
        let groups = [1, 1, 0, 0, 1, 0, 1, 0];
        let labels = [1, 0, 1, 0, 1, 0, 0, 1];
        let spec = if kind == CriterionKind::Unconstrained {
            FairnessSpec::unconstrained()
        } else {
            empirical_rates_from(&groups, &labels, kind).unwrap()
        };
        Model {
            feature_names: (1..theta.len()).map(|j| format!("x{j}")).collect(),
            theta: Theta(theta),
            lambdas: LambdaSet(lambdas),
            spec,
            config: TrainConfig::default(),
            diagnostics: TrainDiagnostics {
                objective: 0.0,
                grad_norm_inf: 0.0,
                iterations: 0,
                evaluations: 0,
                stop_reason: StopReason::GradientTolerance,
                train_gaps: vec![],
            },
            preprocessing: None,
        }
    }

    #[test]
    fn zero_lambda_is_base_sigmoid() {
        let x = [0.3, 1.0];
        for (kind, n) in [
            (CriterionKind::DemographicParity, 1),
            (CriterionKind::EqualizedOpportunity, 1),
            (CriterionKind::EqualizedOdds, 2),
        ] {
            let m = model(kind, vec![1.2, -0.4], vec![0.0; n]);
            let expect = sigmoid(1.2 * 0.3 - 0.4);
            for a in [0, 1] {
                let p = predict(&m, &x, a).unwrap().prob_positive;
                assert!((p - expect).abs() < 1e-15, "{kind} {p} {expect}");
            }
            if kind.is_label_dependent() {
                assert!((marginal_q(&m, &x, 1).unwrap() - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dp_clamps() {
        // p_gamma1 = p_gamma0 = 0.5; lambda = 1 caps group one and floors group zero at 0.5
        let m = model(CriterionKind::DemographicParity, vec![4.0], vec![1.0]);
        let p = predict_dp(&m, &[1.0], 1).unwrap();
        assert_eq!(p.prob_positive, 0.5);
        assert_eq!(p.hard_label, 0);
        let m = model(CriterionKind::DemographicParity, vec![-4.0], vec![1.0]);
        assert_eq!(predict_dp(&m, &[1.0], 0).unwrap().prob_positive, 0.5);
    }

    #[test]
    fn marginal_examples() {
        assert!((marginal_from(0.4, 0.4).unwrap() - 0.4).abs() < 1e-15);
        assert!((marginal_from(0.8, 0.2).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(marginal_from(1.0, 0.0), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn eopp_negative_label_is_untruncated() {
        let m = model(CriterionKind::EqualizedOpportunity, vec![3.0], vec![2.0]);
        let p = predict_label_dependent(&m, &[1.0], 1).unwrap();
        let c = p.conditionals.unwrap();
        assert_eq!(c.p_given_neg, sigmoid(3.0));
        assert!(c.p_given_pos < c.p_given_neg);
        let expect = c.p_given_pos * c.q + c.p_given_neg * (1.0 - c.q);
        assert_eq!(p.prob_positive, expect);
    }

    #[test]
    fn criterion_mismatch() {
        let m = model(CriterionKind::DemographicParity, vec![0.0], vec![0.0]);
        assert!(matches!(marginal_q(&m, &[1.0], 0), Err(Error::CriterionMismatch { .. })));
        let m = model(CriterionKind::EqualizedOdds, vec![0.0], vec![0.0, 0.0]);
        assert!(matches!(predict_dp(&m, &[1.0], 0), Err(Error::CriterionMismatch { .. })));
    }

    #[test]
    fn degenerate_falls_back() {
        // cap reached given y = 1 and floor reached given y = 0 leave no label signal
        let m = model(CriterionKind::EqualizedOdds, vec![3.0], vec![100.0, -100.0]);
        assert!(matches!(predict(&m, &[1.0], 1), Err(Error::DegenerateDenominator(_))));
        let (p, used) = predict_or_base(&m, &[1.0], 1).unwrap();
        assert!(used);
        assert_eq!(p.prob_positive, sigmoid(3.0));
    }
}
