//! Learning `theta` by minimizing the multiplier-composed convex objective.
//!
//! For every `theta` the fairness multipliers are re-solved exactly, and the
//! per-example loss takes one of three forms:
//!
//! * untruncated: `log(1 + e^s) - y s`
//! * at a cap `c` (approximator probability one): `-log c + (1 - y) s`
//! * at a floor `f` (approximator probability zero): `-log(1 - f) - y s`
//!
//! where `s = theta . [x; 1]`. The regularized objective is the sum of these
//! plus `C/2 |theta|^2`. Its gradient is `sum_i (q_i - y_i) [x_i; 1] + C theta`
//! with `q_i` the approximator probability of example `i`.

use serde::{Deserialize, Serialize};

use crate::data::PreprocessStats;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{empirical_rates, CriterionKind, FairnessSpec};
use crate::lambda_solver::{group_means, solve_lambda_slices};
use crate::model_core::{
    approximator_probability, dot, sigmoid, softplus, truncation, ConstraintSide, GroupRates, Theta, Truncation,
};
use crate::optim::{norm_inf, Lbfgs, LineSearchParams, StopReason};

/// One fairness multiplier per active constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LambdaSet(pub Vec<f64>);

impl LambdaSet {
    pub fn zeros(n: usize) -> Self {
        LambdaSet(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L2 strength `C`.
    pub reg_c: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Relative objective decrease below which training stops.
    pub objective_tol: f64,
    pub line_search: LineSearchParams,
    /// Number of curvature pairs kept by the quasi-Newton direction.
    pub memory: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            reg_c: 0.01,
            max_iters: 2000,
            grad_tol: 1e-6,
            objective_tol: 1e-10,
            line_search: LineSearchParams::default(),
            memory: 10,
        }
    }
}

impl TrainConfig {
    pub fn with_reg_c(mut self, reg_c: f64) -> Self {
        self.reg_c = reg_c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        let ok = self.reg_c >= 0.0
            && self.reg_c.is_finite()
            && self.max_iters > 0
            && self.grad_tol > 0.0
            && self.objective_tol > 0.0
            && ls.initial_step > 0.0
            && ls.backtrack > 0.0
            && ls.backtrack < 1.0
            && ls.sufficient_decrease > 0.0
            && ls.sufficient_decrease < 1.0
            && self.memory > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid training config {self:?}")))
        }
    }

    /// Short stable identifier of the settings, used in reports.
    pub fn fingerprint(&self) -> String {
        let ls = &self.line_search;
        format!(
            "C={};iters={};gtol={:e};otol={:e};step={};bt={};c1={:e};m={}",
            self.reg_c,
            self.max_iters,
            self.grad_tol,
            self.objective_tol,
            ls.initial_step,
            ls.backtrack,
            ls.sufficient_decrease,
            self.memory
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub objective: f64,
    pub grad_norm_inf: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop_reason: StopReason,
    /// Absolute gap of the truncated group means per constraint, training sample.
    pub train_gaps: Vec<f64>,
}

/// A trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub theta: Theta,
    pub lambdas: LambdaSet,
    pub spec: FairnessSpec,
    /// Names of the non-bias features, in `theta` order.
    pub feature_names: Vec<String>,
    pub config: TrainConfig,
    pub diagnostics: TrainDiagnostics,
    pub preprocessing: Option<PreprocessStats>,
}

impl Model {
    pub fn kind(&self) -> CriterionKind {
        self.spec.kind
    }

    /// Multiplier, rates and side for an example with attributes `(a, y)`.
    pub(crate) fn clamp_for(&self, a: u8, y: u8) -> Option<(ConstraintSide, f64, GroupRates)> {
        self.spec
            .assignment(a, y)
            .map(|(c, side)| (side, self.lambdas.0[c], self.spec.constraints[c].rates))
    }

    /// The cap or floor each constraint side applies, per constraint.
    pub fn thresholds(&self) -> Vec<(String, ConstraintSide, Option<Truncation>)> {
        let mut out = Vec::new();
        for (c, lambda) in self.spec.constraints.iter().zip(&self.lambdas.0) {
            for side in [ConstraintSide::Gamma1, ConstraintSide::Gamma0] {
                out.push((c.name.clone(), side, truncation(side, *lambda, c.rates)));
            }
        }
        out
    }
}

/// Value, gradient and multipliers of the objective at one `theta`.
#[derive(Debug, Clone)]
pub struct Objective {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub lambdas: LambdaSet,
}

struct Pass {
    scores: Vec<f64>,
    rho: Vec<f64>,
}

fn forward(theta: &Theta, data: &Dataset) -> Result<Pass> {
    if theta.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: theta.len(),
        });
    }
    let scores: Vec<f64> = data.rows().map(|x| dot(theta.as_slice(), x)).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score"));
    }
    let rho = scores.iter().map(|&s| sigmoid(s)).collect();
    Ok(Pass { scores, rho })
}

type Assignments = [Option<(usize, ConstraintSide)>];

fn check_spec(spec: &FairnessSpec, lambdas: &LambdaSet) -> Result<()> {
    if lambdas.0.len() != spec.constraints.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.constraints.len(),
            actual: lambdas.0.len(),
        });
    }
    Ok(())
}

fn split_groups(rho: &[f64], assign: &Assignments, constraint: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut e1, mut e0) = (Vec::new(), Vec::new());
    for (&p, a) in rho.iter().zip(assign) {
        match a {
            Some((c, ConstraintSide::Gamma1)) if *c == constraint => e1.push(p),
            Some((c, ConstraintSide::Gamma0)) if *c == constraint => e0.push(p),
            _ => {}
        }
    }
    (e1, e0)
}

fn solve_all(rho: &[f64], assign: &Assignments, spec: &FairnessSpec) -> Result<LambdaSet> {
    spec.constraints
        .iter()
        .enumerate()
        .map(|(c, cs)| {
            let (e1, e0) = split_groups(rho, assign, c);
            solve_lambda_slices(&e1, &e0, cs.rates)
        })
        .collect::<Result<Vec<_>>>()
        .map(LambdaSet)
}

/// Loss of one example and its approximator probability.
fn example_terms(s: f64, rho: f64, y: u8, clamp: Option<(ConstraintSide, f64, GroupRates)>) -> (f64, f64) {
    let y = f64::from(y);
    if let Some((side, lambda, rates)) = clamp {
        match truncation(side, lambda, rates) {
            Some(t @ Truncation::Cap(c)) if t.binds(rho) => return (-c.ln() + (1.0 - y) * s, 1.0),
            Some(t @ Truncation::Floor(f)) if t.binds(rho) => return (-(1.0 - f).ln() - y * s, 0.0),
            _ => {
                let q = approximator_probability(rho, side, lambda, rates);
                return (softplus(s) - y * s, q);
            }
        }
    }
    (softplus(s) - y * s, rho)
}

fn accumulate(
    theta: &Theta,
    data: &Dataset,
    spec: &FairnessSpec,
    assign: &Assignments,
    pass: &Pass,
    lambdas: &LambdaSet,
    reg_c: f64,
    want_gradient: bool,
) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; if want_gradient { data.dim() } else { 0 }];
    for i in 0..data.len() {
        let clamp = assign[i].map(|(c, side)| (side, lambdas.0[c], spec.constraints[c].rates));
        let y = data.label(i);
        let (l, q) = example_terms(pass.scores[i], pass.rho[i], y, clamp);
        value += l;
        if want_gradient {
            let r = q - f64::from(y);
            if r != 0.0 {
                for (g, x) in grad.iter_mut().zip(data.row(i)) {
                    *g += r * x;
                }
            }
        }
    }
    let th = theta.as_slice();
    value += 0.5 * reg_c * dot(th, th);
    for (g, t) in grad.iter_mut().zip(th) {
        *g += reg_c * t;
    }
    (value, grad)
}

/// Multipliers equalizing the truncated group means at `theta`.
pub fn solve_lambdas(theta: &Theta, data: &Dataset, spec: &FairnessSpec) -> Result<LambdaSet> {
    let pass = forward(theta, data)?;
    solve_all(&pass.rho, &spec.assignments(data), spec)
}

/// Regularized objective at fixed multipliers.
pub fn loss(theta: &Theta, lambdas: &LambdaSet, data: &Dataset, spec: &FairnessSpec, reg_c: f64) -> Result<f64> {
    check_spec(spec, lambdas)?;
    let pass = forward(theta, data)?;
    let (v, _) = accumulate(theta, data, spec, &spec.assignments(data), &pass, lambdas, reg_c, false);
    if !v.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(v)
}

/// Gradient of the objective, with `lambdas` held at their optimum.
pub fn subgradient(
    theta: &Theta,
    lambdas: &LambdaSet,
    data: &Dataset,
    spec: &FairnessSpec,
    reg_c: f64,
) -> Result<Vec<f64>> {
    check_spec(spec, lambdas)?;
    let pass = forward(theta, data)?;
    let (_, g) = accumulate(theta, data, spec, &spec.assignments(data), &pass, lambdas, reg_c, true);
    Ok(g)
}

/// Objective with the multipliers re-solved at `theta`.
pub fn objective(theta: &Theta, data: &Dataset, spec: &FairnessSpec, reg_c: f64) -> Result<Objective> {
    let assign = spec.assignments(data);
    objective_with(theta, data, spec, &assign, reg_c)
}

fn objective_with(
    theta: &Theta,
    data: &Dataset,
    spec: &FairnessSpec,
    assign: &Assignments,
    reg_c: f64,
) -> Result<Objective> {
    let pass = forward(theta, data)?;
    let lambdas = solve_all(&pass.rho, assign, spec)?;
    let (value, gradient) = accumulate(theta, data, spec, assign, &pass, &lambdas, reg_c, true);
    if !value.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(Objective {
        value,
        gradient,
        lambdas,
    })
}

/// Whether the clamp for `side` is active for `x` at `(theta, lambda)`.
pub fn truncation_indicator(theta: &Theta, x: &[f64], side: ConstraintSide, lambda: f64, rates: GroupRates) -> Result<bool> {
    let rho = sigmoid(theta.score(x)?);
    Ok(truncation(side, lambda, rates).is_some_and(|t| t.binds(rho)))
}

/// `|mean_1 - mean_0|` of predictor probabilities per constraint.
pub fn constraint_gaps(theta: &Theta, lambdas: &LambdaSet, data: &Dataset, spec: &FairnessSpec) -> Result<Vec<f64>> {
    check_spec(spec, lambdas)?;
    let pass = forward(theta, data)?;
    let assign = spec.assignments(data);
    Ok(spec
        .constraints
        .iter()
        .enumerate()
        .map(|(c, cs)| {
            let (e1, e0) = split_groups(&pass.rho, &assign, c);
            if e1.is_empty() || e0.is_empty() {
                return f64::NAN;
            }
            let (m1, m0) = group_means(&e1, &e0, cs.rates, lambdas.0[c]);
            (m1 - m0).abs()
        })
        .collect())
}

pub fn train(data: &Dataset, kind: CriterionKind, config: &TrainConfig) -> Result<Model> {
    let spec = empirical_rates(data, kind)?;
    train_with_spec(data, spec, config)
}

fn solver(config: &TrainConfig) -> Lbfgs {
    Lbfgs {
        memory: config.memory,
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        objective_tol: config.objective_tol,
        line_search: config.line_search,
    }
}

/// Starting point for constrained training: the unconstrained fit.
///
/// At `theta = 0` every base probability is 1/2, the raw group means agree
/// and the multiplier sits exactly where it jumps away from zero, so the
/// objective is not differentiable there and line searches can stall.
fn warm_start(data: &Dataset, spec: &FairnessSpec, config: &TrainConfig) -> Result<Vec<f64>> {
    let zero = vec![0.0; data.dim()];
    if spec.constraints.is_empty() {
        return Ok(zero);
    }
    let plain = FairnessSpec::unconstrained();
    let assign = plain.assignments(data);
    let min = solver(config).minimize(zero, |x| {
        let obj = objective_with(&Theta(x.to_vec()), data, &plain, &assign, config.reg_c)?;
        Ok((obj.value, obj.gradient))
    })?;
    Ok(min.x)
}

/// Trains under an explicit fairness spec, starting from the unconstrained fit.
pub fn train_with_spec(data: &Dataset, spec: FairnessSpec, config: &TrainConfig) -> Result<Model> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let assign = spec.assignments(data);
    let start = warm_start(data, &spec, config)?;
    let min = solver(config).minimize(start, |x| {
        let theta = Theta(x.to_vec());
        match objective_with(&theta, data, &spec, &assign, config.reg_c) {
            Ok(obj) => Ok((obj.value, obj.gradient)),
            Err(Error::NonFinite(_)) => Ok((f64::INFINITY, vec![0.0; x.len()])),
            Err(e) => Err(e),
        }
    })?;
    let theta = Theta(min.x);
    let final_obj = objective_with(&theta, data, &spec, &assign, config.reg_c)?;
    let train_gaps = constraint_gaps(&theta, &final_obj.lambdas, data, &spec)?;
    log::debug!(
        "trained {} in {} iterations ({:?}), objective {}",
        spec.kind,
        min.iterations,
        min.reason,
        final_obj.value
    );
    Ok(Model {
        theta,
        lambdas: final_obj.lambdas,
        spec,
        feature_names: data.feature_names().to_vec(),
        config: config.clone(),
        diagnostics: TrainDiagnostics {
            objective: final_obj.value,
            grad_norm_inf: norm_inf(&final_obj.gradient),
            iterations: min.iterations,
            evaluations: min.evaluations,
            stop_reason: min.reason,
            train_gaps,
        },
        preprocessing: None,
    })
}

/// Trace of accepted objective values; exposed for descent checks.
pub fn train_trace(data: &Dataset, kind: CriterionKind, config: &TrainConfig) -> Result<Vec<f64>> {
    let spec = empirical_rates(data, kind)?;
    let assign = spec.assignments(data);
    let start = warm_start(data, &spec, config)?;
    let min = solver(config).minimize(start, |x| {
        let obj = objective_with(&Theta(x.to_vec()), data, &spec, &assign, config.reg_c)?;
        Ok((obj.value, obj.gradient))
    })?;
    Ok(min.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::empirical_rates_from;

    fn tiny() -> Dataset {
        Dataset::from_rows(
            &[vec![0.5], vec![-1.0], vec![2.0], vec![0.0], vec![1.5], vec![-0.5]],
            vec![1, 1, 1, 0, 0, 0],
            vec![1, 0, 1, 0, 1, 0],
        )
        .unwrap()
    }

    #[test]
    fn zero_theta_loss_is_n_ln2() {
        let d = tiny();
        let spec = empirical_rates(&d, CriterionKind::Unconstrained).unwrap();
        let l = loss(&Theta::zeros(2), &LambdaSet::zeros(0), &d, &spec, 0.3).unwrap();
        assert!((l - 6.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn truncated_positive_example_loss_is_ln2() {
        // one Gamma1 example with y = 1 and base probability above a cap of 0.5
        let d = Dataset::from_rows(&[vec![3.0], vec![0.0]], vec![1, 0], vec![1, 0]).unwrap();
        let spec = empirical_rates_from(d.groups(), d.labels(), CriterionKind::DemographicParity).unwrap();
        let theta = Theta(vec![1.0, 0.0]);
        // p1 = 0.5, so lambda = 1 puts the cap at 0.5; the Gamma0 row sits at 0.5 (floor 0.5, tie)
        let lambdas = LambdaSet(vec![1.0]);
        let l = loss(&theta, &lambdas, &d, &spec, 0.0).unwrap();
        // row 0: -ln 0.5; row 1: floor 0.5 binds at rho = 0.5, -ln(0.5) - 0
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12, "{l}");
        let g = subgradient(&theta, &lambdas, &d, &spec, 0.0).unwrap();
        // row 0 contributes (1 - 1) x = 0, row 1 contributes (0 - 0) x = 0
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn truncated_floor_example_with_positive_label() {
        let d = Dataset::from_rows(&[vec![2.0], vec![-3.0]], vec![1, 0], vec![1, 1]).unwrap();
        let spec = empirical_rates(&d, CriterionKind::DemographicParity).unwrap();
        let theta = Theta(vec![1.0, 0.0]);
        // floor for Gamma0 at 1 - 0.5 / 1 = 0.5 binds the second row
        let g = subgradient(&theta, &LambdaSet(vec![1.0]), &d, &spec, 0.0).unwrap();
        // row 0: cap 0.5 < sigmoid(2) so q = 1, contributes 0; row 1: -[x; 1]
        assert_eq!(g, vec![3.0, -1.0]);
    }

    #[test]
    fn unconstrained_gradient_is_logistic() {
        let d = tiny();
        let spec = FairnessSpec::unconstrained();
        let theta = Theta(vec![0.7, -0.2]);
        let g = subgradient(&theta, &LambdaSet::zeros(0), &d, &spec, 0.5).unwrap();
        let mut expect = vec![0.5 * 0.7, 0.5 * -0.2];
        for i in 0..d.len() {
            let x = d.row(i);
            let r = sigmoid(dot(&theta.0, x)) - f64::from(d.label(i));
            expect[0] += r * x[0];
            expect[1] += r * x[1];
        }
        for (a, b) in g.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_examples() {
        let r = GroupRates::new(0.5, 0.5).unwrap();
        // theta . x = ln 4 gives rho = 0.8
        let theta = Theta(vec![4f64.ln()]);
        assert!(truncation_indicator(&theta, &[1.0], ConstraintSide::Gamma1, 1.0, r).unwrap());
        assert!(!truncation_indicator(&theta, &[1.0], ConstraintSide::Gamma1, 0.0, r).unwrap());
        let theta = Theta(vec![(0.4f64 / 0.6).ln()]);
        assert!(!truncation_indicator(&theta, &[1.0], ConstraintSide::Gamma1, 1.0, r).unwrap());
    }

    #[test]
    fn lambda_count_is_checked() {
        let d = tiny();
        let spec = empirical_rates(&d, CriterionKind::EqualizedOdds).unwrap();
        assert!(loss(&Theta::zeros(2), &LambdaSet::zeros(1), &d, &spec, 0.0).is_err());
    }

    #[test]
    fn training_is_deterministic_and_fair() {
        let d = tiny();
        let cfg = TrainConfig::default();
        let a = train(&d, CriterionKind::DemographicParity, &cfg).unwrap();
        let b = train(&d, CriterionKind::DemographicParity, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.diagnostics.train_gaps[0] <= 1e-8);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = TrainConfig::default();
        cfg.line_search.backtrack = 1.5;
        assert!(train(&tiny(), CriterionKind::DemographicParity, &cfg).is_err());
    }

    #[test]
    fn heavy_regularization_keeps_theta_near_zero() {
        let cfg = TrainConfig::default().with_reg_c(1e6);
        let m = train(&tiny(), CriterionKind::DemographicParity, &cfg).unwrap();
        assert!(m.theta.0.iter().all(|t| t.abs() < 1e-5), "{:?}", m.theta);
    }

    #[test]
    fn mirrored_groups_need_no_multiplier() {
        let rows = [vec![0.3], vec![-1.1], vec![1.9], vec![0.6]];
        let labels = [1, 0, 1, 0];
        let all: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
        let d = Dataset::from_rows(&all, vec![1, 1, 1, 1, 0, 0, 0, 0], labels.repeat(2)).unwrap();
        for kind in [CriterionKind::DemographicParity, CriterionKind::EqualizedOdds] {
            let m = train(&d, kind, &TrainConfig::default()).unwrap();
            assert!(m.lambdas.0.iter().all(|l| l.abs() < 1e-9), "{kind}: {:?}", m.lambdas);
        }
    }

    // One-hot cells where the start point theta = 0 has equal group means,
    // the multiplier's discontinuity. Training used to stall there.
    #[test]
    fn training_leaves_the_equal_means_point() {
        let counts = [[[103, 116], [8, 25]], [[61, 133], [117, 76]], [[49, 28], [56, 93]], [[54, 139], [139, 87]]];
        let (mut rows, mut groups, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (x, by_a) in counts.iter().enumerate() {
            for (a, by_y) in by_a.iter().enumerate() {
                for (y, &k) in by_y.iter().enumerate() {
                    for _ in 0..k {
                        let mut row = vec![0.0; 8];
                        row[2 * x + a] = 1.0;
                        rows.push(row);
                        groups.push(a as u8);
                        labels.push(y as u8);
                    }
                }
            }
        }
        let d = Dataset::from_rows(&rows, groups, labels).unwrap();
        let cfg = TrainConfig::default().with_reg_c(1e-6);
        let m = train(&d, CriterionKind::DemographicParity, &cfg).unwrap();
        let at_zero = d.len() as f64 * 2f64.ln();
        assert!(m.diagnostics.objective < at_zero - 40.0, "{} vs {at_zero}", m.diagnostics.objective);
        assert!(m.lambdas.0[0] != 0.0);
        assert!(m.diagnostics.train_gaps[0] <= 1e-8);
    }

    #[test]
    fn accepted_objectives_never_increase() {
        let trace = train_trace(&tiny(), CriterionKind::EqualizedOdds, &TrainConfig::default()).unwrap();
        assert!(!trace.is_empty());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{trace:?}");
    }
}
