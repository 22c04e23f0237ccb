//! Test-set metrics, the repeated-split benchmark and the regularization sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{apply, fit_transform, split_raw, RawData};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fairness::CriterionKind;
use crate::inference::predict_batch_or_base;
use crate::training::{train, Model, TrainConfig};

/// Regularization grid used when none is given.
pub const DEFAULT_C_GRID: [f64; 9] = [0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

const LOGLOSS_EPS: f64 = 1e-15;

/// Group gaps of a set of decisions. `None` when a needed group is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub dp: Option<f64>,
    pub eopp: Option<f64>,
    pub eodds: Option<f64>,
    pub positive_rate_a1: Option<f64>,
    pub positive_rate_a0: Option<f64>,
}

/// Violations of decisions `d` (hard labels or probabilities).
pub fn violations(d: &[f64], groups: &[u8], labels: &[u8]) -> Violations {
    let mean_where = |pred: &dyn Fn(usize) -> bool| {
        let (mut s, mut n) = (0.0, 0usize);
        for (i, v) in d.iter().enumerate() {
            if pred(i) {
                s += v;
                n += 1;
            }
        }
        (n > 0).then(|| s / n as f64)
    };
    let gap = |cond: &dyn Fn(usize) -> bool| {
        let m1 = mean_where(&|i| groups[i] == 1 && cond(i));
        let m0 = mean_where(&|i| groups[i] == 0 && cond(i));
        Some((m1? - m0?).abs())
    };
    let rate_a1 = mean_where(&|i| groups[i] == 1);
    let rate_a0 = mean_where(&|i| groups[i] == 0);
    let eopp = gap(&|i| labels[i] == 1);
    let eneg = gap(&|i| labels[i] == 0);
    Violations {
        dp: gap(&|_| true),
        eopp,
        eodds: eopp.zip(eneg).map(|(a, b)| a + b),
        positive_rate_a1: rate_a1,
        positive_rate_a0: rate_a0,
    }
}

/// Mean negative log-likelihood of binary labels.
pub fn log_loss(probs: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOGLOSS_EPS, 1.0 - LOGLOSS_EPS);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_test: usize,
    pub error_rate: f64,
    pub dp_violation: Option<f64>,
    pub eopp_violation: Option<f64>,
    pub eodds_violation: Option<f64>,
    pub positive_rate_a1: Option<f64>,
    pub positive_rate_a0: Option<f64>,
    /// The same gaps measured on predicted probabilities instead of decisions.
    pub probabilistic: Violations,
    pub log_loss: f64,
    /// Rows whose label marginalization was degenerate and fell back to the base sigmoid.
    pub fallbacks: usize,
}

pub fn evaluate(model: &Model, test: &Dataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let (preds, fallbacks) = predict_batch_or_base(model, test)?;
    if fallbacks > 0 {
        log::warn!("{fallbacks} predictions used the base probability fallback");
    }
    let hard: Vec<f64> = preds.iter().map(|p| f64::from(p.hard_label)).collect();
    let probs: Vec<f64> = preds.iter().map(|p| p.prob_positive).collect();
    let wrong = preds
        .iter()
        .zip(test.labels())
        .filter(|(p, &y)| p.hard_label != y)
        .count();
    let v = violations(&hard, test.groups(), test.labels());
    Ok(EvalReport {
        n_test: test.len(),
        error_rate: wrong as f64 / test.len() as f64,
        dp_violation: v.dp,
        eopp_violation: v.eopp,
        eodds_violation: v.eodds,
        positive_rate_a1: v.positive_rate_a1,
        positive_rate_a0: v.positive_rate_a0,
        probabilistic: violations(&probs, test.groups(), test.labels()),
        log_loss: log_loss(&probs, test.labels()),
        fallbacks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub train: TrainConfig,
    pub n_splits: usize,
    pub split_fraction: f64,
    pub base_seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            train: TrainConfig::default(),
            n_splits: 20,
            split_fraction: 0.7,
            base_seed: 0,
        }
    }
}

/// Result of one model on one split; failures are kept as messages.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub split: usize,
    pub seed: u64,
    pub report: std::result::Result<EvalReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator); zero for a single value.
    pub std: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSummary {
    pub kind: CriterionKind,
    pub config: BenchmarkConfig,
    pub fair: Vec<SplitOutcome>,
    pub baseline: Vec<SplitOutcome>,
}

pub const METRICS: [&str; 5] = ["error", "dp_violation", "eopp_violation", "eodds_violation", "log_loss"];

pub fn metric_value(report: &EvalReport, metric: &str) -> Option<f64> {
    match metric {
        "error" => Some(report.error_rate),
        "dp_violation" => report.dp_violation,
        "eopp_violation" => report.eopp_violation,
        "eodds_violation" => report.eodds_violation,
        "log_loss" => Some(report.log_loss),
        _ => None,
    }
}

pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

pub fn summarize(outcomes: &[SplitOutcome]) -> Vec<MetricSummary> {
    METRICS
        .iter()
        .map(|&metric| {
            let values: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.report.as_ref().ok())
                .filter_map(|r| metric_value(r, metric))
                .collect();
            let (mean, std) = mean_std(&values);
            MetricSummary {
                metric,
                mean,
                std,
                count: values.len(),
            }
        })
        .collect()
}

impl BenchmarkSummary {
    pub fn fair_summary(&self) -> Vec<MetricSummary> {
        summarize(&self.fair)
    }

    pub fn baseline_summary(&self) -> Vec<MetricSummary> {
        summarize(&self.baseline)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.fair.iter().map(|o| o.seed).collect()
    }

    pub fn fingerprint(&self) -> String {
        format!(
            "criterion={};splits={};fraction={};seed={};{}",
            self.kind,
            self.config.n_splits,
            self.config.split_fraction,
            self.config.base_seed,
            self.config.train.fingerprint()
        )
    }
}

fn run_split(raw: &RawData, kind: CriterionKind, cfg: &BenchmarkConfig, seed: u64) -> Result<(EvalReport, EvalReport)> {
    let (train_raw, test_raw) = split_raw(raw, cfg.split_fraction, seed)?;
    let (train_set, stats) = fit_transform(&train_raw)?;
    let test_set = apply(&stats, &test_raw)?;
    let fair = train(&train_set, kind, &cfg.train)?;
    let base = train(&train_set, CriterionKind::Unconstrained, &cfg.train)?;
    Ok((evaluate(&fair, &test_set)?, evaluate(&base, &test_set)?))
}

/// Trains the fair model and the unconstrained baseline on every split.
///
/// Splits run in parallel; results are ordered by split index.
pub fn run_benchmark(raw: &RawData, kind: CriterionKind, cfg: &BenchmarkConfig) -> Result<BenchmarkSummary> {
    if cfg.n_splits == 0 {
        return Err(Error::InvalidArgument("n_splits must be at least 1".into()));
    }
    if !(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {} outside (0, 1)",
            cfg.split_fraction
        )));
    }
    cfg.train.validate()?;
    let results: Vec<(u64, Result<(EvalReport, EvalReport)>)> = (0..cfg.n_splits)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.base_seed.wrapping_add(i as u64);
            (seed, run_split(raw, kind, cfg, seed))
        })
        .collect();
    let mut fair = Vec::with_capacity(cfg.n_splits);
    let mut baseline = Vec::with_capacity(cfg.n_splits);
    for (split, (seed, r)) in results.into_iter().enumerate() {
        let (f, b) = match r {
            Ok((f, b)) => (Ok(f), Ok(b)),
            Err(e) => {
                log::warn!("split {split} (seed {seed}) failed: {e}");
                (Err(e.to_string()), Err(e.to_string()))
            }
        };
        fair.push(SplitOutcome { split, seed, report: f });
        baseline.push(SplitOutcome { split, seed, report: b });
    }
    Ok(BenchmarkSummary {
        kind,
        config: cfg.clone(),
        fair,
        baseline,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best_c: f64,
    /// Held-out log loss per grid value, in grid order.
    pub losses: Vec<(f64, f64)>,
}

/// Picks `C` by held-out log loss; ties go to the larger `C`.
pub fn sweep_regularization(
    raw: &RawData,
    kind: CriterionKind,
    grid: &[f64],
    validation_fraction: f64,
    seed: u64,
    base: &TrainConfig,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty regularization grid".into()));
    }
    let (train_raw, val_raw) = split_raw(raw, 1.0 - validation_fraction, seed)?;
    if val_raw.is_empty() {
        return Err(Error::InvalidArgument("validation split is empty".into()));
    }
    let (train_set, stats) = fit_transform(&train_raw)?;
    let val_set = apply(&stats, &val_raw)?;
    let losses = grid
        .par_iter()
        .map(|&c| {
            let model = train(&train_set, kind, &base.clone().with_reg_c(c))?;
            Ok((c, evaluate(&model, &val_set)?.log_loss))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = losses[0];
    for &(c, l) in &losses[1..] {
        if l < best.1 || (l == best.1 && c > best.0) {
            best = (c, l);
        }
    }
    Ok(SweepResult { best_c: best.0, losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_count() {
        let v = violations(&[1.0, 0.0, 0.0, 0.0], &[1, 1, 0, 0], &[1, 0, 1, 0]);
        assert_eq!(v.dp, Some(0.5));
        assert_eq!(v.eopp, Some(1.0));
        assert_eq!(v.eodds, Some(1.0));
    }

    #[test]
    fn constant_classifier_is_fair() {
        let v = violations(&[1.0; 6], &[1, 0, 1, 0, 1, 0], &[1, 1, 0, 0, 1, 0]);
        assert_eq!(v.dp, Some(0.0));
        assert_eq!(v.eodds, Some(0.0));
    }

    #[test]
    fn missing_group_is_undefined() {
        let v = violations(&[1.0, 0.0], &[1, 1], &[1, 0]);
        assert_eq!(v.dp, None);
        assert_eq!(v.positive_rate_a0, None);
        let v = violations(&[1.0, 0.0, 1.0], &[1, 0, 1], &[1, 1, 0]);
        assert!(v.eopp.is_some() && v.eodds.is_none());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn log_loss_clamps() {
        assert!(log_loss(&[0.0], &[1]).is_finite());
        assert!((log_loss(&[0.5, 0.5], &[1, 0]) - 2f64.ln()).abs() < 1e-15);
    }
}
