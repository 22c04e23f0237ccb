//! Text formats for benchmark reports, model inspection and predictions.
//!
//! Everything here is comma-separated with `#` block markers, so reports diff
//! cleanly and load into any CSV reader after splitting on the markers.

use crate::error::Result;
use crate::eval::{summarize, BenchmarkSummary, EvalReport, SplitOutcome};
use crate::inference::Prediction;
use crate::model_core::{reshaping_curve, ConstraintSide, Truncation};
use crate::training::Model;

pub const BENCHMARK_HEADER: &str = "# fair-logloss benchmark report v1";

const SPLIT_COLUMNS: [&str; 14] = [
    "model",
    "split",
    "seed",
    "n_test",
    "error",
    "dp_violation",
    "eopp_violation",
    "eodds_violation",
    "prob_dp_violation",
    "prob_eopp_violation",
    "prob_eodds_violation",
    "log_loss",
    "fallbacks",
    "status",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

fn csv_line(fields: &[String]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields)?;
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn split_row(model: &str, o: &SplitOutcome) -> Vec<String> {
    let mut row = vec![model.to_string(), o.split.to_string(), o.seed.to_string()];
    match &o.report {
        Ok(r) => {
            row.extend([
                r.n_test.to_string(),
                num(r.error_rate),
                opt(r.dp_violation),
                opt(r.eopp_violation),
                opt(r.eodds_violation),
                opt(r.probabilistic.dp),
                opt(r.probabilistic.eopp),
                opt(r.probabilistic.eodds),
                num(r.log_loss),
                r.fallbacks.to_string(),
                "ok".to_string(),
            ]);
        }
        Err(msg) => {
            row.extend((0..10).map(|_| "NA".to_string()));
            row.push(format!("error: {msg}"));
        }
    }
    row
}

/// Per-split rows for both models followed by a mean/std summary block.
pub fn benchmark_report(summary: &BenchmarkSummary) -> Result<String> {
    let fair_name = summary.kind.short_name();
    let mut out = String::new();
    out.push_str(BENCHMARK_HEADER);
    out.push('\n');
    out.push_str(&format!("# config {}\n", summary.fingerprint()));
    out.push_str(&csv_line(&SPLIT_COLUMNS.map(String::from))?);
    for (f, b) in summary.fair.iter().zip(&summary.baseline) {
        out.push_str(&csv_line(&split_row(fair_name, f))?);
        out.push_str(&csv_line(&split_row("baseline", b))?);
    }
    out.push_str("# summary\n");
    out.push_str("model,metric,mean,std,count\n");
    for (name, outcomes) in [(fair_name, &summary.fair), ("baseline", &summary.baseline)] {
        for m in summarize(outcomes) {
            out.push_str(&csv_line(&[
                name.to_string(),
                m.metric.to_string(),
                opt(m.mean),
                opt(m.std),
                m.count.to_string(),
            ])?);
        }
    }
    Ok(out)
}

/// One-row-per-metric rendering of a single evaluation.
pub fn eval_report(r: &EvalReport) -> String {
    let rows = [
        ("n_test", r.n_test.to_string()),
        ("error", num(r.error_rate)),
        ("dp_violation", opt(r.dp_violation)),
        ("eopp_violation", opt(r.eopp_violation)),
        ("eodds_violation", opt(r.eodds_violation)),
        ("positive_rate_a1", opt(r.positive_rate_a1)),
        ("positive_rate_a0", opt(r.positive_rate_a0)),
        ("prob_dp_violation", opt(r.probabilistic.dp)),
        ("prob_eopp_violation", opt(r.probabilistic.eopp)),
        ("prob_eodds_violation", opt(r.probabilistic.eodds)),
        ("log_loss", num(r.log_loss)),
        ("fallbacks", r.fallbacks.to_string()),
    ];
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn side_name(side: ConstraintSide) -> &'static str {
    match side {
        ConstraintSide::Gamma1 => "gamma1",
        ConstraintSide::Gamma0 => "gamma0",
        ConstraintSide::Neither => "neither",
    }
}

/// Clamp thresholds of `model`, then reshaping curves for each `lambda / p`.
pub fn inspect_report(model: &Model, curve_points: &[f64], n_points: usize) -> Result<String> {
    let mut out = String::from("# thresholds\nconstraint,group,kind,value\n");
    for (name, side, t) in model.thresholds() {
        let (kind, value) = match t {
            Some(Truncation::Cap(v)) => ("cap", num(v)),
            Some(Truncation::Floor(v)) => ("floor", num(v)),
            None => ("none", "NA".to_string()),
        };
        out.push_str(&format!("{name},{},{kind},{value}\n", side_name(side)));
    }
    if !curve_points.is_empty() {
        out.push_str("# curve\nlambda_over_p,side,p_hat,q\n");
        for &r in curve_points {
            for side in [ConstraintSide::Gamma1, ConstraintSide::Gamma0] {
                for (p, q) in reshaping_curve(r, side, n_points)? {
                    out.push_str(&format!("{},{},{},{}\n", num(r), side_name(side), num(p), num(q)));
                }
            }
        }
    }
    Ok(out)
}

pub fn predictions_csv(preds: &[Prediction]) -> String {
    let mut out = String::from("row,prob_positive,hard_label\n");
    for (i, p) in preds.iter().enumerate() {
        out.push_str(&format!("{i},{},{}\n", num(p.prob_positive), p.hard_label));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{BenchmarkConfig, Violations};
    use crate::fairness::CriterionKind;

    fn report(err: f64) -> EvalReport {
        let v = Violations {
            dp: Some(0.1),
            eopp: None,
            eodds: None,
            positive_rate_a1: Some(0.5),
            positive_rate_a0: Some(0.4),
        };
        EvalReport {
            n_test: 10,
            error_rate: err,
            dp_violation: Some(0.1),
            eopp_violation: None,
            eodds_violation: None,
            positive_rate_a1: Some(0.5),
            positive_rate_a0: Some(0.4),
            probabilistic: v,
            log_loss: 0.6,
            fallbacks: 0,
        }
    }

    #[test]
    fn benchmark_layout() {
        let outcome = |split, r| SplitOutcome { split, seed: split as u64 + 5, report: r };
        let s = BenchmarkSummary {
            kind: CriterionKind::DemographicParity,
            config: BenchmarkConfig::default(),
            fair: vec![outcome(0, Ok(report(0.2))), outcome(1, Err("bad, split".into()))],
            baseline: vec![outcome(0, Ok(report(0.1))), outcome(1, Err("bad, split".into()))],
        };
        let text = benchmark_report(&s).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], BENCHMARK_HEADER);
        assert!(lines[2].starts_with("model,split,seed"));
        assert!(lines[3].starts_with("dp,0,5,10,0.2,0.1,NA,NA"));
        assert!(lines[5].ends_with("\"error: bad, split\""));
        assert!(text.contains("# summary\n"));
        assert!(text.contains("dp,error,0.2,0,1\n"));
        assert!(text.contains("baseline,eopp_violation,NA,NA,0\n"));
    }

    #[test]
    fn eval_layout() {
        let text = eval_report(&report(0.25));
        assert!(text.contains("error,0.25\n"));
        assert!(text.contains("eodds_violation,NA\n"));
    }
}
