use proptest::prelude::*;

use fair_logloss::data::split_indices;
use fair_logloss::eval::{evaluate, violations};
use fair_logloss::inference::predict_dp;
use fair_logloss::lambda_solver::{solve_lambda, truncated_group_means, GroupProbs};
use fair_logloss::model_core::{approximator_probability, predictor_probability, truncation, Truncation};
use fair_logloss::{predict, train, ConstraintSide, CriterionKind, Dataset, GroupRates, TrainConfig};

fn probs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0 - 1e-6, 1..60)
}

fn rates() -> impl Strategy<Value = GroupRates> {
    (0.01f64..0.99).prop_flat_map(|p1| (Just(p1), 0.01f64..=1.0 - p1)).prop_map(|(p1, p0)| GroupRates::new(p1, p0).unwrap())
}

fn side() -> impl Strategy<Value = ConstraintSide> {
    prop_oneof![Just(ConstraintSide::Gamma1), Just(ConstraintSide::Gamma0)]
}

fn small_dataset() -> impl Strategy<Value = Dataset> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, any::<bool>(), any::<bool>()), 12..40).prop_filter_map(
        "needs both groups and labels in each group",
        |rows| {
            let feats: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0, r.1]).collect();
            let groups: Vec<u8> = rows.iter().map(|r| u8::from(r.2)).collect();
            let labels: Vec<u8> = rows.iter().map(|r| u8::from(r.3)).collect();
            let cells = [(0, 0), (0, 1), (1, 0), (1, 1)];
            let complete = cells.iter().all(|&(a, y)| groups.iter().zip(&labels).any(|(&g, &l)| g == a && l == y));
            complete.then(|| Dataset::from_rows(&feats, groups, labels).unwrap())
        },
    )
}

fn fast_config() -> TrainConfig {
    TrainConfig {
        max_iters: 200,
        ..TrainConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solved_multiplier_closes_the_gap(e1 in probs(), e0 in probs(), r in rates()) {
        let gp = GroupProbs::new(e1, e0).unwrap();
        let lambda = solve_lambda(&gp, r).unwrap();
        let (m1, m0) = truncated_group_means(&gp, r, lambda);
        prop_assert!((m1 - m0).abs() <= 1e-8, "gap {} at lambda {}", m1 - m0, lambda);
    }

    #[test]
    fn swapping_groups_negates_the_multiplier(e1 in probs(), e0 in probs(), r in rates()) {
        let a = solve_lambda(&GroupProbs::new(e1.clone(), e0.clone()).unwrap(), r).unwrap();
        let b = solve_lambda(&GroupProbs::new(e0, e1).unwrap(), r.swapped()).unwrap();
        prop_assert!((a + b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn reshaped_probabilities_stay_in_unit_interval(
        rho in 0.0f64..=1.0,
        lambda in -50.0f64..50.0,
        r in rates(),
        s in side(),
    ) {
        let p = predictor_probability(rho, s, lambda, r);
        let q = approximator_probability(p, s, lambda, r);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=1.0).contains(&q));
    }

    #[test]
    fn approximator_hits_endpoints_at_thresholds(lambda in prop_oneof![-50.0f64..-0.5, 0.5f64..50.0], r in rates(), s in side()) {
        if let Some(t) = truncation(s, lambda, r) {
            let q = approximator_probability(t.value(), s, lambda, r);
            match t {
                Truncation::Cap(_) => prop_assert!((q - 1.0).abs() <= 1e-9, "cap q = {q}"),
                Truncation::Floor(_) => prop_assert!(q.abs() <= 1e-9, "floor q = {q}"),
            }
        }
    }

    #[test]
    fn split_is_a_partition(n in 1usize..500, f in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, test) = split_indices(n, f, seed).unwrap();
        prop_assert_eq!(train.len(), (f * n as f64 - 1e-9).ceil() as usize);
        let mut all: Vec<usize> = train.into_iter().chain(test).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn constant_classifier_has_no_parity_violation(
        labels in prop::collection::vec(0u8..2, 2..50),
        groups in prop::collection::vec(0u8..2, 2..50),
        d in 0u8..2,
    ) {
        let n = labels.len().min(groups.len());
        let v = violations(&vec![f64::from(d); n], &groups[..n], &labels[..n]);
        if let Some(dp) = v.dp {
            prop_assert_eq!(dp, 0.0);
        }
        if let (Some(eodds), Some(eopp)) = (v.eodds, v.eopp) {
            prop_assert_eq!(eodds, 0.0);
            prop_assert_eq!(eopp, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parity_prediction_is_monotone_in_score(d in small_dataset(), a in 0u8..2) {
        let model = train(&d, CriterionKind::DemographicParity, &fast_config()).unwrap();
        // walk along the weight direction so the score grows with t
        let w = &model.theta.0;
        let mut last = -1.0;
        for k in 0..40 {
            let t = -10.0 + 0.5 * f64::from(k);
            let mut x: Vec<f64> = w.iter().map(|v| v * t).collect();
            *x.last_mut().unwrap() = 1.0;
            let p = predict_dp(&model, &x, a).unwrap().prob_positive;
            prop_assert!(p >= last - 1e-12, "{p} after {last}");
            last = p;
        }
    }

    #[test]
    fn evaluation_ignores_row_order(d in small_dataset(), rot in 1usize..11) {
        let model = train(&d, CriterionKind::EqualizedOpportunity, &fast_config()).unwrap();
        let n = d.len();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let a = evaluate(&model, &d).unwrap();
        let b = evaluate(&model, &d.subset(&order)).unwrap();
        prop_assert_eq!(a.n_test, b.n_test);
        prop_assert!((a.error_rate - b.error_rate).abs() <= 1e-12);
        prop_assert_eq!(a.dp_violation.map(|v| (v * 1e9).round()), b.dp_violation.map(|v| (v * 1e9).round()));
        prop_assert_eq!(a.eopp_violation.map(|v| (v * 1e9).round()), b.eopp_violation.map(|v| (v * 1e9).round()));
        prop_assert!((a.log_loss - b.log_loss).abs() <= 1e-12);
    }

    #[test]
    fn predictions_are_probabilities(d in small_dataset()) {
        for kind in [CriterionKind::DemographicParity, CriterionKind::EqualizedOdds] {
            let model = train(&d, kind, &fast_config()).unwrap();
            for i in 0..d.len() {
                if let Ok(p) = predict(&model, d.row(i), d.group(i)) {
                    prop_assert!((0.0..=1.0).contains(&p.prob_positive));
                    prop_assert_eq!(p.hard_label, u8::from(p.prob_positive > 0.5));
                }
            }
        }
    }
}
