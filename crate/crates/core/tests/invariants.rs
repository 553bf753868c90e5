use proptest::prelude::*;

use dpboost::dataset::{AttributeDomain, Dataset};
use dpboost::ensemble::{alphaboost_fit, BoostConfig};
use dpboost::format::{read_model, write_model, Model};
use dpboost::loss::LossSpec;
use dpboost::privacy::{exponential_probabilities, BudgetAccountant, RandomSource};
use dpboost::tree::{induce_tree, unnormalized_risk, AlphaStrategy, PrivateTreeConfig, TreeConfig};
use dpboost::Classifier;

fn small_dataset() -> impl Strategy<Value = Dataset> {
    (4usize..30).prop_flat_map(|m| {
        (
            prop::collection::vec((0u16..4, 0u16..4), m),
            prop::collection::vec(prop::bool::ANY, m),
        )
            .prop_map(|(rows, labels)| {
                let domains = vec![
                    AttributeDomain::new("a", 0.0, 1.0, 4).unwrap(),
                    AttributeDomain::new("b", 0.0, 1.0, 4).unwrap(),
                ];
                let rows = rows.into_iter().map(|(a, b)| vec![a, b]).collect();
                let labels = labels.into_iter().map(|p| if p { 1 } else { -1 }).collect();
                Dataset::new(domains, rows, labels).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bayes_risk_is_concave_and_symmetric(alpha in 0.0f64..=1.0, u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let loss = LossSpec::MAlpha(alpha);
        let mid = loss.bayes_risk(0.5 * (u + v)).unwrap();
        let chord = 0.5 * (loss.bayes_risk(u).unwrap() + loss.bayes_risk(v).unwrap());
        prop_assert!(mid >= chord - 1e-12);
        prop_assert!((loss.bayes_risk(u).unwrap() - loss.bayes_risk(1.0 - u).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn exponential_probabilities_sum_to_one(
        utilities in prop::collection::vec(-50.0f64..50.0, 1..20),
        eps in 1e-3f64..10.0,
    ) {
        let p = exponential_probabilities(&utilities, 3.0, eps).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let best = utilities.iter().cloned().fold(f64::MIN, f64::max);
        for (pi, ui) in p.iter().zip(&utilities) {
            if *ui == best {
                prop_assert!(p.iter().all(|q| q <= pi));
            }
        }
    }

    #[test]
    fn greedy_split_never_raises_risk(ds in small_dataset(), alpha in 0.0f64..=1.0) {
        let w = vec![0.5; ds.len()];
        let cfg = TreeConfig { depth: 3, alpha: AlphaStrategy::Fixed(alpha), privacy: None };
        let t = induce_tree(&ds, &w, &cfg, &mut BudgetAccountant::none(), &mut RandomSource::new(0)).unwrap();
        let root = LossSpec::MAlpha(alpha).perspective_at(
            ds.labels().iter().filter(|&&y| y > 0).count() as f64 * 0.5,
            ds.len() as f64 * 0.5,
        ).unwrap();
        prop_assert!(unnormalized_risk(&t, &ds, &w, alpha) <= root + 1e-9);
        prop_assert!(t.max_depth() <= 3);
    }

    #[test]
    fn private_boosting_spends_exactly_and_round_trips(ds in small_dataset(), eps in 0.01f64..5.0, seed in 0u64..1000) {
        let tree = TreeConfig {
            depth: 2,
            alpha: AlphaStrategy::ObjectiveCalibration,
            privacy: Some(PrivateTreeConfig { epsilon: eps, beta_tree: 0.5, trees: 3, output_bound: 5.0 }),
        };
        let mut acc = BudgetAccountant::new(eps).unwrap();
        let (model, _) = alphaboost_fit(&ds, &BoostConfig::new(3, tree, 5.0), &mut acc, &mut RandomSource::new(seed)).unwrap();
        prop_assert!((acc.spent() - eps).abs() <= 1e-12 * eps.max(1.0));
        let model = Model::Boosted(model);
        let back = read_model(&write_model(&model)).unwrap();
        for i in 0..ds.len() {
            prop_assert_eq!(model.margin(ds.row(i)), back.margin(ds.row(i)));
        }
    }
}
