//! Property tests for the weighted-forest invariants.

mod common;

use proptest::prelude::*;
use shiftforest::{
    effective_sample_size, fit_forest, split_gain, Dataset, ForestControls, ImportanceWeights,
    Matrix,
};

#[derive(Debug, Clone)]
struct SmallProblem {
    n: usize,
    features: Vec<f64>,
    responses: Vec<f64>,
    weights: Vec<f64>,
    query: Vec<f64>,
}

const P: usize = 2;

fn small_problem() -> impl Strategy<Value = SmallProblem> {
    (12usize..36).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(-5.0f64..5.0, n * P),
            proptest::collection::vec(-10.0f64..10.0, n),
            proptest::collection::vec(0.05f64..4.0, n),
            proptest::collection::vec(-5.0f64..5.0, P),
        )
            .prop_map(|(n, features, responses, weights, query)| SmallProblem {
                n,
                features,
                responses,
                weights,
                query,
            })
    })
}

fn fit(problem: &SmallProblem, weights: Vec<f64>, seed: u64) -> shiftforest::WeightedForest<f64> {
    let data = Dataset::new(
        Matrix::from_vec(problem.features.clone(), problem.n, P).unwrap(),
        Some(problem.responses.clone()),
        (0..P).map(|j| format!("x{j}")).collect(),
    )
    .unwrap();
    let controls = ForestControls {
        n_trees: 6,
        mtry: Some(1),
        nodesize: 2,
        max_terminal_nodes: None,
        min_gain_fraction: None,
        sample_fraction: 0.8,
        with_replacement: true,
        seed,
    };
    fit_forest(&data, &ImportanceWeights::from_raw(weights).unwrap(), &controls).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forest_weights_are_a_probability_vector(problem in small_problem()) {
        let forest = fit(&problem, problem.weights.clone(), 11);
        let r = forest.forest_weights(&problem.query).unwrap();
        prop_assert!(r.iter().all(|&v| v >= 0.0));
        let total: f64 = r.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "sum {total}");
    }

    #[test]
    fn mean_matches_weight_representation_and_range(problem in small_problem()) {
        let forest = fit(&problem, problem.weights.clone(), 13);
        let r = forest.forest_weights(&problem.query).unwrap();
        let mean = forest.predict_mean(&problem.query).unwrap();
        let from_weights: f64 = r
            .iter()
            .zip(forest.responses())
            .map(|(&w, &y)| w * y)
            .sum();
        prop_assert!((mean - from_weights).abs() <= 1e-10, "{mean} vs {from_weights}");

        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &w) in r.iter().enumerate() {
            if w > 0.0 {
                lo = lo.min(forest.responses()[i]);
                hi = hi.max(forest.responses()[i]);
            }
        }
        prop_assert!(mean >= lo - 1e-12 && mean <= hi + 1e-12);
    }

    #[test]
    fn quantiles_are_monotone_in_level(problem in small_problem()) {
        let forest = fit(&problem, problem.weights.clone(), 17);
        let r = forest.forest_weights(&problem.query).unwrap();
        let levels = [0.05, 0.2, 0.4, 0.5, 0.6, 0.8, 0.95];
        let mut previous = f64::NEG_INFINITY;
        for &p in &levels {
            let q = forest.quantile_from_weights(&r, p).unwrap();
            prop_assert!(q >= previous, "quantile dropped from {previous} to {q} at p={p}");
            previous = q;
        }
    }

    #[test]
    fn power_of_two_weight_scaling_is_bit_exact(problem in small_problem()) {
        let forest = fit(&problem, problem.weights.clone(), 19);
        let scaled: Vec<f64> = problem.weights.iter().map(|w| w * 8.0).collect();
        let forest_scaled = fit(&problem, scaled, 19);
        prop_assert_eq!(forest.trees().len(), forest_scaled.trees().len());
        for (a, b) in forest.trees().iter().zip(forest_scaled.trees().iter()) {
            prop_assert_eq!(a.nodes().len(), b.nodes().len());
        }
        let pa = forest.predict_mean(&problem.query).unwrap();
        let pb = forest_scaled.predict_mean(&problem.query).unwrap();
        prop_assert_eq!(pa.to_bits(), pb.to_bits());
    }

    // Arbitrary rescaling perturbs candidate gains by a few ulps, so a
    // near-tied argmax can flip and move a leaf boundary; exact structural
    // invariance is only guaranteed for power-of-two scales (tested above,
    // bitwise). For arbitrary scales the invariance is asserted where the
    // normalization cancels within a fixed structure: the weighted OOB of a
    // fitted forest under scaled weight arguments.
    #[test]
    fn weighted_oob_invariant_to_weight_argument_scaling(
        problem in small_problem(),
        scale in 0.01f64..50.0,
    ) {
        use shiftforest::OobMode;
        let data = Dataset::new(
            Matrix::from_vec(problem.features.clone(), problem.n, P).unwrap(),
            Some(problem.responses.clone()),
            (0..P).map(|j| format!("x{j}")).collect(),
        )
        .unwrap();
        let forest = fit(&problem, problem.weights.clone(), 23);
        let scaled: Vec<f64> = problem.weights.iter().map(|w| w * scale).collect();
        let a = forest.oob_error(&data, OobMode::Weighted(&problem.weights));
        let b = forest.oob_error(&data, OobMode::Weighted(&scaled));
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.error - b.error).abs() <= 1e-12 * a.error.abs().max(1.0));
                prop_assert_eq!(a.skipped, b.skipped);
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "OOB feasibility diverged: {other:?}"),
        }
    }

    #[test]
    fn split_gain_invariant_to_response_shift(
        problem in small_problem(),
        shift in -50.0f64..50.0,
        threshold in -4.0f64..4.0,
    ) {
        let x = Matrix::from_vec(problem.features.clone(), problem.n, P).unwrap();
        let rows: Vec<usize> = (0..problem.n).collect();
        let shifted: Vec<f64> = problem.responses.iter().map(|y| y + shift).collect();
        let a = split_gain(&x, &problem.responses, &rows, &problem.weights, 0, threshold);
        let b = split_gain(&x, &shifted, &rows, &problem.weights, 0, threshold);
        match (a, b) {
            (Some(ga), Some(gb)) => {
                prop_assert!((ga - gb).abs() <= 1e-9 * ga.abs().max(1.0), "{ga} vs {gb}")
            }
            (None, None) => {}
            other => prop_assert!(false, "admissibility diverged: {other:?}"),
        }
    }

    #[test]
    fn n_eff_bounds_and_scale_invariance(
        weights in proptest::collection::vec(0.0f64..10.0, 2..40),
        scale in 0.001f64..1000.0,
    ) {
        prop_assume!(weights.iter().any(|&w| w > 0.0));
        let n_eff = effective_sample_size(&weights).unwrap();
        prop_assert!(n_eff >= 1.0 - 1e-12);
        prop_assert!(n_eff <= weights.len() as f64 + 1e-9);
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let scaled_n_eff = effective_sample_size(&scaled).unwrap();
        prop_assert!((n_eff - scaled_n_eff).abs() <= 1e-9 * n_eff);
    }
}
