//! With unit weights the weighted path must reduce exactly (bitwise) to the
//! plain unweighted algorithm on the same randomization stream.

mod common;

use common::reference::{fit_ref_forest, RefNode};
use rand::Rng;
use shiftforest::rng::seeded_rng;
use shiftforest::{
    fit_forest, Dataset, ForestControls, ImportanceWeights, Matrix, OobMode, TreeNode,
    WeightedForest,
};

fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset<f64> {
    let mut rng = seeded_rng(seed);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut signal = 0.0;
        for j in 0..p {
            let v: f64 = rng.random::<f64>() * 3.0;
            signal += v * (j as f64 + 1.0).sin();
            x.push(v);
        }
        y.push(signal.sin() * 2.0 + rng.random::<f64>() * 0.3);
    }
    Dataset::new(
        Matrix::from_vec(x, n, p).unwrap(),
        Some(y),
        (0..p).map(|j| format!("x{j}")).collect(),
    )
    .unwrap()
}

fn assert_same_structure(forest: &WeightedForest<f64>, reference: &common::reference::RefForest) {
    assert_eq!(forest.trees().len(), reference.trees.len());
    for (wt, rt) in forest.trees().iter().zip(reference.trees.iter()) {
        assert_eq!(wt.resample_indices(), &rt.resample[..]);
        assert_eq!(wt.nodes().len(), rt.nodes.len());
        for (wn, rn) in wt.nodes().iter().zip(rt.nodes.iter()) {
            match (wn, rn) {
                (
                    TreeNode::Internal {
                        feature_index: wf,
                        threshold: wz,
                        left: wl,
                        right: wr,
                    },
                    RefNode::Internal {
                        feature_index: rf,
                        threshold: rz,
                        left: rl,
                        right: rr,
                    },
                ) => {
                    assert_eq!(wf, rf);
                    assert_eq!(wz.to_bits(), rz.to_bits());
                    assert_eq!((wl, wr), (rl, rr));
                }
                (
                    TreeNode::Terminal {
                        member_rows: wrows,
                        member_weights: wweights,
                        weight_total: wtot,
                        prediction: wpred,
                    },
                    RefNode::Terminal {
                        member_rows: rrows,
                        member_counts: rcounts,
                        count_total: rtot,
                        prediction: rpred,
                    },
                ) => {
                    assert_eq!(wrows, rrows);
                    let wbits: Vec<u64> = wweights.iter().map(|v| v.to_bits()).collect();
                    let rbits: Vec<u64> = rcounts.iter().map(|v| v.to_bits()).collect();
                    assert_eq!(wbits, rbits);
                    assert_eq!(wtot.to_bits(), rtot.to_bits());
                    assert_eq!(wpred.to_bits(), rpred.to_bits());
                }
                _ => panic!("node kinds diverge"),
            }
        }
    }
}

fn controls(seed: u64, with_replacement: bool, max_nodes: Option<usize>) -> ForestControls {
    ForestControls {
        n_trees: 25,
        mtry: Some(2),
        nodesize: 3,
        max_terminal_nodes: max_nodes,
        min_gain_fraction: None,
        sample_fraction: 0.7,
        with_replacement,
        seed,
    }
}

#[test]
fn unit_weights_reproduce_reference_bitwise() {
    for (seed, with_replacement, max_nodes) in
        [(5u64, false, None), (6, true, None), (7, false, Some(6))]
    {
        let data = random_dataset(80, 3, seed);
        let weights = ImportanceWeights::uniform(80);
        let ctl = controls(seed, with_replacement, max_nodes);
        let forest = fit_forest(&data, &weights, &ctl).unwrap();
        let reference = fit_ref_forest(&data, &ctl);
        assert_same_structure(&forest, &reference);

        // Predictions, forest weights and quantiles agree bitwise on fresh
        // query points.
        let queries = random_dataset(40, 3, seed + 1000);
        for r in 0..queries.n_rows() {
            let x = queries.features().row(r);
            let w_mean = forest.predict_mean(x).unwrap();
            let r_mean = reference.predict_mean(x);
            assert_eq!(w_mean.to_bits(), r_mean.to_bits());

            let ww = forest.forest_weights(x).unwrap();
            let rw = reference.forest_weights(x);
            for (a, b) in ww.iter().zip(rw.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for p in [0.1, 0.5, 0.9] {
                let wq = forest.conditional_quantile(x, p).unwrap();
                let rq = reference.quantile(x, p);
                assert_eq!(wq.to_bits(), rq.to_bits());
            }
        }

        // Both OOB modes agree with the unweighted reference exactly.
        let w_oob = forest.oob_error(&data, OobMode::Uniform).unwrap();
        let w_oob_weighted = forest
            .oob_error(&data, OobMode::Weighted(weights.effective()))
            .unwrap();
        let (r_oob, r_skipped) = reference.oob_uniform(&data);
        assert_eq!(w_oob.skipped, r_skipped);
        assert_eq!(w_oob.error.to_bits(), r_oob.to_bits());
        assert_eq!(w_oob_weighted.error.to_bits(), r_oob.to_bits());
    }
}

#[test]
fn scaled_uniform_weights_also_match_reference() {
    // Weight-scale invariance meets the uniform reduction: w = 2^k exactly.
    let data = random_dataset(60, 2, 11);
    let ctl = controls(11, false, None);
    let weights = ImportanceWeights::from_raw(vec![4.0; 60]).unwrap();
    let forest = fit_forest(&data, &weights, &ctl).unwrap();
    let reference = fit_ref_forest(&data, &ctl);
    let queries = random_dataset(20, 2, 12);
    for r in 0..queries.n_rows() {
        let x = queries.features().row(r);
        assert_eq!(
            forest.predict_mean(x).unwrap().to_bits(),
            reference.predict_mean(x).to_bits()
        );
    }
}
