//! Independent unweighted CART/forest implementation used as the
//! equivalence oracle: with unit weights, the weighted path must reproduce
//! this reference bit for bit (structure, predictions, quantiles, OOB).
//!
//! Arithmetic here is written in plain unweighted form (sums of responses,
//! integer counts as divisors) following the same split protocol: midpoint
//! thresholds between consecutive distinct values, gain strictly positive,
//! ties to the smallest feature then smallest threshold, breadth-first
//! growth, and the shared seed-derivation scheme for resamples and feature
//! subsets.

use std::collections::VecDeque;

use rand::Rng;
use shiftforest::rng::{seeded_rng, split_seed, Stream};
use shiftforest::{Dataset, ForestControls, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum RefNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Terminal {
        member_rows: Vec<u32>,
        member_counts: Vec<f64>,
        count_total: f64,
        prediction: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefTree {
    pub nodes: Vec<RefNode>,
    pub resample: Vec<u32>,
}

impl RefTree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                RefNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => idx = if x[*feature_index] < *threshold { *left } else { *right },
                RefNode::Terminal { .. } => return idx,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(x)] {
            RefNode::Terminal { prediction, .. } => *prediction,
            _ => unreachable!(),
        }
    }
}

struct Work {
    slot: usize,
    start: usize,
    end: usize,
}

pub fn grow_ref_tree(
    features: &Matrix<f64>,
    responses: &[f64],
    controls: &ForestControls,
    seed: u64,
) -> RefTree {
    let n = features.rows();
    let p = features.cols();
    let mut rng = seeded_rng(seed);
    let k_n = ((n as f64) * controls.sample_fraction).ceil().max(1.0) as usize;
    let resample: Vec<u32> = if controls.with_replacement {
        (0..k_n).map(|_| rng.random_range(0..n) as u32).collect()
    } else {
        rand::seq::index::sample(&mut rng, n, k_n.min(n))
            .iter()
            .map(|i| i as u32)
            .collect()
    };
    let k = resample.len();

    let mut local_x = Vec::with_capacity(k * p);
    for &orig in &resample {
        local_x.extend_from_slice(features.row(orig as usize));
    }
    let local_y: Vec<f64> = resample.iter().map(|&i| responses[i as usize]).collect();

    let mut orders: Vec<Vec<u32>> = (0..p)
        .map(|j| {
            let mut ord: Vec<u32> = (0..k as u32).collect();
            ord.sort_by(|&a, &b| {
                local_x[a as usize * p + j]
                    .partial_cmp(&local_x[b as usize * p + j])
                    .unwrap()
            });
            ord
        })
        .collect();
    let mut rows: Vec<u32> = (0..k as u32).collect();

    let mtry = controls.mtry_for(p);
    let nodesize = controls.nodesize;
    let max_terminal = controls.max_terminal_nodes.unwrap_or(usize::MAX);

    let mut nodes: Vec<RefNode> = vec![RefNode::Terminal {
        member_rows: vec![],
        member_counts: vec![],
        count_total: 0.0,
        prediction: 0.0,
    }];
    let mut frontier: Vec<VecDeque<Work>> = vec![VecDeque::new()];
    frontier[0].push_back(Work {
        slot: 0,
        start: 0,
        end: k,
    });
    let mut pending = 1usize;
    let mut terminals = 1usize;
    let mut depth = 0usize;

    let x_of = |id: u32, j: usize| local_x[id as usize * p + j];

    while pending > 0 && terminals < max_terminal {
        if frontier[depth].is_empty() {
            depth += 1;
            continue;
        }
        let work = frontier[depth].pop_front().unwrap();
        pending -= 1;
        let m = work.end - work.start;

        let mut split: Option<(usize, f64)> = None;
        let mut left_count_best = 0usize;
        if m >= 2 * nodesize {
            let node_rows = &rows[work.start..work.end];
            let mut sum = 0.0f64;
            for &id in node_rows {
                sum += local_y[id as usize];
            }
            let mean = sum / m as f64;
            let mut spread = 0.0f64;
            for &id in node_rows {
                let c = local_y[id as usize] - mean;
                spread += c * c;
            }
            if spread > 0.0 {
                let mut feature_set: Vec<usize> =
                    rand::seq::index::sample(&mut rng, p, mtry).into_vec();
                feature_set.sort_unstable();

                let mut best_gain = 0.0f64;
                for &j in &feature_set {
                    let ord = &orders[j][work.start..work.end];
                    let mut t1 = 0.0f64;
                    let mut t2 = 0.0f64;
                    for &id in ord {
                        let c = local_y[id as usize] - mean;
                        t1 += c;
                        t2 += c * c;
                    }
                    let m_f = m as f64;
                    let var_parent = (t2 / m_f - (t1 / m_f) * (t1 / m_f)).max(0.0);

                    let mut s1 = 0.0f64;
                    let mut s2 = 0.0f64;
                    for i in 0..m - 1 {
                        let id = ord[i];
                        let c = local_y[id as usize] - mean;
                        s1 += c;
                        s2 += c * c;

                        let v = x_of(id, j);
                        let v_next = x_of(ord[i + 1], j);
                        if !(v_next > v) {
                            continue;
                        }
                        let left_count = i + 1;
                        if left_count < nodesize || m - left_count < nodesize {
                            continue;
                        }
                        let nl = left_count as f64;
                        let nr = m_f - nl;
                        if !(nl > 0.0) || !(nr > 0.0) {
                            continue;
                        }
                        let z = v + (v_next - v) * 0.5;
                        if !(z > v && z < v_next) {
                            continue;
                        }
                        let ml = s1 / nl;
                        let mr = (t1 - s1) / nr;
                        let var_l = (s2 / nl - ml * ml).max(0.0);
                        let var_r = ((t2 - s2) / nr - mr * mr).max(0.0);
                        let gain = var_parent - (nl * var_l + nr * var_r) / m_f;
                        if gain > best_gain {
                            best_gain = gain;
                            split = Some((j, z));
                            left_count_best = left_count;
                        }
                    }
                }
            }
        }

        match split {
            Some((feature, threshold)) => {
                // Stable partition of every order array plus the rows.
                for order in orders.iter_mut() {
                    stable_partition(&mut order[work.start..work.end], |id| {
                        x_of(id, feature) < threshold
                    });
                }
                stable_partition(&mut rows[work.start..work.end], |id| {
                    x_of(id, feature) < threshold
                });
                let left_slot = nodes.len();
                nodes.push(RefNode::Terminal {
                    member_rows: vec![],
                    member_counts: vec![],
                    count_total: 0.0,
                    prediction: 0.0,
                });
                let right_slot = nodes.len();
                nodes.push(RefNode::Terminal {
                    member_rows: vec![],
                    member_counts: vec![],
                    count_total: 0.0,
                    prediction: 0.0,
                });
                nodes[work.slot] = RefNode::Internal {
                    feature_index: feature,
                    threshold,
                    left: left_slot,
                    right: right_slot,
                };
                if frontier.len() <= depth + 1 {
                    frontier.push(VecDeque::new());
                }
                frontier[depth + 1].push_back(Work {
                    slot: left_slot,
                    start: work.start,
                    end: work.start + left_count_best,
                });
                frontier[depth + 1].push_back(Work {
                    slot: right_slot,
                    start: work.start + left_count_best,
                    end: work.end,
                });
                pending += 2;
                terminals += 1;
            }
            None => finalize_leaf(&mut nodes, &work, &rows, &local_y, &resample),
        }
    }
    for queue in &mut frontier {
        while let Some(work) = queue.pop_front() {
            finalize_leaf(&mut nodes, &work, &rows, &local_y, &resample);
        }
    }

    RefTree { nodes, resample }
}

fn finalize_leaf(
    nodes: &mut [RefNode],
    work: &Work,
    rows: &[u32],
    local_y: &[f64],
    resample: &[u32],
) {
    let node_rows = &rows[work.start..work.end];
    let mut sum = 0.0f64;
    for &id in node_rows {
        sum += local_y[id as usize];
    }
    let count_total = node_rows.len() as f64;
    let prediction = sum / count_total;

    let mut members: Vec<u32> = node_rows.iter().map(|&id| resample[id as usize]).collect();
    members.sort_unstable();
    let mut member_rows: Vec<u32> = Vec::new();
    let mut member_counts: Vec<f64> = Vec::new();
    for orig in members {
        if member_rows.last() == Some(&orig) {
            *member_counts.last_mut().unwrap() += 1.0;
        } else {
            member_rows.push(orig);
            member_counts.push(1.0);
        }
    }
    let mut total = 0.0f64;
    for &c in &member_counts {
        total += c;
    }

    nodes[work.slot] = RefNode::Terminal {
        member_rows,
        member_counts,
        count_total: total,
        prediction,
    };
    let _ = count_total;
}

fn stable_partition(slice: &mut [u32], mut pred: impl FnMut(u32) -> bool) -> usize {
    let mut right = Vec::new();
    let mut write = 0usize;
    for read in 0..slice.len() {
        let item = slice[read];
        if pred(item) {
            slice[write] = item;
            write += 1;
        } else {
            right.push(item);
        }
    }
    slice[write..].copy_from_slice(&right);
    write
}

pub struct RefForest {
    pub trees: Vec<RefTree>,
    pub responses: Vec<f64>,
    response_order: Vec<u32>,
}

pub fn fit_ref_forest(dataset: &Dataset<f64>, controls: &ForestControls) -> RefForest {
    let responses = dataset.response().unwrap().to_vec();
    let trees: Vec<RefTree> = (0..controls.n_trees)
        .map(|k| {
            grow_ref_tree(
                dataset.features(),
                &responses,
                controls,
                split_seed(controls.seed, Stream::Tree, k as u64),
            )
        })
        .collect();
    let mut order: Vec<u32> = (0..responses.len() as u32).collect();
    order.sort_by(|&a, &b| {
        responses[a as usize]
            .partial_cmp(&responses[b as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    RefForest {
        trees,
        responses,
        response_order: order,
    }
}

impl RefForest {
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let mut total = 0.0f64;
        for tree in &self.trees {
            total += tree.predict(x);
        }
        total / self.trees.len() as f64
    }

    pub fn forest_weights(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.responses.len()];
        for tree in &self.trees {
            match &tree.nodes[tree.leaf_index(x)] {
                RefNode::Terminal {
                    member_rows,
                    member_counts,
                    count_total,
                    ..
                } => {
                    for (&row, &c) in member_rows.iter().zip(member_counts.iter()) {
                        acc[row as usize] += c / *count_total;
                    }
                }
                _ => unreachable!(),
            }
        }
        let b = self.trees.len() as f64;
        for v in acc.iter_mut() {
            *v /= b;
        }
        acc
    }

    pub fn quantile(&self, x: &[f64], p: f64) -> f64 {
        let weights = self.forest_weights(x);
        let mut cumulative = 0.0f64;
        let mut last_positive = f64::NAN;
        for &i in &self.response_order {
            let w = weights[i as usize];
            if w > 0.0 {
                cumulative += w;
                last_positive = self.responses[i as usize];
                if cumulative >= p {
                    return self.responses[i as usize];
                }
            }
        }
        last_positive
    }

    /// Uniform out-of-bag error with the same skip rule as the main path.
    pub fn oob_uniform(&self, dataset: &Dataset<f64>) -> (f64, usize) {
        let n = dataset.n_rows();
        let mut in_bag = vec![false; n * self.trees.len()];
        for (k, tree) in self.trees.iter().enumerate() {
            for &row in &tree.resample {
                in_bag[k * n + row as usize] = true;
            }
        }
        let mut numerator = 0.0f64;
        let mut denominator = 0.0f64;
        let mut skipped = 0usize;
        for row in 0..n {
            let x = dataset.features().row(row);
            let mut total = 0.0f64;
            let mut count = 0usize;
            for (k, tree) in self.trees.iter().enumerate() {
                if !in_bag[k * n + row] {
                    total += tree.predict(x);
                    count += 1;
                }
            }
            if count == 0 {
                skipped += 1;
                continue;
            }
            let pred = total / count as f64;
            let resid = pred - self.responses[row];
            numerator += resid * resid;
            denominator += 1.0;
        }
        (numerator / denominator, skipped)
    }
}
