//! Weighted regression trees.
//!
//! A tree is grown breadth first over a depth-indexed frontier until it
//! reaches the terminal-node budget or runs out of admissible splits. All
//! node statistics (split gains, leaf predictions) are taken under the
//! weighted within-node measure: each resampled row contributes mass
//! proportional to its importance weight, normalized inside the node.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::scalar::Scalar;

use super::ForestControls;

/// A candidate split: feature, threshold and its variance-reduction gain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate<F> {
    pub feature_index: usize,
    pub threshold: F,
    pub gain: F,
}

/// Tree node. Terminal nodes carry the resampled rows that reached them
/// (deduplicated, ascending original row index) together with their
/// accumulated weights, which define the leaf's weighted empirical measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<F> {
    Internal {
        feature_index: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Terminal {
        member_rows: Vec<u32>,
        member_weights: Vec<F>,
        weight_total: F,
        prediction: F,
    },
}

/// A grown tree plus the randomization that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTree<F> {
    pub(crate) nodes: Vec<TreeNode<F>>,
    pub(crate) resample_indices: Vec<u32>,
    pub(crate) seed: u64,
    /// Number of nodes whose total weight underflowed to zero and fell back
    /// to uniform weights.
    pub(crate) zero_weight_fallbacks: u32,
}

impl<F: Scalar> WeightedTree<F> {
    pub fn nodes(&self) -> &[TreeNode<F>] {
        &self.nodes
    }

    pub fn resample_indices(&self) -> &[u32] {
        &self.resample_indices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn zero_weight_fallbacks(&self) -> u32 {
        self.zero_weight_fallbacks
    }

    pub fn n_terminal(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Terminal { .. }))
            .count()
    }

    /// Index of the terminal node containing `x` (strict `<` goes left).
    pub fn leaf_index(&self, x: &[F]) -> usize {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature_index] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                TreeNode::Terminal { .. } => return idx,
            }
        }
    }

    /// Weighted-mean prediction of the leaf containing `x`.
    pub fn predict(&self, x: &[F]) -> F {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Terminal { prediction, .. } => *prediction,
            TreeNode::Internal { .. } => unreachable!("leaf_index returns terminals"),
        }
    }
}

/// Weighted variance-reduction gain of splitting `rows` at `feature < threshold`.
///
/// Means and variances are taken under the node's weight-normalized measure,
/// so scaling all weights by a positive constant leaves the gain unchanged.
/// Returns `None` (candidate skipped) when either child would be empty or
/// carry zero total weight.
pub fn split_gain<F: Scalar>(
    features: &Matrix<F>,
    responses: &[F],
    rows: &[usize],
    weights: &[F],
    feature: usize,
    threshold: F,
) -> Option<F> {
    let mut w_total = F::zero();
    let mut wy = F::zero();
    for &r in rows {
        w_total = w_total + weights[r];
        wy = wy + weights[r] * responses[r];
    }
    if w_total <= F::zero() {
        return None;
    }
    let mean = wy / w_total;

    let mut acc = [(F::zero(), F::zero(), F::zero()); 2]; // (w, s1, s2) per side
    let mut counts = [0usize; 2];
    let mut t1 = F::zero();
    let mut t2 = F::zero();
    for &r in rows {
        let side = usize::from(!(features.get(r, feature) < threshold));
        let w = weights[r];
        let c = responses[r] - mean;
        acc[side].0 = acc[side].0 + w;
        acc[side].1 = acc[side].1 + w * c;
        acc[side].2 = acc[side].2 + w * c * c;
        counts[side] += 1;
        t1 = t1 + w * c;
        t2 = t2 + w * c * c;
    }
    if counts[0] == 0 || counts[1] == 0 || acc[0].0 <= F::zero() || acc[1].0 <= F::zero() {
        return None;
    }
    let var_parent = (t2 / w_total - (t1 / w_total) * (t1 / w_total)).max(F::zero());
    let child_term = |&(w, s1, s2): &(F, F, F)| -> F {
        let m = s1 / w;
        let var = (s2 / w - m * m).max(F::zero());
        w * var
    };
    let gain = var_parent - (child_term(&acc[0]) + child_term(&acc[1])) / w_total;
    Some(gain)
}

/// Grows one weighted regression tree.
///
/// The resample (of size `ceil(sample_fraction * n)`, with or without
/// replacement) and the per-node feature subsets are drawn from a generator
/// seeded with `seed`, so the tree is reproducible from
/// `(data, weights, controls, seed)` alone.
pub fn grow_weighted_tree<F: Scalar>(
    features: &Matrix<F>,
    responses: &[F],
    weights: &[F],
    controls: &ForestControls,
    seed: u64,
) -> Result<WeightedTree<F>> {
    let n = features.rows();
    let p = features.cols();
    controls.validate(p)?;
    if n == 0 {
        return Err(Error::Config("cannot grow a tree on an empty dataset".into()));
    }
    if responses.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: responses.len().min(weights.len()),
        });
    }

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

    // Tree-local copies for cache locality; weights may be mutated by the
    // zero-total-weight fallback.
    let mut local_x: Vec<F> = Vec::with_capacity(k * p);
    for &orig in &resample {
        local_x.extend_from_slice(features.row(orig as usize));
    }
    let local_y: Vec<F> = resample.iter().map(|&i| responses[i as usize]).collect();
    let mut local_w: Vec<F> = resample.iter().map(|&i| weights[i as usize]).collect();

    // Per-feature stable orderings, partitioned in lockstep with `rows` so a
    // node always owns the same contiguous range in every array.
    let mut orders: Vec<Vec<u32>> = (0..p)
        .map(|j| {
            let mut ord: Vec<u32> = (0..k as u32).collect();
            ord.sort_by(|&a, &b| {
                local_x[a as usize * p + j]
                    .partial_cmp(&local_x[b as usize * p + j])
                    .expect("features are finite")
            });
            ord
        })
        .collect();
    let mut rows: Vec<u32> = (0..k as u32).collect();

    let mtry = controls.mtry_for(p);
    let nodesize = controls.nodesize;
    let max_terminal = controls.max_terminal_nodes.unwrap_or(usize::MAX);

    let mut grower = Grower {
        p,
        local_x: &local_x,
        local_y: &local_y,
        local_w: &mut local_w,
        nodes: Vec::new(),
        zero_weight_fallbacks: 0,
        resample: &resample,
        scratch: Vec::with_capacity(k),
    };
    grower.nodes.push(placeholder());

    // Relative-gain floor: a split must reduce the weighted deviance by at
    // least this fraction of the root's weighted deviance.
    let gain_floor = match controls.min_gain_fraction {
        Some(fraction) => {
            let root_w = grower.node_weight(&rows);
            let mut wy = F::zero();
            for &id in rows.iter() {
                wy = wy + grower.local_w[id as usize] * local_y[id as usize];
            }
            let mean = wy / root_w;
            let mut dev = F::zero();
            for &id in rows.iter() {
                let c = local_y[id as usize] - mean;
                dev = dev + grower.local_w[id as usize] * c * c;
            }
            F::from_f64_lossy(fraction) * dev
        }
        None => F::zero(),
    };

    let mut frontier: Vec<VecDeque<Work>> = vec![VecDeque::new()];
    frontier[0].push_back(Work {
        slot: 0,
        start: 0,
        end: k,
    });
    let mut pending = 1usize;
    let mut terminals = 1usize;
    let mut depth = 0usize;

    while pending > 0 && terminals < max_terminal {
        if frontier[depth].is_empty() {
            depth += 1;
            continue;
        }
        let work = frontier[depth].pop_front().expect("non-empty queue");
        pending -= 1;

        let split = grower.try_split(&work, nodesize, mtry, gain_floor, &mut rng, &mut orders, &mut rows);
        match split {
            Some((candidate, left_count)) => {
                let left_slot = grower.nodes.len();
                grower.nodes.push(placeholder());
                let right_slot = grower.nodes.len();
                grower.nodes.push(placeholder());
                grower.nodes[work.slot] = TreeNode::Internal {
                    feature_index: candidate.feature_index,
                    threshold: candidate.threshold,
                    left: left_slot,
                    right: right_slot,
                };
                if frontier.len() <= depth + 1 {
                    frontier.push(VecDeque::new());
                }
                frontier[depth + 1].push_back(Work {
                    slot: left_slot,
                    start: work.start,
                    end: work.start + left_count,
                });
                frontier[depth + 1].push_back(Work {
                    slot: right_slot,
                    start: work.start + left_count,
                    end: work.end,
                });
                pending += 2;
                terminals += 1;
            }
            None => grower.finalize_leaf(&work, &rows),
        }
    }
    // Terminal budget reached: everything still queued becomes a leaf.
    for queue in &mut frontier {
        while let Some(work) = queue.pop_front() {
            grower.finalize_leaf(&work, &rows);
        }
    }

    let nodes = grower.nodes;
    let zero_weight_fallbacks = grower.zero_weight_fallbacks;
    Ok(WeightedTree {
        nodes,
        resample_indices: resample,
        seed,
        zero_weight_fallbacks,
    })
}

#[derive(Clone, Copy)]
struct Work {
    slot: usize,
    start: usize,
    end: usize,
}

fn placeholder<F: Scalar>() -> TreeNode<F> {
    TreeNode::Terminal {
        member_rows: Vec::new(),
        member_weights: Vec::new(),
        weight_total: F::zero(),
        prediction: F::zero(),
    }
}

struct Grower<'a, F> {
    p: usize,
    local_x: &'a [F],
    local_y: &'a [F],
    local_w: &'a mut [F],
    nodes: Vec<TreeNode<F>>,
    zero_weight_fallbacks: u32,
    resample: &'a [u32],
    scratch: Vec<u32>,
}

impl<F: Scalar> Grower<'_, F> {
    #[inline]
    fn x(&self, local: u32, feature: usize) -> F {
        self.local_x[local as usize * self.p + feature]
    }

    /// Total node weight in canonical row order, applying the uniform
    /// fallback when it underflows to zero.
    fn node_weight(&mut self, rows: &[u32]) -> F {
        let mut total = F::zero();
        for &id in rows {
            total = total + self.local_w[id as usize];
        }
        if total == F::zero() {
            for &id in rows {
                self.local_w[id as usize] = F::one();
            }
            self.zero_weight_fallbacks += 1;
            total = F::from_count(rows.len());
        }
        total
    }

    /// Attempts the best admissible split of the node; on success partitions
    /// every order array and returns the candidate plus the left row count.
    fn try_split<R: Rng>(
        &mut self,
        work: &Work,
        nodesize: usize,
        mtry: usize,
        gain_floor: F,
        rng: &mut R,
        orders: &mut [Vec<u32>],
        rows: &mut [u32],
    ) -> Option<(SplitCandidate<F>, usize)> {
        let m = work.end - work.start;
        if m < 2 * nodesize {
            return None;
        }
        let node_rows = &rows[work.start..work.end];
        let w_total = self.node_weight(node_rows);
        let mut wy = F::zero();
        let mut spread = F::zero();
        for &id in node_rows {
            wy = wy + self.local_w[id as usize] * self.local_y[id as usize];
        }
        let mean = wy / w_total;
        for &id in node_rows {
            let c = self.local_y[id as usize] - mean;
            spread = spread + self.local_w[id as usize] * c * c;
        }
        if spread <= F::zero() {
            return None;
        }

        let mut feature_set: Vec<usize> = rand::seq::index::sample(rng, self.p, mtry).into_vec();
        feature_set.sort_unstable();

        let mut best: Option<SplitCandidate<F>> = None;
        // Gains are per-node (weight-normalized); the deviance floor divides
        // through by the node's total weight.
        let mut best_gain = gain_floor / w_total;
        for &j in &feature_set {
            let ord = &orders[j][work.start..work.end];
            // Totals in this feature's scan order.
            let mut tw = F::zero();
            let mut t1 = F::zero();
            let mut t2 = F::zero();
            for &id in ord {
                let w = self.local_w[id as usize];
                let c = self.local_y[id as usize] - mean;
                tw = tw + w;
                t1 = t1 + w * c;
                t2 = t2 + w * c * c;
            }
            let var_parent = (t2 / tw - (t1 / tw) * (t1 / tw)).max(F::zero());

            let mut wl = F::zero();
            let mut s1 = F::zero();
            let mut s2 = F::zero();
            for i in 0..m - 1 {
                let id = ord[i];
                let w = self.local_w[id as usize];
                let c = self.local_y[id as usize] - mean;
                wl = wl + w;
                s1 = s1 + w * c;
                s2 = s2 + w * c * c;

                let v = self.x(id, j);
                let v_next = self.x(ord[i + 1], j);
                if !(v_next > v) {
                    continue;
                }
                let left_count = i + 1;
                if left_count < nodesize || m - left_count < nodesize {
                    continue;
                }
                let wr = tw - wl;
                if !(wl > F::zero()) || !(wr > F::zero()) {
                    continue;
                }
                let half = F::from_f64_lossy(0.5);
                let z = v + (v_next - v) * half;
                if !(z > v && z < v_next) {
                    // Adjacent representable values: midpoint degenerates.
                    continue;
                }
                let ml = s1 / wl;
                let mr = (t1 - s1) / wr;
                let var_l = (s2 / wl - ml * ml).max(F::zero());
                let var_r = ((t2 - s2) / wr - mr * mr).max(F::zero());
                let gain = var_parent - (wl * var_l + wr * var_r) / tw;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(SplitCandidate {
                        feature_index: j,
                        threshold: z,
                        gain,
                    });
                }
            }
        }

        let candidate = best?;
        // Stable partition of every order array (and the canonical rows) so
        // children own contiguous ranges everywhere.
        let left_count = self.partition(work, candidate, orders, rows);
        Some((candidate, left_count))
    }

    fn partition(
        &mut self,
        work: &Work,
        candidate: SplitCandidate<F>,
        orders: &mut [Vec<u32>],
        rows: &mut [u32],
    ) -> usize {
        let p = self.p;
        let feature = candidate.feature_index;
        let threshold = candidate.threshold;
        let local_x = self.local_x;
        let goes_left = |id: u32| local_x[id as usize * p + feature] < threshold;
        let mut left_count = 0usize;
        for order in orders.iter_mut() {
            left_count = stable_partition(
                &mut order[work.start..work.end],
                &mut self.scratch,
                goes_left,
            );
        }
        let rows_left =
            stable_partition(&mut rows[work.start..work.end], &mut self.scratch, goes_left);
        debug_assert_eq!(rows_left, left_count);
        left_count
    }

    fn finalize_leaf(&mut self, work: &Work, rows: &[u32]) {
        let node_rows = &rows[work.start..work.end];
        let w_total = self.node_weight(node_rows);
        let mut wy = F::zero();
        for &id in node_rows {
            wy = wy + self.local_w[id as usize] * self.local_y[id as usize];
        }
        let prediction = wy / w_total;

        // Aggregate copies of the same original row, ascending row index.
        let mut members: Vec<(u32, F)> = node_rows
            .iter()
            .map(|&id| (self.resample[id as usize], self.local_w[id as usize]))
            .collect();
        members.sort_by_key(|&(orig, _)| orig);
        let mut member_rows: Vec<u32> = Vec::with_capacity(members.len());
        let mut member_weights: Vec<F> = Vec::with_capacity(members.len());
        for (orig, w) in members {
            if member_rows.last() == Some(&orig) {
                let last = member_weights.last_mut().expect("non-empty");
                *last = *last + w;
            } else {
                member_rows.push(orig);
                member_weights.push(w);
            }
        }
        let mut weight_total = F::zero();
        for &w in &member_weights {
            weight_total = weight_total + w;
        }

        self.nodes[work.slot] = TreeNode::Terminal {
            member_rows,
            member_weights,
            weight_total,
            prediction,
        };
    }
}

/// Stable in-place partition; returns the number of elements satisfying the
/// predicate (moved to the front, relative order preserved on both sides).
fn stable_partition<T: Copy>(
    slice: &mut [T],
    scratch: &mut Vec<T>,
    mut pred: impl FnMut(T) -> bool,
) -> usize {
    scratch.clear();
    let mut write = 0usize;
    for read in 0..slice.len() {
        let item = slice[read];
        if pred(item) {
            slice[write] = item;
            write += 1;
        } else {
            scratch.push(item);
        }
    }
    slice[write..].copy_from_slice(scratch);
    write
}
