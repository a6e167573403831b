//! From-scratch tree machinery: Gini classification trees with impurity
//! importances, bootstrap random forests, and softmax gradient-boosted trees
//! reusing the same splitting core in regression mode.

use crate::rng::SeededRng;

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) enum ClassNode {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<ClassNode>,
        right: Box<ClassNode>,
    },
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct ClassificationTree {
    root: ClassNode,
    /// Weighted impurity decrease credited to each feature.
    pub importances: Vec<f64>,
    /// Total impurity decrease of the tree (importances sum to this).
    pub total_decrease: f64,
}

fn gini(counts: &[u64], n: f64) -> f64 {
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

fn majority(counts: &[u64]) -> usize {
    let mut best = 0;
    for c in 1..counts.len() {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

struct ClassTreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    max_depth: usize,
    n_root: f64,
    importances: Vec<f64>,
    total_decrease: f64,
}

impl<'a> ClassTreeBuilder<'a> {
    fn build(&mut self, indices: &mut [usize], depth: usize) -> ClassNode {
        let n = indices.len() as f64;
        let mut counts = vec![0u64; self.classes];
        for &i in indices.iter() {
            counts[self.y[i]] += 1;
        }
        let node_gini = gini(&counts, n);
        if depth >= self.max_depth || indices.len() < 2 || node_gini == 0.0 {
            return ClassNode::Leaf(majority(&counts));
        }

        let d = self.x[0].len();
        let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
        for f in 0..d {
            indices.sort_unstable_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_counts = vec![0u64; self.classes];
            for split in 1..indices.len() {
                left_counts[self.y[indices[split - 1]]] += 1;
                let (prev, cur) = (self.x[indices[split - 1]][f], self.x[indices[split]][f]);
                if prev == cur {
                    continue;
                }
                let nl = split as f64;
                let nr = n - nl;
                let mut right_counts = counts.clone();
                for (r, &l) in right_counts.iter_mut().zip(&left_counts) {
                    *r -= l;
                }
                let decrease = node_gini
                    - (nl / n) * gini(&left_counts, nl)
                    - (nr / n) * gini(&right_counts, nr);
                if best.map_or(true, |(bd, _, _)| decrease > bd) {
                    best = Some((decrease, f, 0.5 * (prev + cur)));
                }
            }
        }
        let Some((decrease, feature, threshold)) = best else {
            return ClassNode::Leaf(majority(&counts));
        };
        if decrease <= 1e-12 {
            return ClassNode::Leaf(majority(&counts));
        }
        self.importances[feature] += (n / self.n_root) * decrease;
        self.total_decrease += (n / self.n_root) * decrease;

        let mid = partition_in_place(self.x, indices, feature, threshold);
        let (left_idx, right_idx) = indices.split_at_mut(mid);
        let left = Box::new(self.build(left_idx, depth + 1));
        let right = Box::new(self.build(right_idx, depth + 1));
        ClassNode::Split {
            feature,
            threshold,
            left,
            right,
        }
    }
}

fn partition_in_place(x: &[Vec<f64>], indices: &mut [usize], feature: usize, t: f64) -> usize {
    let mut mid = 0;
    for i in 0..indices.len() {
        if x[indices[i]][feature] <= t {
            indices.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

pub(crate) fn fit_classification_tree(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    indices: &[usize],
    max_depth: usize,
) -> ClassificationTree {
    let mut builder = ClassTreeBuilder {
        x,
        y,
        classes,
        max_depth,
        n_root: indices.len() as f64,
        importances: vec![0.0; x[0].len()],
        total_decrease: 0.0,
    };
    let mut idx = indices.to_vec();
    let root = builder.build(&mut idx, 0);
    ClassificationTree {
        root,
        importances: builder.importances,
        total_decrease: builder.total_decrease,
    }
}

impl ClassificationTree {
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn predict(&self, row: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                ClassNode::Leaf(c) => return *c,
                ClassNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// Bootstrap ensemble of Gini trees with impurity importances.
pub(crate) struct RandomForest {
    pub trees: Vec<ClassificationTree>,
    #[cfg_attr(not(test), allow(dead_code))]
    classes: usize,
}

pub(crate) fn fit_forest(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    trees: usize,
    max_depth: usize,
    rng: &mut SeededRng,
) -> RandomForest {
    let n = x.len();
    let trees = (0..trees)
        .map(|_| {
            let indices: Vec<usize> = (0..n).map(|_| rng.index(n)).collect();
            fit_classification_tree(x, y, classes, &indices, max_depth)
        })
        .collect();
    RandomForest { trees, classes }
}

impl RandomForest {
    /// Summed importances across trees, one entry per feature.
    pub(crate) fn importances(&self) -> Vec<f64> {
        let d = self.trees[0].importances.len();
        let mut total = vec![0.0; d];
        for tree in &self.trees {
            for (t, &i) in total.iter_mut().zip(&tree.importances) {
                *t += i;
            }
        }
        total
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0u64; self.classes];
        for tree in &self.trees {
            votes[tree.predict(row)] += 1;
        }
        majority(&votes)
    }
}

pub(crate) enum RegNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
}

pub(crate) struct RegressionTree {
    root: RegNode,
}

struct RegTreeBuilder<'a> {
    x: &'a [Vec<f64>],
    r: &'a [f64],
    w: &'a [f64],
    max_depth: usize,
    leaf_scale: f64,
}

impl<'a> RegTreeBuilder<'a> {
    fn leaf(&self, indices: &[usize]) -> RegNode {
        let num: f64 = indices.iter().map(|&i| self.r[i]).sum();
        let den: f64 = indices.iter().map(|&i| self.w[i]).sum();
        RegNode::Leaf(self.leaf_scale * num / den.max(1e-10))
    }

    fn build(&mut self, indices: &mut [usize], depth: usize) -> RegNode {
        let n = indices.len() as f64;
        if depth >= self.max_depth || indices.len() < 2 {
            return self.leaf(indices);
        }
        let sum: f64 = indices.iter().map(|&i| self.r[i]).sum();
        let sum_sq: f64 = indices.iter().map(|&i| self.r[i] * self.r[i]).sum();
        let node_sse = sum_sq - sum * sum / n;

        let d = self.x[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..d {
            indices.sort_unstable_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for split in 1..indices.len() {
                let i = indices[split - 1];
                left_sum += self.r[i];
                left_sq += self.r[i] * self.r[i];
                let (prev, cur) = (self.x[i][f], self.x[indices[split]][f]);
                if prev == cur {
                    continue;
                }
                let nl = split as f64;
                let nr = n - nl;
                let right_sum = sum - left_sum;
                let right_sq = sum_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / nl)
                    + (right_sq - right_sum * right_sum / nr);
                let reduction = node_sse - sse;
                if best.map_or(true, |(br, _, _)| reduction > br) {
                    best = Some((reduction, f, 0.5 * (prev + cur)));
                }
            }
        }
        let Some((reduction, feature, threshold)) = best else {
            return self.leaf(indices);
        };
        if reduction <= 1e-12 {
            return self.leaf(indices);
        }
        let mid = partition_in_place(self.x, indices, feature, threshold);
        let (left_idx, right_idx) = indices.split_at_mut(mid);
        let left = Box::new(self.build(left_idx, depth + 1));
        let right = Box::new(self.build(right_idx, depth + 1));
        RegNode::Split {
            feature,
            threshold,
            left,
            right,
        }
    }
}

impl RegressionTree {
    pub(crate) fn predict(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                RegNode::Leaf(v) => return *v,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// Softmax gradient-boosted trees: per round, one regression tree per class
/// fits the residual with Newton leaf values.
pub(crate) struct GbtModel {
    classes: usize,
    shrinkage: f64,
    rounds: Vec<Vec<RegressionTree>>,
}

pub(crate) fn fit_gbt(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    rounds: usize,
    depth: usize,
    shrinkage: f64,
) -> GbtModel {
    let n = x.len();
    let mut scores = vec![vec![0.0; classes]; n];
    let mut model = GbtModel {
        classes,
        shrinkage,
        rounds: Vec::with_capacity(rounds),
    };
    let leaf_scale = (classes as f64 - 1.0) / classes as f64;
    let mut indices_buf: Vec<usize> = (0..n).collect();
    for _ in 0..rounds {
        let probs: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|&s| (s - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                exps.iter().map(|&e| e / total).collect()
            })
            .collect();
        let mut round_trees = Vec::with_capacity(classes);
        for c in 0..classes {
            let residuals: Vec<f64> = (0..n)
                .map(|i| (if y[i] == c { 1.0 } else { 0.0 }) - probs[i][c])
                .collect();
            let weights: Vec<f64> = (0..n).map(|i| probs[i][c] * (1.0 - probs[i][c])).collect();
            let mut builder = RegTreeBuilder {
                x,
                r: &residuals,
                w: &weights,
                max_depth: depth,
                leaf_scale,
            };
            indices_buf.clear();
            indices_buf.extend(0..n);
            let root = builder.build(&mut indices_buf, 0);
            let tree = RegressionTree { root };
            for (i, row) in x.iter().enumerate() {
                scores[i][c] += shrinkage * tree.predict(row);
            }
            round_trees.push(tree);
        }
        model.rounds.push(round_trees);
    }
    model
}

impl GbtModel {
    pub(crate) fn predict(&self, row: &[f64]) -> usize {
        let mut scores = vec![0.0; self.classes];
        for round in &self.rounds {
            for (c, tree) in round.iter().enumerate() {
                scores[c] += self.shrinkage * tree.predict(row);
            }
        }
        let mut best = 0;
        for c in 1..self.classes {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn grid_data(rng: &mut SeededRng, n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        // label = quadrant of (x0, x1)
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let noise: f64 = rng.gen_range(-1.0..1.0);
            x.push(vec![a, b, noise]);
            y.push((if a > 0.0 { 1 } else { 0 }) + 2 * (if b > 0.0 { 1 } else { 0 }));
        }
        (x, y)
    }

    #[test]
    fn single_tree_learns_axis_aligned_classes() {
        let mut rng = SeededRng::new(1);
        let (x, y) = grid_data(&mut rng, 600);
        let indices: Vec<usize> = (0..x.len()).collect();
        let tree = fit_classification_tree(&x, &y, 4, &indices, 6);
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(row, &label)| tree.predict(row) == label)
            .count();
        assert!(correct as f64 / x.len() as f64 >= 0.98);
        // noise feature earns (almost) nothing
        assert!(tree.importances[2] < 0.05 * tree.total_decrease);
    }

    #[test]
    fn importances_sum_to_total_decrease_per_tree() {
        let mut rng = SeededRng::new(2);
        let (x, y) = grid_data(&mut rng, 500);
        let forest = fit_forest(&x, &y, 4, 10, 8, &mut rng);
        for tree in &forest.trees {
            let sum: f64 = tree.importances.iter().sum();
            assert!(
                (sum - tree.total_decrease).abs() < 1e-12,
                "{sum} vs {}",
                tree.total_decrease
            );
        }
    }

    #[test]
    fn forest_votes_beat_chance_comfortably() {
        let mut rng = SeededRng::new(3);
        let (x, y) = grid_data(&mut rng, 800);
        let forest = fit_forest(&x, &y, 4, 10, 8, &mut rng);
        let (tx, ty) = grid_data(&mut rng, 400);
        let correct = tx
            .iter()
            .zip(&ty)
            .filter(|(row, &label)| forest.predict(row) == label)
            .count();
        assert!(correct as f64 / tx.len() as f64 >= 0.95);
    }

    #[test]
    fn gbt_fits_separable_classes() {
        let mut rng = SeededRng::new(4);
        let (x, y) = grid_data(&mut rng, 800);
        let model = fit_gbt(&x, &y, 4, 40, 3, 0.1);
        let (tx, ty) = grid_data(&mut rng, 400);
        let correct = tx
            .iter()
            .zip(&ty)
            .filter(|(row, &label)| model.predict(row) == label)
            .count();
        assert!(correct as f64 / tx.len() as f64 >= 0.95);
    }
}
