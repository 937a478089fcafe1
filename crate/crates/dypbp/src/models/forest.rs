//! Bagged regression trees.
//!
//! Each tree trains on a bootstrap resample and greedily splits on the
//! feature/threshold pair that most reduces the summed squared error,
//! considering a random subset of columns per split. Predictions average
//! the per-tree leaf means, so they always stay inside the training-label
//! range. All randomness derives from (seed, tree index), never from
//! scheduling, so fits are reproducible even though trees build in
//! parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::ModelError;
use crate::features::Dataset;
use crate::seed::mix_seed;

#[derive(Debug, Clone)]
pub struct ForestParams {
    pub trees: usize,
    /// None grows trees until the leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of columns considered per split.
    pub feature_subsample: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 100, max_depth: None, min_leaf: 2, feature_subsample: 1.0 / 3.0, seed: 0 }
    }
}

impl ForestParams {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.trees == 0 {
            return Err(ModelError::InvalidParam("trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ModelError::InvalidParam("min_leaf must be >= 1".into()));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(ModelError::InvalidParam(format!(
                "feature_subsample must be in (0, 1], got {}",
                self.feature_subsample
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf(f64),
}

#[derive(Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(value) => return *value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    candidates_per_split: usize,
    nodes: Vec<Node>,
    rng: ChaCha12Rng,
    // scratch buffers reused across splits
    feature_pool: Vec<usize>,
    pairs: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    cost: f64,
}

impl<'a> TreeBuilder<'a> {
    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let n = indices.len();
        let sum: f64 = indices.iter().map(|&i| self.labels[i]).sum();
        // Summation rounding can push the mean a few ulps past the node's
        // own label range; clamp so leaf values stay convex combinations.
        let lo = indices.iter().map(|&i| self.labels[i]).fold(f64::INFINITY, f64::min);
        let hi = indices.iter().map(|&i| self.labels[i]).fold(f64::NEG_INFINITY, f64::max);
        let mean = (sum / n as f64).clamp(lo, hi);

        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return self.push(Node::Leaf(mean));
        }
        let sse: f64 = indices.iter().map(|&i| (self.labels[i] - mean).powi(2)).sum();
        if sse <= 1e-12 {
            return self.push(Node::Leaf(mean));
        }

        let Some(best) = self.best_split(&indices, sse) else {
            return self.push(Node::Leaf(mean));
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            indices.into_iter().partition(|&i| self.rows[i][best.feature] <= best.threshold);
        // Degenerate partitions cannot happen: thresholds sit strictly
        // between distinct sample values.
        let placeholder = self.push(Node::Leaf(mean));
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[placeholder] =
            Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        placeholder
    }

    fn best_split(&mut self, indices: &[usize], parent_sse: f64) -> Option<BestSplit> {
        let p = self.rows[0].len();
        // Partial Fisher-Yates over the feature pool picks the candidate
        // columns for this split.
        for i in 0..self.candidates_per_split {
            let j = self.rng.gen_range(i..p);
            self.feature_pool.swap(i, j);
        }

        let n = indices.len();
        let mut best: Option<BestSplit> = None;
        for c in 0..self.candidates_per_split {
            let feature = self.feature_pool[c];
            self.pairs.clear();
            self.pairs.extend(indices.iter().map(|&i| (self.rows[i][feature], self.labels[i])));
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_sum = 0.0;
            let mut left_sumsq = 0.0;
            let total_sum: f64 = self.pairs.iter().map(|(_, y)| y).sum();
            let total_sumsq: f64 = self.pairs.iter().map(|(_, y)| y * y).sum();

            for i in 1..n {
                let (x_prev, y_prev) = self.pairs[i - 1];
                left_sum += y_prev;
                left_sumsq += y_prev * y_prev;
                if i < self.min_leaf || n - i < self.min_leaf {
                    continue;
                }
                let x_next = self.pairs[i].0;
                if x_prev == x_next {
                    continue;
                }
                let left_n = i as f64;
                let right_n = (n - i) as f64;
                let right_sum = total_sum - left_sum;
                let right_sumsq = total_sumsq - left_sumsq;
                let cost = (left_sumsq - left_sum * left_sum / left_n)
                    + (right_sumsq - right_sum * right_sum / right_n);
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    // The midpoint of two floats less than an ulp apart can
                    // round onto x_next and empty the right child; fall back
                    // to splitting exactly at x_prev.
                    let mut threshold = x_prev + (x_next - x_prev) / 2.0;
                    if !(threshold > x_prev && threshold < x_next) {
                        threshold = x_prev;
                    }
                    best = Some(BestSplit { feature, threshold, cost });
                }
            }
        }
        best.filter(|b| parent_sse - b.cost > 1e-12)
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

#[derive(Debug)]
pub(crate) struct ForestModel {
    trees: Vec<Tree>,
}

impl ForestModel {
    pub(crate) fn fit(train: &Dataset, params: &ForestParams) -> Self {
        let n = train.len();
        let p = train.width();
        let candidates = ((p as f64 * params.feature_subsample).ceil() as usize).clamp(1, p);
        let max_depth = params.max_depth.unwrap_or(usize::MAX);

        let trees: Vec<Tree> = (0..params.trees)
            .into_par_iter()
            .map(|tree_index| {
                let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(params.seed, tree_index as u64));
                let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut builder = TreeBuilder {
                    rows: &train.rows,
                    labels: &train.labels,
                    min_leaf: params.min_leaf,
                    max_depth,
                    candidates_per_split: candidates,
                    nodes: Vec::new(),
                    rng,
                    feature_pool: (0..p).collect(),
                    pairs: Vec::with_capacity(n),
                };
                builder.build(indices, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Self { trees }
    }

    pub(crate) fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.par_iter()
            .map(|row| {
                let mut sum = 0.0;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for tree in &self.trees {
                    let value = tree.predict(row);
                    sum += value;
                    lo = lo.min(value);
                    hi = hi.max(value);
                }
                // Same ulp guard as the leaves: the ensemble mean is a
                // convex combination of tree outputs.
                (sum / self.trees.len() as f64).clamp(lo, hi)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{dataset_from, fit_forest, predict};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn noisy_dataset(seed: u64, n: usize) -> crate::features::Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<f64> = rows
            .iter()
            .map(|r| r[0] * 2.0 + (r[1] * 3.0).sin() + rng.gen_range(-0.1..0.1))
            .collect();
        dataset_from(rows, labels)
    }

    #[test]
    fn constant_labels_predict_the_constant() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let train = dataset_from(rows, vec![3.25; 20]);
        let model = fit_forest(&train, &ForestParams::default()).unwrap();
        for p in predict(&model, &train).unwrap() {
            assert_eq!(p, 3.25);
        }
    }

    #[test]
    fn predictions_stay_in_the_label_range() {
        let train = noisy_dataset(11, 200);
        let lo = train.labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = train.labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let model = fit_forest(&train, &ForestParams::default()).unwrap();
        let probe = noisy_dataset(12, 50);
        for p in predict(&model, &probe).unwrap() {
            assert!(p >= lo && p <= hi, "{p} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn same_seed_gives_identical_predictions() {
        let train = noisy_dataset(21, 150);
        let probe = noisy_dataset(22, 40);
        let params = ForestParams { trees: 25, seed: 99, ..Default::default() };
        let a = predict(&fit_forest(&train, &params).unwrap(), &probe).unwrap();
        let b = predict(&fit_forest(&train, &params).unwrap(), &probe).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let train = noisy_dataset(31, 150);
        let probe = noisy_dataset(32, 40);
        let a = predict(
            &fit_forest(&train, &ForestParams { trees: 25, seed: 1, ..Default::default() }).unwrap(),
            &probe,
        )
        .unwrap();
        let b = predict(
            &fit_forest(&train, &ForestParams { trees: 25, seed: 2, ..Default::default() }).unwrap(),
            &probe,
        )
        .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn forest_learns_a_smooth_signal() {
        let train = noisy_dataset(41, 400);
        let test = noisy_dataset(42, 100);
        let model = fit_forest(&train, &ForestParams::default()).unwrap();
        let preds = predict(&model, &test).unwrap();
        let mae: f64 = preds
            .iter()
            .zip(&test.labels)
            .map(|(p, l)| (p - l).abs())
            .sum::<f64>()
            / preds.len() as f64;
        // Global-mean baseline sits near 1.6 on this signal.
        assert!(mae < 0.8, "forest test MAE {mae}");
    }

    #[test]
    fn invalid_hyperparams_are_rejected() {
        let train = noisy_dataset(51, 20);
        assert!(fit_forest(&train, &ForestParams { trees: 0, ..Default::default() }).is_err());
        assert!(
            fit_forest(&train, &ForestParams { feature_subsample: 0.0, ..Default::default() })
                .is_err()
        );
        assert!(fit_forest(&train, &ForestParams { min_leaf: 0, ..Default::default() }).is_err());
    }
}
