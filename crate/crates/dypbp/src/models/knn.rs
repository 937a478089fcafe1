//! K-nearest-neighbors regression.
//!
//! Predictions are the mean label of the k nearest training rows by
//! Euclidean distance. The default operates on raw columns; standardization
//! is available but off by default, since the mixed unscaled feature
//! magnitudes are exactly what the model comparison studies. Distance ties
//! resolve toward the earlier training row.

use rayon::prelude::*;

use crate::features::Dataset;

#[derive(Debug, Clone)]
pub struct KnnParams {
    pub k: usize,
    pub standardize: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5, standardize: false }
    }
}

#[derive(Debug)]
pub(crate) struct KnnModel {
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
    k: usize,
    scaling: Option<(Vec<f64>, Vec<f64>)>,
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mut means = vec![0.0; p];
    for row in rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; p];
    for row in rows {
        for ((s, m), v) in stds.iter_mut().zip(&means).zip(row) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (means, stds)
}

fn scale_row(row: &[f64], scaling: &Option<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    match scaling {
        Some((means, stds)) => {
            row.iter().zip(means).zip(stds).map(|((v, m), s)| (v - m) / s).collect()
        }
        None => row.to_vec(),
    }
}

impl KnnModel {
    pub(crate) fn fit(train: &Dataset, k: usize, standardize: bool) -> Self {
        let scaling = standardize.then(|| column_stats(&train.rows));
        let rows = train.rows.iter().map(|r| scale_row(r, &scaling)).collect();
        Self { rows, labels: train.labels.clone(), k, scaling }
    }

    pub(crate) fn predict(&self, queries: &[Vec<f64>]) -> Vec<f64> {
        queries
            .par_iter()
            .map(|query| {
                let query = scale_row(query, &self.scaling);
                let mut distances: Vec<(f64, usize)> = self
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let d2: f64 =
                            row.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum();
                        (d2, i)
                    })
                    .collect();
                distances
                    .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                let top = &distances[..self.k];
                top.iter().map(|(_, i)| self.labels[*i]).sum::<f64>() / self.k as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{dataset_from, fit_knn, predict, ModelError};

    fn small() -> crate::features::Dataset {
        dataset_from(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
            vec![10.0, 20.0, 30.0, 40.0],
        )
    }

    #[test]
    fn k1_on_a_training_row_returns_its_label() {
        let train = small();
        let model = fit_knn(&train, 1, false).unwrap();
        let preds = predict(&model, &train).unwrap();
        assert_eq!(preds, vec![10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn k_equals_n_returns_the_global_mean() {
        let train = small();
        let model = fit_knn(&train, 4, false).unwrap();
        let preds = predict(&model, &train).unwrap();
        for p in preds {
            assert_eq!(p, 25.0);
        }
    }

    #[test]
    fn equidistant_tie_goes_to_the_earlier_row() {
        // (0.5, 0.5) sits at squared distance 0.5 from rows 0, 1, and 2;
        // the earliest of the tied rows (label 10) wins the k = 1 slot.
        let train = small();
        let model = fit_knn(&train, 1, false).unwrap();
        let probe = dataset_from(vec![vec![0.5, 0.5]], vec![0.0]);
        let pred = predict(&model, &probe).unwrap()[0];
        assert_eq!(pred, 10.0);
    }

    #[test]
    fn oversized_k_is_rejected() {
        let train = small();
        assert!(matches!(fit_knn(&train, 5, false), Err(ModelError::KTooLarge { k: 5, n: 4 })));
    }

    #[test]
    fn standardization_changes_the_geometry() {
        // One huge-scale column dominates raw distances; standardized
        // distances recover the informative small column.
        let train = dataset_from(
            vec![
                vec![1_000_000.0, 0.0],
                vec![1_000_001.0, 1.0],
                vec![1_000_002.0, 0.0],
                vec![1_000_003.0, 1.0],
            ],
            vec![0.0, 1.0, 0.0, 1.0],
        );
        let probe = dataset_from(vec![vec![1_000_000.0, 1.0]], vec![0.0]);
        let raw = fit_knn(&train, 1, false).unwrap();
        assert_eq!(predict(&raw, &probe).unwrap()[0], 0.0);
        let scaled = fit_knn(&train, 1, true).unwrap();
        assert_eq!(predict(&scaled, &probe).unwrap()[0], 1.0);
    }
}
