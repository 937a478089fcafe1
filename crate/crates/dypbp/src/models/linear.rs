//! Ordinary least squares with an intercept.
//!
//! Columns are standardized internally (the raw feature scales span twelve
//! orders of magnitude, and squaring them in normal equations would destroy
//! the precision the score labels need), then the slope vector is the
//! minimum-norm least-squares solution from a rank-revealing SVD. One-hot
//! blocks are collinear with the intercept by construction; the pseudo-
//! inverse handles that rank deficiency without regularization. Only if the
//! SVD solve fails does `ridge_eps` enter the normal-equations diagonal as
//! a fallback.

use nalgebra::{DMatrix, DVector};

use super::ModelError;
use crate::features::Dataset;

#[derive(Debug, Clone)]
pub struct LinearParams {
    /// Diagonal added to the normal equations only in the rank-deficient
    /// fallback path.
    pub ridge_eps: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self { ridge_eps: 1e-8 }
    }
}

#[derive(Debug)]
pub(crate) struct LinearModel {
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Slopes in standardized space.
    slopes: Vec<f64>,
    label_mean: f64,
}

impl LinearModel {
    pub(crate) fn fit(train: &Dataset, ridge_eps: f64) -> Result<Self, ModelError> {
        let n = train.len();
        let p = train.width();
        let label_mean = train.labels.iter().sum::<f64>() / n as f64;

        let mut means = vec![0.0; p];
        for row in &train.rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut scales = vec![0.0; p];
        for row in &train.rows {
            for ((s, m), v) in scales.iter_mut().zip(&means).zip(row) {
                let d = v - m;
                *s += d * d;
            }
        }
        for s in &mut scales {
            *s = (*s / n as f64).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }

        let design = DMatrix::from_fn(n, p, |i, j| (train.rows[i][j] - means[j]) / scales[j]);
        let centered = DVector::from_fn(n, |i, _| train.labels[i] - label_mean);

        let slopes = solve_min_norm(&design, &centered)
            .or_else(|| solve_ridge(&design, &centered, ridge_eps))
            .ok_or_else(|| ModelError::SolveFailed("singular design and ridge fallback failed".into()))?;

        Ok(Self { means, scales, slopes: slopes.iter().copied().collect(), label_mean })
    }

    pub(crate) fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter()
            .map(|row| {
                let mut y = self.label_mean;
                for (((v, m), s), b) in
                    row.iter().zip(&self.means).zip(&self.scales).zip(&self.slopes)
                {
                    y += b * (v - m) / s;
                }
                y
            })
            .collect()
    }

    /// (intercept, slopes) mapped back to the raw column space.
    pub(crate) fn original_coefficients(&self) -> (f64, Vec<f64>) {
        let slopes: Vec<f64> =
            self.slopes.iter().zip(&self.scales).map(|(b, s)| b / s).collect();
        let intercept = self.label_mean
            - slopes.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        (intercept, slopes)
    }
}

fn solve_min_norm(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = max_sv * design.nrows().max(design.ncols()) as f64 * f64::EPSILON;
    let solution = svd.solve(rhs, eps).ok()?;
    let column = solution.column(0).into_owned();
    column.iter().all(|v| v.is_finite()).then_some(column)
}

fn solve_ridge(design: &DMatrix<f64>, rhs: &DVector<f64>, ridge_eps: f64) -> Option<DVector<f64>> {
    let p = design.ncols();
    let mut gram = design.transpose() * design;
    let eps = if ridge_eps > 0.0 { ridge_eps } else { 1e-8 };
    for i in 0..p {
        gram[(i, i)] += eps;
    }
    let projected = design.transpose() * rhs;
    let solution = gram.cholesky()?.solve(&projected);
    solution.iter().all(|v| v.is_finite()).then_some(solution)
}
