use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::error::{invalid, DociError, Result};

/// Training samples: one row per pixel, one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Array2<f64>,
    /// `true` for cancer (the positive class).
    pub labels: Vec<bool>,
    pub channels: ChannelSet,
}

impl FeatureMatrix {
    pub fn new(rows: Array2<f64>, labels: Vec<bool>, channels: ChannelSet) -> Result<Self> {
        if rows.nrows() != labels.len() {
            return Err(invalid("feature rows and labels differ in length"));
        }
        if rows.ncols() != channels.len() {
            return Err(invalid("feature columns and channel list differ in length"));
        }
        Ok(FeatureMatrix {
            rows,
            labels,
            channels,
        })
    }

    pub fn dims(&self) -> usize {
        self.rows.ncols()
    }

    fn class_rows(&self, positive: bool) -> impl Iterator<Item = ndarray::ArrayView1<'_, f64>> {
        self.rows
            .outer_iter()
            .zip(self.labels.iter())
            .filter(move |(_, &l)| l == positive)
            .map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Priors {
    /// Class frequencies of the training set.
    #[default]
    Empirical,
    Equal,
}

/// Two-class linear discriminant: predict cancer iff `w . x + b > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub channels: ChannelSet,
    /// `[benign, cancer]`.
    pub class_means: [Vec<f64>; 2],
    /// Row-major `d x d`, before regularization.
    pub pooled_covariance: Vec<f64>,
    pub priors: [f64; 2],
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization_lambda: f64,
}

impl LdaModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Ties predict benign.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.score(x) > 0.0
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.weights.len();
        DMatrix::from_row_slice(d, d, &self.pooled_covariance)
    }
}

pub const DEFAULT_LAMBDA: f64 = 1e-6;

pub fn train_lda(features: &FeatureMatrix, lambda: f64) -> Result<LdaModel> {
    train_lda_with(features, lambda, Priors::Empirical)
}

/// Class means, pooled within-class covariance `(S+ + S-) / (n - 2)`,
/// ridge `lambda * trace / d` (or `lambda` when the trace is zero), and
/// `w = Sigma^-1 (mu+ - mu-)`, `b = -w . (mu+ + mu-) / 2 + ln(pi+ / pi-)`.
pub fn train_lda_with(features: &FeatureMatrix, lambda: f64, priors: Priors) -> Result<LdaModel> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda must be nonnegative"));
    }
    let d = features.dims();
    if d == 0 {
        return Err(invalid("no feature columns"));
    }
    let n_pos = features.labels.iter().filter(|l| **l).count();
    let n_neg = features.labels.len() - n_pos;
    if n_pos == 0 {
        return Err(DociError::MissingClass("cancer"));
    }
    if n_neg == 0 {
        return Err(DociError::MissingClass("benign"));
    }
    if n_pos < 2 || n_neg < 2 {
        return Err(invalid("need at least two samples per class"));
    }

    let mean_of = |positive: bool, n: usize| {
        let mut m = DVector::zeros(d);
        for row in features.class_rows(positive) {
            for j in 0..d {
                m[j] += row[j];
            }
        }
        m / n as f64
    };
    let mu_pos = mean_of(true, n_pos);
    let mu_neg = mean_of(false, n_neg);

    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for (positive, mu) in [(true, &mu_pos), (false, &mu_neg)] {
        for row in features.class_rows(positive) {
            let centered = DVector::from_iterator(d, row.iter().copied()) - mu;
            scatter += &centered * centered.transpose();
        }
    }
    let mut sigma = scatter / (n_pos + n_neg - 2) as f64;
    sigma = (&sigma + sigma.transpose()) * 0.5;

    let trace = sigma.trace();
    let ridge = if trace > 0.0 {
        lambda * trace / d as f64
    } else {
        lambda
    };
    let regularized = &sigma + DMatrix::identity(d, d) * ridge;
    let chol = regularized
        .cholesky()
        .ok_or(DociError::SingularCovariance)?;
    let weights = chol.solve(&(&mu_pos - &mu_neg));
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(DociError::SingularCovariance);
    }

    let total = (n_pos + n_neg) as f64;
    let prior = match priors {
        Priors::Empirical => [n_neg as f64 / total, n_pos as f64 / total],
        Priors::Equal => [0.5, 0.5],
    };
    let midpoint = (&mu_pos + &mu_neg) * 0.5;
    let bias = -weights.dot(&midpoint) + (prior[1] / prior[0]).ln();

    Ok(LdaModel {
        channels: features.channels.clone(),
        class_means: [
            mu_neg.iter().copied().collect(),
            mu_pos.iter().copied().collect(),
        ],
        pooled_covariance: sigma.transpose().iter().copied().collect(),
        priors: prior,
        weights: weights.iter().copied().collect(),
        bias,
        regularization_lambda: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_d(neg: &[f64], pos: &[f64]) -> FeatureMatrix {
        let values: Vec<f64> = neg.iter().chain(pos).copied().collect();
        let labels = neg
            .iter()
            .map(|_| false)
            .chain(pos.iter().map(|_| true))
            .collect();
        FeatureMatrix::new(
            Array2::from_shape_vec((values.len(), 1), values).unwrap(),
            labels,
            ChannelSet(vec![10]),
        )
        .unwrap()
    }

    #[test]
    fn threshold_midway_for_point_masses() {
        let m = train_lda(&one_d(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]), 1e-6).unwrap();
        let threshold = -m.bias / m.weights[0];
        assert!((threshold - 0.5).abs() < 1e-9);
        assert!(!m.predict(&[0.49]) && m.predict(&[0.51]));
    }

    #[test]
    fn swapping_labels_negates() {
        let f = one_d(&[0.1, 0.2, 0.15, 0.3], &[0.6, 0.8, 0.7, 0.75]);
        let mut swapped = f.clone();
        swapped.labels.iter_mut().for_each(|l| *l = !*l);
        let a = train_lda(&f, 0.0).unwrap();
        let b = train_lda(&swapped, 0.0).unwrap();
        assert!((a.weights[0] + b.weights[0]).abs() < 1e-9 * a.weights[0].abs());
        assert!((a.bias + b.bias).abs() < 1e-9 * a.bias.abs());
    }

    #[test]
    fn collinear_without_ridge_is_singular() {
        let rows = array![
            [0.0, 0.0],
            [1.0, 2.0],
            [2.0, 4.0],
            [5.0, 10.0],
            [6.0, 12.0],
            [7.0, 14.0]
        ];
        let f = FeatureMatrix::new(
            rows,
            vec![false, false, false, true, true, true],
            ChannelSet(vec![3, 4]),
        )
        .unwrap();
        assert!(matches!(
            train_lda(&f, 0.0),
            Err(DociError::SingularCovariance)
        ));
        assert!(train_lda(&f, 1e-6).is_ok());
    }

    #[test]
    fn missing_class() {
        let f = one_d(&[0.1, 0.2], &[]);
        assert!(matches!(
            train_lda(&f, 0.0),
            Err(DociError::MissingClass("cancer"))
        ));
    }

    #[test]
    fn covariance_is_symmetric() {
        let rows = array![
            [0.1, 0.3],
            [0.2, 0.1],
            [0.4, 0.5],
            [0.9, 0.7],
            [0.8, 1.1],
            [1.0, 0.6]
        ];
        let f = FeatureMatrix::new(
            rows,
            vec![false, false, false, true, true, true],
            ChannelSet(vec![3, 4]),
        )
        .unwrap();
        let m = train_lda(&f, 0.0).unwrap();
        let c = m.covariance();
        assert!((c[(0, 1)] - c[(1, 0)]).abs() < 1e-12);
    }
}
