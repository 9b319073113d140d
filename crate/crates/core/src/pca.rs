//! Principal component analysis over standardized columns, backed by the
//! Jacobi eigendecomposition. Keeps a fixed component count or enough
//! components to cover a variance threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigh;
use crate::mat::Mat;
use crate::scalar::{cast, Scalar};

/// Off-diagonal tolerance and sweep cap for the eigendecomposition.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// How many components to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComponentRule {
    /// Exactly n components.
    Fixed(usize),
    /// Smallest n whose cumulative explained-variance ratio reaches τ.
    VarianceThreshold(f64),
}

/// Fitted projection: standardization constants, orthonormal component rows,
/// retained eigenvalues, and the full explained-variance spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PcaModel<S: Scalar> {
    pub mean: Vec<S>,
    pub std: Vec<S>,
    /// n×D; row i is the i-th principal axis.
    pub components: Mat<S>,
    /// Length n, descending.
    pub eigenvalues: Vec<S>,
    /// Length D, over every principal axis whether retained or not.
    pub explained_variance_ratio: Vec<S>,
}

impl<S: Scalar> PcaModel<S> {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.components.cols()
    }
}

/// Fit a PCA model.
///
/// Columns are centered and scaled by their sample standard deviation
/// (divisor N−1; zero-variance columns scale by 1), the covariance of the
/// standardized data is eigendecomposed, and each component is oriented so
/// its largest-magnitude entry is positive.
pub fn fit<S: Scalar>(data: &Mat<S>, rule: ComponentRule) -> Result<PcaModel<S>> {
    let n_rows = data.rows();
    let d = data.cols();
    if n_rows < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca needs at least 2 rows, got {n_rows}"
        )));
    }
    if !data.all_finite() {
        return Err(Error::NonFinite("pca input".into()));
    }

    let n_s: S = cast(n_rows as f64);
    let mut mean = vec![S::zero(); d];
    for i in 0..n_rows {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += data[(i, j)];
        }
    }
    for m in mean.iter_mut() {
        *m /= n_s;
    }

    let denom: S = cast((n_rows - 1) as f64);
    let mut var = vec![S::zero(); d];
    for i in 0..n_rows {
        for (j, v) in var.iter_mut().enumerate() {
            let c = data[(i, j)] - mean[j];
            *v += c * c;
        }
    }
    let std: Vec<S> = var
        .iter()
        .map(|&v| {
            let s = (v / denom).sqrt();
            if s > S::zero() {
                s
            } else {
                S::one()
            }
        })
        .collect();

    // standardized copy; covariance of it is the correlation matrix
    let mut z = data.clone();
    for i in 0..n_rows {
        for j in 0..d {
            z[(i, j)] = (z[(i, j)] - mean[j]) / std[j];
        }
    }
    let mut cov: Mat<S> = Mat::zeros(d, d);
    for i in 0..n_rows {
        let row = z.row(i);
        for a in 0..d {
            let ra = row[a];
            for b in a..d {
                cov[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let (raw_eigenvalues, mut vectors) = jacobi_eigh(&cov, cast(JACOBI_TOL), JACOBI_MAX_SWEEPS)?;
    let eigenvalues: Vec<S> = raw_eigenvalues
        .into_iter()
        .map(|l| l.max(S::zero()))
        .collect();

    for r in 0..d {
        let row = vectors.row(r);
        let mut arg = 0;
        for (j, &v) in row.iter().enumerate() {
            if v.abs() > row[arg].abs() {
                arg = j;
            }
        }
        if row[arg] < S::zero() {
            for j in 0..d {
                vectors[(r, j)] = -vectors[(r, j)];
            }
        }
    }

    let total: S = eigenvalues.iter().copied().sum();
    let explained_variance_ratio: Vec<S> = if total > S::zero() {
        eigenvalues.iter().map(|&l| l / total).collect()
    } else {
        vec![S::zero(); d]
    };

    let n_keep = match rule {
        ComponentRule::Fixed(n) => {
            if n == 0 || n > d {
                return Err(Error::InvalidArgument(format!(
                    "component count {n} outside [1, {d}]"
                )));
            }
            n
        }
        ComponentRule::VarianceThreshold(tau) => {
            if !(0.0..=1.0).contains(&tau) || tau <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "variance threshold {tau} outside (0, 1]"
                )));
            }
            let tau_s: S = cast(tau);
            let mut acc = S::zero();
            let mut n = d;
            for (i, &r) in explained_variance_ratio.iter().enumerate() {
                acc += r;
                if acc >= tau_s {
                    n = i + 1;
                    break;
                }
            }
            n
        }
    };

    let mut components = Mat::zeros(n_keep, d);
    for r in 0..n_keep {
        for j in 0..d {
            components[(r, j)] = vectors[(r, j)];
        }
    }

    Ok(PcaModel {
        mean,
        std,
        components,
        eigenvalues: eigenvalues[..n_keep].to_vec(),
        explained_variance_ratio,
    })
}

/// Standardize rows with the fitted constants and project onto the
/// component rows. An empty input yields a 0×n matrix.
pub fn transform<S: Scalar>(model: &PcaModel<S>, data: &Mat<S>) -> Result<Mat<S>> {
    let d = model.input_dim();
    if data.rows() > 0 && data.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "pca transform expects {d} columns, got {}",
            data.cols()
        )));
    }
    let n = model.n_components();
    let mut out = Mat::zeros(data.rows(), n);
    let mut z = vec![S::zero(); d];
    for i in 0..data.rows() {
        let row = data.row(i);
        for j in 0..d {
            z[j] = (row[j] - model.mean[j]) / model.std[j];
        }
        for c in 0..n {
            let comp = model.components.row(c);
            let mut acc = S::zero();
            for j in 0..d {
                acc += z[j] * comp[j];
            }
            out[(i, c)] = acc;
        }
    }
    Ok(out)
}

/// First `k` explained-variance ratios, for spectrum plots.
pub fn variance_spectrum<S: Scalar>(model: &PcaModel<S>, first_k: usize) -> Result<Vec<S>> {
    if first_k > model.explained_variance_ratio.len() {
        return Err(Error::InvalidArgument(format!(
            "spectrum length {} exceeds dimension {}",
            first_k,
            model.explained_variance_ratio.len()
        )));
    }
    Ok(model.explained_variance_ratio[..first_k].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_data() -> Mat<f64> {
        let pts: Vec<f64> = (0..8).flat_map(|i| [i as f64, i as f64]).collect();
        Mat::from_vec(8, 2, pts)
    }

    #[test]
    fn rank_one_data_concentrates_variance() {
        let model = fit(&line_data(), ComponentRule::Fixed(2)).unwrap();
        assert_abs_diff_eq!(model.explained_variance_ratio[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(model.explained_variance_ratio[1], 0.0, epsilon = 1e-12);
        let c = model.components.row(0);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert_abs_diff_eq!(c[0], inv_sqrt2, epsilon = 1e-10);
        assert_abs_diff_eq!(c[1], inv_sqrt2, epsilon = 1e-10);
    }

    #[test]
    fn transform_of_mean_is_zero() {
        let model = fit(&line_data(), ComponentRule::Fixed(2)).unwrap();
        let mean_row = Mat::from_vec(1, 2, model.mean.clone());
        let out = transform(&model, &mean_row).unwrap();
        assert_abs_diff_eq!(out[(0, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_transform_yields_zero_rows() {
        let model = fit(&line_data(), ComponentRule::Fixed(1)).unwrap();
        let out = transform(&model, &Mat::zeros(0, 2)).unwrap();
        assert_eq!(out.rows(), 0);
        assert_eq!(out.cols(), 1);
    }

    #[test]
    fn spectrum_sums_to_one_and_never_increases() {
        let data = Mat::from_vec(
            5,
            3,
            vec![
                1.0, 2.0, 0.5, 2.0, 1.0, 0.25, 3.0, 5.0, 0.125, 4.0, 3.0, 2.0, 5.0, 8.0, 1.0,
            ],
        );
        let model = fit(&data, ComponentRule::Fixed(3)).unwrap();
        let spec = variance_spectrum(&model, 3).unwrap();
        let sum: f64 = spec.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        assert!(spec[0] >= spec[1] && spec[1] >= spec[2]);
    }

    #[test]
    fn threshold_rule_keeps_smallest_sufficient_count() {
        let model = fit(&line_data(), ComponentRule::VarianceThreshold(0.9)).unwrap();
        assert_eq!(model.n_components(), 1);
        let model_all = fit(&line_data(), ComponentRule::VarianceThreshold(1.0)).unwrap();
        assert!(model_all.n_components() >= 1);
    }

    #[test]
    fn rejects_single_row_and_nan() {
        assert!(fit(&Mat::<f64>::zeros(1, 2), ComponentRule::Fixed(1)).is_err());
        let mut bad = line_data();
        bad[(0, 0)] = f64::NAN;
        assert!(fit(&bad, ComponentRule::Fixed(1)).is_err());
    }

    #[test]
    fn transform_dimension_mismatch_is_an_error() {
        let model = fit(&line_data(), ComponentRule::Fixed(1)).unwrap();
        assert!(transform(&model, &Mat::zeros(2, 3)).is_err());
    }
}
