//! Principal component analysis of a standardized feature block:
//! covariance eigendecomposition, explained-variance bookkeeping,
//! threshold-based component selection, projection and loadings.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{self, Matrix};
use serde::Serialize;

/// Fitted PCA model. Eigenvalues are descending and clamped at zero;
/// `components` holds the orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub eigenvalues: Vec<f64>,
    pub components: Matrix,
    pub explained_ratio: Vec<f64>,
    pub cumulative_ratio: Vec<f64>,
    pub feature_names: Vec<String>,
}

/// JSON shape of an exported model.
#[derive(Debug, Serialize)]
pub struct PcaModelExport<'a> {
    pub eigenvalues: &'a [f64],
    pub explained_ratio: &'a [f64],
    pub cumulative_ratio: &'a [f64],
    pub components: Vec<Vec<f64>>,
    pub feature_names: &'a [String],
}

impl PcaModel {
    /// Build the ratio bookkeeping from raw eigenvalues (descending).
    /// Small negative eigenvalues from roundoff are clamped to zero.
    pub fn from_eigen(
        eigenvalues: Vec<f64>,
        components: Matrix,
        feature_names: Vec<String>,
    ) -> Result<PcaModel> {
        let eigenvalues: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = eigenvalues.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("all eigenvalues are zero".into()));
        }
        let explained_ratio: Vec<f64> = eigenvalues.iter().map(|v| v / total).collect();
        let mut cumulative_ratio = Vec::with_capacity(eigenvalues.len());
        let mut partial = 0.0;
        for v in &eigenvalues {
            partial += v;
            cumulative_ratio.push(partial / total);
        }
        Ok(PcaModel {
            eigenvalues,
            components,
            explained_ratio,
            cumulative_ratio,
            feature_names,
        })
    }

    pub fn export(&self) -> PcaModelExport<'_> {
        PcaModelExport {
            eigenvalues: &self.eigenvalues,
            explained_ratio: &self.explained_ratio,
            cumulative_ratio: &self.cumulative_ratio,
            components: (0..self.components.cols())
                .map(|j| self.components.col(j))
                .collect(),
            feature_names: &self.feature_names,
        }
    }
}

/// Fit PCA on a standardized feature matrix via the eigendecomposition
/// of its sample covariance.
pub fn fit_pca(x: &FeatureMatrix) -> Result<PcaModel> {
    let m = x.to_matrix();
    if m.rows() <= m.cols() {
        return Err(Error::InsufficientRows(m.rows()));
    }
    let cov = linalg::covariance(&m)?;
    let eig = linalg::sym_eigen(&cov)?;
    PcaModel::from_eigen(eig.eigenvalues, eig.eigenvectors, x.names())
}

/// Smallest component count whose cumulative explained-variance ratio
/// reaches `threshold`.
pub fn select_components(model: &PcaModel, threshold: f64) -> usize {
    let q = model.cumulative_ratio.len();
    for (i, c) in model.cumulative_ratio.iter().enumerate() {
        if *c >= threshold {
            return i + 1;
        }
    }
    q
}

/// Project the data onto the first `k` components: W = X·V[:, 1..k].
pub fn project(x: &FeatureMatrix, model: &PcaModel, k: usize) -> Result<Matrix> {
    if x.names() != model.feature_names {
        return Err(Error::Alignment(format!(
            "feature names {:?} do not match the fitted model {:?}",
            x.names(),
            model.feature_names
        )));
    }
    x.to_matrix().matmul(&model.components.truncate_cols(k))
}

/// Pearson correlation of every original feature with every projected
/// component column.
pub fn pc_loadings(x: &FeatureMatrix, w: &Matrix) -> Result<Matrix> {
    if x.n_rows() != w.rows() {
        return Err(Error::Alignment(format!(
            "{} feature rows vs {} projected rows",
            x.n_rows(),
            w.rows()
        )));
    }
    let q = x.columns.len();
    let k = w.cols();
    let mut out = Matrix::zeros(q, k);
    for j in 0..k {
        let comp = w.col(j);
        for (i, col) in x.columns.iter().enumerate() {
            out[(i, j)] = linalg::pearson(&col.values, &comp)?;
        }
    }
    Ok(out)
}
