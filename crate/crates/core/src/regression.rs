//! Ordinary least squares with coefficient inference (t statistics and
//! two-sided p-values) and the forecast-error metrics used to score
//! models in and out of sample.

use crate::error::{Error, Result};
use crate::linalg::{self, special, Matrix};
use serde::Serialize;

/// OLS fit without an intercept column; callers that want one prepend a
/// constant regressor.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionFit {
    pub regressor_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residual_variance: f64,
}

/// Forecast error summary over one evaluation window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ForecastMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

fn pd_with_column(e: Error, names: &[String]) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot, .. } => {
            let col = names
                .get(pivot)
                .cloned()
                .unwrap_or_else(|| format!("#{pivot}"));
            Error::NotPositiveDefinite {
                pivot,
                hint: format!("; design matrix is rank deficient at column `{col}`"),
            }
        }
        other => other,
    }
}

/// Solve the normal equations (XᵀX)β = Xᵀy by Cholesky and derive the
/// usual inference columns. Degrees of freedom are n − q.
pub fn fit_ols(x: &Matrix, y: &[f64], names: &[String]) -> Result<RegressionFit> {
    let n = x.rows();
    let q = x.cols();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "{n} design rows but {} targets",
            y.len()
        )));
    }
    if names.len() != q {
        return Err(Error::Shape(format!(
            "{q} design columns but {} names",
            names.len()
        )));
    }
    if n <= q {
        return Err(Error::InsufficientRows(n));
    }

    let xt = x.transpose();
    let xtx = xt.matmul(x)?;
    let xty = xt.matvec(y)?;

    let l = linalg::cholesky(&xtx).map_err(|e| pd_with_column(e, names))?;
    let rhs = Matrix::from_cols(&[xty])?;
    let beta_m = linalg::tri_solve(&l, &linalg::tri_solve(&l, &rhs, false)?, true)?;
    let coefficients: Vec<f64> = (0..q).map(|i| beta_m[(i, 0)]).collect();

    let fitted = x.matvec(&coefficients)?;
    let rss: f64 = y
        .iter()
        .zip(&fitted)
        .map(|(yi, fi)| (yi - fi) * (yi - fi))
        .sum();
    let df = (n - q) as f64;
    let residual_variance = rss / df;

    // diag((XᵀX)⁻¹) by solving against the identity
    let inv = linalg::tri_solve(&l, &linalg::tri_solve(&l, &Matrix::identity(q), false)?, true)?;
    let mut std_errors = Vec::with_capacity(q);
    let mut t_stats = Vec::with_capacity(q);
    let mut p_values = Vec::with_capacity(q);
    for i in 0..q {
        let se = (residual_variance * inv[(i, i)]).max(0.0).sqrt();
        std_errors.push(se);
        let t = if se > 0.0 {
            coefficients[i] / se
        } else if coefficients[i] == 0.0 {
            0.0
        } else {
            coefficients[i].signum() * f64::INFINITY
        };
        t_stats.push(t);
        p_values.push(2.0 * special::t_sf(t.abs(), df)?);
    }

    Ok(RegressionFit {
        regressor_names: names.to_vec(),
        coefficients,
        std_errors,
        t_stats,
        p_values,
        residual_variance,
    })
}

/// Ŷ = Xβ for a design matrix matching the fit's column order.
pub fn predict(fit: &RegressionFit, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != fit.coefficients.len() {
        return Err(Error::Alignment(format!(
            "{} design columns against {} fitted coefficients",
            x.cols(),
            fit.coefficients.len()
        )));
    }
    x.matvec(&fit.coefficients)
}

/// RMSE = √(Σ(y−ŷ)²/n) and MAE = Σ|y−ŷ|/n.
pub fn forecast_metrics(y: &[f64], y_hat: &[f64]) -> Result<ForecastMetrics> {
    if y.len() != y_hat.len() {
        return Err(Error::Shape(format!(
            "{} observations against {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::InsufficientData("metrics over an empty window".into()));
    }
    let mut sq = 0.0;
    let mut ab = 0.0;
    for (yi, fi) in y.iter().zip(y_hat) {
        let e = yi - fi;
        sq += e * e;
        ab += e.abs();
    }
    Ok(ForecastMetrics {
        rmse: (sq / n as f64).sqrt(),
        mae: ab / n as f64,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn names(q: usize) -> Vec<String> {
        (0..q).map(|i| format!("x{i}")).collect()
    }

    /// Independent oracle: solve A·b = rhs by Gaussian elimination with
    /// partial pivoting. Also used to invert XᵀX column by column.
    fn gauss_solve(a: &Matrix, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.rows();
        let m = rhs.len();
        // augmented matrix
        let mut aug = vec![vec![0.0; n + m]; n];
        for i in 0..n {
            for j in 0..n {
                aug[i][j] = a[(i, j)];
            }
            for (k, r) in rhs.iter().enumerate() {
                aug[i][n + k] = r[i];
            }
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    aug[i][col]
                        .abs()
                        .partial_cmp(&aug[j][col].abs())
                        .unwrap()
                })
                .unwrap();
            aug.swap(col, pivot);
            let p = aug[col][col];
            assert!(p.abs() > 1e-14, "oracle hit a singular system");
            for j in col..(n + m) {
                aug[col][j] /= p;
            }
            for i in 0..n {
                if i != col {
                    let f = aug[i][col];
                    if f != 0.0 {
                        for j in col..(n + m) {
                            aug[i][j] -= f * aug[col][j];
                        }
                    }
                }
            }
        }
        (0..m)
            .map(|k| (0..n).map(|i| aug[i][n + k]).collect())
            .collect()
    }

    fn oracle_fit(x: &Matrix, y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = x.rows();
        let q = x.cols();
        let xt = x.transpose();
        let xtx = xt.matmul(x).unwrap();
        let xty = xt.matvec(y).unwrap();

        let mut rhs = vec![xty];
        for j in 0..q {
            let mut e = vec![0.0; q];
            e[j] = 1.0;
            rhs.push(e);
        }
        let solved = gauss_solve(&xtx, &rhs);
        let beta = solved[0].clone();

        let fitted = x.matvec(&beta).unwrap();
        let rss: f64 = y
            .iter()
            .zip(&fitted)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let sigma2 = rss / (n - q) as f64;
        let se: Vec<f64> = (0..q).map(|j| (sigma2 * solved[j + 1][j]).sqrt()).collect();
        let t: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
        (beta, se, t)
    }

    #[test]
    fn exact_line_has_zero_residuals() {
        let x = Matrix::from_cols(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let y: Vec<f64> = x.col(0).iter().map(|v| 2.0 * v).collect();
        let fit = fit_ols(&x, &y, &names(1)).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.residual_variance < 1e-24);
        // perfect fit: the p-value collapses
        assert!(fit.p_values[0] < 1e-12);
    }

    #[test]
    fn orthonormal_design_collapses_to_xty() {
        // orthonormal columns: XᵀX = I so β = Xᵀy
        let c = 0.5;
        let x = Matrix::from_cols(&[vec![c, c, c, c], vec![c, -c, c, -c]]).unwrap();
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let fit = fit_ols(&x, &y, &names(2)).unwrap();
        let xty = x.transpose().matvec(&y).unwrap();
        for (b, e) in fit.coefficients.iter().zip(&xty) {
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_elimination_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for round in 0..50 {
            let n = 40;
            let q = 3;
            let x = Matrix::from_fn(n, q, |_, _| rng.gen_range(-2.0..2.0));
            let beta_true: Vec<f64> = (0..q).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let signal: f64 = (0..q).map(|j| x[(i, j)] * beta_true[j]).sum();
                    signal + 0.3 * rng.gen_range(-1.0..1.0)
                })
                .collect();

            let fit = fit_ols(&x, &y, &names(q)).unwrap();
            let (ob, ose, ot) = oracle_fit(&x, &y);
            for j in 0..q {
                assert!(
                    (fit.coefficients[j] - ob[j]).abs() < 1e-9,
                    "round {round} beta[{j}]: {} vs {}",
                    fit.coefficients[j],
                    ob[j]
                );
                assert!((fit.std_errors[j] - ose[j]).abs() < 1e-9);
                assert!((fit.t_stats[j] - ot[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficiency_names_offending_column() {
        let base: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x = Matrix::from_cols(&[base.clone(), base]).unwrap();
        let y = vec![0.0; 10];
        match fit_ols(&x, &y, &names(2)) {
            Err(Error::NotPositiveDefinite { hint, .. }) => assert!(hint.contains("x1")),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn predict_basics() {
        let fit = RegressionFit {
            regressor_names: names(2),
            coefficients: vec![1.5, -0.5],
            std_errors: vec![0.0, 0.0],
            t_stats: vec![0.0, 0.0],
            p_values: vec![1.0, 1.0],
            residual_variance: 0.0,
        };
        let zeros = Matrix::zeros(3, 2);
        assert_eq!(predict(&fit, &zeros).unwrap(), vec![0.0, 0.0, 0.0]);
        let id = Matrix::identity(2);
        assert_eq!(predict(&fit, &id).unwrap(), vec![1.5, -0.5]);
        let wide = Matrix::zeros(2, 3);
        assert!(matches!(predict(&fit, &wide), Err(Error::Alignment(_))));
    }

    #[test]
    fn train_residuals_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 60;
        let q = 4;
        let x = Matrix::from_fn(n, q, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fit = fit_ols(&x, &y, &names(q)).unwrap();
        let pred = predict(&fit, &x).unwrap();
        for j in 0..q {
            let dot: f64 = (0..n).map(|i| (y[i] - pred[i]) * x[(i, j)]).sum();
            assert!(dot.abs() < 1e-8, "residual·x{j} = {dot}");
        }
    }

    #[test]
    fn negating_target_preserves_p_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 30;
        let x = Matrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] * 0.8 + 0.2 * rng.gen_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let f1 = fit_ols(&x, &y, &names(2)).unwrap();
        let f2 = fit_ols(&x, &neg, &names(2)).unwrap();
        for j in 0..2 {
            assert!((f1.coefficients[j] + f2.coefficients[j]).abs() < 1e-12);
            assert!((f1.t_stats[j] + f2.t_stats[j]).abs() < 1e-12);
            assert!((f1.p_values[j] - f2.p_values[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficients_follow_column_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let n = 25;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x1 = Matrix::from_cols(&cols).unwrap();
        let x2 = Matrix::from_cols(&[cols[2].clone(), cols[0].clone(), cols[1].clone()]).unwrap();
        let f1 = fit_ols(&x1, &y, &names(3)).unwrap();
        let f2 = fit_ols(&x2, &y, &names(3)).unwrap();
        let perm = [2usize, 0, 1];
        for (new_pos, old_pos) in perm.iter().enumerate() {
            assert!((f2.coefficients[new_pos] - f1.coefficients[*old_pos]).abs() < 1e-10);
        }
    }

    #[test]
    fn nested_model_never_fits_better_in_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..20 {
            let n = 50;
            let cols: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let small = Matrix::from_cols(&cols[..3]).unwrap();
            let big = Matrix::from_cols(&cols).unwrap();
            let fs = fit_ols(&small, &y, &names(3)).unwrap();
            let fb = fit_ols(&big, &y, &names(4)).unwrap();
            let ms = forecast_metrics(&y, &predict(&fs, &small).unwrap()).unwrap();
            let mb = forecast_metrics(&y, &predict(&fb, &big).unwrap()).unwrap();
            assert!(mb.rmse <= ms.rmse + 1e-12);
        }
    }

    #[test]
    fn metrics_basics() {
        let y = vec![1.0, 2.0, 3.0];
        let m = forecast_metrics(&y, &y).unwrap();
        assert_eq!((m.rmse, m.mae), (0.0, 0.0));

        let off: Vec<f64> = y.iter().map(|v| v - 1.0).collect();
        let m = forecast_metrics(&y, &off).unwrap();
        assert!((m.rmse - 1.0).abs() < 1e-12);
        assert!((m.mae - 1.0).abs() < 1e-12);

        let m = forecast_metrics(&[3.0, -4.0], &[0.0, 0.0]).unwrap();
        assert!((m.mae - 3.5).abs() < 1e-12);
        assert!((m.rmse - (25.0f64 / 2.0).sqrt()).abs() < 1e-12);

        assert!(forecast_metrics(&[], &[]).is_err());
        assert!(forecast_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mae_never_exceeds_rmse(
                pairs in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..50)
            ) {
                let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let f: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                let m = forecast_metrics(&y, &f).unwrap();
                prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12));
                let zero = y.iter().zip(&f).all(|(a, b)| a == b);
                prop_assert_eq!(m.rmse == 0.0, zero);
                prop_assert_eq!(m.mae == 0.0, zero);
            }
        }
    }
}
