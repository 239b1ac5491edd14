//! Canonical correlation analysis between two standardized feature
//! blocks, solved by whitening both block covariances and taking the
//! spectrum of the whitened cross-covariance. Includes per-pair Wilks'
//! lambda significance tests (Rao's F transformation) and the four
//! loading/cross-loading tables.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{self, special, Matrix};
use serde::Serialize;

/// Fitted CCA model.
///
/// `alpha` (p×p) and `beta` (q×p) hold one coefficient column per
/// canonical pair, scaled so each variate has unit sample variance.
/// Correlations are non-increasing and in [0, 1]; `n` is the sample size
/// the model was fitted on (the Wilks tests depend on it).
#[derive(Debug, Clone)]
pub struct CcaModel {
    pub correlations: Vec<f64>,
    pub alpha: Matrix,
    pub beta: Matrix,
    pub y_names: Vec<String>,
    pub x_names: Vec<String>,
    pub n: usize,
}

/// One row of the Wilks' lambda test sequence: the test that canonical
/// pairs k..p are jointly uncorrelated.
#[derive(Debug, Clone, Serialize)]
pub struct WilksTest {
    pub lambda: f64,
    pub f_value: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}

/// The four correlation tables relating features to canonical variates.
/// Own-side loadings pair a block with its own variates; cross loadings
/// pair it with the opposite block's variates.
#[derive(Debug, Clone)]
pub struct VariateLoadings {
    /// corr(x feature, V_X) — q×p
    pub x_own: Matrix,
    /// corr(y feature, V_Y) — p×p
    pub y_own: Matrix,
    /// corr(y feature, V_X) — p×p
    pub y_cross: Matrix,
    /// corr(x feature, V_Y) — q×p
    pub x_cross: Matrix,
}

/// Cross-covariance YᵀX/(n−1) of two centered blocks.
fn cross_covariance(y: &Matrix, x: &Matrix) -> Result<Matrix> {
    let n = y.rows();
    if x.rows() != n {
        return Err(Error::Shape(format!(
            "blocks with {n} and {} rows",
            x.rows()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientRows(n));
    }
    let denom = (n - 1) as f64;
    let mut out = Matrix::zeros(y.cols(), x.cols());
    for a in 0..y.cols() {
        for b in 0..x.cols() {
            let mut s = 0.0;
            for i in 0..n {
                s += y[(i, a)] * x[(i, b)];
            }
            out[(a, b)] = s / denom;
        }
    }
    Ok(out)
}

fn pd_hint(e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot, .. } => Error::NotPositiveDefinite {
            pivot,
            hint: "; block covariance is singular, consider pruning near-duplicate columns".into(),
        },
        other => other,
    }
}

/// Fit CCA of a p-column block `y` against a q-column block `x`
/// (p ≤ q < n, both standardized).
pub fn fit_cca(y: &FeatureMatrix, x: &FeatureMatrix) -> Result<CcaModel> {
    let ym = y.to_matrix();
    let xm = x.to_matrix();
    let p = ym.cols();
    let q = xm.cols();
    if p > q {
        return Err(Error::Orientation { p, q });
    }
    if ym.rows() != xm.rows() {
        return Err(Error::Shape(format!(
            "blocks with {} and {} rows",
            ym.rows(),
            xm.rows()
        )));
    }
    let n = ym.rows();
    if n <= q {
        return Err(Error::InsufficientRows(n));
    }

    let omega_yy = linalg::covariance(&ym)?;
    let omega_xx = linalg::covariance(&xm)?;
    let omega_yx = cross_covariance(&ym, &xm)?;

    let l_y = linalg::cholesky(&omega_yy).map_err(pd_hint)?;
    let l_x = linalg::cholesky(&omega_xx).map_err(pd_hint)?;

    // whiten: M = L_Y⁻¹ Ω_YX L_X⁻ᵀ; its singular values are the
    // canonical correlations
    let z = linalg::tri_solve(&l_y, &omega_yx, false)?;
    let mt = linalg::tri_solve(&l_x, &z.transpose(), false)?; // q×p, equals Mᵀ
    let m = mt.transpose();

    let k = m.matmul(&mt)?; // p×p, symmetric PSD
    let eig = linalg::sym_eigen(&k)?;
    let correlations: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt().min(1.0))
        .collect();

    // left singular vectors come from the eigendecomposition; right
    // ones from v_i = Mᵀ u_i / ρ_i, falling back to an orthonormal
    // completion where ρ_i vanishes
    let u = eig.eigenvectors;
    let mut v = Matrix::zeros(q, p);
    for i in 0..p {
        let rho = correlations[i];
        let mut col: Vec<f64> = if rho > 1e-12 {
            let ui = u.col(i);
            let w = mt.matvec(&ui)?;
            w.iter().map(|val| val / rho).collect()
        } else {
            orthonormal_completion(&v, i, q)
        };
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in col.iter_mut() {
                *c /= norm;
            }
        }
        for r in 0..q {
            v[(r, i)] = col[r];
        }
    }

    // back-transform the whitened directions into coefficient space;
    // unit variance of the variates is automatic since uᵀu = vᵀv = 1
    let mut alpha = linalg::tri_solve(&l_y, &u, true)?;
    let mut beta = linalg::tri_solve(&l_x, &v, true)?;

    // deterministic signs: alpha gets the largest-entry-positive rule,
    // then beta's sign is set by requiring a non-negative pair
    // correlation αᵀ Ω_YX β
    for i in 0..p {
        let mut a_col = alpha.col(i);
        linalg::fix_sign(&mut a_col);
        for r in 0..p {
            alpha[(r, i)] = a_col[r];
        }
        let mut b_col = beta.col(i);
        let oyx_b = omega_yx.matvec(&b_col)?;
        let corr: f64 = a_col.iter().zip(&oyx_b).map(|(a, b)| a * b).sum();
        if corr < 0.0 {
            for x in b_col.iter_mut() {
                *x = -*x;
            }
        }
        for r in 0..q {
            beta[(r, i)] = b_col[r];
        }
    }

    Ok(CcaModel {
        correlations,
        alpha,
        beta,
        y_names: y.names(),
        x_names: x.names(),
        n,
    })
}

/// A unit vector orthogonal to the first `filled` columns of `v`.
fn orthonormal_completion(v: &Matrix, filled: usize, dim: usize) -> Vec<f64> {
    for basis in 0..dim {
        let mut cand = vec![0.0; dim];
        cand[basis] = 1.0;
        for j in 0..filled {
            let proj: f64 = (0..dim).map(|r| cand[r] * v[(r, j)]).sum();
            for r in 0..dim {
                cand[r] -= proj * v[(r, j)];
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return cand.into_iter().map(|x| x / norm).collect();
        }
    }
    // unreachable for filled < dim
    let mut fallback = vec![0.0; dim];
    fallback[0] = 1.0;
    fallback
}

/// Canonical variates (V_Y, V_X) = (Y·alpha, X·beta) of data blocks that
/// match the fitted column names.
pub fn variates(model: &CcaModel, y: &FeatureMatrix, x: &FeatureMatrix) -> Result<(Matrix, Matrix)> {
    if y.names() != model.y_names || x.names() != model.x_names {
        return Err(Error::Alignment(
            "data block names do not match the fitted model".into(),
        ));
    }
    let vy = y.to_matrix().matmul(&model.alpha)?;
    let vx = x.to_matrix().matmul(&model.beta)?;
    Ok((vy, vx))
}

/// X-side canonical variates X·beta of a block matching the fitted
/// x-column names.
pub fn x_variates(model: &CcaModel, x: &FeatureMatrix) -> Result<Matrix> {
    if x.names() != model.x_names {
        return Err(Error::Alignment(
            "x-block names do not match the fitted model".into(),
        ));
    }
    x.to_matrix().matmul(&model.beta)
}

/// Correlate every feature with every canonical variate, own-side and
/// cross-side.
pub fn variate_loadings(
    model: &CcaModel,
    y: &FeatureMatrix,
    x: &FeatureMatrix,
) -> Result<VariateLoadings> {
    let (vy, vx) = variates(model, y, x)?;
    let p = model.alpha.cols();

    let table = |feats: &FeatureMatrix, vars: &Matrix| -> Result<Matrix> {
        let mut out = Matrix::zeros(feats.columns.len(), p);
        for (i, col) in feats.columns.iter().enumerate() {
            for j in 0..p {
                out[(i, j)] = linalg::pearson(&col.values, &vars.col(j))?;
            }
        }
        Ok(out)
    };

    Ok(VariateLoadings {
        x_own: table(x, &vx)?,
        y_own: table(y, &vy)?,
        y_cross: table(y, &vx)?,
        x_cross: table(x, &vy)?,
    })
}

/// Wilks' lambda sequence with Rao's F approximation: for each k, the
/// test that canonical pairs k..p are all zero.
pub fn wilks_tests(model: &CcaModel) -> Result<Vec<WilksTest>> {
    let p = model.alpha.cols();
    let q = model.beta.rows();
    let n = model.n;
    if n <= p + q + 1 {
        return Err(Error::InsufficientData(format!(
            "Wilks test needs n > p+q+1 = {}, got n = {n}",
            p + q + 1
        )));
    }

    let mut out = Vec::with_capacity(p);
    for k in 1..=p {
        let pk = (p - k + 1) as f64;
        let qk = (q - k + 1) as f64;
        let lambda: f64 = model.correlations[k - 1..]
            .iter()
            .map(|r| 1.0 - r * r)
            .product();
        let df1 = pk * qk;
        let s_den = pk * pk + qk * qk - 5.0;
        let s = if s_den > 0.0 {
            ((pk * pk * qk * qk - 4.0) / s_den).sqrt()
        } else {
            1.0
        };
        let m0 = n as f64 - 1.0 - (pk + qk + 1.0) / 2.0;
        let df2 = m0 * s - df1 / 2.0 + 1.0;

        let (f_value, p_value) = if lambda <= 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            let root = lambda.powf(1.0 / s);
            let f = (1.0 - root) / root * (df2 / df1);
            let pv = special::f_sf(f, df1, df2)?;
            (f, pv)
        };

        out.push(WilksTest {
            lambda,
            f_value,
            df1,
            df2,
            p_value,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{standardize, FeatureColumn};
    use chrono::NaiveDate;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        (0..n)
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect()
    }

    fn block(prefix: &str, cols: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = cols[0].len();
        let m = FeatureMatrix::new(
            dates(n),
            cols.into_iter()
                .enumerate()
                .map(|(j, values)| FeatureColumn {
                    name: format!("{prefix}{j}"),
                    values,
                })
                .collect(),
        )
        .unwrap();
        let lo = m.dates[0];
        let hi = *m.dates.last().unwrap();
        standardize(&m, lo, hi).unwrap()
    }

    fn random_block(prefix: &str, n: usize, cols: usize, rng: &mut impl Rng) -> FeatureMatrix {
        block(
            prefix,
            (0..cols)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
    }

    #[test]
    fn identical_blocks_have_unit_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random_block("y", 40, 3, &mut rng);
        let mut x = y.clone();
        for (j, c) in x.columns.iter_mut().enumerate() {
            c.name = format!("x{j}");
        }
        let model = fit_cca(&y, &x).unwrap();
        for rho in &model.correlations {
            assert!((rho - 1.0).abs() < 1e-8, "rho = {rho}");
        }
    }

    #[test]
    fn orthogonal_blocks_have_zero_correlations() {
        // Walsh patterns: mutually orthogonal, zero-mean
        let y = block(
            "y",
            vec![
                vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
                vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
            ],
        );
        let x = block(
            "x",
            vec![
                vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0],
                vec![1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0],
                vec![1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0],
            ],
        );
        let model = fit_cca(&y, &x).unwrap();
        for rho in &model.correlations {
            assert!(rho.abs() < 1e-8, "rho = {rho}");
        }
    }

    #[test]
    fn model_satisfies_unit_variance_and_pair_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = random_block("y", 60, 3, &mut rng);
        let x = random_block("x", 60, 5, &mut rng);
        let model = fit_cca(&y, &x).unwrap();

        let (vy, vx) = variates(&model, &y, &x).unwrap();
        let n = 60.0;
        for i in 0..3 {
            let yi = vy.col(i);
            let xi = vx.col(i);
            let var_y: f64 = yi.iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
            let var_x: f64 = xi.iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
            assert!((var_y - 1.0).abs() < 1e-8, "var(V_Y{i}) = {var_y}");
            assert!((var_x - 1.0).abs() < 1e-8, "var(V_X{i}) = {var_x}");
            let r = linalg::pearson(&yi, &xi).unwrap();
            assert!(
                (r - model.correlations[i]).abs() < 1e-8,
                "pair {i}: corr {r} vs rho {}",
                model.correlations[i]
            );
        }
        // same-side variates decorrelated
        for i in 0..3 {
            for j in (i + 1)..3 {
                let ry = linalg::pearson(&vy.col(i), &vy.col(j)).unwrap();
                let rx = linalg::pearson(&vx.col(i), &vx.col(j)).unwrap();
                assert!(ry.abs() < 1e-8, "V_Y{i}·V_Y{j} corr {ry}");
                assert!(rx.abs() < 1e-8, "V_X{i}·V_X{j} corr {rx}");
            }
        }
        // ordering
        for w in model.correlations.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn correlations_are_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y = random_block("y", 50, 2, &mut rng);
        let x = random_block("x", 50, 4, &mut rng);
        let base = fit_cca(&y, &x).unwrap();

        let mut x2 = x.clone();
        for v in x2.columns[1].values.iter_mut() {
            *v *= 37.5;
        }
        let mut y2 = y.clone();
        for v in y2.columns[0].values.iter_mut() {
            *v *= 0.004;
        }
        let scaled = fit_cca(&y2, &x2).unwrap();
        for (a, b) in base.correlations.iter().zip(&scaled.correlations) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn correlations_survive_within_block_remixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let y = random_block("y", 70, 3, &mut rng);
        let x = random_block("x", 70, 4, &mut rng);
        let base = fit_cca(&y, &x).unwrap();

        // well-conditioned invertible remix of x's columns
        let q = 4;
        let mut remixed = x.clone();
        let t = Matrix::from_fn(q, q, |i, j| {
            if i == j {
                1.0
            } else {
                0.15 * ((i * q + j) as f64 * 0.7).sin()
            }
        });
        let xm = x.to_matrix().matmul(&t).unwrap();
        for (j, col) in remixed.columns.iter_mut().enumerate() {
            col.values = xm.col(j);
        }
        let mixed = fit_cca(&y, &remixed).unwrap();
        for (a, b) in base.correlations.iter().zip(&mixed.correlations) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_wider_y_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random_block("y", 30, 4, &mut rng);
        let x = random_block("x", 30, 2, &mut rng);
        assert!(matches!(
            fit_cca(&y, &x),
            Err(Error::Orientation { p: 4, q: 2 })
        ));
    }

    #[test]
    fn singular_block_is_reported_with_hint() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = random_block("y", 30, 2, &mut rng);
        let mut x = random_block("x", 30, 3, &mut rng);
        x.columns[2].values = x.columns[1].values.clone();
        match fit_cca(&y, &x) {
            Err(Error::NotPositiveDefinite { hint, .. }) => {
                assert!(hint.contains("pruning"))
            }
            other => panic!("expected singular covariance, got {other:?}"),
        }
    }

    #[test]
    fn first_correlation_matches_planted_signal() {
        // x0 drives y0 with noise; remaining columns are noise
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 500;
        let driver: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y0: Vec<f64> = driver
            .iter()
            .map(|v| v + 0.3 * rng.gen_range(-1.0..1.0))
            .collect();
        let y = block("y", vec![y0, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()]);
        let x = block(
            "x",
            vec![
                driver.clone(),
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ],
        );
        let model = fit_cca(&y, &x).unwrap();
        let expected = linalg::pearson(&y.columns[0].values, &x.columns[0].values)
            .unwrap()
            .abs();
        assert!(
            model.correlations[0] >= expected - 1e-9,
            "cca must do at least as well as the raw pair ({} vs {expected})",
            model.correlations[0]
        );
        assert!(model.correlations[0] < expected + 0.05);
    }

    #[test]
    fn cross_loading_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let y = random_block("y", 80, 3, &mut rng);
        let x = random_block("x", 80, 6, &mut rng);
        let model = fit_cca(&y, &x).unwrap();
        let tables = variate_loadings(&model, &y, &x).unwrap();
        for j in 0..6 {
            for i in 0..3 {
                let own = tables.x_own[(j, i)];
                let cross = tables.x_cross[(j, i)];
                assert!(
                    (cross - model.correlations[i] * own).abs() < 1e-8,
                    "x feature {j}, pair {i}: {cross} vs rho*own {}",
                    model.correlations[i] * own
                );
            }
        }
        for j in 0..3 {
            for i in 0..3 {
                let own = tables.y_own[(j, i)];
                let cross = tables.y_cross[(j, i)];
                assert!((cross - model.correlations[i] * own).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn loading_of_proportional_feature_is_one() {
        // with a single y column the variate is proportional to it, and
        // the sign rule makes the coefficient positive
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let y = random_block("y", 50, 1, &mut rng);
        let x = random_block("x", 50, 3, &mut rng);
        let model = fit_cca(&y, &x).unwrap();
        let tables = variate_loadings(&model, &y, &x).unwrap();
        assert!((tables.y_own[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn loadings_reject_mismatched_names() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let y = random_block("y", 40, 2, &mut rng);
        let x = random_block("x", 40, 3, &mut rng);
        let model = fit_cca(&y, &x).unwrap();
        let mut other = x.clone();
        other.columns[0].name = "renamed".into();
        assert!(matches!(
            variate_loadings(&model, &y, &other),
            Err(Error::Alignment(_))
        ));
    }

    fn table_iii_model() -> CcaModel {
        CcaModel {
            correlations: vec![0.965987, 0.855689, 0.673962],
            alpha: Matrix::identity(3),
            beta: Matrix::zeros(6, 3),
            y_names: vec!["y0".into(), "y1".into(), "y2".into()],
            x_names: (0..6).map(|j| format!("x{j}")).collect(),
            n: 962,
        }
    }

    #[test]
    fn wilks_reference_sequence() {
        let tests = wilks_tests(&table_iii_model()).unwrap();
        assert_eq!(tests.len(), 3);

        let lambda_expect = [0.00977338, 0.146156, 0.545776];
        let df1_expect = [18.0, 10.0, 4.0];
        for (t, (le, d1)) in tests.iter().zip(lambda_expect.iter().zip(&df1_expect)) {
            assert!((t.lambda - le).abs() < 1e-5, "{} vs {le}", t.lambda);
            assert_eq!(t.df1, *d1);
        }
        // lambda nondecreasing in k
        assert!(tests[0].lambda <= tests[1].lambda);
        assert!(tests[1].lambda <= tests[2].lambda);

        // k=3 by direct scalar evaluation: s=1, df2 = 957,
        // F = ((1-L)/L)*(957/4)
        let l3 = tests[2].lambda;
        let f3 = (1.0 - l3) / l3 * (957.0 / 4.0);
        assert!((tests[2].f_value - f3).abs() < 1e-9);
        assert!((f3 - 199.12).abs() < 0.01, "F3 = {f3}");
        assert_eq!(tests[2].df2, 957.0);
    }

    #[test]
    fn wilks_degenerate_lambda_gives_infinite_f() {
        let mut model = table_iii_model();
        model.correlations = vec![1.0, 0.5, 0.2];
        let tests = wilks_tests(&model).unwrap();
        assert!(tests[0].f_value.is_infinite());
        assert_eq!(tests[0].p_value, 0.0);
        assert!(tests[1].f_value.is_finite());
    }

    #[test]
    fn wilks_needs_enough_samples() {
        let mut model = table_iii_model();
        model.n = 10;
        assert!(matches!(
            wilks_tests(&model),
            Err(Error::InsufficientData(_))
        ));
    }
}
