//! Dense symmetric linear algebra: the numerical foundation for PCA, CCA
//! and OLS. Everything here is written for small (q ≤ ~12) problems where
//! robustness and determinism matter more than raw speed.

pub mod special;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from row slices. All rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
        }
        let m = Matrix {
            rows: nrows,
            cols: ncols,
            data: rows.iter().flatten().copied().collect(),
        };
        debug_assert!(m.data.iter().all(|v| v.is_finite()));
        Ok(m)
    }

    /// Build from column vectors, each of equal length.
    pub fn from_cols(cols: &[Vec<f64>]) -> Result<Matrix> {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, |c| c.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != nrows {
                return Err(Error::Shape(format!(
                    "column {j} has {} entries, expected {nrows}",
                    c.len()
                )));
            }
        }
        let mut m = Matrix::zeros(nrows, ncols);
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        debug_assert!(m.data.iter().all(|v| v.is_finite()));
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// y = M x for a vector x.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Keep only the first `k` columns.
    pub fn truncate_cols(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.rows, k.min(self.cols), |i, j| self[(i, j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition of a symmetric matrix: eigenvalues descending,
/// eigenvector columns orthonormal.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// Sample covariance XᵀX/(n−1) of a matrix whose columns are already
/// centered. Diagonal entries are sample variances.
pub fn covariance(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InsufficientRows(n));
    }
    let q = x.cols();
    let denom = (n - 1) as f64;
    let mut cov = Matrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            let mut s = 0.0;
            for i in 0..n {
                s += x[(i, a)] * x[(i, b)];
            }
            let v = s / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Converged when the off-diagonal Frobenius norm drops below
/// 1e-12·‖S‖_F. Eigenpairs are sorted by eigenvalue descending and each
/// eigenvector is sign-normalized (largest-magnitude entry positive).
pub fn sym_eigen(s: &Matrix) -> Result<SymEigen> {
    let n = s.rows();
    let sym_tol = 1e-10 * s.max_abs().max(1.0);
    if !s.is_symmetric(sym_tol) {
        let mut max_asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_asym = max_asym.max((s[(i, j)] - s[(j, i)]).abs());
            }
        }
        return Err(Error::NotSymmetric { max_asym });
    }

    let mut a = s.clone();
    let mut v = Matrix::identity(n);
    let target = 1e-12 * s.frobenius_norm();

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= target {
            return Ok(finish_eigen(&a, v));
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                // tan of the rotation angle; the large-theta branch avoids
                // overflow in theta^2
                let t = if theta.abs() > 1e100 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_ = t * c;
                let tau = s_ / (1.0 + c);

                let h = t * apq;
                a[(p, p)] -= h;
                a[(q, q)] += h;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for j in 0..n {
                    if j != p && j != q {
                        let ajp = a[(j, p)];
                        let ajq = a[(j, q)];
                        a[(j, p)] = ajp - s_ * (ajq + tau * ajp);
                        a[(j, q)] = ajq + s_ * (ajp - tau * ajq);
                        a[(p, j)] = a[(j, p)];
                        a[(q, j)] = a[(j, q)];
                    }
                }
                for j in 0..n {
                    let vjp = v[(j, p)];
                    let vjq = v[(j, q)];
                    v[(j, p)] = vjp - s_ * (vjq + tau * vjp);
                    v[(j, q)] = vjq + s_ * (vjp - tau * vjq);
                }
            }
        }
    }

    Err(Error::NoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

fn finish_eigen(a: &Matrix, v: Matrix) -> SymEigen {
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    // descending by eigenvalue; index tiebreak keeps the result deterministic
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .partial_cmp(&a[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[(k, k)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = v[(i, old_j)];
        }
    }
    for j in 0..n {
        let mut col: Vec<f64> = vectors.col(j);
        fix_sign(&mut col);
        for i in 0..n {
            vectors[(i, j)] = col[i];
        }
    }
    SymEigen {
        eigenvalues,
        eigenvectors: vectors,
    }
}

/// Flip a vector so its largest-magnitude entry is positive; ties go to
/// the lowest index.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Cholesky factorization S = L·Lᵀ of a symmetric positive-definite matrix.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::Shape(format!(
            "cholesky needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        // pivots that cancel down to roundoff of the original diagonal
        // mean the matrix is numerically singular
        if d <= 1e-12 * s[(j, j)].abs() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                hint: String::new(),
            });
        }
        l[(j, j)] = d.sqrt();
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / l[(j, j)];
        }
    }
    Ok(l)
}

/// Solve L·X = B (or Lᵀ·X = B when `transposed`) for a lower-triangular L.
pub fn tri_solve(l: &Matrix, b: &Matrix, transposed: bool) -> Result<Matrix> {
    let n = l.rows();
    if l.cols() != n {
        return Err(Error::Shape("triangular factor must be square".into()));
    }
    if b.rows() != n {
        return Err(Error::Shape(format!(
            "rhs has {} rows, expected {n}",
            b.rows()
        )));
    }
    for i in 0..n {
        if l[(i, i)] == 0.0 {
            return Err(Error::Singular(i));
        }
    }
    let m = b.cols();
    let mut x = Matrix::zeros(n, m);
    if !transposed {
        for col in 0..m {
            for i in 0..n {
                let mut v = b[(i, col)];
                for k in 0..i {
                    v -= l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = v / l[(i, i)];
            }
        }
    } else {
        for col in 0..m {
            for i in (0..n).rev() {
                let mut v = b[(i, col)];
                for k in (i + 1)..n {
                    v -= l[(k, i)] * x[(k, col)];
                }
                x[(i, col)] = v / l[(i, i)];
            }
        }
    }
    Ok(x)
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "pearson on vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientRows(n));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedEntry(
            "correlation with a zero-variance sample".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
