//! Small dense real linear algebra for the identifier: symmetric
//! eigendecomposition (cyclic Jacobi), pseudoinverse action and the
//! minimum-norm equality-constrained parameter update.
//!
//! Everything here targets tiny matrices (parameter dimension, a handful of
//! entries), so simplicity and symmetric accuracy win over asymptotics.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Relative tolerance used to accept an input matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    NotSquare { rows: usize, cols: usize },
    NotSymmetric { max_asym: f64 },
    DimensionMismatch { expected: usize, got: usize },
    NotPositiveSemidefinite { eigenvalue: f64 },
    InvalidParameter { what: &'static str },
    NoConvergence,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotSquare { rows, cols } => {
                write!(f, "matrix must be square, got {rows}x{cols}")
            }
            LinalgError::NotSymmetric { max_asym } => {
                write!(f, "matrix is not symmetric (max asymmetry {max_asym:e})")
            }
            LinalgError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            LinalgError::NotPositiveSemidefinite { eigenvalue } => {
                write!(
                    f,
                    "matrix is not positive semi-definite (eigenvalue {eigenvalue:e})"
                )
            }
            LinalgError::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            LinalgError::NoConvergence => write!(f, "eigensolver did not converge"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the slice length does
    /// not equal `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Matrix {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect()
    }

    /// `A' x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (row, xi) in self.data.chunks_exact(self.cols).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        out
    }

    /// `A' B`.
    pub fn tr_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "tr_mul dimension mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let aki = self.data[k * self.cols + i];
                if aki == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aki * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "mul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= factor;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(other.data.iter()) {
            *v -= w;
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(other.data.iter()) {
            *v += w;
        }
        out
    }

    /// `(A + A') / 2`.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn max_asymmetry(&self) -> f64 {
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + factor * b`.
pub fn add_scaled(a: &[f64], factor: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + factor * y).collect()
}

/// Spectral factorization of a symmetric matrix.
///
/// Eigenvalues are sorted descending; eigenvector columns are orthonormal
/// and `V diag(lambda) V'` reconstructs the input to roughly working
/// precision.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SymEig {
    /// `V diag(lambda) V'`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lam = self.eigenvalues[k];
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += lam * v[(i, k)] * v[(j, k)];
                }
            }
        }
        out
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
///
/// Intended for the tiny matrices that show up in the identifier (dimension
/// of the unknown parameter vector). Errors on non-square input and on
/// asymmetry beyond [`SYMMETRY_TOL`] relative to `max(1, |S|_max)`.
pub fn sym_eig(s: &Matrix) -> Result<SymEig, LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let n = s.rows();
    let scale = s.max_abs().max(1.0);
    let asym = s.max_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(LinalgError::NotSymmetric { max_asym: asym });
    }
    if n == 0 {
        return Ok(SymEig {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }

    let mut a = s.symmetrized();
    let mut v = Matrix::identity(n);
    // Rotations below this size no longer move the spectrum at f64 precision.
    let stop = 1e-15 * scale;

    let mut converged = n == 1;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= stop {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= stop * 1e-2 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let sn = t * c;
                let tau = sn / (1.0 + c);

                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = aip - sn * (aiq + tau * aip);
                        a[(i, q)] = aiq + sn * (aip - tau * aiq);
                        a[(p, i)] = a[(i, p)];
                        a[(q, i)] = a[(i, q)];
                    }
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip - sn * (viq + tau * vip);
                    v[(i, q)] = viq + sn * (vip - tau * viq);
                }
            }
        }
    }
    if !converged {
        // One last check: quadratic convergence normally finishes in a few
        // sweeps, so reaching the cap with large off-diagonals is a bug.
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off > 1e-12 * scale {
            return Err(LinalgError::NoConvergence);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, k)] = v[(i, src)];
        }
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Result of [`min_norm_update`].
#[derive(Debug, Clone)]
pub struct MinNormUpdate {
    pub theta: Vec<f64>,
    /// Number of retained eigenvalues of the constraint matrix.
    pub rank: usize,
    /// `|G theta_new - Z|`; for a consistent constraint this is roundoff,
    /// otherwise it equals the size of the component of `Z` outside
    /// `range(G)`.
    pub residual: f64,
}

/// Minimum-norm move of `theta_prev` onto the solution set of `G theta = Z`.
///
/// Computes `theta_prev + G^+ (Z - G theta_prev)` where the pseudoinverse
/// truncates eigenvalues below `rank_tol * max(1, lambda_max)`. With full
/// rank this is the plain least-squares solve; with rank 0 the input is
/// returned unchanged. `Z` components outside `range(G)` are projected away
/// and reported through `residual` instead of failing: consistent data can
/// pick up such components from integration error alone.
pub fn min_norm_update(
    g: &Matrix,
    z: &[f64],
    theta_prev: &[f64],
    rank_tol: f64,
) -> Result<MinNormUpdate, LinalgError> {
    check_constraint_dims(g, z, theta_prev)?;
    if rank_tol <= 0.0 {
        return Err(LinalgError::InvalidParameter {
            what: "rank_tol must be positive",
        });
    }
    let eig = sym_eig(g)?;
    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cut = rank_tol * lambda_max.max(1.0);
    if let Some(&lam) = eig.eigenvalues.last() {
        if lam < -cut {
            return Err(LinalgError::NotPositiveSemidefinite { eigenvalue: lam });
        }
    }

    let defect = sub_vec(z, &g.matvec(theta_prev));
    let mut theta = theta_prev.to_vec();
    let mut rank = 0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < cut {
            break;
        }
        rank += 1;
        let vk = eig.eigenvectors.column(k);
        let coeff = dot(&vk, &defect) / lam;
        theta = add_scaled(&theta, coeff, &vk);
    }
    let residual = norm(&sub_vec(&g.matvec(&theta), z));
    Ok(MinNormUpdate {
        theta,
        rank,
        residual,
    })
}

/// Solves the regularized constraint `(eta I + G) theta = Z`.
pub fn tikhonov_update(g: &Matrix, z: &[f64], eta: f64) -> Result<Vec<f64>, LinalgError> {
    if eta <= 0.0 {
        return Err(LinalgError::InvalidParameter {
            what: "eta must be positive",
        });
    }
    let l = g.rows();
    if z.len() != l {
        return Err(LinalgError::DimensionMismatch {
            expected: l,
            got: z.len(),
        });
    }
    let eig = sym_eig(g)?;
    let mut theta = vec![0.0; l];
    for k in 0..l {
        let lam = eig.eigenvalues[k] + eta;
        if lam <= 0.0 {
            return Err(LinalgError::NotPositiveSemidefinite {
                eigenvalue: eig.eigenvalues[k],
            });
        }
        let vk = eig.eigenvectors.column(k);
        let coeff = dot(&vk, z) / lam;
        theta = add_scaled(&theta, coeff, &vk);
    }
    Ok(theta)
}

fn check_constraint_dims(g: &Matrix, z: &[f64], theta: &[f64]) -> Result<usize, LinalgError> {
    if !g.is_square() {
        return Err(LinalgError::NotSquare {
            rows: g.rows(),
            cols: g.cols(),
        });
    }
    let l = g.rows();
    if z.len() != l {
        return Err(LinalgError::DimensionMismatch {
            expected: l,
            got: z.len(),
        });
    }
    if theta.len() != l {
        return Err(LinalgError::DimensionMismatch {
            expected: l,
            got: theta.len(),
        });
    }
    Ok(l)
}
