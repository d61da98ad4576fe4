//! Complex Hermitian matrix algebra.
//!
//! Provides the dense Hermitian type used throughout the library together
//! with the numerical kernels the localization solver needs: eigendecomposition
//! (cyclic Jacobi), log-determinant (Cholesky), and the `cvec`/`cmat` pair that
//! maps a `z x z` Hermitian matrix to a real vector of length `z^2` such that
//! `tr(XY) = cvec(X)' cvec(Y)`.
//!
//! All values are immutable after construction; operations are pure functions,
//! so everything here is safe to share across threads.

use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance for Hermitian symmetry checks at construction.
const HERMITIAN_TOL: f64 = 1e-12;
/// Cholesky pivot threshold below which a matrix is declared not PD.
const CHOLESKY_PIVOT_MIN: f64 = 1e-14;
/// Jacobi sweep cap.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Jacobi convergence: off-diagonal Frobenius mass relative to the input norm.
const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is not Hermitian within tolerance (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("vector length {0} is not a perfect square")]
    NonSquareLength(usize),
    #[error("matrix is not positive definite (pivot {0:.3e} at index {1})")]
    NotPositiveDefinite(f64, usize),
    #[error("eigensolver failed to converge within {0} sweeps")]
    ConvergenceFailure(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Dense complex Hermitian matrix, row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

/// Eigenvalues (descending) with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Real eigenvalues, sorted non-increasing.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector paired with `values[i]`.
    pub vectors: Vec<Vec<Complex64>>,
}

/// Lower-triangular Cholesky factor of a positive definite Hermitian matrix.
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for a in 0..dim {
            m.data[a * dim + a] = Complex64::new(c, 0.0);
        }
        m
    }

    /// Build from row-major entries, validating Hermitian symmetry to within
    /// 1e-12 relative tolerance, then enforcing it exactly.
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self, MatrixError> {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim^2");
        let scale = entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        let mut worst = 0.0f64;
        for a in 0..dim {
            for b in a..dim {
                let asym = (entries[a * dim + b] - entries[b * dim + a].conj()).norm();
                worst = worst.max(asym);
            }
        }
        if worst > HERMITIAN_TOL * scale {
            return Err(MatrixError::NotHermitian(worst / scale));
        }
        let mut m = Self { dim, data: entries };
        m.symmetrize();
        Ok(m)
    }

    /// Build from an upper-triangle generator; the lower triangle is mirrored,
    /// so the result is Hermitian by construction.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for a in 0..dim {
            let d = f(a, a);
            m.data[a * dim + a] = Complex64::new(d.re, 0.0);
            for b in a + 1..dim {
                let v = f(a, b);
                m.data[a * dim + b] = v;
                m.data[b * dim + a] = v.conj();
            }
        }
        m
    }

    /// Rank-one matrix `v v^H`.
    pub fn from_outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        Self::from_upper_fn(dim, |a, b| v[a] * v[b].conj())
    }

    /// Gram matrix `H^H H` of a `rows x cols` row-major complex matrix.
    pub fn gram(rows: usize, cols: usize, h: &[Complex64]) -> Self {
        assert_eq!(h.len(), rows * cols);
        Self::from_upper_fn(cols, |a, b| {
            (0..rows).map(|r| h[r * cols + a].conj() * h[r * cols + b]).sum()
        })
    }

    fn symmetrize(&mut self) {
        let z = self.dim;
        for a in 0..z {
            self.data[a * z + a] = Complex64::new(self.data[a * z + a].re, 0.0);
            for b in a + 1..z {
                let v = (self.data[a * z + b] + self.data[b * z + a].conj()) * 0.5;
                self.data[a * z + b] = v;
                self.data[b * z + a] = v.conj();
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entry(&self, a: usize, b: usize) -> Complex64 {
        self.data[a * self.dim + b]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|a| self.data[a * self.dim + a].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Trace inner product `tr(XY)`; real for Hermitian X, Y.
    pub fn inner(&self, other: &Self) -> Result<f64, MatrixError> {
        if self.dim != other.dim {
            return Err(MatrixError::DimensionMismatch(self.dim, other.dim));
        }
        // tr(XY) = sum_ab X_ab conj(Y_ab); imaginary parts cancel pairwise.
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x.re * y.re + x.im * y.im)
            .sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.dim != other.dim {
            return Err(MatrixError::DimensionMismatch(self.dim, other.dim));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.dim != other.dim {
            return Err(MatrixError::DimensionMismatch(self.dim, other.dim));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Quadratic form `v^H X v`; real for Hermitian X.
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        assert_eq!(v.len(), self.dim);
        let z = self.dim;
        let mut acc = 0.0;
        for a in 0..z {
            for b in 0..z {
                acc += (v[a].conj() * self.data[a * z + b] * v[b]).re;
            }
        }
        acc
    }

    /// Matrix-vector product `X v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        let z = self.dim;
        (0..z)
            .map(|a| (0..z).map(|b| self.data[a * z + b] * v[b]).sum())
            .collect()
    }

    /// `self * middle * self`; Hermitian whenever both factors are.
    pub fn sandwich(&self, middle: &Self) -> Result<Self, MatrixError> {
        if self.dim != middle.dim {
            return Err(MatrixError::DimensionMismatch(self.dim, middle.dim));
        }
        let z = self.dim;
        // tmp = middle * self
        let mut tmp = vec![Complex64::new(0.0, 0.0); z * z];
        for a in 0..z {
            for k in 0..z {
                let m = middle.data[a * z + k];
                if m.norm_sqr() == 0.0 {
                    continue;
                }
                for b in 0..z {
                    tmp[a * z + b] += m * self.data[k * z + b];
                }
            }
        }
        let mut out = Self::zeros(z);
        for a in 0..z {
            for b in a..z {
                let mut v = Complex64::new(0.0, 0.0);
                for k in 0..z {
                    v += self.data[a * z + k] * tmp[k * z + b];
                }
                if a == b {
                    out.data[a * z + a] = Complex64::new(v.re, 0.0);
                } else {
                    out.data[a * z + b] = v;
                    out.data[b * z + a] = v.conj();
                }
            }
        }
        Ok(out)
    }

    /// Real-isometry vectorization: diagonal first, then scaled real parts of
    /// the upper off-diagonal entries in row-major order, then scaled imaginary
    /// parts of the same entries. Satisfies `tr(XY) = cvec(X)' cvec(Y)`.
    pub fn cvec(&self) -> Vec<f64> {
        let z = self.dim;
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut v = Vec::with_capacity(z * z);
        for a in 0..z {
            v.push(self.data[a * z + a].re);
        }
        for a in 0..z {
            for b in a + 1..z {
                v.push(sqrt2 * self.data[a * z + b].re);
            }
        }
        for a in 0..z {
            for b in a + 1..z {
                v.push(-sqrt2 * self.data[a * z + b].im);
            }
        }
        v
    }

    /// Inverse of [`cvec`](Self::cvec).
    pub fn cmat(v: &[f64]) -> Result<Self, MatrixError> {
        let len = v.len();
        let z = (len as f64).sqrt().round() as usize;
        if z * z != len || z == 0 {
            return Err(MatrixError::NonSquareLength(len));
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = Self::zeros(z);
        for a in 0..z {
            m.data[a * z + a] = Complex64::new(v[a], 0.0);
        }
        let offdiag = z * (z - 1) / 2;
        let mut idx = 0;
        for a in 0..z {
            for b in a + 1..z {
                let re = v[z + idx] * inv_sqrt2;
                let im = -v[z + offdiag + idx] * inv_sqrt2;
                m.data[a * z + b] = Complex64::new(re, im);
                m.data[b * z + a] = Complex64::new(re, -im);
                idx += 1;
            }
        }
        Ok(m)
    }

    /// Cyclic Jacobi eigendecomposition.
    ///
    /// Unconditionally stable at the small dimensions used here. Converges when
    /// the off-diagonal Frobenius mass drops below `1e-12 * ||X||_F`.
    pub fn eig(&self) -> Result<EigenPair, MatrixError> {
        let z = self.dim;
        let norm = self.frobenius_norm();
        let mut a = self.data.clone();
        let mut v = vec![Complex64::new(0.0, 0.0); z * z];
        for i in 0..z {
            v[i * z + i] = Complex64::new(1.0, 0.0);
        }
        if norm == 0.0 || z == 1 {
            return Ok(finish_eig(z, &a, &v));
        }
        let target = JACOBI_TOL * norm;
        let mut converged = false;
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..z)
                .flat_map(|p| (p + 1..z).map(move |q| (p, q)))
                .map(|(p, q)| 2.0 * a[p * z + q].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= target {
                converged = true;
                break;
            }
            for p in 0..z {
                for q in p + 1..z {
                    let apq = a[p * z + q];
                    let r = apq.norm();
                    if r < 1e-300 {
                        continue;
                    }
                    let phase = apq / r;
                    let app = a[p * z + p].re;
                    let aqq = a[q * z + q].re;
                    let theta = (aqq - app) / (2.0 * r);
                    // small-magnitude root of t^2 - 2*theta*t - 1 = 0
                    let t = if theta >= 0.0 {
                        -1.0 / (theta + (theta * theta + 1.0).sqrt())
                    } else {
                        1.0 / (-theta + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // Unitary rotation J: J_pp = c, J_pq = -s*phase,
                    // J_qp = s*conj(phase), J_qq = c; apply A <- J^H A J.
                    for k in 0..z {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = a[k * z + p];
                        let akq = a[k * z + q];
                        let new_kp = akp * c + akq * (s * phase.conj());
                        let new_kq = akp * (-s * phase) + akq * c;
                        a[k * z + p] = new_kp;
                        a[p * z + k] = new_kp.conj();
                        a[k * z + q] = new_kq;
                        a[q * z + k] = new_kq.conj();
                    }
                    let new_pp = app * c * c + 2.0 * r * s * c + aqq * s * s;
                    let new_qq = app * s * s - 2.0 * r * s * c + aqq * c * c;
                    a[p * z + p] = Complex64::new(new_pp, 0.0);
                    a[q * z + q] = Complex64::new(new_qq, 0.0);
                    a[p * z + q] = Complex64::new(0.0, 0.0);
                    a[q * z + p] = Complex64::new(0.0, 0.0);
                    for k in 0..z {
                        let vkp = v[k * z + p];
                        let vkq = v[k * z + q];
                        v[k * z + p] = vkp * c + vkq * (s * phase.conj());
                        v[k * z + q] = vkp * (-s * phase) + vkq * c;
                    }
                }
            }
        }
        if !converged {
            // Final check: the last sweep may have landed on the target.
            let off: f64 = (0..z)
                .flat_map(|p| (p + 1..z).map(move |q| (p, q)))
                .map(|(p, q)| 2.0 * a[p * z + q].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off > target {
                return Err(MatrixError::ConvergenceFailure(JACOBI_MAX_SWEEPS));
            }
        }
        Ok(finish_eig(z, &a, &v))
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> Result<f64, MatrixError> {
        Ok(*self.eig()?.values.last().expect("dim >= 1"))
    }

    /// PSD check with an absolute tolerance on the smallest eigenvalue.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        matches!(self.min_eigenvalue(), Ok(min) if min >= -tol)
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor, MatrixError> {
        let z = self.dim;
        let mut lower = vec![Complex64::new(0.0, 0.0); z * z];
        for j in 0..z {
            let mut d = self.data[j * z + j].re;
            for k in 0..j {
                d -= lower[j * z + k].norm_sqr();
            }
            if !(d > CHOLESKY_PIVOT_MIN) {
                return Err(MatrixError::NotPositiveDefinite(d, j));
            }
            let ljj = d.sqrt();
            lower[j * z + j] = Complex64::new(ljj, 0.0);
            for i in j + 1..z {
                let mut v = self.data[i * z + j];
                for k in 0..j {
                    v -= lower[i * z + k] * lower[j * z + k].conj();
                }
                lower[i * z + j] = v / ljj;
            }
        }
        Ok(CholeskyFactor { dim: z, lower })
    }

    /// `log det(X)` for positive definite `X`, via Cholesky.
    pub fn logdet(&self) -> Result<f64, MatrixError> {
        Ok(self.cholesky()?.logdet())
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse_pd(&self) -> Result<Self, MatrixError> {
        let chol = self.cholesky()?;
        let z = self.dim;
        let mut out = Self::zeros(z);
        let mut e = vec![Complex64::new(0.0, 0.0); z];
        for col in 0..z {
            e[col] = Complex64::new(1.0, 0.0);
            let x = chol.solve(&e);
            e[col] = Complex64::new(0.0, 0.0);
            for row in 0..z {
                out.data[row * z + col] = x[row];
            }
        }
        out.symmetrize();
        Ok(out)
    }
}

impl CholeskyFactor {
    pub fn logdet(&self) -> f64 {
        (0..self.dim).map(|j| 2.0 * self.lower[j * self.dim + j].re.ln()).sum()
    }

    /// Solve `X x = b` using the factorization.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let z = self.dim;
        assert_eq!(b.len(), z);
        let mut y = b.to_vec();
        for i in 0..z {
            for k in 0..i {
                let lik = self.lower[i * z + k];
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= self.lower[i * z + i].re;
        }
        for i in (0..z).rev() {
            for k in i + 1..z {
                let lki = self.lower[k * z + i].conj();
                y[i] = y[i] - lki * y[k];
            }
            y[i] /= self.lower[i * z + i].re;
        }
        y
    }
}

fn finish_eig(z: usize, a: &[Complex64], v: &[Complex64]) -> EigenPair {
    let mut order: Vec<usize> = (0..z).collect();
    order.sort_by(|&i, &j| {
        a[j * z + j]
            .re
            .partial_cmp(&a[i * z + i].re)
            .expect("eigenvalues are finite")
    });
    let values = order.iter().map(|&i| a[i * z + i].re).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..z).map(|row| v[row * z + col]).collect())
        .collect();
    EigenPair { values, vectors }
}

impl EigenPair {
    /// Reconstruct `V diag(values) V^H`.
    pub fn reconstruct(&self) -> HermitianMatrix {
        let z = self.values.len();
        HermitianMatrix::from_upper_fn(z, |a, b| {
            (0..z)
                .map(|i| self.vectors[i][a] * self.values[i] * self.vectors[i][b].conj())
                .sum()
        })
    }
}
