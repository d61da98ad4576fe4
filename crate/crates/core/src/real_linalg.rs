//! Small dense real linear algebra used by the localization solver.
//!
//! Everything operates on row-major `Vec<f64>` buffers; the dimensions in this
//! crate never exceed a few hundred, so simple dense kernels are adequate.

/// Solve `A x = b` for symmetric positive definite `A` (row-major, n x n)
/// via Cholesky. Returns `None` when a pivot is not strictly positive.
pub(crate) fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / ljj;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Some(y)
}

/// Cholesky solve with an escalating diagonal regularization ladder, starting
/// at `base_reg` (scaled by the largest diagonal entry). Returns the solution
/// and the shift that succeeded.
pub(crate) fn regularized_solve(
    a: &[f64],
    n: usize,
    b: &[f64],
    base_reg: f64,
) -> Option<(Vec<f64>, f64)> {
    if let Some(x) = cholesky_solve(a, n, b) {
        return Some((x, 0.0));
    }
    let scale = a
        .iter()
        .step_by(n + 1)
        .fold(0.0f64, |acc, &d| acc.max(d.abs()))
        .max(1.0);
    let mut reg = base_reg * scale;
    for _ in 0..20 {
        let mut shifted = a.to_vec();
        for i in 0..n {
            shifted[i * n + i] += reg;
        }
        if let Some(x) = cholesky_solve(&shifted, n, b) {
            return Some((x, reg));
        }
        reg *= 100.0;
    }
    None
}

/// Householder QR with column pivoting of an `m x n` row-major matrix.
///
/// Exposes the numerical rank, a basic solution of `A x = b` (free variables
/// set to zero), and an orthonormal basis of the null space of `A`.
pub(crate) struct PivotedQr {
    m: usize,
    n: usize,
    /// Upper-trapezoidal R factor of the permuted matrix.
    r: Vec<f64>,
    /// Householder reflectors: (pivot row k, scaled vector over rows k..m).
    reflectors: Vec<(usize, Vec<f64>, f64)>,
    /// Column permutation: factorized column `j` is original column `perm[j]`.
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub(crate) fn new(a: &[f64], m: usize, n: usize, rank_tol: f64) -> Self {
        debug_assert_eq!(a.len(), m * n);
        let mut work = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::new();
        let kmax = m.min(n);
        let max_norm0 = (0..n)
            .map(|j| (0..m).map(|i| work[i * n + j] * work[i * n + j]).sum::<f64>())
            .fold(0.0f64, f64::max)
            .sqrt();
        let mut rank = 0;
        for k in 0..kmax {
            // pivot on the remaining column with the largest trailing norm
            let (pivot, pnorm) = (k..n)
                .map(|j| {
                    let norm: f64 = (k..m).map(|i| work[i * n + j] * work[i * n + j]).sum();
                    (j, norm)
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite norms"))
                .expect("nonempty");
            if pnorm.sqrt() <= rank_tol * max_norm0.max(1e-300) {
                break;
            }
            if pivot != k {
                for i in 0..m {
                    work.swap(i * n + k, i * n + pivot);
                }
                perm.swap(k, pivot);
            }
            let alpha = pnorm.sqrt();
            let beta = if work[k * n + k] >= 0.0 { -alpha } else { alpha };
            let mut v = vec![0.0; m - k];
            v[0] = work[k * n + k] - beta;
            for i in k + 1..m {
                v[i - k] = work[i * n + k];
            }
            let tau = 2.0 / v.iter().map(|x| x * x).sum::<f64>();
            // apply H = I - tau v v' to the trailing columns (including k)
            for j in k..n {
                let mut dot = 0.0;
                for i in k..m {
                    dot += v[i - k] * work[i * n + j];
                }
                dot *= tau;
                for i in k..m {
                    work[i * n + j] -= dot * v[i - k];
                }
            }
            work[k * n + k] = beta; // exact annihilation
            for i in k + 1..m {
                work[i * n + k] = 0.0;
            }
            reflectors.push((k, v, tau));
            rank += 1;
        }
        Self { m, n, r: work, reflectors, perm, rank }
    }

    pub(crate) fn rank(&self) -> usize {
        self.rank
    }

    /// Apply `Q^T` to a length-m vector.
    fn apply_qt(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.m);
        let mut y = b.to_vec();
        for (k, v, tau) in &self.reflectors {
            let mut dot = 0.0;
            for i in *k..self.m {
                dot += v[i - k] * y[i];
            }
            dot *= tau;
            for i in *k..self.m {
                y[i] -= dot * v[i - k];
            }
        }
        y
    }

    /// Basic solution of the consistent system `A x = b` (free variables set
    /// to zero).
    pub(crate) fn solve_basic(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let y = self.apply_qt(b);
        let mut z = vec![0.0; n];
        for i in (0..self.rank).rev() {
            let mut v = y[i];
            for j in i + 1..self.rank {
                v -= self.r[i * n + j] * z[j];
            }
            z[i] = v / self.r[i * n + i];
        }
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[self.perm[j]] = z[j];
        }
        x
    }

    /// Orthonormal basis of the null space of `A`, as columns.
    pub(crate) fn nullspace(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let r = self.rank;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - r);
        for free in r..n {
            // solve R11 w = -R12[:, free]
            let mut w = vec![0.0; r];
            for i in (0..r).rev() {
                let mut v = -self.r[i * n + free];
                for j in i + 1..r {
                    v -= self.r[i * n + j] * w[j];
                }
                w[i] = v / self.r[i * n + i];
            }
            let mut x = vec![0.0; n];
            for j in 0..r {
                x[self.perm[j]] = w[j];
            }
            x[self.perm[free]] = 1.0;
            basis.push(x);
        }
        // modified Gram-Schmidt for an orthonormal basis
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
        for mut v in basis {
            for u in &ortho {
                let dot: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u.iter()) {
                    *vi -= dot * ui;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                ortho.push(v);
            }
        }
        ortho
    }
}
