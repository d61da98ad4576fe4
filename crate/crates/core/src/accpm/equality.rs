//! Log-determinant maximization under linear trace equalities.
//!
//! Used by the exact-feedback (infinite-resolution) quantization mode, where
//! every interval pins `tr(normal * G) = rhs` exactly. Once the accumulated
//! equalities (plus the unit-trace constraint) reach full rank, the feasible
//! point is unique and is recovered by a direct linear solve; before that the
//! solver maximizes `log det` over the affine slice of the simplex, using a
//! vanishing ridge shift to reach an interior starting point when the slice
//! touches the PSD boundary.

use crate::hermitian::HermitianMatrix;
use crate::real_linalg::{self, PivotedQr};

use super::{AccpmError, TraceBasis};

/// Linear constraint `tr(normal * G) = rhs`.
#[derive(Clone, Debug)]
pub struct LinearEquality {
    pub normal: HermitianMatrix,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct EqualitySolveReport {
    pub center: HermitianMatrix,
    /// Rank of the stacked system including the unit-trace row.
    pub rank: usize,
    /// Whether the system pins the matrix uniquely (rank = dim^2).
    pub full_rank: bool,
    /// Residual ridge shift if the interior solve could not reach the exact
    /// barrier domain (zero in the generic case).
    pub ridge: f64,
    pub newton_iterations: usize,
}

const RANK_TOL: f64 = 1e-10;

pub fn max_logdet_with_equalities(
    dim: usize,
    equalities: &[LinearEquality],
) -> Result<EqualitySolveReport, AccpmError> {
    if dim <= 1 {
        return Err(AccpmError::InvalidDimension(dim));
    }
    for eq in equalities {
        if eq.normal.dim() != dim {
            return Err(AccpmError::DimensionMismatch(eq.normal.dim(), dim));
        }
    }
    let basis = TraceBasis::new(dim);
    let r = basis.reduced();
    let n = dim * dim;

    // rank of the full stacked system (trace row first), reported as-is
    let mut stacked = Vec::with_capacity((equalities.len() + 1) * n);
    stacked.extend(HermitianMatrix::identity(dim).cvec());
    for eq in equalities {
        stacked.extend(eq.normal.cvec());
    }
    let full_qr = PivotedQr::new(&stacked, equalities.len() + 1, n, RANK_TOL);
    let rank = full_qr.rank();
    let full_rank = rank == n;

    if equalities.is_empty() {
        return Ok(EqualitySolveReport {
            center: HermitianMatrix::scaled_identity(dim, 1.0 / dim as f64),
            rank,
            full_rank,
            ridge: 0.0,
            newton_iterations: 0,
        });
    }

    // reduced system: rows a_m = B^T cvec(normal), rhs shifted by the origin
    let m = equalities.len();
    let mut k = vec![0.0; m * r];
    let mut rhs = vec![0.0; m];
    for (row, eq) in equalities.iter().enumerate() {
        let sigma = eq.normal.cvec();
        let reduced = basis.reduce(&sigma);
        k[row * r..(row + 1) * r].copy_from_slice(&reduced);
        let origin_dot: f64 = sigma.iter().zip(&basis.origin).map(|(s, o)| s * o).sum();
        rhs[row] = eq.rhs - origin_dot;
    }
    let qr = PivotedQr::new(&k, m, r, RANK_TOL);
    let y_part = qr.solve_basic(&rhs);
    let nullspace = qr.nullspace();

    if nullspace.is_empty() {
        return Ok(EqualitySolveReport {
            center: basis.to_matrix(&y_part),
            rank,
            full_rank,
            ridge: 0.0,
            newton_iterations: 0,
        });
    }

    // interior maximization of log det over y = y_part + N z
    let directions: Vec<HermitianMatrix> = nullspace
        .iter()
        .map(|col| {
            // matrix form of the composite direction B * n_i
            let mut full = vec![0.0; n];
            for (ci, coeff) in col.iter().enumerate() {
                if *coeff == 0.0 {
                    continue;
                }
                for (f, b) in full.iter_mut().zip(&basis.columns[ci]) {
                    *f += coeff * b;
                }
            }
            HermitianMatrix::cmat(&full).expect("square length")
        })
        .collect();
    let assemble = |z: &[f64]| -> HermitianMatrix {
        let mut y = y_part.clone();
        for (zi, col) in z.iter().zip(&nullspace) {
            for (yi, ci) in y.iter_mut().zip(col) {
                *yi += zi * ci;
            }
        }
        basis.to_matrix(&y)
    };

    let free = nullspace.len();
    let mut z = vec![0.0; free];
    let g0 = assemble(&z);
    let min_eig = g0.min_eigenvalue()?;
    let mut ridge = if min_eig > 1e-10 { 0.0 } else { (-1.5 * min_eig).max(1e-3) };
    let mut total_iters = 0;

    loop {
        total_iters += newton_logdet(&assemble, &directions, &mut z, ridge, free)?;
        if ridge == 0.0 {
            break;
        }
        let g = assemble(&z);
        if g.min_eigenvalue()? > 1e-12 {
            ridge = 0.0; // interior reached; final exact solve
        } else {
            ridge *= 0.1;
            if ridge < 1e-9 {
                // slice may only touch the PSD boundary; return the limit point
                break;
            }
        }
    }

    Ok(EqualitySolveReport {
        center: assemble(&z),
        rank,
        full_rank,
        ridge,
        newton_iterations: total_iters,
    })
}

/// Damped Newton on `-log det(G(z) + ridge * I)`.
fn newton_logdet(
    assemble: &dyn Fn(&[f64]) -> HermitianMatrix,
    directions: &[HermitianMatrix],
    z: &mut Vec<f64>,
    ridge: f64,
    free: usize,
) -> Result<usize, AccpmError> {
    let dim = directions[0].dim();
    let shift = HermitianMatrix::scaled_identity(dim, ridge);
    let eval = |zz: &[f64]| -> Option<f64> {
        let g = assemble(zz).add(&shift).ok()?;
        g.cholesky().ok().map(|c| -c.logdet())
    };
    let mut f_cur = match eval(z) {
        Some(f) => f,
        // ridge too small to enter the domain; caller will adjust
        None => return Ok(0),
    };
    let mut iters = 0;
    for _ in 0..100 {
        let g = assemble(z).add(&shift)?;
        let ginv = g.inverse_pd()?;
        let grad: Vec<f64> = directions
            .iter()
            .map(|d| -ginv.inner(d).expect("dimension-consistent"))
            .collect();
        let mut hess = vec![0.0; free * free];
        for (ki, dk) in directions.iter().enumerate() {
            let w = ginv.sandwich(dk)?;
            for (li, dl) in directions.iter().enumerate() {
                hess[ki * free + li] = w.inner(dl)?;
            }
        }
        let neg: Vec<f64> = grad.iter().map(|gi| -gi).collect();
        let Some((d, _)) = real_linalg::regularized_solve(&hess, free, &neg, 1e-12) else {
            break;
        };
        let decrement = -grad.iter().zip(&d).map(|(g, di)| g * di).sum::<f64>();
        iters += 1;
        if decrement / 2.0 <= 1e-12 {
            break;
        }
        let slope: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-18 {
            let z_try: Vec<f64> = z.iter().zip(&d).map(|(zi, di)| zi + alpha * di).collect();
            if let Some(f_try) = eval(&z_try) {
                if f_try <= f_cur + 0.01 * alpha * slope {
                    *z = z_try;
                    f_cur = f_try;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(iters)
}
