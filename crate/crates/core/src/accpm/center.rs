//! Barrier-Newton solver for the analytic center.
//!
//! Minimizes `-log det(G(y)) - sum_j log(margin_j(y))` over the reduced
//! coordinates, where `G(y) = I/dim + cmat(B y)` and each plane margin is the
//! affine function `base_j - a_j . y`. The PSD constraint needs no projection:
//! the log-determinant term is its own barrier, and the line search keeps
//! every iterate strictly inside the domain.

use crate::hermitian::HermitianMatrix;
use crate::real_linalg;

use super::{logdet_hessian, AccpmError, CenterOptions, CenterReport, PlaneCache, TraceBasis};

/// Objective value at `y`, or `None` when `y` is outside the barrier domain.
fn eval(basis: &TraceBasis, cache: &[PlaneCache], y: &[f64]) -> Option<f64> {
    let g = basis.to_matrix(y);
    let chol = g.cholesky().ok()?;
    let mut f = -chol.logdet();
    for p in cache {
        let margin = margin_at(p, y);
        if margin <= 0.0 {
            return None;
        }
        f -= margin.ln();
    }
    Some(f)
}

#[inline]
fn margin_at(p: &PlaneCache, y: &[f64]) -> f64 {
    p.base - p.a.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>()
}

fn min_margin(cache: &[PlaneCache], y: &[f64]) -> f64 {
    cache
        .iter()
        .map(|p| margin_at(p, y))
        .fold(f64::INFINITY, f64::min)
}

/// Largest step along `d` that keeps all plane margins positive, capped by the
/// fraction-to-boundary rule.
fn plane_step_cap(cache: &[PlaneCache], y: &[f64], d: &[f64], fraction: f64) -> f64 {
    let mut cap = 1.0f64;
    for p in cache {
        let slope: f64 = p.a.iter().zip(d).map(|(a, di)| a * di).sum();
        if slope > 0.0 {
            cap = cap.min(fraction * margin_at(p, y) / slope);
        }
    }
    cap
}

pub(super) fn solve(
    basis: &TraceBasis,
    cache: &[PlaneCache],
    warm_start: &HermitianMatrix,
    opts: &CenterOptions,
) -> Result<CenterReport, AccpmError> {
    if cache.is_empty() {
        // Barrier over the bare simplex: the scaled identity is stationary.
        let dim = basis.dim();
        return Ok(CenterReport {
            center: HermitianMatrix::scaled_identity(dim, 1.0 / dim as f64),
            newton_iterations: 0,
            kkt_residual: 0.0,
            feasible: true,
        });
    }
    let mut y = basis.coordinates_of(warm_start);
    // Entering Newton too close to a plane wrecks the Hessian conditioning
    // (weights disparate by the squared margin ratio), so push the start a
    // relative distance inside first.
    let max_margin = cache
        .iter()
        .map(|p| margin_at(p, &y))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let target = opts.phase1_exit.max(1e-4 * max_margin);
    if min_margin(cache, &y) <= target {
        y = phase1(basis, cache, y, target, opts)?;
    }
    newton(basis, cache, y, opts)
}

fn newton(
    basis: &TraceBasis,
    cache: &[PlaneCache],
    mut y: Vec<f64>,
    opts: &CenterOptions,
) -> Result<CenterReport, AccpmError> {
    let r = basis.reduced();
    let mut f_cur = eval(basis, cache, &y).ok_or(AccpmError::EmptyInterior)?;
    let mut kkt = f64::INFINITY;
    let mut last_decrement = f64::INFINITY;
    for iter in 0..opts.max_iterations {
        let g_mat = basis.to_matrix(&y);
        let ginv = g_mat.inverse_pd()?;
        let mut grad: Vec<f64> = basis.reduce(&ginv.cvec()).iter().map(|x| -x).collect();
        let mut hess = logdet_hessian(basis, &ginv);
        for p in cache {
            let m = margin_at(p, &y);
            let inv_m = 1.0 / m;
            let w = inv_m * inv_m;
            for i in 0..r {
                grad[i] += p.a[i] * inv_m;
                let ai = p.a[i] * w;
                if ai == 0.0 {
                    continue;
                }
                for j in 0..r {
                    hess[i * r + j] += ai * p.a[j];
                }
            }
        }
        kkt = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let (d, _reg) = real_linalg::regularized_solve(&hess, r, &neg_grad, 1e-12)
            .ok_or(AccpmError::MaxIterations)?;
        let decrement = -grad.iter().zip(&d).map(|(g, di)| g * di).sum::<f64>();
        last_decrement = decrement;
        if decrement / 2.0 <= opts.decrement_tol && kkt <= opts.kkt_tol {
            return Ok(CenterReport {
                center: basis.to_matrix(&y),
                newton_iterations: iter,
                kkt_residual: kkt,
                feasible: true,
            });
        }
        // line search: shrink into the barrier domain, then Armijo
        let mut alpha = plane_step_cap(cache, &y, &d, opts.boundary_fraction);
        let slope: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
        let mut accepted = false;
        while alpha > 1e-18 {
            let y_try: Vec<f64> = y.iter().zip(&d).map(|(yi, di)| yi + alpha * di).collect();
            if let Some(f_try) = eval(basis, cache, &y_try) {
                if f_try <= f_cur + opts.armijo * alpha * slope {
                    y = y_try;
                    f_cur = f_try;
                    accepted = true;
                    break;
                }
            }
            alpha *= opts.backtrack;
        }
        if std::env::var_os("WETLEARN_DEBUG_NEWTON").is_some() {
            eprintln!(
                "iter={iter} f={f_cur:.6e} dec={decrement:.3e} kkt={kkt:.3e} min_m={:.3e} alpha={alpha:.3e} acc={accepted}",
                min_margin(cache, &y)
            );
        }
        if !accepted {
            // progress exhausted at floating-point resolution
            return Ok(CenterReport {
                center: basis.to_matrix(&y),
                newton_iterations: iter,
                kkt_residual: kkt,
                feasible: true,
            });
        }
    }
    // Iteration cap: razor-thin sets hit floating-point resolution before the
    // nominal tolerances; accept the point unless real progress remains.
    if last_decrement / 2.0 <= 1e-6 {
        Ok(CenterReport {
            center: basis.to_matrix(&y),
            newton_iterations: opts.max_iterations,
            kkt_residual: kkt,
            feasible: true,
        })
    } else {
        Err(AccpmError::MaxIterations)
    }
}

/// Phase I: push the minimum plane margin up to `target` by minimizing a
/// softmax surrogate of the negative margins plus a weak log-det term. The
/// log-det keeps iterates inside the PSD cone and keeps the Hessian positive
/// definite even when a single plane dominates the softmax (whose own
/// Hessian vanishes in that case). The softmax sharpness escalates until the
/// target is met or no further progress is possible.
fn phase1(
    basis: &TraceBasis,
    cache: &[PlaneCache],
    start: Vec<f64>,
    target: f64,
    opts: &CenterOptions,
) -> Result<Vec<f64>, AccpmError> {
    const BARRIER_WEIGHT: f64 = 1e-3;
    let r = basis.reduced();
    let mut y = start;
    let mut best_y = y.clone();
    let mut best_min = min_margin(cache, &y);
    let mut rho = 1.0 / best_min.abs().max(1e-3);

    let surrogate = |yy: &[f64], rho: f64| -> Option<f64> {
        let chol = basis.to_matrix(yy).cholesky().ok()?;
        let ms: Vec<f64> = cache.iter().map(|p| margin_at(p, yy)).collect();
        let mx = ms.iter().map(|m| -rho * m).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = ms.iter().map(|m| (-rho * m - mx).exp()).sum();
        Some((mx + s.ln()) / rho - BARRIER_WEIGHT * chol.logdet())
    };

    for _outer in 0..8 {
        for _inner in 0..60 {
            let margins: Vec<f64> = cache.iter().map(|p| margin_at(p, &y)).collect();
            let current_min = margins.iter().cloned().fold(f64::INFINITY, f64::min);
            if current_min > best_min {
                best_min = current_min;
                best_y = y.clone();
            }
            if current_min >= target {
                return Ok(y);
            }
            // stable softmax weights of -rho * margin
            let m_max = margins.iter().map(|m| -rho * m).fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = margins.iter().map(|m| (-rho * m - m_max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let weights: Vec<f64> = exps.iter().map(|e| e / total).collect();
            let g_mat = basis.to_matrix(&y);
            let Ok(ginv) = g_mat.inverse_pd() else {
                break;
            };
            let mut mean_a = vec![0.0; r];
            for (p, w) in cache.iter().zip(&weights) {
                for i in 0..r {
                    mean_a[i] += w * p.a[i];
                }
            }
            let barrier_grad = basis.reduce(&ginv.cvec());
            let grad: Vec<f64> = (0..r)
                .map(|i| mean_a[i] - BARRIER_WEIGHT * barrier_grad[i])
                .collect();
            let mut hess = logdet_hessian(basis, &ginv);
            for h in hess.iter_mut() {
                *h *= BARRIER_WEIGHT;
            }
            for (p, w) in cache.iter().zip(&weights) {
                for i in 0..r {
                    let wi = rho * w * p.a[i];
                    if wi == 0.0 {
                        continue;
                    }
                    for j in 0..r {
                        hess[i * r + j] += wi * p.a[j];
                    }
                }
            }
            for i in 0..r {
                for j in 0..r {
                    hess[i * r + j] -= rho * mean_a[i] * mean_a[j];
                }
            }
            let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some((d, _)) = real_linalg::regularized_solve(&hess, r, &neg_grad, 1e-10) else {
                break;
            };
            let decrement = -grad.iter().zip(&d).map(|(g, di)| g * di).sum::<f64>();
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let Some(f_cur) = surrogate(&y, rho) else {
                break;
            };
            let slope: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-18 {
                let y_try: Vec<f64> = y.iter().zip(&d).map(|(yi, di)| yi + alpha * di).collect();
                if let Some(f_try) = surrogate(&y_try, rho) {
                    if f_try <= f_cur + opts.armijo * alpha * slope {
                        y = y_try;
                        accepted = true;
                        break;
                    }
                }
                alpha *= opts.backtrack;
            }
            if !accepted {
                break;
            }
        }
        let current_min = min_margin(cache, &y);
        if current_min > best_min {
            best_min = current_min;
            best_y = y.clone();
        }
        if current_min >= target {
            return Ok(y);
        }
        rho *= 100.0;
    }
    if best_min >= opts.empty_interior_tol {
        Ok(best_y)
    } else {
        Err(AccpmError::EmptyInterior)
    }
}
