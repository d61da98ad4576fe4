//! Robust relaxation of the working set under measurement error.
//!
//! Finds slacks `t >= 0` of minimal total sum such that some unit-trace PSD
//! matrix satisfies every relaxed plane `tr(normal * G) - bound <= t`. Solved
//! with a short-step barrier path over the joint variables `(y, t)`; the
//! Newton systems are arrow-shaped (dense reduced block, diagonal slack
//! block), so each step eliminates the slacks through a Schur complement.

use crate::real_linalg;

use super::{logdet_hessian, AccpmError, PlaneCache, WorkingSet};

#[derive(Clone, Debug)]
pub struct RelaxOptions {
    /// Path terminates once the barrier duality-gap bound drops below this.
    pub gap_tol: f64,
    /// Newton decrement target for each recentering along the path.
    pub inner_decrement_tol: f64,
    pub max_inner_iterations: usize,
    /// Slacks at most this large are snapped to zero when the solution point
    /// stays strictly feasible without them.
    pub cleanup_tol: f64,
    /// Padding added to every retained slack. At the exact optimum the
    /// relaxed constraints are tight and the set has an empty interior; the
    /// pad restores a sliver of interior so the analytic center exists.
    pub interior_pad: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            inner_decrement_tol: 1e-10,
            max_inner_iterations: 100,
            cleanup_tol: 1e-8,
            interior_pad: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxReport {
    /// Sum of slacks after optimization (zero when measurements are
    /// consistent).
    pub total_slack: f64,
    pub max_slack: f64,
    pub newton_iterations: usize,
}

/// Margin of plane `j` ignoring its slack: `bound - tr(normal * G(y))`.
fn base_margin(p: &PlaneCache, slack: f64, y: &[f64]) -> f64 {
    // cache.base includes the stored slack; remove it here
    p.base - slack - p.a.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>()
}

pub(super) fn solve(ws: &mut WorkingSet, opts: &RelaxOptions) -> Result<RelaxReport, AccpmError> {
    let plane_count = ws.planes().len();
    if plane_count == 0 {
        return Ok(RelaxReport { total_slack: 0.0, max_slack: 0.0, newton_iterations: 0 });
    }
    let stored_slacks: Vec<f64> = ws.planes().iter().map(|p| p.slack).collect();
    let basis = ws.basis();
    let cache = ws.cache();
    let r = basis.reduced();
    let j = plane_count;

    let mut y = basis.coordinates_of(ws.center());
    let mut t = vec![0.0; j];
    for (idx, p) in cache.iter().enumerate() {
        let mu = base_margin(p, stored_slacks[idx], &y);
        t[idx] = (-mu).max(0.0) + 0.1;
    }

    // barrier terms: j relaxed margins + j slack positivity + PSD block
    let nu = (2 * j + ws.dim()) as f64;
    let mut mu_bar = (t.iter().sum::<f64>() / nu).max(1e-2);
    let mut total_newton = 0;

    let eval = |y: &[f64], t: &[f64], mu_bar: f64| -> Option<f64> {
        let g = basis.to_matrix(y);
        let chol = g.cholesky().ok()?;
        let mut f = t.iter().sum::<f64>() / mu_bar - chol.logdet();
        for (idx, p) in cache.iter().enumerate() {
            let rj = t[idx] + base_margin(p, stored_slacks[idx], y);
            if rj <= 0.0 || t[idx] <= 0.0 {
                return None;
            }
            f -= rj.ln() + t[idx].ln();
        }
        Some(f)
    };

    loop {
        // recenter at the current barrier weight
        for _ in 0..opts.max_inner_iterations {
            let g_mat = basis.to_matrix(&y);
            let ginv = g_mat.inverse_pd()?;
            let mut grad_y: Vec<f64> = basis.reduce(&ginv.cvec()).iter().map(|x| -x).collect();
            let mut hess_yy = logdet_hessian(basis, &ginv);
            let mut grad_t = vec![0.0; j];
            let mut d_diag = vec![0.0; j];
            let mut c_cols: Vec<Vec<f64>> = Vec::with_capacity(j);
            for (idx, p) in cache.iter().enumerate() {
                let rj = t[idx] + base_margin(p, stored_slacks[idx], &y);
                let inv_r = 1.0 / rj;
                let w = inv_r * inv_r;
                for i in 0..r {
                    grad_y[i] += p.a[i] * inv_r;
                    let ai = p.a[i] * w;
                    if ai != 0.0 {
                        for jj in 0..r {
                            hess_yy[i * r + jj] += ai * p.a[jj];
                        }
                    }
                }
                grad_t[idx] = 1.0 / mu_bar - inv_r - 1.0 / t[idx];
                d_diag[idx] = w + 1.0 / (t[idx] * t[idx]);
                c_cols.push(p.a.iter().map(|a| -a * w).collect());
            }
            // Schur complement on the slack block
            let mut schur = hess_yy.clone();
            let mut rhs = grad_y.iter().map(|g| -g).collect::<Vec<f64>>();
            for idx in 0..j {
                let scale = 1.0 / d_diag[idx];
                for i in 0..r {
                    let ci = c_cols[idx][i] * scale;
                    if ci != 0.0 {
                        for jj in 0..r {
                            schur[i * r + jj] -= ci * c_cols[idx][jj];
                        }
                    }
                    rhs[i] += c_cols[idx][i] * scale * grad_t[idx];
                }
            }
            let Some((dy, _)) = real_linalg::regularized_solve(&schur, r, &rhs, 1e-12) else {
                break;
            };
            let mut dt = vec![0.0; j];
            for idx in 0..j {
                let cdy: f64 = c_cols[idx].iter().zip(&dy).map(|(c, d)| c * d).sum();
                dt[idx] = (-grad_t[idx] - cdy) / d_diag[idx];
            }
            let decrement = -(grad_y.iter().zip(&dy).map(|(g, d)| g * d).sum::<f64>()
                + grad_t.iter().zip(&dt).map(|(g, d)| g * d).sum::<f64>());
            total_newton += 1;
            if decrement / 2.0 <= opts.inner_decrement_tol {
                break;
            }
            let f_cur = match eval(&y, &t, mu_bar) {
                Some(f) => f,
                None => break,
            };
            let slope = -decrement;
            let mut alpha = 1.0f64;
            // fraction-to-boundary on both margin families
            for idx in 0..j {
                if dt[idx] < 0.0 {
                    alpha = alpha.min(-0.99 * t[idx] / dt[idx]);
                }
                let r_slope: f64 =
                    cache[idx].a.iter().zip(&dy).map(|(a, d)| a * d).sum::<f64>() - dt[idx];
                if r_slope > 0.0 {
                    let rj = t[idx] + base_margin(&cache[idx], stored_slacks[idx], &y);
                    alpha = alpha.min(0.99 * rj / r_slope);
                }
            }
            let mut accepted = false;
            while alpha > 1e-18 {
                let y_try: Vec<f64> = y.iter().zip(&dy).map(|(yi, d)| yi + alpha * d).collect();
                let t_try: Vec<f64> = t.iter().zip(&dt).map(|(ti, d)| ti + alpha * d).collect();
                if let Some(f_try) = eval(&y_try, &t_try, mu_bar) {
                    if f_try <= f_cur + 0.01 * alpha * slope {
                        y = y_try;
                        t = t_try;
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
        if nu * mu_bar <= opts.gap_tol {
            break;
        }
        mu_bar *= 0.2;
    }

    // snap numerically-zero slacks when the solution point keeps a healthy
    // margin without them; pad the rest so the relaxed set has an interior
    let mut final_slacks = vec![0.0; j];
    for (idx, p) in cache.iter().enumerate() {
        let mu = base_margin(p, stored_slacks[idx], &y);
        if t[idx] <= opts.cleanup_tol && mu >= opts.interior_pad {
            final_slacks[idx] = 0.0;
        } else {
            final_slacks[idx] = t[idx] + opts.interior_pad;
        }
    }
    let total_slack: f64 = final_slacks.iter().sum();
    let max_slack = final_slacks.iter().cloned().fold(0.0f64, f64::max);
    ws.set_slacks(&final_slacks);
    Ok(RelaxReport { total_slack, max_slack, newton_iterations: total_newton })
}
