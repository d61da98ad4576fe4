//! Localization engine: analytic center cutting plane method over the
//! unit-trace PSD simplex.
//!
//! The working set is the intersection of `{G >= 0, tr(G) = 1}` with the
//! half-spaces `tr(normal * G) - bound <= slack` accumulated from feedback.
//! Its analytic center doubles as the current channel estimate. Solving
//! happens in `cvec` coordinates: the trace constraint is eliminated by a
//! fixed orthonormal basis of the trace-zero subspace, so the barrier problem
//! becomes an unconstrained self-concordant minimization in `dim^2 - 1` real
//! variables.

mod center;
mod equality;
mod relax;

pub use equality::{max_logdet_with_equalities, EqualitySolveReport, LinearEquality};
pub use relax::{RelaxOptions, RelaxReport};

use thiserror::Error;

use crate::hermitian::{HermitianMatrix, MatrixError};
use crate::real_linalg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AccpmError {
    #[error("working set has empty interior")]
    EmptyInterior,
    #[error("Newton iteration cap reached without convergence")]
    MaxIterations,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("pruning metric is numerically singular")]
    SingularMetric,
    #[error("dimension {0} is too small for beamforming")]
    InvalidDimension(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// One half-space constraint `tr(normal * G) - bound <= slack`.
#[derive(Clone, Debug)]
pub struct CuttingPlane {
    /// Linear functional of the constraint.
    pub normal: HermitianMatrix,
    /// Right-hand side.
    pub bound: f64,
    /// Feedback interval that produced the plane (>= 2).
    pub interval: usize,
    /// Index among the planes of that interval (1-based).
    pub index: usize,
    /// Relaxation slack, zero outside robust mode.
    pub slack: f64,
}

impl CuttingPlane {
    pub fn new(normal: HermitianMatrix, bound: f64, interval: usize, index: usize) -> Self {
        Self { normal, bound, interval, index, slack: 0.0 }
    }

    /// Signed constraint value `tr(normal * g) - bound - slack`; non-positive
    /// when satisfied.
    pub fn value_at(&self, g: &HermitianMatrix) -> Result<f64, MatrixError> {
        Ok(self.normal.inner(g)? - self.bound - self.slack)
    }
}

/// Solver tolerances and line-search constants.
#[derive(Clone, Debug)]
pub struct CenterOptions {
    /// Newton stops once the decrement satisfies `lambda^2 / 2 <= this` and
    /// the KKT residual target is met.
    pub decrement_tol: f64,
    /// Projected-gradient norm target in cvec coordinates.
    pub kkt_tol: f64,
    pub max_iterations: usize,
    /// Armijo sufficient-decrease parameter.
    pub armijo: f64,
    /// Backtracking shrink factor.
    pub backtrack: f64,
    /// Fraction-to-boundary cap on plane margins.
    pub boundary_fraction: f64,
    /// Phase-I exits once the minimum margin reaches this value.
    pub phase1_exit: f64,
    /// Best attainable minimum margin below this declares an empty interior.
    pub empty_interior_tol: f64,
}

impl Default for CenterOptions {
    fn default() -> Self {
        Self {
            decrement_tol: 1e-10,
            kkt_tol: 1e-8,
            max_iterations: 200,
            armijo: 0.01,
            backtrack: 0.5,
            boundary_fraction: 0.99,
            phase1_exit: 1e-9,
            empty_interior_tol: 1e-12,
        }
    }
}

/// Diagnostics from one analytic-center solve.
#[derive(Clone, Debug)]
pub struct CenterReport {
    pub center: HermitianMatrix,
    pub newton_iterations: usize,
    /// Projected-gradient norm of the barrier objective at the center.
    pub kkt_residual: f64,
    pub feasible: bool,
}

/// Orthonormal basis of the trace-zero Hermitian subspace in cvec coordinates,
/// with the matrix form of every basis direction cached.
pub(crate) struct TraceBasis {
    dim: usize,
    reduced: usize,
    columns: Vec<Vec<f64>>,
    directions: Vec<HermitianMatrix>,
    origin: Vec<f64>, // cvec(I / dim)
}

impl TraceBasis {
    pub(crate) fn new(dim: usize) -> Self {
        let n = dim * dim;
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        // Helmert vectors span the diagonal directions orthogonal to cvec(I).
        for k in 1..dim {
            let mut v = vec![0.0; n];
            let norm = (k as f64 * (k as f64 + 1.0)).sqrt();
            for item in v.iter_mut().take(k) {
                *item = 1.0 / norm;
            }
            v[k] = -(k as f64) / norm;
            columns.push(v);
        }
        // Off-diagonal coordinates are trace-orthogonal already.
        for i in dim..n {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            columns.push(v);
        }
        let directions = columns
            .iter()
            .map(|c| HermitianMatrix::cmat(c).expect("basis column has square length"))
            .collect();
        let origin = HermitianMatrix::scaled_identity(dim, 1.0 / dim as f64).cvec();
        Self { dim, reduced: n - 1, columns, directions, origin }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn reduced(&self) -> usize {
        self.reduced
    }

    pub(crate) fn direction(&self, k: usize) -> &HermitianMatrix {
        &self.directions[k]
    }

    /// `B^T x` for a full cvec vector.
    pub(crate) fn reduce(&self, full: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| c.iter().zip(full).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `I/dim + cmat(B y)`.
    pub(crate) fn to_matrix(&self, y: &[f64]) -> HermitianMatrix {
        let mut full = self.origin.clone();
        for (yk, col) in y.iter().zip(&self.columns) {
            for (f, c) in full.iter_mut().zip(col) {
                *f += yk * c;
            }
        }
        HermitianMatrix::cmat(&full).expect("square length by construction")
    }

    /// Reduced coordinates of a unit-trace matrix.
    pub(crate) fn coordinates_of(&self, g: &HermitianMatrix) -> Vec<f64> {
        let full = g.cvec();
        let shifted: Vec<f64> = full.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.reduce(&shifted)
    }
}

/// Reduced-coordinate view of a plane: margin at `y` is `base - a . y`.
pub(crate) struct PlaneCache {
    pub(crate) a: Vec<f64>,
    pub(crate) base: f64,
}

/// Working set of cutting planes with its current analytic center.
pub struct WorkingSet {
    dim: usize,
    planes: Vec<CuttingPlane>,
    center: HermitianMatrix,
    robust: bool,
    basis: TraceBasis,
    cache: Vec<PlaneCache>,
}

impl WorkingSet {
    /// The initial set is the whole unit-trace PSD simplex; its analytic
    /// center is `I / dim`.
    pub fn initial(dim: usize) -> Result<Self, AccpmError> {
        if dim <= 1 {
            return Err(AccpmError::InvalidDimension(dim));
        }
        let basis = TraceBasis::new(dim);
        Ok(Self {
            dim,
            planes: Vec::new(),
            center: HermitianMatrix::scaled_identity(dim, 1.0 / dim as f64),
            robust: false,
            basis,
            cache: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn planes(&self) -> &[CuttingPlane] {
        &self.planes
    }

    pub fn center(&self) -> &HermitianMatrix {
        &self.center
    }

    pub fn robust_mode(&self) -> bool {
        self.robust
    }

    pub fn set_robust_mode(&mut self, on: bool) {
        self.robust = on;
    }

    /// Append planes without recomputing the center (an explicit recenter
    /// follows). The plane list only grows here, so the new set nests inside
    /// the previous one.
    pub fn add_planes(&mut self, planes: Vec<CuttingPlane>) -> Result<(), AccpmError> {
        for p in &planes {
            if p.normal.dim() != self.dim {
                return Err(AccpmError::DimensionMismatch(p.normal.dim(), self.dim));
            }
        }
        for p in planes {
            self.push_cache(&p);
            self.planes.push(p);
        }
        Ok(())
    }

    fn push_cache(&mut self, p: &CuttingPlane) {
        let sigma = p.normal.cvec();
        let a = self.basis.reduce(&sigma);
        let origin_dot: f64 = sigma.iter().zip(&self.basis.origin).map(|(s, o)| s * o).sum();
        self.cache.push(PlaneCache { a, base: p.bound + p.slack - origin_dot });
    }

    pub(crate) fn rebuild_cache(&mut self) {
        self.cache.clear();
        let planes = std::mem::take(&mut self.planes);
        for p in &planes {
            self.push_cache(p);
        }
        self.planes = planes;
    }

    /// Margins `bound + slack - tr(normal * g)` of every plane at `g`.
    pub fn margins_at(&self, g: &HermitianMatrix) -> Vec<f64> {
        self.planes
            .iter()
            .map(|p| -(p.value_at(g).expect("dimension-checked plane")))
            .collect()
    }

    /// Smallest plane margin at `g`; infinite when no planes are stored.
    pub fn min_margin_at(&self, g: &HermitianMatrix) -> f64 {
        self.margins_at(g).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Whether `g` satisfies every stored plane within `tol`.
    pub fn contains(&self, g: &HermitianMatrix, tol: f64) -> bool {
        self.planes
            .iter()
            .all(|p| p.value_at(g).expect("dimension-checked plane") <= tol)
    }

    /// Compute the analytic center of the current set without storing it.
    pub fn analytic_center(&self, opts: &CenterOptions) -> Result<CenterReport, AccpmError> {
        center::solve(&self.basis, &self.cache, &self.center, opts)
    }

    /// Recompute and store the analytic center.
    pub fn recenter(&mut self, opts: &CenterOptions) -> Result<CenterReport, AccpmError> {
        let report = self.analytic_center(opts)?;
        self.center = report.center.clone();
        Ok(report)
    }

    /// Keep at most `keep` planes, dropping those with the largest irrelevance
    /// measure: margin at the center divided by the plane's extent under the
    /// inverse barrier metric of the plane arrangement. Ties keep older
    /// intervals. Returns the number of planes dropped.
    ///
    /// With `augmented_metric` the PSD-barrier Hessian block is added to the
    /// metric; the default follows the plane-only definition.
    pub fn prune(&mut self, keep: usize, augmented_metric: bool) -> Result<usize, AccpmError> {
        assert!(keep >= 1, "must keep at least one plane");
        if self.planes.len() <= keep {
            return Ok(0);
        }
        let n = self.dim * self.dim;
        let sigmas: Vec<Vec<f64>> = self.planes.iter().map(|p| p.normal.cvec()).collect();
        let margins = self.margins_at(&self.center);
        let mut psi = plane_metric(&sigmas, &margins, n);
        if augmented_metric {
            let ginv = self.center.inverse_pd()?;
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let ei = HermitianMatrix::cmat(&e).expect("square length");
                let col = ginv.sandwich(&ei)?.cvec();
                for j in 0..n {
                    psi[j * n + i] += col[j];
                }
            }
            // symmetrize against accumulated round-off
            for i in 0..n {
                for j in i + 1..n {
                    let avg = 0.5 * (psi[i * n + j] + psi[j * n + i]);
                    psi[i * n + j] = avg;
                    psi[j * n + i] = avg;
                }
            }
        }
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(self.planes.len());
        for (idx, sigma) in sigmas.iter().enumerate() {
            let x = real_linalg::cholesky_solve(&psi, n, sigma)
                .ok_or(AccpmError::SingularMetric)?;
            let quad: f64 = sigma.iter().zip(&x).map(|(s, xi)| s * xi).sum();
            if !(quad > 0.0) {
                return Err(AccpmError::SingularMetric);
            }
            scored.push((margins[idx] / quad.sqrt(), idx));
        }
        let mut order: Vec<usize> = (0..self.planes.len()).collect();
        order.sort_by(|&i, &j| {
            scored[i]
                .0
                .partial_cmp(&scored[j].0)
                .expect("finite irrelevance")
                .then(self.planes[i].interval.cmp(&self.planes[j].interval))
                .then(self.planes[i].index.cmp(&self.planes[j].index))
        });
        let mut keep_flags = vec![false; self.planes.len()];
        for &idx in order.iter().take(keep) {
            keep_flags[idx] = true;
        }
        let before = self.planes.len();
        let mut retained = Vec::with_capacity(keep);
        for (idx, p) in std::mem::take(&mut self.planes).into_iter().enumerate() {
            if keep_flags[idx] {
                retained.push(p);
            }
        }
        self.planes = retained;
        self.rebuild_cache();
        Ok(before - self.planes.len())
    }

    /// Irrelevance scores of all planes at the current center (exposed for
    /// tests; the ranking drives [`prune`](Self::prune)).
    pub fn irrelevance_scores(&self) -> Result<Vec<f64>, AccpmError> {
        let n = self.dim * self.dim;
        let sigmas: Vec<Vec<f64>> = self.planes.iter().map(|p| p.normal.cvec()).collect();
        let margins = self.margins_at(&self.center);
        let psi = plane_metric(&sigmas, &margins, n);
        sigmas
            .iter()
            .zip(&margins)
            .map(|(sigma, margin)| {
                let x = real_linalg::cholesky_solve(&psi, n, sigma)
                    .ok_or(AccpmError::SingularMetric)?;
                let quad: f64 = sigma.iter().zip(&x).map(|(s, xi)| s * xi).sum();
                if quad > 0.0 {
                    Ok(margin / quad.sqrt())
                } else {
                    Err(AccpmError::SingularMetric)
                }
            })
            .collect()
    }

    /// Re-optimize all slacks by minimizing their sum subject to the relaxed
    /// set staying feasible (robust mode under measurement error).
    pub fn relax(&mut self, opts: &RelaxOptions) -> Result<RelaxReport, AccpmError> {
        relax::solve(self, opts)
    }

    pub(crate) fn basis(&self) -> &TraceBasis {
        &self.basis
    }

    pub(crate) fn cache(&self) -> &[PlaneCache] {
        &self.cache
    }

    pub(crate) fn set_slacks(&mut self, slacks: &[f64]) {
        assert_eq!(slacks.len(), self.planes.len());
        for (p, &t) in self.planes.iter_mut().zip(slacks) {
            p.slack = t;
        }
        self.rebuild_cache();
    }
}

/// Inverse-squared-margin plane metric. Margins are floored relative to the
/// largest one so a (near-)boundary plane cannot blow the weight spread past
/// what Cholesky resolves in doubles; the irrelevance numerator still uses
/// the true margin, so such planes score as maximally relevant anyway.
fn plane_metric(sigmas: &[Vec<f64>], margins: &[f64], n: usize) -> Vec<f64> {
    let floor = margins.iter().cloned().fold(0.0f64, f64::max).max(1e-300) * 1e-6;
    let mut psi = vec![0.0; n * n];
    for (sigma, margin) in sigmas.iter().zip(margins) {
        let m = margin.max(floor);
        let w = 1.0 / (m * m);
        for i in 0..n {
            let si = sigma[i] * w;
            if si == 0.0 {
                continue;
            }
            for j in 0..n {
                psi[i * n + j] += si * sigma[j];
            }
        }
    }
    psi
}

/// Hessian of `-log det(G)` restricted to the reduced coordinates.
pub(crate) fn logdet_hessian(basis: &TraceBasis, ginv: &HermitianMatrix) -> Vec<f64> {
    let r = basis.reduced();
    let mut h = vec![0.0; r * r];
    for k in 0..r {
        let w = ginv
            .sandwich(basis.direction(k))
            .expect("dimension-consistent basis");
        let col = basis.reduce(&w.cvec());
        for l in 0..r {
            h[l * r + k] = col[l];
        }
    }
    for i in 0..r {
        for j in i + 1..r {
            let avg = 0.5 * (h[i * r + j] + h[j * r + i]);
            h[i * r + j] = avg;
            h[j * r + i] = avg;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_opts() -> CenterOptions {
        CenterOptions::default()
    }

    #[test]
    fn initial_center_is_scaled_identity() {
        for dim in [2usize, 4] {
            let ws = WorkingSet::initial(dim).unwrap();
            let expect = HermitianMatrix::scaled_identity(dim, 1.0 / dim as f64);
            assert!(ws.center().frobenius_distance(&expect) < 1e-15);
            assert!((ws.center().trace() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn initial_rejects_single_antenna() {
        assert!(matches!(WorkingSet::initial(1), Err(AccpmError::InvalidDimension(1))));
    }

    #[test]
    fn empty_set_center_is_isotropic() {
        let ws = WorkingSet::initial(4).unwrap();
        let report = ws.analytic_center(&default_opts()).unwrap();
        let expect = HermitianMatrix::scaled_identity(4, 0.25);
        assert!(report.center.frobenius_distance(&expect) < 1e-12);
        assert!(report.kkt_residual <= 1e-8);
    }

    #[test]
    fn add_zero_planes_is_identity() {
        let mut ws = WorkingSet::initial(3).unwrap();
        ws.add_planes(vec![]).unwrap();
        assert!(ws.planes().is_empty());
    }

    #[test]
    fn add_planes_rejects_dimension_mismatch() {
        let mut ws = WorkingSet::initial(3).unwrap();
        let plane = CuttingPlane::new(HermitianMatrix::identity(2), 1.0, 2, 1);
        assert!(matches!(
            ws.add_planes(vec![plane]),
            Err(AccpmError::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn redundant_cut_keeps_center() {
        // tr(-I * G) <= 0 holds with constant margin 1 on the simplex, so the
        // barrier term is constant and the center must stay put.
        let mut ws = WorkingSet::initial(4).unwrap();
        let before = ws.center().clone();
        let plane = CuttingPlane::new(HermitianMatrix::scaled_identity(4, -1.0), 0.0, 2, 1);
        ws.add_planes(vec![plane]).unwrap();
        ws.recenter(&default_opts()).unwrap();
        assert!(ws.center().frobenius_distance(&before) < 1e-6);
    }

    #[test]
    fn single_plane_center_matches_analytic_solution() {
        // dim 2, plane tr(diag(1,-1) G) <= 0: center diag(a, 1-a) with
        // a = (3 - sqrt(3)) / 6, the minimizer of
        // -log a - log(1-a) - log(1-2a).
        let mut ws = WorkingSet::initial(2).unwrap();
        let sigma = HermitianMatrix::from_upper_fn(2, |r, c| {
            num_complex::Complex64::new(
                if r == c {
                    if r == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                },
                0.0,
            )
        });
        ws.add_planes(vec![CuttingPlane::new(sigma, 0.0, 2, 1)]).unwrap();
        let report = ws.recenter(&default_opts()).unwrap();
        let a_expect = (3.0 - 3.0f64.sqrt()) / 6.0;
        assert!((report.center.entry(0, 0).re - a_expect).abs() < 1e-8);
        assert!((report.center.entry(1, 1).re - (1.0 - a_expect)).abs() < 1e-8);
        assert!(report.center.entry(0, 1).norm() < 1e-9);
        assert!(report.kkt_residual <= 1e-8);
        // interior-point property: strict satisfaction
        assert!(ws.min_margin_at(ws.center()) > 1e-12);
    }

    #[test]
    fn prune_is_identity_below_cap() {
        let mut ws = WorkingSet::initial(2).unwrap();
        let sigma = HermitianMatrix::scaled_identity(2, -1.0);
        ws.add_planes(vec![CuttingPlane::new(sigma, 0.0, 2, 1)]).unwrap();
        ws.recenter(&default_opts()).unwrap();
        assert_eq!(ws.prune(4, false).unwrap(), 0);
        assert_eq!(ws.planes().len(), 1);
    }

    /// Four dim-2 planes whose normals span the whole cvec space, so the
    /// plane metric is nonsingular: diagonal difference, both off-diagonal
    /// directions, and the identity.
    fn spanning_planes(first_bound: f64) -> Vec<CuttingPlane> {
        use num_complex::Complex64;
        let diag_diff = HermitianMatrix::from_upper_fn(2, |r, c| {
            Complex64::new(if r == c { if r == 0 { 1.0 } else { -1.0 } } else { 0.0 }, 0.0)
        });
        let off_re = HermitianMatrix::from_upper_fn(2, |r, c| {
            Complex64::new(if r != c { 1.0 } else { 0.0 }, 0.0)
        });
        let off_im = HermitianMatrix::from_upper_fn(2, |r, c| {
            if r < c {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        vec![
            CuttingPlane::new(diag_diff, first_bound, 2, 1),
            CuttingPlane::new(off_re, 0.4, 3, 1),
            CuttingPlane::new(off_im, 0.5, 4, 1),
            CuttingPlane::new(HermitianMatrix::identity(2), 1.6, 5, 1),
        ]
    }

    #[test]
    fn neutral_plane_outranks_slack_planes() {
        // A plane through the center has zero irrelevance and must survive
        // pruning against planes with positive margin.
        let mut ws = WorkingSet::initial(2).unwrap();
        // margins at I/2: 0 (neutral), 0.4, 0.5, 0.6
        ws.add_planes(spanning_planes(0.0)).unwrap();
        let scores = ws.irrelevance_scores().unwrap();
        assert!(scores[0].abs() < 1e-9);
        assert!(scores.iter().skip(1).all(|&s| s > 0.0));
        let dropped = ws.prune(1, false).unwrap();
        assert_eq!(dropped, 3);
        assert_eq!(ws.planes().len(), 1);
        assert_eq!(ws.planes()[0].interval, 2);
    }

    #[test]
    fn prune_scores_are_order_invariant() {
        let mut ws = WorkingSet::initial(2).unwrap();
        let planes = spanning_planes(0.2);
        ws.add_planes(planes.clone()).unwrap();
        let s_a = ws.irrelevance_scores().unwrap();
        let mut ws2 = WorkingSet::initial(2).unwrap();
        let rotated: Vec<CuttingPlane> =
            planes.iter().cycle().skip(2).take(4).cloned().collect();
        ws2.add_planes(rotated).unwrap();
        let s_b = ws2.irrelevance_scores().unwrap();
        for i in 0..4 {
            assert!((s_a[(i + 2) % 4] - s_b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn prune_with_augmented_metric_also_ranks_neutral_first() {
        let mut ws = WorkingSet::initial(2).unwrap();
        ws.add_planes(spanning_planes(0.0)).unwrap();
        let dropped = ws.prune(2, true).unwrap();
        assert_eq!(dropped, 2);
        assert_eq!(ws.planes()[0].interval, 2);
    }
}
