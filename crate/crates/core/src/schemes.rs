//! Feedback schemes pairing an ER-side encoder with an ET-side training
//! covariance designer and cutting-plane extractor.
//!
//! Two learning schemes are provided: energy quantization (the ER feeds back
//! the uniformly quantized normalized energy of the current interval) and
//! energy comparison (the ER feeds back sign comparisons against the B
//! previous intervals). A random-beamforming baseline rounds out the set for
//! benchmarking; it selects the best of a batch of random beams and cannot
//! estimate the channel itself.

use std::collections::VecDeque;

use num_complex::Complex64;
use thiserror::Error;

use crate::accpm::CuttingPlane;
use crate::channel::beamforming_gain;
use crate::hermitian::HermitianMatrix;
use crate::rng::SplitMix64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("covariance design exhausted {attempts} rejection trials ({stage})")]
    RetryExhausted { stage: &'static str, attempts: usize },
}

const MAX_DESIGN_ATTEMPTS: usize = 1000;
/// PSD acceptance tolerance on the smallest eigenvalue.
const PSD_TOL: f64 = 1e-10;

/// One interval's feedback payload.
#[derive(Clone, Debug, PartialEq)]
pub enum FeedbackWord {
    /// Quantized normalized energy: `value = step/2 + level * step` with
    /// `step = 2^-bits`.
    Quantization { level: u32, bits: u32, value: f64 },
    /// Exact normalized energy (infinite-resolution limit).
    ExactEnergy { value: f64 },
    /// Sign comparisons against the previous intervals, `signs[b-1]` for lag
    /// `b`; +1 means the energy decreased relative to that interval.
    Comparison { signs: Vec<i8> },
    /// Index of the winning random beam.
    BeamIndex { winner: usize, bits: u32 },
}

impl FeedbackWord {
    /// Raw payload, most-significant bit first. Quantization encodes the
    /// level index; comparison encodes +1 as 1 with lag 1 leading.
    pub fn payload_bits(&self) -> Vec<bool> {
        match self {
            FeedbackWord::Quantization { level, bits, .. } => (0..*bits)
                .rev()
                .map(|b| (level >> b) & 1 == 1)
                .collect(),
            FeedbackWord::ExactEnergy { .. } => Vec::new(),
            FeedbackWord::Comparison { signs } => signs.iter().map(|&s| s > 0).collect(),
            FeedbackWord::BeamIndex { winner, bits } => (0..*bits)
                .rev()
                .map(|b| (*winner >> b) & 1 == 1)
                .collect(),
        }
    }
}

/// Transmit covariance with its power budget.
#[derive(Clone, Debug)]
pub struct TrainingCovariance {
    pub matrix: HermitianMatrix,
    pub power_budget: f64,
}

impl TrainingCovariance {
    /// Isotropic first-interval covariance `(P / dim) I`.
    pub fn isotropic(power: f64, dim: usize) -> Self {
        Self {
            matrix: HermitianMatrix::scaled_identity(dim, power / dim as f64),
            power_budget: power,
        }
    }
}

/// Uniform scalar quantizer of the normalized energy measurement.
///
/// Overflow (`q_bar > 1`) clamps to one; the zero measurement maps to the
/// lowest reconstruction level.
pub fn quantize(q_bar: f64, bits: u32) -> FeedbackWord {
    assert!(q_bar >= 0.0, "normalized energy must be nonnegative");
    assert!((1..=52).contains(&bits));
    let levels = 1u64 << bits;
    let clamped = q_bar.min(1.0);
    let mut cell = (clamped * levels as f64).ceil() as u64;
    cell = cell.clamp(1, levels);
    let value = cell as f64 / levels as f64 - 0.5 / levels as f64;
    FeedbackWord::Quantization { level: (cell - 1) as u32, bits, value }
}

/// Cutting planes implied by a quantized energy report: the reconstruction
/// brackets the true normalized energy within half a step on each side.
/// Boundary cells drop the uninformative (or overflow-unreliable) side.
pub fn quantization_planes(
    word: &FeedbackWord,
    covariance: &TrainingCovariance,
    tx_antennas: usize,
    power: f64,
    interval: usize,
) -> Vec<CuttingPlane> {
    let FeedbackWord::Quantization { level, bits, value } = word else {
        panic!("quantization_planes expects a quantization word");
    };
    let half_step = 0.5 / (1u64 << bits) as f64;
    let scaled = covariance.matrix.scale(tx_antennas as f64 / power);
    let mut planes = Vec::with_capacity(2);
    if *level != 0 {
        // lower bound on the energy: -(M_T/P) tr(S G) <= -value + step/2
        planes.push(CuttingPlane::new(scaled.scale(-1.0), -value + half_step, interval, 1));
    }
    if u64::from(*level) != (1u64 << bits) - 1 {
        // upper bound: (M_T/P) tr(S G) <= value + step/2
        planes.push(CuttingPlane::new(scaled, value + half_step, interval, 2));
    }
    planes
}

/// Quantization covariance from a candidate Gaussian basis matrix `a`
/// (row-major `dim x dim`). Returns `None` when the draw is rejected: a
/// rank-deficient basis or a power budget violation.
pub fn quantization_covariance_from_basis(
    center: &HermitianMatrix,
    power: f64,
    a: &[Complex64],
) -> Option<TrainingCovariance> {
    let dim = center.dim();
    debug_assert_eq!(a.len(), dim * dim);
    let gram = HermitianMatrix::gram(dim, dim, a);
    // reject rank-deficient draws
    if gram.cholesky().is_err() {
        return None;
    }
    let denom = center.inner(&gram).expect("same dimension");
    let scale = power / (2.0 * dim as f64 * denom);
    let s = gram.scale(scale);
    if s.trace() <= power * (1.0 + 1e-12) {
        Some(TrainingCovariance { matrix: s, power_budget: power })
    } else {
        None
    }
}

/// Design the next quantization training covariance: a random Gaussian Gram
/// matrix scaled so the predicted normalized measurement at the current
/// center sits exactly on the mid-scale quantizer threshold, which makes one
/// of the two returned planes neutral or deep.
pub fn design_quantization_covariance(
    center: &HermitianMatrix,
    power: f64,
    rng: &mut SplitMix64,
) -> Result<TrainingCovariance, SchemeError> {
    let dim = center.dim();
    for _ in 0..MAX_DESIGN_ATTEMPTS {
        let a: Vec<Complex64> = (0..dim * dim).map(|_| rng.complex_standard_normal()).collect();
        if let Some(cov) = quantization_covariance_from_basis(center, power, &a) {
            return Ok(cov);
        }
    }
    Err(SchemeError::RetryExhausted { stage: "quantization basis", attempts: MAX_DESIGN_ATTEMPTS })
}

/// Per-trial scheme state: normalized measurement history plus the covariance
/// and probe windows the comparison scheme needs.
#[derive(Clone, Debug)]
pub struct SchemeState {
    bits: u32,
    normalized_history: Vec<f64>,
    covariances: VecDeque<HermitianMatrix>,
    probes: VecDeque<HermitianMatrix>,
}

impl SchemeState {
    pub fn new(bits: u32) -> Self {
        Self {
            bits,
            normalized_history: Vec::new(),
            covariances: VecDeque::new(),
            probes: VecDeque::new(),
        }
    }

    /// Record the interval's normalized measurement and transmit covariance.
    pub fn record_interval(&mut self, q_bar: f64, covariance: &HermitianMatrix) {
        debug_assert!(q_bar >= 0.0);
        self.normalized_history.push(q_bar);
        self.covariances.push_back(covariance.clone());
        while self.covariances.len() > self.bits as usize + 1 {
            self.covariances.pop_front();
        }
    }

    pub fn record_probe(&mut self, probe: HermitianMatrix) {
        self.probes.push_back(probe);
        while self.probes.len() > self.bits as usize {
            self.probes.pop_front();
        }
    }

    /// Intervals elapsed.
    pub fn interval(&self) -> usize {
        self.normalized_history.len()
    }

    pub fn history(&self) -> &[f64] {
        &self.normalized_history
    }

    pub fn probes(&self) -> impl Iterator<Item = &HermitianMatrix> {
        self.probes.iter()
    }

    pub fn latest_covariance(&self) -> &HermitianMatrix {
        self.covariances.back().expect("at least one interval recorded")
    }

    /// Covariance transmitted `lag` intervals before the latest recorded one.
    pub fn covariance_before(&self, lag: usize) -> &HermitianMatrix {
        &self.covariances[self.covariances.len() - 1 - lag]
    }

    /// Sign feedback for the current interval against the B previous ones.
    /// Lags reaching before the first interval compare against zero, so they
    /// always report a non-decrease.
    pub fn comparison_feedback(&self) -> FeedbackWord {
        let n = self.interval();
        assert!(n >= 2, "comparison feedback starts at the second interval");
        let q_n = self.normalized_history[n - 1];
        let signs = (1..=self.bits as usize)
            .map(|b| {
                let q_prev = if b < n { self.normalized_history[n - 1 - b] } else { 0.0 };
                if q_n < q_prev {
                    1
                } else {
                    -1
                }
            })
            .collect();
        FeedbackWord::Comparison { signs }
    }

    /// Cutting planes from a comparison word: one plane per informative lag,
    /// each through the origin with normal `sign * (S_n - S_{n-b})`.
    pub fn comparison_planes(&self, word: &FeedbackWord, interval: usize) -> Vec<CuttingPlane> {
        let FeedbackWord::Comparison { signs } = word else {
            panic!("comparison_planes expects a comparison word");
        };
        let n = self.interval();
        let usable = (self.bits as usize).min(n - 1);
        let current = self.covariances.back().expect("current covariance recorded");
        (1..=usable)
            .map(|b| {
                let prev = &self.covariances[self.covariances.len() - 1 - b];
                let diff = current.sub(prev).expect("equal dimensions");
                CuttingPlane::new(diff.scale(f64::from(signs[b - 1])), 0.0, interval, b)
            })
            .collect()
    }
}

/// Comparison probe from a candidate direction `p` in the trace-orthogonal
/// subspace coordinates. Returns the probe and updated covariance, or `None`
/// when the update leaves the feasible covariance set.
pub fn comparison_covariance_from_direction(
    prev: &TrainingCovariance,
    center: &HermitianMatrix,
    direction: &[f64],
) -> Option<(TrainingCovariance, HermitianMatrix)> {
    let n = center.dim() * center.dim();
    debug_assert_eq!(direction.len(), n - 1);
    let g_vec = center.cvec();
    let v = orthogonal_complement_basis(&g_vec);
    let mut delta_vec = vec![0.0; n];
    for (col, &coeff) in v.iter().zip(direction) {
        for (d, c) in delta_vec.iter_mut().zip(col) {
            *d += coeff * c;
        }
    }
    let probe = HermitianMatrix::cmat(&delta_vec).expect("square length");
    let next = prev.matrix.add(&probe).expect("equal dimensions");
    let power = prev.power_budget;
    if next.trace() <= power * (1.0 + PSD_TOL) && next.is_positive_semidefinite(PSD_TOL) {
        Some((TrainingCovariance { matrix: next, power_budget: power }, probe))
    } else {
        None
    }
}

/// Design the next comparison training covariance `S_n = S_{n-1} + probe`,
/// where the probe is trace-orthogonal to the current center (forcing the
/// lag-1 cutting plane through it) and `||cvec(probe)|| = P / 5`.
pub fn design_comparison_covariance(
    prev: &TrainingCovariance,
    center: &HermitianMatrix,
    rng: &mut SplitMix64,
) -> Result<(TrainingCovariance, HermitianMatrix), SchemeError> {
    let n = center.dim() * center.dim();
    let target_norm = prev.power_budget / 5.0;
    for _ in 0..MAX_DESIGN_ATTEMPTS {
        let mut p: Vec<f64> = (0..n - 1).map(|_| rng.standard_normal()).collect();
        let norm: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-30 {
            continue;
        }
        for x in p.iter_mut() {
            *x *= target_norm / norm;
        }
        if let Some(result) = comparison_covariance_from_direction(prev, center, &p) {
            return Ok(result);
        }
    }
    Err(SchemeError::RetryExhausted { stage: "comparison probe", attempts: MAX_DESIGN_ATTEMPTS })
}

/// Orthonormal basis of the hyperplane orthogonal to `g` (nonzero), as the
/// trailing columns of a Householder reflector.
fn orthogonal_complement_basis(g: &[f64]) -> Vec<Vec<f64>> {
    let n = g.len();
    let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm > 0.0, "cannot complement the zero vector");
    let mut w: Vec<f64> = g.iter().map(|x| x / norm).collect();
    let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign;
    let wnorm_sq: f64 = w.iter().map(|x| x * x).sum();
    // columns 1..n of H = I - 2 w w^T / (w^T w); column 0 is parallel to g
    (1..n)
        .map(|col| {
            let mut v = vec![0.0; n];
            v[col] = 1.0;
            let factor = 2.0 * w[col] / wnorm_sq;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi -= factor * wi;
            }
            v
        })
        .collect()
}

/// Outcome of a random-beamforming learning phase.
#[derive(Clone, Debug)]
pub struct RandomBeamOutcome {
    /// Unit-norm winning beam direction.
    pub winner: Vec<Complex64>,
    /// Beamforming gain of the winner (linear).
    pub gain: f64,
    /// Feedback bits needed to report the winner index.
    pub feedback_bits: u32,
    /// Number of candidate beams probed.
    pub candidates: usize,
    /// Winner index.
    pub winner_index: usize,
}

/// Number of random beams that fit the learning budget of `n_intervals`
/// feedback intervals under the measurement-heavy timing convention.
pub fn random_beam_count(n_intervals: usize) -> usize {
    (3 * n_intervals - 1) / 2
}

/// Probe `floor((3N - 1) / 2)` random unit-power beams, let the receiver pick
/// the most energetic one, and report its index.
pub fn random_beamforming_run(
    gram: &HermitianMatrix,
    n_intervals: usize,
    power: f64,
    t_measure: f64,
    rng: &mut SplitMix64,
) -> RandomBeamOutcome {
    assert!(n_intervals >= 1);
    let dim = gram.dim();
    let candidates = random_beam_count(n_intervals);
    let mut best: Option<(f64, usize, Vec<Complex64>)> = None;
    for idx in 0..candidates {
        let mut w: Vec<Complex64> = (0..dim).map(|_| rng.complex_standard_normal()).collect();
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = power.sqrt() / norm;
        for z in w.iter_mut() {
            *z *= scale;
        }
        let energy = t_measure * gram.quadratic_form(&w);
        if best.as_ref().map_or(true, |(e, _, _)| energy > *e) {
            best = Some((energy, idx, w));
        }
    }
    let (_, winner_index, mut winner) = best.expect("at least one candidate");
    let norm = winner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in winner.iter_mut() {
        *z /= norm;
    }
    let gain = beamforming_gain(gram, &winner).expect("unit-normalized winner");
    let feedback_bits = if candidates <= 1 { 0 } else { (candidates as f64).log2().ceil() as u32 };
    RandomBeamOutcome { winner, gain, feedback_bits, candidates, winner_index }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, ChannelParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn quantize_direct_examples() {
        // ceil(4 * 0.3)/4 - 1/8
        let w = quantize(0.3, 2);
        assert_eq!(w, FeedbackWord::Quantization { level: 1, bits: 2, value: 0.375 });
        // overflow clamps to 1 first
        let w = quantize(1.3, 1);
        assert_eq!(w, FeedbackWord::Quantization { level: 1, bits: 1, value: 0.75 });
        // zero maps to the lowest level
        let w = quantize(0.0, 2);
        assert_eq!(w, FeedbackWord::Quantization { level: 0, bits: 2, value: 0.125 });
    }

    #[test]
    fn quantizer_error_bound_attained_on_grid() {
        for bits in 1..=10u32 {
            let bound = 0.5f64.powi(bits as i32 + 1);
            let mut max_err = 0.0f64;
            let points = 100_000;
            for i in 1..=points {
                let q = i as f64 / points as f64;
                let FeedbackWord::Quantization { value, .. } = quantize(q, bits) else {
                    unreachable!()
                };
                max_err = max_err.max((q.min(1.0) - value).abs());
            }
            assert!(max_err <= bound + 1e-15, "B={bits}: err {max_err} > {bound}");
            assert!(max_err >= bound - 1e-12, "B={bits}: bound not attained");
        }
    }

    #[test]
    fn payload_bits_msb_first() {
        let w = quantize(0.9, 3); // level 7 of 8
        assert_eq!(w.payload_bits(), vec![true, true, true]);
        let w = FeedbackWord::Comparison { signs: vec![1, -1, 1] };
        assert_eq!(w.payload_bits(), vec![true, false, true]);
        let w = FeedbackWord::BeamIndex { winner: 5, bits: 4 };
        assert_eq!(w.payload_bits(), vec![false, true, false, true]);
    }

    fn isotropic_cov(power: f64, dim: usize) -> TrainingCovariance {
        TrainingCovariance::isotropic(power, dim)
    }

    #[test]
    fn boundary_cells_drop_one_plane() {
        let cov = isotropic_cov(1.0, 4);
        // lowest level: only the upper-bound plane remains
        let planes = quantization_planes(&quantize(0.01, 2), &cov, 4, 1.0, 5);
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].index, 2);
        // highest level: only the lower-bound plane remains
        let planes = quantization_planes(&quantize(0.99, 2), &cov, 4, 1.0, 5);
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].index, 1);
        // interior level: both
        let planes = quantization_planes(&quantize(0.45, 2), &cov, 4, 1.0, 5);
        assert_eq!(planes.len(), 2);
    }

    #[test]
    fn interior_planes_hold_at_the_truth() {
        let real = generate_channel(&ChannelParams::defaults(11));
        let truth = &real.normalized_gram;
        let mut rng = SplitMix64::new(3);
        let center = HermitianMatrix::scaled_identity(4, 0.25);
        for _ in 0..50 {
            let cov = design_quantization_covariance(&center, 1.0, &mut rng).unwrap();
            let q_bar = 4.0 * truth.inner(&cov.matrix).unwrap() / 1.0;
            let word = quantize(q_bar, 4);
            for plane in quantization_planes(&word, &cov, 4, 1.0, 2) {
                // overflow can push the true value outside the upper plane,
                // but that plane is discarded at the top cell
                assert!(plane.value_at(truth).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn quantization_design_hits_the_threshold() {
        let mut rng = SplitMix64::new(8);
        let real = generate_channel(&ChannelParams::defaults(21));
        // an arbitrary strictly-PD unit-trace center
        let center = real
            .normalized_gram
            .scale(0.7)
            .add(&HermitianMatrix::scaled_identity(4, 0.3 / 4.0))
            .unwrap();
        for _ in 0..20 {
            let cov = design_quantization_covariance(&center, 1.0, &mut rng).unwrap();
            let predicted = 4.0 * center.inner(&cov.matrix).unwrap();
            assert_relative_eq!(predicted, 0.5, epsilon = 1e-10);
            assert!(cov.matrix.trace() <= 1.0 + 1e-10);
            assert!(cov.matrix.is_positive_semidefinite(PSD_TOL));
        }
        // center = I/M_T: p_n = P / (2 tr(A^H A)), predicted energy P/(2 M_T)
        let iso = HermitianMatrix::scaled_identity(4, 0.25);
        let cov = design_quantization_covariance(&iso, 1.0, &mut rng).unwrap();
        assert_relative_eq!(iso.inner(&cov.matrix).unwrap(), 1.0 / 8.0, epsilon = 1e-10);
    }

    #[test]
    fn singular_basis_is_rejected() {
        let center = HermitianMatrix::scaled_identity(2, 0.5);
        // rank-1 basis matrix: both rows identical
        let a = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 1.0),
        ];
        assert!(quantization_covariance_from_basis(&center, 1.0, &a).is_none());
        // a well-conditioned basis passes
        let b = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        assert!(quantization_covariance_from_basis(&center, 1.0, &b).is_some());
    }

    #[test]
    fn comparison_feedback_signs() {
        let mut state = SchemeState::new(1);
        state.record_interval(0.9, &HermitianMatrix::scaled_identity(2, 0.5));
        state.record_interval(0.8, &HermitianMatrix::scaled_identity(2, 0.4));
        // energy decreased: +1
        assert_eq!(state.comparison_feedback(), FeedbackWord::Comparison { signs: vec![1] });
        // exact tie goes to the non-increase branch
        let mut state = SchemeState::new(1);
        state.record_interval(0.5, &HermitianMatrix::scaled_identity(2, 0.5));
        state.record_interval(0.5, &HermitianMatrix::scaled_identity(2, 0.4));
        assert_eq!(state.comparison_feedback(), FeedbackWord::Comparison { signs: vec![-1] });
    }

    #[test]
    fn padding_lags_report_non_decrease_and_yield_no_planes() {
        let mut state = SchemeState::new(3);
        state.record_interval(1.0, &HermitianMatrix::scaled_identity(2, 0.5));
        state.record_interval(0.4, &HermitianMatrix::scaled_identity(2, 0.4));
        let word = state.comparison_feedback();
        assert_eq!(word, FeedbackWord::Comparison { signs: vec![1, -1, -1] });
        let planes = state.comparison_planes(&word, 2);
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].index, 1);
    }

    #[test]
    fn comparison_design_neutrality_and_probe_norm() {
        let mut rng = SplitMix64::new(71);
        let real = generate_channel(&ChannelParams::defaults(31));
        let center = real
            .normalized_gram
            .scale(0.5)
            .add(&HermitianMatrix::scaled_identity(4, 0.5 / 4.0))
            .unwrap();
        let prev = isotropic_cov(1.0, 4);
        for _ in 0..20 {
            let (next, probe) = design_comparison_covariance(&prev, &center, &mut rng).unwrap();
            // neutral with respect to the design center
            assert!(center.inner(&probe).unwrap().abs() <= 1e-10);
            // probe magnitude fixed at P/5 in cvec coordinates
            let norm: f64 = probe.cvec().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert_relative_eq!(norm, 0.2, epsilon = 1e-12);
            assert!(next.matrix.trace() <= 1.0 + 1e-10);
            assert!(next.matrix.is_positive_semidefinite(PSD_TOL));
        }
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let mut rng = SplitMix64::new(5);
        let g: Vec<f64> = (0..9).map(|_| rng.standard_normal()).collect();
        let v = orthogonal_complement_basis(&g);
        assert_eq!(v.len(), 8);
        for (i, vi) in v.iter().enumerate() {
            let dot_g: f64 = vi.iter().zip(&g).map(|(a, b)| a * b).sum();
            assert!(dot_g.abs() < 1e-10);
            for (j, vj) in v.iter().enumerate() {
                let dot: f64 = vi.iter().zip(vj).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn telescoped_plane_matches_covariance_difference() {
        // lag-2 plane from summed probes equals the direct difference form
        let mut rng = SplitMix64::new(13);
        let center = HermitianMatrix::scaled_identity(4, 0.25);
        let mut state = SchemeState::new(2);
        let s1 = isotropic_cov(1.0, 4);
        state.record_interval(1.0, &s1.matrix);
        let (s2, p2) = design_comparison_covariance(&s1, &center, &mut rng).unwrap();
        state.record_interval(0.9, &s2.matrix);
        state.record_probe(p2.clone());
        let (s3, p3) = design_comparison_covariance(&s2, &center, &mut rng).unwrap();
        state.record_interval(0.8, &s3.matrix);
        state.record_probe(p3.clone());
        let diff_form = s3.matrix.sub(&s1.matrix).unwrap();
        let sum_form = p3.add(&p2).unwrap();
        assert!(diff_form.frobenius_distance(&sum_form) <= 1e-12);
    }

    #[test]
    fn random_beam_budget_and_bits() {
        assert_eq!(random_beam_count(10), 14);
        let real = generate_channel(&ChannelParams::defaults(61));
        let mut rng = SplitMix64::new(1);
        let out = random_beamforming_run(&real.gram, 10, 1.0, 2.0, &mut rng);
        assert_eq!(out.candidates, 14);
        assert_eq!(out.feedback_bits, 4);
        assert!(out.winner_index < 14);
        // gain never exceeds the optimal beamforming gain
        assert!(out.gain <= real.chi_star + 1e-9);
        let norm: f64 = out.winner.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_beam_rank_one_bound() {
        let mut p = ChannelParams::defaults(3);
        p.rician_factor_db = 300.0; // effectively rank-1
        let real = generate_channel(&p);
        let mut rng = SplitMix64::new(2);
        let out = random_beamforming_run(&real.gram, 20, 1.0, 2.0, &mut rng);
        assert!(out.gain <= real.chi_star + 1e-9);
        assert!(out.gain > 0.0);
    }

    proptest! {
        #[test]
        fn quantizer_is_monotone(a in 0.0f64..1.5, b in 0.0f64..1.5, bits in 1u32..11) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let FeedbackWord::Quantization { value: vlo, .. } = quantize(lo, bits) else { unreachable!() };
            let FeedbackWord::Quantization { value: vhi, .. } = quantize(hi, bits) else { unreachable!() };
            prop_assert!(vlo <= vhi);
        }

        #[test]
        fn quantizer_level_is_on_lattice(q in 0.0f64..2.0, bits in 1u32..11) {
            let FeedbackWord::Quantization { level, value, .. } = quantize(q, bits) else { unreachable!() };
            let step = 0.5f64.powi(bits as i32);
            prop_assert!(u64::from(level) < (1u64 << bits));
            prop_assert!((value - (step / 2.0 + f64::from(level) * step)).abs() < 1e-15);
        }
    }
}
