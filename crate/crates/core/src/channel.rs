//! Rician MIMO channel generation and ground-truth energy metrics.
//!
//! Channels follow a far-field uniform linear array model: a deterministic
//! line-of-sight component (identical across receive antennas) mixed with
//! i.i.d. Rayleigh scatter according to the Rician factor. Only the Gram
//! matrix `G = H^H H` matters for energy delivery, so the realization carries
//! `G`, its unit-trace normalization, and the optimal-beamforming quantities
//! derived from its dominant eigenpair.

use num_complex::Complex64;
use thiserror::Error;

use crate::hermitian::{HermitianMatrix, MatrixError};
use crate::rng::SplitMix64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("beamforming vector is not unit norm (|v| = {0})")]
    NotUnitNorm(f64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Physical and array parameters of the link.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    /// Transmit antennas at the ET (must exceed 1).
    pub tx_antennas: usize,
    /// Receive antennas at the ER.
    pub rx_antennas: usize,
    /// Rician factor in dB.
    pub rician_factor_db: f64,
    /// Average path loss in dB; sets both the LOS amplitude and the scatter
    /// variance.
    pub path_loss_db: f64,
    /// Antenna element spacing over carrier wavelength.
    pub element_spacing: f64,
    /// Direction of the ER from the ET broadside, degrees.
    pub arrival_angle_deg: f64,
    /// Seed for the scatter component.
    pub rng_seed: u64,
}

impl ChannelParams {
    /// Simulation defaults: 4x2 link, 5 dB Rician factor, 40 dB path loss,
    /// half-wavelength spacing, 30 degree arrival angle.
    pub fn defaults(seed: u64) -> Self {
        Self {
            tx_antennas: 4,
            rx_antennas: 2,
            rician_factor_db: 5.0,
            path_loss_db: 40.0,
            element_spacing: 0.5,
            arrival_angle_deg: 30.0,
            rng_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tx_antennas <= 1 {
            return Err("tx_antennas must exceed 1".into());
        }
        if self.rx_antennas < 1 {
            return Err("rx_antennas must be at least 1".into());
        }
        if !(self.element_spacing > 0.0) {
            return Err("element_spacing must be positive".into());
        }
        Ok(())
    }
}

/// One channel draw with its derived ground-truth quantities.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    /// Row-major `rx x tx` channel matrix.
    pub h: Vec<Complex64>,
    pub rx: usize,
    pub tx: usize,
    /// Gram matrix `H^H H`.
    pub gram: HermitianMatrix,
    /// `G / tr(G)`, the unit-trace target of the learning problem.
    pub normalized_gram: HermitianMatrix,
    /// Largest eigenvalue of `G`.
    pub lambda1: f64,
    /// Unit dominant eigenvector of `G`, phase-fixed for determinism.
    pub v1: Vec<Complex64>,
    /// Optimal beamforming gain over isotropic transmission, in [1, tx].
    pub chi_star: f64,
}

/// Fix the global phase so the first non-negligible component is real
/// positive. Keeps eigenvector output deterministic.
pub fn fix_phase(v: &mut [Complex64]) {
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-12) {
        let phase = lead / lead.norm();
        let adj = phase.conj();
        for z in v.iter_mut() {
            *z *= adj;
        }
    }
}

/// Draw one Rician channel realization and compute its ground truth.
pub fn generate_channel(params: &ChannelParams) -> ChannelRealization {
    params.validate().expect("valid channel parameters");
    let (rx, tx) = (params.rx_antennas, params.tx_antennas);
    let rician = 10f64.powf(params.rician_factor_db / 10.0);
    let los_weight = (rician / (1.0 + rician)).sqrt();
    let nlos_weight = (1.0 / (1.0 + rician)).sqrt();
    let los_amp = 10f64.powf(-params.path_loss_db / 20.0);
    let nlos_std = los_amp; // variance 10^(-path_loss/10)

    let theta = -2.0
        * std::f64::consts::PI
        * params.element_spacing
        * params.arrival_angle_deg.to_radians().sin();
    let los_row: Vec<Complex64> = (0..tx)
        .map(|t| Complex64::from_polar(los_amp, theta * t as f64))
        .collect();

    let mut rng = SplitMix64::new(params.rng_seed);
    let mut h = vec![Complex64::new(0.0, 0.0); rx * tx];
    for r in 0..rx {
        for t in 0..tx {
            let scatter = rng.complex_standard_normal() * nlos_std;
            h[r * tx + t] = los_weight * los_row[t] + nlos_weight * scatter;
        }
    }

    let gram = HermitianMatrix::gram(rx, tx, &h);
    let trace = gram.trace();
    debug_assert!(trace > 0.0, "channel energy must be positive");
    let normalized_gram = gram.scale(1.0 / trace);
    let eig = gram.eig().expect("Hermitian eigendecomposition");
    let lambda1 = eig.values[0];
    let mut v1 = eig.vectors[0].clone();
    fix_phase(&mut v1);
    let chi_star = tx as f64 * lambda1 / trace;

    ChannelRealization { h, rx, tx, gram, normalized_gram, lambda1, v1, chi_star }
}

/// Energy harvested over `duration` under transmit covariance `s`:
/// `duration * tr(G S)` (harvesting efficiency normalized to one).
pub fn harvested_energy(
    gram: &HermitianMatrix,
    s: &HermitianMatrix,
    duration: f64,
) -> Result<f64, MatrixError> {
    Ok(duration * gram.inner(s)?)
}

/// Energy harvested under isotropic transmission at total power `power`.
pub fn isotropic_energy(gram: &HermitianMatrix, power: f64, duration: f64) -> f64 {
    duration * power * gram.trace() / gram.dim() as f64
}

/// Beamforming gain of a unit vector relative to isotropic transmission:
/// `dim * v^H G v / tr(G)`.
pub fn beamforming_gain(gram: &HermitianMatrix, v: &[Complex64]) -> Result<f64, ChannelError> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(ChannelError::NotUnitNorm(norm));
    }
    Ok(gram.dim() as f64 * gram.quadratic_form(v) / gram.trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn los_only_limit_is_rank_one() {
        let mut p = ChannelParams::defaults(3);
        p.rician_factor_db = 300.0;
        let r = generate_channel(&p);
        // every row equals the LOS row
        for row in 1..r.rx {
            for t in 0..r.tx {
                assert!((r.h[row * r.tx + t] - r.h[t]).norm() < 1e-15);
            }
        }
        let eig = r.gram.eig().unwrap();
        assert!(eig.values[1].abs() < 1e-12 * eig.values[0]);
        assert_relative_eq!(r.chi_star, r.tx as f64, max_relative = 1e-9);
    }

    #[test]
    fn average_power_matches_path_loss() {
        let mut sum = 0.0;
        let trials = 10_000;
        for seed in 0..trials {
            let p = ChannelParams::defaults(seed);
            let r = generate_channel(&p);
            sum += r.h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let avg = sum / (trials as f64 * 8.0); // per entry, 4x2 link
        assert!(
            (avg - 1e-4).abs() < 0.1 * 1e-4,
            "per-entry power {avg:.3e} not within 10% of 1e-4"
        );
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = ChannelParams::defaults(77);
        let a = generate_channel(&p);
        let b = generate_channel(&p);
        assert_eq!(a.h, b.h);
        assert_eq!(a.v1, b.v1);
        assert_eq!(a.chi_star, b.chi_star);
    }

    #[test]
    fn harvested_energy_cases() {
        let g = HermitianMatrix::identity(4);
        let s = HermitianMatrix::scaled_identity(4, 0.25); // P/M_T with P = 1
        assert_relative_eq!(harvested_energy(&g, &s, 2.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_eq!(harvested_energy(&g, &HermitianMatrix::zeros(4), 1.0).unwrap(), 0.0);
        assert!(harvested_energy(&g, &HermitianMatrix::identity(3), 1.0).is_err());
    }

    #[test]
    fn optimal_beam_energy_is_power_times_lambda1() {
        let p = ChannelParams::defaults(5);
        let r = generate_channel(&p);
        let power = 1.0;
        let duration = 3.0;
        let s_opt = HermitianMatrix::from_outer(&r.v1).scale(power);
        let q = harvested_energy(&r.gram, &s_opt, duration).unwrap();
        assert_relative_eq!(q, duration * power * r.lambda1, max_relative = 1e-10);
    }

    #[test]
    fn isotropic_energy_cases() {
        let g = HermitianMatrix::identity(4); // tr = 4, dim 4
        assert_relative_eq!(isotropic_energy(&g, 1.0, 1.0), 1.0, max_relative = 1e-14);
        // rank-1: optimal/isotropic = dim
        let v = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let g1 = HermitianMatrix::from_outer(&v);
        let q_opt = harvested_energy(&g1, &HermitianMatrix::from_outer(&v), 1.0).unwrap();
        let q_iso = isotropic_energy(&g1, 1.0, 1.0);
        assert_relative_eq!(q_opt / q_iso, 4.0, max_relative = 1e-12);
        // scaled identity: ratio 1 with optimal beam e1
        let gc = HermitianMatrix::scaled_identity(4, 0.7);
        let q_opt = harvested_energy(&gc, &HermitianMatrix::from_outer(&v), 1.0).unwrap();
        assert_relative_eq!(q_opt / isotropic_energy(&gc, 1.0, 1.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn gain_at_v1_is_chi_star_and_bounded() {
        for seed in 0..20 {
            let r = generate_channel(&ChannelParams::defaults(seed));
            let gain = beamforming_gain(&r.gram, &r.v1).unwrap();
            assert_relative_eq!(gain, r.chi_star, max_relative = 1e-9);
            assert!(r.chi_star >= 1.0 - 1e-12 && r.chi_star <= r.tx as f64 + 1e-12);
            // normalized gram shares the dominant eigenvector
            let gain_bar = beamforming_gain(&r.normalized_gram, &r.v1).unwrap();
            assert_relative_eq!(gain_bar, r.chi_star, max_relative = 1e-9);
            assert_relative_eq!(r.normalized_gram.trace(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_orthogonal_to_rank_one_is_zero() {
        let v = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let g = HermitianMatrix::from_outer(&v);
        let w = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(beamforming_gain(&g, &w).unwrap().abs() < 1e-14);
    }

    #[test]
    fn gain_rejects_non_unit_vectors() {
        let g = HermitianMatrix::identity(2);
        let v = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(beamforming_gain(&g, &v), Err(ChannelError::NotUnitNorm(_))));
    }

    #[test]
    fn gain_matches_naive_quadratic_form() {
        // independent oracle: direct double loop over entries
        let mut rng = SplitMix64::new(50);
        for _ in 0..20 {
            let r = generate_channel(&ChannelParams::defaults(rng.next_u64()));
            let mut v: Vec<Complex64> = (0..r.tx).map(|_| rng.complex_standard_normal()).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in v.iter_mut() {
                *z /= norm;
            }
            let mut quad = Complex64::new(0.0, 0.0);
            for a in 0..r.tx {
                for b in 0..r.tx {
                    quad += v[a].conj() * r.gram.entry(a, b) * v[b];
                }
            }
            let oracle = r.tx as f64 * quad.re / r.gram.trace();
            let gain = beamforming_gain(&r.gram, &v).unwrap();
            assert_relative_eq!(gain, oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn ensemble_gain_anchor_exceeds_4_db() {
        // regression anchor captured at first build: the LOS-dominant default
        // ensemble averages ~5.6 dB of optimal beamforming gain
        let trials = 2000;
        let mean: f64 = (0..trials)
            .map(|seed| generate_channel(&ChannelParams::defaults(seed)).chi_star)
            .sum::<f64>()
            / trials as f64;
        let db = 10.0 * mean.log10();
        assert!(db > 4.0, "ensemble mean chi* = {db:.2} dB");
    }
}
