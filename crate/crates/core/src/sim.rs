//! Per-trial protocol orchestration and Monte-Carlo aggregation.
//!
//! Each transmission block has a learning phase of `N` intervals: transmit a
//! training covariance, let the ER measure and feed back, extract cutting
//! planes, recenter the working set, and design the next covariance from the
//! new center. The final center is the channel estimate and its dominant
//! eigenvector the energy beam. Because every design step depends only on the
//! past, the record at interval `n` of a long run equals a run with `N = n`,
//! so one run yields the whole convergence curve.
//!
//! Trials are embarrassingly parallel; every trial derives its own RNG
//! substreams from `(seed, trial)`, and aggregation reduces in trial order so
//! the thread count never changes results.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::accpm::{
    max_logdet_with_equalities, AccpmError, CenterOptions, CuttingPlane, LinearEquality,
    RelaxOptions, WorkingSet,
};
use crate::channel::{beamforming_gain, fix_phase, generate_channel, ChannelParams, ChannelRealization};
use crate::hermitian::HermitianMatrix;
use crate::rng::SplitMix64;
use crate::schemes::{
    design_comparison_covariance, design_quantization_covariance, quantization_planes, quantize,
    random_beam_count, FeedbackWord, SchemeState, TrainingCovariance,
};

const STREAM_CHANNEL: u64 = 0;
const STREAM_DESIGN: u64 = 1;
const STREAM_MEASURE: u64 = 2;
const STREAM_BEAMS: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Quantization,
    Comparison,
    RandomBeam,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Quantization => "quantization",
            SchemeKind::Comparison => "comparison",
            SchemeKind::RandomBeam => "random_beam",
        }
    }
}

/// Feedback bits per interval; `Infinite` models the exact-feedback limit of
/// the quantization scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitBudget {
    Finite(u32),
    Infinite,
}

impl BitBudget {
    pub fn label(&self) -> String {
        match self {
            BitBudget::Finite(b) => b.to_string(),
            BitBudget::Infinite => "inf".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub channel: ChannelParams,
    pub scheme: SchemeKind,
    pub bits: BitBudget,
    /// Learning-phase intervals `N`.
    pub intervals: usize,
    /// Transmit power budget in watts.
    pub power: f64,
    /// Measurement window per interval, seconds.
    pub t_measure: f64,
    /// Feedback window per interval, seconds.
    pub t_feedback: f64,
    /// Keep at most this many cutting planes (pruning off when `None`).
    pub prune_keep: Option<usize>,
    /// Relative energy-measurement error level in [0, 1).
    pub alpha: f64,
    /// Robust mode: relax the working set so it stays consistent under
    /// measurement error.
    pub robust: bool,
    /// Normalize measurements by the noiseless first-interval energy instead
    /// of the measured one.
    pub exact_reference: bool,
    /// Re-solve the slack program only when recentering fails, instead of
    /// every interval.
    pub relax_on_demand: bool,
    /// Include the PSD-barrier block in the pruning metric.
    pub augmented_prune_metric: bool,
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn defaults() -> Self {
        Self {
            channel: ChannelParams::defaults(0),
            scheme: SchemeKind::Quantization,
            bits: BitBudget::Finite(2),
            intervals: 100,
            power: 1.0,
            t_measure: 2.0,
            t_feedback: 1.0,
            prune_keep: None,
            alpha: 0.0,
            robust: false,
            exact_reference: false,
            relax_on_demand: false,
            augmented_prune_metric: false,
            trials: 50,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.channel.validate().map_err(SimError::Config)?;
        if self.intervals < 1 {
            return Err(SimError::Config("intervals must be at least 1".into()));
        }
        if !(self.power > 0.0) {
            return Err(SimError::Config("power must be positive".into()));
        }
        if !(self.t_measure > 0.0) || !(self.t_feedback > 0.0) {
            return Err(SimError::Config("interval durations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(SimError::Config("alpha must lie in [0, 1)".into()));
        }
        if self.trials < 1 {
            return Err(SimError::Config("trials must be at least 1".into()));
        }
        match self.bits {
            BitBudget::Finite(b) if b < 1 => {
                return Err(SimError::Config("B must be at least 1".into()));
            }
            BitBudget::Infinite if self.scheme != SchemeKind::Quantization => {
                return Err(SimError::Config(
                    "infinite feedback resolution applies to the quantization scheme only".into(),
                ));
            }
            _ => {}
        }
        if let Some(keep) = self.prune_keep {
            if keep < 1 {
                return Err(SimError::Config("prune_keep must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// Accumulated planes became inconsistent (possible with measurement
    /// error in non-robust mode).
    EmptyInterior,
    /// The center solver could not converge.
    Numerical,
}

#[derive(Clone, Debug)]
pub struct TrialFailure {
    pub interval: usize,
    pub kind: FailureKind,
}

/// Per-interval trace of a learning trial.
#[derive(Clone, Debug)]
pub struct IntervalRecord {
    pub interval: usize,
    pub covariance: HermitianMatrix,
    /// Measured energy (noisy when alpha > 0).
    pub energy: f64,
    /// ER-side normalized measurement.
    pub normalized_energy: f64,
    pub feedback: Option<FeedbackWord>,
    pub planes_added: usize,
    pub planes_pruned: usize,
    pub plane_count: usize,
    pub center: HermitianMatrix,
    /// `|| center - true normalized Gram ||_F`.
    pub norm_error: f64,
    /// Beamforming gain of the center's dominant eigenvector, dB.
    pub gain_db: f64,
    pub truth_contained: bool,
    pub newton_iterations: usize,
    pub kkt_residual: f64,
    /// Smallest plane margin at the center.
    pub min_margin: f64,
    /// Scheme-specific neutrality residual of the covariance design with
    /// respect to the previous center.
    pub neutrality_residual: f64,
    pub degenerate_estimate: bool,
    /// Exact-feedback mode: stacked equality system lost rank.
    pub rank_deficient: bool,
}

/// Full trace of one learning trial.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub chi_star: f64,
    pub intervals: Vec<IntervalRecord>,
    pub failure: Option<TrialFailure>,
}

impl TrialRecord {
    pub fn final_center(&self) -> Option<&HermitianMatrix> {
        self.intervals.last().map(|r| &r.center)
    }

    pub fn final_gain_db(&self) -> Option<f64> {
        self.intervals.last().map(|r| r.gain_db)
    }

    pub fn final_norm_error(&self) -> Option<f64> {
        self.intervals.last().map(|r| r.norm_error)
    }
}

/// Random-beamforming baseline trial: gains only, no channel estimate.
#[derive(Clone, Debug)]
pub struct RandomBeamTrial {
    pub trial: usize,
    pub chi_star: f64,
    /// `gains_db[n-1]` is the winner gain under a learning budget of `n`
    /// intervals (the beam count follows the timing convention).
    pub gains_db: Vec<f64>,
    pub feedback_bits: u32,
}

#[derive(Clone, Debug)]
pub enum TrialOutput {
    Learned(TrialRecord),
    RandomBeam(RandomBeamTrial),
}

impl TrialOutput {
    pub fn chi_star(&self) -> f64 {
        match self {
            TrialOutput::Learned(t) => t.chi_star,
            TrialOutput::RandomBeam(t) => t.chi_star,
        }
    }

    pub fn as_learned(&self) -> Option<&TrialRecord> {
        match self {
            TrialOutput::Learned(t) => Some(t),
            TrialOutput::RandomBeam(_) => None,
        }
    }
}

/// Energy measurement with a bounded relative meter error: uniform on
/// `[-alpha Q, alpha Q]` around the exact harvested energy.
pub fn measure_energy(
    gram: &HermitianMatrix,
    s: &HermitianMatrix,
    t_measure: f64,
    alpha: f64,
    rng: &mut SplitMix64,
) -> f64 {
    let exact = t_measure * gram.inner(s).expect("dimension-checked covariance");
    if alpha == 0.0 {
        exact
    } else {
        exact + rng.uniform(-alpha * exact, alpha * exact)
    }
}

/// Dominant eigenvector with a deterministic tie-break: among eigenvectors of
/// (numerically) tied top eigenvalues, phase-fix each and pick the
/// lexicographically largest. Returns the vector and whether a tie occurred.
pub fn dominant_eigenvector(g: &HermitianMatrix) -> (Vec<Complex64>, bool) {
    let eig = g.eig().expect("Hermitian eigendecomposition");
    let top = eig.values[0];
    let tie_tol = 1e-10 * top.abs().max(1.0);
    let mut candidates: Vec<Vec<Complex64>> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .take_while(|(l, _)| top - **l <= tie_tol)
        .map(|(_, v)| v.clone())
        .collect();
    let degenerate = candidates.len() > 1;
    for v in candidates.iter_mut() {
        fix_phase(v);
    }
    let best = candidates
        .into_iter()
        .max_by(|a, b| {
            for (x, y) in a.iter().zip(b.iter()) {
                match x.re.partial_cmp(&y.re).expect("finite") {
                    std::cmp::Ordering::Equal => {}
                    ord => return ord,
                }
                match x.im.partial_cmp(&y.im).expect("finite") {
                    std::cmp::Ordering::Equal => {}
                    ord => return ord,
                }
            }
            std::cmp::Ordering::Equal
        })
        .expect("at least one eigenvector");
    (best, degenerate)
}

fn gain_db_of_center(realization: &ChannelRealization, center: &HermitianMatrix) -> (f64, bool) {
    let (v, degenerate) = dominant_eigenvector(center);
    let gain = beamforming_gain(&realization.gram, &v).expect("unit eigenvector");
    (10.0 * gain.max(f64::MIN_POSITIVE).log10(), degenerate)
}

/// Run all trials of a configuration, fanning out across `threads` workers
/// (0 = rayon default). Results are identical for any thread count.
pub fn run_trials(cfg: &SimConfig, threads: usize) -> Result<Vec<TrialOutput>, SimError> {
    cfg.validate()?;
    let run = || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, trial))
            .collect::<Vec<_>>()
    };
    let outputs = if threads == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
        pool.install(run)
    };
    Ok(outputs)
}

/// Run a single trial of the configured scheme.
pub fn run_trial(cfg: &SimConfig, trial: usize) -> TrialOutput {
    let mut channel_params = cfg.channel.clone();
    channel_params.rng_seed =
        SplitMix64::substream(cfg.seed, &[trial as u64, STREAM_CHANNEL]).next_u64();
    let realization = generate_channel(&channel_params);
    match cfg.scheme {
        SchemeKind::RandomBeam => TrialOutput::RandomBeam(run_random_beam_trial(cfg, trial, &realization)),
        SchemeKind::Quantization if cfg.bits == BitBudget::Infinite => {
            TrialOutput::Learned(run_exact_feedback_trial(cfg, trial, &realization))
        }
        _ => TrialOutput::Learned(run_learning_trial(cfg, trial, &realization)),
    }
}

fn run_random_beam_trial(
    cfg: &SimConfig,
    trial: usize,
    realization: &ChannelRealization,
) -> RandomBeamTrial {
    let mut rng = SplitMix64::substream(cfg.seed, &[trial as u64, STREAM_BEAMS]);
    let max_beams = random_beam_count(cfg.intervals);
    // draw the full candidate sequence once; a budget of n intervals sees the
    // first random_beam_count(n) beams of the same sequence
    let dim = realization.gram.dim();
    let mut energies = Vec::with_capacity(max_beams);
    let mut beams = Vec::with_capacity(max_beams);
    for _ in 0..max_beams {
        let mut w: Vec<Complex64> = (0..dim).map(|_| rng.complex_standard_normal()).collect();
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = cfg.power.sqrt() / norm;
        for z in w.iter_mut() {
            *z *= scale;
        }
        energies.push(cfg.t_measure * realization.gram.quadratic_form(&w));
        beams.push(w);
    }
    let mut gains_db = Vec::with_capacity(cfg.intervals);
    let mut best_idx = 0;
    let mut scanned = 0;
    for n in 1..=cfg.intervals {
        let budget = random_beam_count(n);
        while scanned < budget {
            if energies[scanned] > energies[best_idx] {
                best_idx = scanned;
            }
            scanned += 1;
        }
        let mut unit = beams[best_idx].clone();
        let norm = unit.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in unit.iter_mut() {
            *z /= norm;
        }
        let gain = beamforming_gain(&realization.gram, &unit).expect("unit beam");
        gains_db.push(10.0 * gain.max(f64::MIN_POSITIVE).log10());
    }
    let feedback_bits =
        if max_beams <= 1 { 0 } else { (max_beams as f64).log2().ceil() as u32 };
    RandomBeamTrial { trial, chi_star: realization.chi_star, gains_db, feedback_bits }
}

fn run_learning_trial(
    cfg: &SimConfig,
    trial: usize,
    realization: &ChannelRealization,
) -> TrialRecord {
    let BitBudget::Finite(bits) = cfg.bits else {
        unreachable!("exact feedback handled separately");
    };
    let dim = cfg.channel.tx_antennas;
    let center_opts = CenterOptions::default();
    let relax_opts = RelaxOptions::default();
    let truth = &realization.normalized_gram;
    let mut design_rng = SplitMix64::substream(cfg.seed, &[trial as u64, STREAM_DESIGN]);
    let mut measure_rng = SplitMix64::substream(cfg.seed, &[trial as u64, STREAM_MEASURE]);
    let mut reference_energy = 0.0;
    let mut ws = WorkingSet::initial(dim).expect("validated dimension");
    ws.set_robust_mode(cfg.robust);
    let mut state = SchemeState::new(bits);
    let mut covariance = TrainingCovariance::isotropic(cfg.power, dim);
    let mut record = TrialRecord {
        trial,
        chi_star: realization.chi_star,
        intervals: Vec::with_capacity(cfg.intervals),
        failure: None,
    };
    let mut prev_center = ws.center().clone();

    for n in 1..=cfg.intervals {
        let energy = measure_energy(
            &realization.gram,
            &covariance.matrix,
            cfg.t_measure,
            cfg.alpha,
            &mut measure_rng,
        );
        if n == 1 {
            reference_energy = if cfg.exact_reference {
                cfg.t_measure
                    * realization
                        .gram
                        .inner(&covariance.matrix)
                        .expect("dimension-checked")
            } else {
                energy
            };
        }
        let q_bar = (energy / reference_energy).max(0.0);
        state.record_interval(q_bar, &covariance.matrix);

        let mut feedback = None;
        let mut planes_added = 0;
        let mut planes_pruned = 0;
        let mut newton_iterations = 0;
        let mut kkt_residual = 0.0;
        let neutrality_residual = if n >= 2 {
            match cfg.scheme {
                SchemeKind::Quantization => {
                    (dim as f64 / cfg.power) * prev_center.inner(&covariance.matrix).unwrap()
                        - 0.5
                }
                SchemeKind::Comparison => {
                    let prev_cov = state.covariance_before(1);
                    covariance
                        .matrix
                        .sub(prev_cov)
                        .unwrap()
                        .inner(&prev_center)
                        .unwrap()
                }
                SchemeKind::RandomBeam => unreachable!(),
            }
            .abs()
        } else {
            0.0
        };

        if n >= 2 {
            let word = match cfg.scheme {
                SchemeKind::Quantization => quantize(q_bar, bits),
                SchemeKind::Comparison => state.comparison_feedback(),
                SchemeKind::RandomBeam => unreachable!(),
            };
            let planes: Vec<CuttingPlane> = match cfg.scheme {
                SchemeKind::Quantization => {
                    quantization_planes(&word, &covariance, dim, cfg.power, n)
                }
                SchemeKind::Comparison => state.comparison_planes(&word, n),
                SchemeKind::RandomBeam => unreachable!(),
            };
            feedback = Some(word);
            planes_added = planes.len();
            ws.add_planes(planes).expect("dimension-consistent planes");

            if cfg.robust && !cfg.relax_on_demand {
                ws.relax(&relax_opts).expect("slack program is always feasible");
            }
            let report = match ws.recenter(&center_opts) {
                Ok(r) => r,
                Err(AccpmError::EmptyInterior) if cfg.robust && cfg.relax_on_demand => {
                    // on-demand policy: relax only now that the set collapsed
                    ws.relax(&relax_opts).expect("slack program is always feasible");
                    match ws.recenter(&center_opts) {
                        Ok(r) => r,
                        Err(e) => {
                            record.failure = Some(failure_of(n, e));
                            break;
                        }
                    }
                }
                Err(e) => {
                    record.failure = Some(failure_of(n, e));
                    break;
                }
            };
            newton_iterations = report.newton_iterations;
            kkt_residual = report.kkt_residual;

            if let Some(keep) = cfg.prune_keep {
                if ws.planes().len() > keep {
                    match ws.prune(keep, cfg.augmented_prune_metric) {
                        Ok(dropped) => {
                            planes_pruned = dropped;
                            match ws.recenter(&center_opts) {
                                Ok(r) => {
                                    newton_iterations += r.newton_iterations;
                                    kkt_residual = r.kkt_residual;
                                }
                                Err(e) => {
                                    record.failure = Some(failure_of(n, e));
                                    break;
                                }
                            }
                        }
                        // metric collapsed: keep every plane this interval
                        Err(AccpmError::SingularMetric) => {}
                        Err(e) => {
                            record.failure = Some(failure_of(n, e));
                            break;
                        }
                    }
                }
            }
        }

        let center = ws.center().clone();
        let (gain_db, degenerate) = gain_db_of_center(realization, &center);
        record.intervals.push(IntervalRecord {
            interval: n,
            covariance: covariance.matrix.clone(),
            energy,
            normalized_energy: q_bar,
            feedback,
            planes_added,
            planes_pruned,
            plane_count: ws.planes().len(),
            norm_error: center.frobenius_distance(truth),
            gain_db,
            truth_contained: ws.contains(truth, 1e-9),
            newton_iterations,
            kkt_residual,
            min_margin: ws.min_margin_at(&center),
            neutrality_residual,
            degenerate_estimate: degenerate,
            rank_deficient: false,
            center,
        });
        prev_center = ws.center().clone();

        if n < cfg.intervals {
            covariance = match cfg.scheme {
                SchemeKind::Quantization => {
                    match design_quantization_covariance(ws.center(), cfg.power, &mut design_rng)
                    {
                        Ok(c) => c,
                        Err(_) => {
                            record.failure =
                                Some(TrialFailure { interval: n + 1, kind: FailureKind::Numerical });
                            break;
                        }
                    }
                }
                SchemeKind::Comparison => {
                    match design_comparison_covariance(&covariance, ws.center(), &mut design_rng)
                    {
                        Ok((c, probe)) => {
                            state.record_probe(probe);
                            c
                        }
                        Err(_) => {
                            record.failure =
                                Some(TrialFailure { interval: n + 1, kind: FailureKind::Numerical });
                            break;
                        }
                    }
                }
                SchemeKind::RandomBeam => unreachable!(),
            };
        }
    }
    record
}

fn failure_of(interval: usize, err: AccpmError) -> TrialFailure {
    let kind = match err {
        AccpmError::EmptyInterior => FailureKind::EmptyInterior,
        _ => FailureKind::Numerical,
    };
    TrialFailure { interval, kind }
}

fn run_exact_feedback_trial(
    cfg: &SimConfig,
    trial: usize,
    realization: &ChannelRealization,
) -> TrialRecord {
    let dim = cfg.channel.tx_antennas;
    let mut design_rng = SplitMix64::substream(cfg.seed, &[trial as u64, STREAM_DESIGN]);
    let mut measure_rng = SplitMix64::substream(cfg.seed, &[trial as u64, STREAM_MEASURE]);
    let truth = &realization.normalized_gram;
    let scale = dim as f64 / cfg.power;
    let mut equalities: Vec<LinearEquality> = Vec::new();
    let mut covariance = TrainingCovariance::isotropic(cfg.power, dim);
    let mut center = HermitianMatrix::scaled_identity(dim, 1.0 / dim as f64);
    let mut reference = 0.0;
    let mut record = TrialRecord {
        trial,
        chi_star: realization.chi_star,
        intervals: Vec::with_capacity(cfg.intervals),
        failure: None,
    };

    for n in 1..=cfg.intervals {
        let energy = measure_energy(
            &realization.gram,
            &covariance.matrix,
            cfg.t_measure,
            cfg.alpha,
            &mut measure_rng,
        );
        if n == 1 {
            reference = if cfg.exact_reference {
                cfg.t_measure * realization.gram.inner(&covariance.matrix).unwrap()
            } else {
                energy
            };
        }
        let q_bar = (energy / reference).max(0.0);

        let mut feedback = None;
        let mut newton_iterations = 0;
        let mut rank_deficient = false;
        if n >= 2 {
            feedback = Some(FeedbackWord::ExactEnergy { value: q_bar });
            equalities.push(LinearEquality {
                normal: covariance.matrix.scale(scale),
                rhs: q_bar,
            });
            match max_logdet_with_equalities(dim, &equalities) {
                Ok(report) => {
                    rank_deficient = report.rank < (dim * dim).min(n);
                    newton_iterations = report.newton_iterations;
                    center = report.center;
                }
                Err(e) => {
                    record.failure = Some(failure_of(n, e));
                    break;
                }
            }
        }

        let contained = equalities.iter().all(|eq| {
            (eq.normal.inner(truth).expect("dimension-checked") - eq.rhs).abs() <= 1e-9
        });
        let (gain_db, degenerate) = gain_db_of_center(realization, &center);
        record.intervals.push(IntervalRecord {
            interval: n,
            covariance: covariance.matrix.clone(),
            energy,
            normalized_energy: q_bar,
            feedback,
            planes_added: if n >= 2 { 1 } else { 0 },
            planes_pruned: 0,
            plane_count: equalities.len(),
            norm_error: center.frobenius_distance(truth),
            gain_db,
            truth_contained: contained,
            newton_iterations,
            kkt_residual: 0.0,
            min_margin: f64::INFINITY,
            neutrality_residual: 0.0,
            degenerate_estimate: degenerate,
            rank_deficient,
            center: center.clone(),
        });

        if n < cfg.intervals {
            covariance = match design_quantization_covariance(&center, cfg.power, &mut design_rng) {
                Ok(c) => c,
                Err(_) => {
                    record.failure =
                        Some(TrialFailure { interval: n + 1, kind: FailureKind::Numerical });
                    break;
                }
            };
        }
    }
    record
}

/// Block-level energy accounting constants for the net-energy identity.
#[derive(Clone, Copy, Debug)]
pub struct BlockBudget {
    /// Total block duration `T`, seconds.
    pub block_duration: f64,
    /// ER energy cost per measurement.
    pub measure_cost: f64,
    /// ER energy cost per feedback.
    pub feedback_cost: f64,
}

/// Net harvested energy over a whole block: learning-phase harvest plus
/// beamformed delivery minus the ER's measurement and feedback costs.
pub fn net_energy(
    gram: &HermitianMatrix,
    covariances: &[HermitianMatrix],
    beam: &[Complex64],
    power: f64,
    t_slot: f64,
    budget: &BlockBudget,
) -> f64 {
    let n = covariances.len() as f64;
    let tau = n * t_slot;
    let learning: f64 = covariances
        .iter()
        .map(|s| t_slot * gram.inner(s).expect("dimension-checked"))
        .sum();
    let delivery = power * (budget.block_duration - tau) * gram.quadratic_form(beam);
    learning + delivery - n * (budget.measure_cost + budget.feedback_cost)
}

/// Named aggregate metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    NormError,
    GainDb,
    ChiStarDb,
    FailedTrials,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::NormError => "norm_error",
            Metric::GainDb => "gain_db",
            Metric::ChiStarDb => "chi_star_db",
            Metric::FailedTrials => "failed_trials",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub intervals: usize,
    pub metric: Metric,
    pub mean: f64,
    pub stderr: f64,
    pub trials_used: usize,
}

/// Monte-Carlo summary over a grid of interval counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub rows: Vec<AggregateRow>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    assert!(k >= 1);
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Aggregate trial outputs at each grid point. Failed trials are excluded
/// from the means at grid points they did not reach and reported in the
/// `failed_trials` rows.
pub fn aggregate(outputs: &[TrialOutput], grid: &[usize]) -> Result<Aggregate, SimError> {
    if outputs.is_empty() {
        return Err(SimError::Config("no trials to aggregate".into()));
    }
    let mut rows = Vec::new();
    let chi_star_db: Vec<f64> =
        outputs.iter().map(|o| 10.0 * o.chi_star().log10()).collect();
    for &n in grid {
        let mut errors = Vec::new();
        let mut gains = Vec::new();
        let mut failed = 0usize;
        for out in outputs {
            match out {
                TrialOutput::Learned(t) => {
                    if t.intervals.len() >= n {
                        errors.push(t.intervals[n - 1].norm_error);
                        gains.push(t.intervals[n - 1].gain_db);
                    } else {
                        failed += 1;
                    }
                }
                TrialOutput::RandomBeam(t) => {
                    if t.gains_db.len() >= n {
                        gains.push(t.gains_db[n - 1]);
                    } else {
                        failed += 1;
                    }
                }
            }
        }
        if !errors.is_empty() {
            let (mean, stderr) = mean_stderr(&errors);
            rows.push(AggregateRow {
                intervals: n,
                metric: Metric::NormError,
                mean,
                stderr,
                trials_used: errors.len(),
            });
        }
        if !gains.is_empty() {
            let (mean, stderr) = mean_stderr(&gains);
            rows.push(AggregateRow {
                intervals: n,
                metric: Metric::GainDb,
                mean,
                stderr,
                trials_used: gains.len(),
            });
        }
        let (mean, stderr) = mean_stderr(&chi_star_db);
        rows.push(AggregateRow {
            intervals: n,
            metric: Metric::ChiStarDb,
            mean,
            stderr,
            trials_used: chi_star_db.len(),
        });
        rows.push(AggregateRow {
            intervals: n,
            metric: Metric::FailedTrials,
            mean: failed as f64,
            stderr: 0.0,
            trials_used: outputs.len(),
        });
    }
    Ok(Aggregate { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(scheme: SchemeKind, bits: BitBudget, n: usize, trials: usize) -> SimConfig {
        let mut cfg = SimConfig::defaults();
        cfg.scheme = scheme;
        cfg.bits = bits;
        cfg.intervals = n;
        cfg.trials = trials;
        cfg.seed = 7;
        cfg
    }

    #[test]
    fn measurement_error_support() {
        let g = HermitianMatrix::identity(2);
        let s = HermitianMatrix::scaled_identity(2, 0.5);
        let mut rng = SplitMix64::new(1);
        assert_eq!(measure_energy(&g, &s, 2.0, 0.0, &mut rng), 2.0);
        for _ in 0..10_000 {
            let q = measure_energy(&g, &s, 2.0, 0.01, &mut rng);
            assert!(q >= 2.0 * 0.99 && q <= 2.0 * 1.01);
        }
        let zero = HermitianMatrix::zeros(2);
        assert_eq!(measure_energy(&g, &zero, 2.0, 0.5, &mut rng), 0.0);
    }

    #[test]
    fn single_interval_trial_is_degenerate() {
        let cfg = quick_cfg(SchemeKind::Quantization, BitBudget::Finite(2), 1, 1);
        let out = run_trial(&cfg, 0);
        let t = out.as_learned().unwrap();
        assert_eq!(t.intervals.len(), 1);
        let rec = &t.intervals[0];
        assert!(rec.feedback.is_none());
        assert!(rec.degenerate_estimate);
        let iso = HermitianMatrix::scaled_identity(4, 0.25);
        assert!(rec.center.frobenius_distance(&iso) < 1e-12);
    }

    #[test]
    fn clean_runs_keep_truth_and_neutrality() {
        for scheme in [SchemeKind::Quantization, SchemeKind::Comparison] {
            let cfg = quick_cfg(scheme, BitBudget::Finite(2), 25, 2);
            let outputs = run_trials(&cfg, 0).unwrap();
            for out in &outputs {
                let t = out.as_learned().unwrap();
                assert!(t.failure.is_none());
                for rec in &t.intervals {
                    assert!(rec.truth_contained, "interval {}", rec.interval);
                    assert!(rec.gain_db <= 10.0 * (t.chi_star).log10() + 1e-9);
                    if rec.interval >= 2 {
                        match scheme {
                            SchemeKind::Quantization => {
                                assert!(rec.neutrality_residual <= 1e-10)
                            }
                            SchemeKind::Comparison => {
                                assert!(rec.neutrality_residual <= 1e-10)
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn error_decreases_coarsely() {
        let cfg = quick_cfg(SchemeKind::Quantization, BitBudget::Finite(2), 40, 10);
        let outputs = run_trials(&cfg, 0).unwrap();
        let mut improved = 0;
        for out in &outputs {
            let t = out.as_learned().unwrap();
            if t.intervals[39].norm_error <= t.intervals[1].norm_error {
                improved += 1;
            }
        }
        assert!(improved >= 6, "only {improved}/10 trials improved end-to-end");
    }

    #[test]
    fn trials_are_reproducible_and_thread_invariant() {
        let cfg = quick_cfg(SchemeKind::Comparison, BitBudget::Finite(1), 15, 4);
        let a = run_trials(&cfg, 1).unwrap();
        let b = run_trials(&cfg, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (tx, ty) = (x.as_learned().unwrap(), y.as_learned().unwrap());
            assert_eq!(tx.intervals.len(), ty.intervals.len());
            for (rx, ry) in tx.intervals.iter().zip(&ty.intervals) {
                assert_eq!(rx.norm_error, ry.norm_error);
                assert_eq!(rx.gain_db, ry.gain_db);
                assert_eq!(rx.energy, ry.energy);
            }
        }
    }

    #[test]
    fn exact_feedback_recovers_at_dim_squared() {
        let cfg = quick_cfg(SchemeKind::Quantization, BitBudget::Infinite, 16, 3);
        let outputs = run_trials(&cfg, 0).unwrap();
        for out in &outputs {
            let t = out.as_learned().unwrap();
            assert!(t.failure.is_none());
            let final_err = t.final_norm_error().unwrap();
            assert!(final_err <= 1e-6, "recovery error {final_err}");
            // before full rank the estimate is generally off
            assert!(t.intervals[7].norm_error > 1e-6);
            assert!(!t.intervals.iter().any(|r| r.rank_deficient));
        }
    }

    #[test]
    fn random_beam_budget_curve() {
        let cfg = quick_cfg(SchemeKind::RandomBeam, BitBudget::Finite(2), 12, 3);
        let outputs = run_trials(&cfg, 0).unwrap();
        for out in &outputs {
            let TrialOutput::RandomBeam(t) = out else { panic!("expected beam trial") };
            assert_eq!(t.gains_db.len(), 12);
            // winner can only improve with budget
            for w in t.gains_db.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            assert_eq!(t.feedback_bits, 5); // 17 candidates
        }
    }

    #[test]
    fn net_energy_identity() {
        let real = generate_channel(&ChannelParams::defaults(4));
        let covs: Vec<HermitianMatrix> =
            (1..=3).map(|i| HermitianMatrix::scaled_identity(4, 0.05 * i as f64)).collect();
        let beam = real.v1.clone();
        let budget =
            BlockBudget { block_duration: 100.0, measure_cost: 1e-6, feedback_cost: 2e-6 };
        let got = net_energy(&real.gram, &covs, &beam, 1.0, 3.0, &budget);
        // independent evaluation of the same accounting
        let mut expect = 0.0;
        for s in &covs {
            expect += 3.0 * real.gram.inner(s).unwrap();
        }
        expect += 1.0 * (100.0 - 9.0) * real.gram.quadratic_form(&beam);
        expect -= 3.0 * 3e-6;
        assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn aggregate_basic_properties() {
        let cfg = quick_cfg(SchemeKind::Quantization, BitBudget::Finite(2), 10, 2);
        let outputs = run_trials(&cfg, 0).unwrap();
        let agg = aggregate(&outputs, &[5, 10]).unwrap();
        assert!(agg.rows.iter().any(|r| r.metric == Metric::NormError && r.intervals == 5));
        // single trial: stderr zero
        let one = aggregate(&outputs[..1], &[10]).unwrap();
        for row in &one.rows {
            if row.metric == Metric::NormError || row.metric == Metric::GainDb {
                assert_eq!(row.stderr, 0.0);
                assert_eq!(row.trials_used, 1);
            }
        }
        assert!(aggregate(&[], &[1]).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut cfg = SimConfig::defaults();
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::defaults();
        cfg.bits = BitBudget::Finite(0);
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::defaults();
        cfg.scheme = SchemeKind::Comparison;
        cfg.bits = BitBudget::Infinite;
        assert!(cfg.validate().is_err());
    }
}
