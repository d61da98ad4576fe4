//! Energy-feedback MIMO channel learning for wireless energy transfer.
//!
//! An energy transmitter (ET) learns the channel Gram matrix of a MIMO link
//! purely from few-bit energy feedback sent by the energy receiver (ER), using
//! the analytic center cutting plane method over the unit-trace PSD simplex.
//! Once learned, the ET beamforms along the dominant eigenvector of the
//! estimate.
//!
//! Module map:
//! - [`hermitian`]: complex Hermitian algebra, `cvec`/`cmat` isometry, Jacobi
//!   eigendecomposition, Cholesky log-determinant.
//! - [`channel`]: Rician MIMO channel generation and ground-truth energy and
//!   beamforming-gain metrics.
//! - [`accpm`]: the localization engine — working sets of cutting planes,
//!   barrier-Newton analytic centers, plane pruning, robust relaxation.
//! - [`schemes`]: the energy-quantization and energy-comparison feedback
//!   schemes plus the random-beamforming baseline.
//! - [`sim`]: per-trial protocol orchestration and Monte-Carlo aggregation.
//! - [`rng`]: deterministic substreamed random number generation.

pub mod accpm;
pub mod channel;
pub mod hermitian;
pub mod rng;
pub mod schemes;
pub mod sim;

mod real_linalg;

pub use accpm::{CenterReport, CuttingPlane, WorkingSet};
pub use channel::{ChannelParams, ChannelRealization};
pub use hermitian::{EigenPair, HermitianMatrix, MatrixError};
pub use schemes::{FeedbackWord, TrainingCovariance};
pub use sim::{Aggregate, BitBudget, SchemeKind, SimConfig, TrialRecord};

pub use num_complex::Complex64;
