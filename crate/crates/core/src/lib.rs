//! Top eigenvector computation for `AᵀA` (sparse rows) and for streamed
//! covariances via the shifted-and-inverted power method, with each shifted
//! system `(λI − AᵀA)⁻¹x` solved approximately by variance-reduced SGD.
//!
//! The numerics are generic over [`Scalar`] (`f32`, `f64`); the aliases at the
//! crate root fix `f64`, which is what the harness and CLI use.

pub mod accel;
pub mod cg;
pub mod error;
pub mod matrix;
pub mod mtx;
pub mod online;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod power;
pub mod scalar;
pub mod shift;
pub mod svrg;
pub mod vector;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use accel::{accelerated_solve, AccelConfig, AcceleratedSolver};
pub use matrix::{
    b_norm, build_sampling_distribution, gram_apply, rayleigh_quotient, shifted_apply, CsrMatrix,
    SamplingDistribution, ShiftedOperator,
};
#[cfg(feature = "diagnostics")]
pub use matrix::potential;
pub use cg::{conjugate_gradient, CgConfig, ConjugateGradientSolver};
pub use online::{
    estimate_rayleigh_online, spike_sampler, ssvrg_iter, streaming_solve, top_eigenvector_online,
    AtomStream, OnlineConfig, OnlineShift, ReplayData, ReplayStream, SampleStream, SpikeModelParams,
    SpikeStream, StreamSolverConfig,
};
pub use power::{
    burn_in, certify_alignment, random_unit_init, robust_power_iterate, top_eigenvector_offline,
    EigenResult, PowerConfig, ShiftSource, SolverChoice,
};
pub use shift::{eig_estimate_block, estimate_shift, ShiftConfig, ShiftSearchResult};
pub use svrg::{
    component_gradient, solve_shifted_system, svrg_epoch, warm_start_guess, ShiftedSolver,
    SolverReport, SvrgConfig, SvrgSolver,
};
pub use vector::Vector;

/// The offline problem instance in double precision.
pub type DataMatrix = CsrMatrix<f64>;
pub type DenseVector = Vector<f64>;
pub type Operator<'a> = ShiftedOperator<'a, f64>;
pub type Distribution = SamplingDistribution<f64>;
pub type EigenResult64 = EigenResult<f64>;
