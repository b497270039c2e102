//! Design of constant-modulus (phase-only) sequence sets for CDM-MIMO radar.
//!
//! A set of `M` unit-modulus sequences of length `N` is optimized so that the
//! weighted lp-norm of all aperiodic auto- and cross-correlation sidelobes is
//! minimized, under either a continuous-phase or a discrete (MPSK) alphabet
//! constraint. Two block solvers are provided:
//!
//! - an entry solver that optimizes one code entry at a time, finding the
//!   global per-coordinate optimum through the critical points of a degree-2
//!   trigonometric polynomial (continuous phase) or an L-point DFT search
//!   (discrete phase), and
//! - a vector solver that updates a whole transmitter row by one gradient
//!   step with backtracking line search.
//!
//! The driver orchestrates cyclic sweeps, p-schedules with warm starts,
//! stopping rules and per-iteration trace recording.

pub mod correlation;
pub mod driver;
pub mod entry;
pub mod error;
pub mod fft;
pub mod init;
pub mod metrics;
pub mod surrogate;
pub mod vector;
pub mod waveform;

pub use correlation::{cross_correlation, CorrelationSet};
pub use driver::{
    make_weights, run_p_schedule, run_stage, stopping_check, Method, RunTrace, SolverConfig,
    StopReason, TraceRecord, WeightSpec,
};
pub use error::{Error, Result};
pub use init::random_mpsk_init;
pub use metrics::{islr_db, islr_lower_bound_db, lp_objective, psl, sparsity, welch_psl_bound};
pub use surrogate::SmoothKind;
pub use waveform::{PhaseConstraint, WaveformSet, WeightVector};
