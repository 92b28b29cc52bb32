//! Millimeter-wave MIMO network simulation and load-balancing user association.
//!
//! The crate is organized bottom-up:
//!
//! - [`topology`]: scenario description, UE placement and random-walk mobility.
//! - [`channel`]: LoS/NLoS link states, path loss with shadowing, and the
//!   clustered multi-ray channel over uniform planar arrays.
//! - [`mimo`]: SVD beamformers, equal power split, association-dependent
//!   interference and log-det rates.
//! - [`association`]: activation vectors, the Worst Connection Swapping
//!   solver, the exhaustive oracle and the max-SINR baselines.
//! - [`harness`]: seeded multi-slot experiments, statistics and result files.

pub mod association;
pub mod channel;
pub mod error;
pub mod harness;
pub mod mimo;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};

/// Complex double used for every channel and beamformer entry.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
