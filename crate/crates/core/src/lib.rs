//! Joint design of BS hybrid beamforming and RIS phase shifts for
//! RIS-aided mmWave downlinks under per-user SINR constraints.
//!
//! * [`channel`]: clustered mmWave channels and the BS/RIS/user scenario.
//! * [`system`]: configuration, solution type, power and SINR evaluation.
//! * [`manifold`]: Riemannian conjugate gradient on unit-modulus vectors.
//! * [`penalty`]: the penalty-based joint optimizer.
//! * [`individual`]: the sequential low-complexity design.
//! * [`experiments`]: seeded Monte Carlo sweeps and CSV output.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod individual;
pub mod manifold;
pub mod penalty;
pub mod system;

pub use error::{Error, Result};

/// Complex column vector.
pub type CVec = nalgebra::DVector<nalgebra::Complex<f64>>;
/// Complex dense matrix.
pub type CMat = nalgebra::DMatrix<nalgebra::Complex<f64>>;
