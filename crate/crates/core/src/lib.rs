//! Strong-field photoelectron momentum distributions from SFA and Coulomb
//! quantum orbits in elliptically polarized fields.

pub mod analysis;
pub mod cqsfa;
pub mod error;
pub mod field;
pub mod pmd;
pub mod sfa_amplitude;
pub mod sfa_times;

pub use error::{Error, Result};
pub use num_complex::Complex64;
