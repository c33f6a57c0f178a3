//! Coulomb quantum-orbit engine.

pub mod continuation;
pub mod orbit;
pub mod propagate;

pub use continuation::*;
pub use orbit::*;
pub use propagate::{asymptotic_momentum, coulomb_tail, propagate, symplectic_defect, Trajectory, TrajectorySample};
