//! Off-diagonal geometric phases for pure and mixed quantum states under
//! unitary evolution, computed from parallel-transporting operators.

pub mod error;
pub mod interferometer;
pub mod evolution;
pub mod linalg;
pub mod phases;
pub mod pseudopure;
pub mod random;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, OrthonormalBasis, PhaseResult, SpectralDensity};
