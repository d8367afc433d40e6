//! Permutation-invariant open spin ensembles: mean-field dynamics,
//! finite-N steady states in the Dicke basis, and correlation measures.

pub mod dicke;
pub mod error;
pub mod floquet;
pub mod ground_state;
pub mod linalg;
pub mod krylov;
pub mod lmg;
pub mod meanfield;
pub mod oracle;
pub mod ode;
pub mod quadrature;
pub mod scalar;
pub mod sparse;
pub mod state_space;

pub use error::{Error, Result};
