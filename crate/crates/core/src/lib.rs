//! Multiprecision algebraic Schwarz methods.
//!
//! Damped additive, additive, restricted additive and multiplicative Schwarz
//! iterations whose subdomain solves run in a simulated lower precision,
//! together with verifiers for the sufficient convergence conditions, model
//! problem generators, GMRES acceleration and perturbation analysis.

pub mod conditions;
pub mod decomp;
pub mod error;
pub mod fpsim;
pub mod gmres;
pub mod linalg;
pub mod pde;
pub mod perturb;
pub mod rounding;
pub mod scaling;
pub mod schwarz;

pub use error::{Error, Result};
