//! Direct entanglement detection by simulation.
//!
//! A positive-map separability test `Λ` is turned into a completely positive
//! map by mixing in the depolarizing channel ([`posmap`]). The minimal
//! eigenvalue of the resulting state is recovered from interferometric
//! estimates of `Tr ρ′^k` ([`interfero`]) through Newton's identities
//! ([`spectrum`]) and compared against the separability threshold
//! ([`detector`]).

pub mod detector;
pub mod error;
pub mod interfero;
pub mod linalg;
pub mod posmap;
pub mod qstate;
pub mod rng;
pub mod spectrum;
pub mod sweep;

pub use error::{Error, Result};
