//! Numerical toolkit for generalized teleportation fidelity and the
//! generalized singlet fraction of two-particle, multi-degree-of-freedom
//! quantum states — distinguishable or indistinguishable — together with the
//! fidelity/singlet-fraction relation engine, monogamy bounds, state
//! characterization rules, and protocol case studies (optical-circuit state,
//! quantum private queries, CHSH and GHZ games).

pub mod casestudies;
pub mod channels;
pub mod characterize;
pub mod error;
pub mod fidelity;
pub mod indist;
pub mod linalg;
pub mod multidof;
pub mod statefile;
pub mod teleport;

pub use error::{Error, Result};
