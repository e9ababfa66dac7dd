//! Randomized-measurement estimation of negativity moments for bipartite qudit states.
//!
//! The crate is organised bottom-up: permutation-group machinery ([`permgroup`]),
//! Weingarten calculus ([`weingarten`]), dense state oracles ([`qstate`]), diagonal
//! observables ([`observables`]), statistical estimators ([`estimator`]) and sweep
//! drivers ([`sweep`], [`verify`]).

pub mod error;
pub mod estimator;
pub mod linalg;
pub mod observables;
pub mod parallel;
pub mod permgroup;
pub mod qstate;
pub mod rng;
pub mod sweep;
pub mod verify;
pub mod weingarten;

pub use error::{Error, Result};

#[cfg(test)]
mod proptests;
