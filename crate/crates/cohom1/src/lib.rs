//! Numerical laboratory for the cohomogeneity-one Ricci-soliton flow on
//! `O(k) -> CP^{2m+1}`.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod integrate;
pub mod ode;
pub mod phase;
pub mod regions;
pub mod run;
pub mod search;
pub mod seed;
pub mod verify;

pub use error::{Error, Result};
pub use phase::{ModelParams, PhasePoint};
