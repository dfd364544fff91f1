//! Critical points, end-geometry classification and metric reconstruction.

pub mod catalog;
pub mod classify;
pub mod profile;

pub use catalog::{Catalog, CriticalId};
pub use classify::{classify, AsymptoticLabel, BaseLabel, Classification};
pub use profile::{cross_check_t_system, reconstruct, MetricProfile};
