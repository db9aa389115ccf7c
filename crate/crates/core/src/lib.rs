//! Simulation and numerical tools for supercritical superprocesses on finite
//! state spaces: semigroup solvers, branching particle systems with genealogy,
//! superprocess approximations, and distributional checks of Poissonization and
//! trimmed-tree identities.

pub mod error;
pub mod model;
mod ode;
mod quad;
pub mod rng;
pub mod particles;
pub mod semigroup;
pub mod stats;
pub mod superproc;
pub mod trim;

pub use error::{Error, Result};
pub use ode::OdeStats;
