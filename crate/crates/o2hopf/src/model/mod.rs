//! Channel PDE engine: model systems, profiles, discretization and time stepping.

pub mod energy;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod problem;
pub mod profile;
pub mod system;

pub use field::{ChannelField, FullField};
pub use grid::Grid;
pub use problem::Problem;
pub use profile::ShockProfile;
pub use system::{M0Params, M1Params, ModelSystem};
