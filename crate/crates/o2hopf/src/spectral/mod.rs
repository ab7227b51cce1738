//! Mode operators, eigen-data, crossing detection, projections, symmetry checks and the Evans function.

pub mod crossing;
pub mod eigen;
pub mod evans;
pub mod ode;
pub mod projections;
pub mod symmetry;

pub use crossing::{find_crossing, tune_m0, CrossingOptions, EigenBundle};
pub use eigen::{assemble_lk, spectrum_in_region, EigenPair, OperatorMatrix, Region};
pub use evans::{Evans, EvansOptions, WindingOptions};
pub use projections::Projections;
pub use symmetry::{verify_equivariance, EquivarianceReport};
