//! Exact fundamental solutions of finite truncations of the plane-wave Dirac
//! system in a field periodic in space and time.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] numbers the even-sum lattice of harmonic indices;
//! * [`schedule`] builds the fractal family of point lattices and the finite models;
//! * [`spinor`] holds the 4x4 complex kernels;
//! * [`coupling`] turns a field configuration into the per-equation blocks;
//! * [`engine`] orthogonalizes the equations in fractal order and emits `S(n)`;
//! * [`observables`] evaluates `U_E`, `U_D`, mean values and the residual functional;
//! * [`solution_file`] persists solution tables.

pub mod coupling;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod schedule;
pub mod solution_file;
pub mod spinor;

pub use coupling::FieldConfig;
pub use engine::{run_model, EngineOptions, ProjectorRecord, Solution, SolutionTable};
pub use error::{Error, Result};
pub use lattice::{index_of, point_of, LatticePoint};
pub use schedule::{ModelSpec, PointLattice, Region, Schedule};
pub use spinor::{Bispinor, SpinorBlock, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
