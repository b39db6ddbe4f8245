//! Numerical toolkit for Bogoliubov-de Gennes operators on two-dimensional
//! lattices: model construction, symmetry reductions, bulk invariants,
//! linear response coefficients and edge observables.

extern crate blas_src;
extern crate openblas_src;

pub mod boundary;
pub mod currents;
pub mod error;
pub mod fock;
pub mod invariants;
pub mod lattice;
pub mod linalg;
pub mod models;
pub mod spin;
pub mod transport;

pub use error::{Error, Result};
pub use lattice::{BlockOperator, Direction, Flux, Geometry, LatticeSpec};
pub use models::{build_model, BdGModel, CazClass, DisorderRealization, Kinetic, PairingKind, PairingSpec};
pub use spin::SpinRep;
