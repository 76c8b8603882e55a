//! Numerical laboratory for variational upper bounds on the ground-state
//! energy of the dilute three-dimensional Hubbard model.

pub mod bound;
pub mod constants;
pub mod determinantal;
pub mod error;
pub mod exact_diag;
pub mod free_fermi;
pub mod lattice;
pub mod linalg;
pub mod quadrature;
pub mod scattering;
pub mod trial_state;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
