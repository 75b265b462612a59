//! First-order field theory on maps `u: ℝ² → M` in a single chart of `M = ℝ^m`.
//!
//! The crate models the bundles of the field-theoretic Tulczyjew triple in adapted
//! coordinates ([`jetcore`]), generates phase dynamics from a Lagrangian
//! ([`lagrangian`]) or a Hamiltonian ([`hamiltonian`]), ships a small catalog of
//! models with closed forms ([`models`]), and solves Dirichlet problems for the
//! Euler-Lagrange equations with a variational discretization ([`solver`]).
//! Derivatives come from forward-mode dual numbers ([`autodiff`]).

pub mod autodiff;
pub mod error;
pub mod hamiltonian;
pub mod jetcore;
pub mod lagrangian;
pub mod models;
pub mod solver;

pub use error::{Error, Result};
