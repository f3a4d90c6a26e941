//! Numerical potential theory for Dirichlet forms on finite-dimensional
//! tracial *-algebras.
//!
//! A [`Model`] is a finite tracial *-algebra with a faithful matrix
//! representation; [`Element`]s are coefficient vectors that double as GNS
//! vectors. On top of these sit Dirichlet generators, finite-energy
//! functionals and their potentials, the carré du champ, and multiplier
//! norms, each paired with a verifier that returns a [`CheckReport`].

pub mod algebra;
pub mod carre_du_champ;
pub mod deny;
pub mod dirichlet;
pub mod error;
pub mod io;
pub mod models;
pub mod multipliers;
pub mod potential;
pub mod report;
pub mod sampling;
pub mod suite;

pub use algebra::{hs_inner, modular_conjugation, Element, Matrix, Model, ModelParts, Vector};
pub use dirichlet::{ApproxForm, DirichletGenerator};
pub use error::{Error, Result};
pub use models::{
    build_generator, build_twisted_group_algebra, coboundary_length, sine2_length, Cocycle, GroupSpec,
    GroupStructure, LengthFunction, LengthProvenance,
};
pub use report::{derive_seed, CheckReport};
