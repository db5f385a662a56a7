//! Deterministic preparation of matrix-product-state phases with symmetric
//! on-site measurements and feedforward.
//!
//! * [`group_core`] – finite abelian groups, aligned subgroups, characters.
//! * [`proj_reps`] – cohomology classes, μ-irreps, `φ_μ`, projective centers.
//! * [`mps_core`] – MPS tensors, blocking, injectivity and symmetry checks.
//! * [`sim_engine`] – dense statevector simulation with measurement branching.
//! * [`abelian_protocol`] – symmetry, generalized Bell measurement, full
//!   protocol runs and correction bookkeeping for abelian groups.
//! * [`nonabelian_d8`] – the dihedral group of order 8: obstruction check,
//!   join-and-measure protocols, failure-probability bound.

pub mod abelian_protocol;
pub mod cohomology;
pub mod error;
pub mod group_core;
pub mod linalg;
pub mod mps_core;
pub mod nonabelian_d8;
pub mod par;
pub mod phase;
pub mod proj_reps;
pub mod sim_engine;

pub use error::{Error, Result};
pub use phase::RationalPhase;
