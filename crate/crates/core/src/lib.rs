//! Telegrapher's equations on tree-shaped networks.
//!
//! - [`network`]: trees, root-distance coordinates, incidence sets.
//! - [`dynamics`]: forward and backward solves with Kirchhoff coupling,
//!   energies, boundary traces.
//! - [`carleman`]: weight families and weighted-estimate evaluation.
//! - [`inverse`]: coefficient recovery from two experiments and the
//!   stability experiment.

pub mod carleman;
pub mod dynamics;
pub mod inverse;
pub mod network;
pub mod profile;
