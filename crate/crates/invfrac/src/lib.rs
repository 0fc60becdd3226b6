//! Solver library for the one-dimensional inverse-deformation fracture
//! problem: minimize a second-gradient elastic energy over inverse
//! deformations `h` with the unilateral constraint `h' >= 0`, where flat
//! spots of `h` (`h' = 0`) represent fully opened cracks.
//!
//! The pipeline, bottom to top:
//!
//! * [`constitutive`] — forward/inverse stored-energy pair `W`/`W*` and
//!   derivatives for the built-in law and a Lennard-Jones-type family.
//! * [`mesh_hermite`] — uniform 1D mesh, cubic Hermite (C¹) basis, Gauss
//!   quadrature.
//! * [`assembly`] — energy, Galerkin residual, tangent and
//!   second-variation matrices of the scaled problem on [0,1].
//! * [`activeset`] — Newton/active-set solver for the discrete KKT system
//!   at fixed stretch λ.
//! * [`continuation`] — branch tracing in λ with bifurcation detection,
//!   eigenmode branch switching and odd-periodic extension of cell
//!   solutions.
//! * [`cracks`] — crack topology, driving forces, dissipation and
//!   irreversibility checks, translation families.
//! * [`stability`] — reduced second-variation spectra and stability
//!   verdicts.
//! * [`postprocess`] — stress evaluation, forward deformation maps,
//!   CSV/JSON serialization.
//! * [`cli`] — command-line driver.

pub mod activeset;
pub mod assembly;
pub mod cli;
pub mod constitutive;
pub mod continuation;
pub mod cracks;
pub mod linalg;
pub mod mesh_hermite;
pub mod postprocess;
pub mod stability;
