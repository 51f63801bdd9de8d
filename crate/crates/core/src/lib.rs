//! Backstepping boundary control for coupled linear parabolic PIDEs.
//!
//! The crate synthesizes the state-feedback kernel of the Volterra
//! transformation `x̃ = x - ∫0^z K(z,ζ) x(ζ) dζ` for n coupled parabolic
//! PIDEs with distinct spatially-varying diffusion coefficients and mixed
//! Dirichlet/Neumann/Robin boundaries, assembles the stabilizing boundary
//! feedback `u = 𝒦[x]`, and verifies closed-loop exponential stability by
//! simulation and residual checks.
//!
//! Pipeline: [`model`] validates the plant, [`coords`] builds the canonical
//! coordinate atlas, [`kernel`] runs the successive approximation for the
//! kernel equations and maps the result back, [`feedback`] assembles the
//! gain, [`sim`] integrates the closed loop, and [`config`]/[`cli`] provide
//! the JSON-driven command-line front end.
//!
//! See the crate examples for runnable entry points per capability, and the
//! `pide-backstep` binary for the file-oriented workflow.

pub mod config;
pub mod coords;
pub mod feedback;
pub mod kernel;
pub mod model;
pub mod numerics;
pub mod sim;

pub mod cli;

pub use coords::{build_atlas, CoordinateAtlas};
pub use kernel::{solve_kernel, KernelSolution, SolverOptions};
pub use model::{
    eliminate_convection, reorder_dirichlet_first, validate_plant, PlantModel, TargetSpec,
};
