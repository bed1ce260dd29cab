//! Pressure-loss minimization for extrusion nozzle contractions.
//!
//! The crate couples a stabilized finite-element flow solver (a generalized
//! Newtonian Cross-WLF fluid with heat transfer, and an isothermal Giesekus
//! viscoelastic fluid) to a derivative-free trust-region optimizer acting on
//! angle- and spline-parametrized nozzle profiles.
//!
//! Module map:
//!
//! - [`geometry`]: nozzle dimensions, profile parametrizations, constraints.
//! - [`mesh`]: boundary-conforming triangular meshes of the half-domain.
//! - [`materials`]: Cross-WLF viscosity and Giesekus steady-shear solutions.
//! - [`solver`]: steady stabilized finite-element solves and diagnostics.
//! - [`objective`]: section-averaged pressure drop and relative improvement.
//! - [`optimizer`]: quadratic-model trust-region optimizer and shape drivers.
//! - [`harness`]: experiment configuration, sweeps and output files.

pub mod geometry;
pub mod harness;
pub mod materials;
pub mod mesh;
pub mod objective;
pub mod optimizer;
pub mod solver;

pub use geometry::{BoundaryProfile, NozzleDims, ProfileParams};
pub use materials::{CrossWlfParams, GiesekusParams};
pub use mesh::{Mesh, MeshParams};
pub use objective::ObjectiveReport;
pub use solver::{BoundaryConditions, FlowSolution, SolverConfig};
