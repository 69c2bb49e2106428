//! Exclusion process with conductances given by a strictly increasing
//! càdlàg function `W`, the lattice operators `(d/dx)(d/dW)` that go with it,
//! and a solver for the hydrodynamic equation `∂_t ρ = ℒ_W Φ(ρ)`.
//!
//! The crate is organized by subsystem:
//!
//! * [`wfun`]: the conductance function `W` and its increments.
//! * [`lattice`]: conductances, the cyclic random-walk generator, resolvents,
//!   spectrum, Green's function and Poincaré checks.
//! * [`particle`]: the exclusion process itself (exact kinetic Monte Carlo)
//!   plus brute-force generators for small systems.
//! * [`pde`]: finite-volume solver for the hydrodynamic equation and its
//!   energy, Lyapunov, weak-form and contraction diagnostics.
//! * [`harness`]: Monte Carlo vs. PDE convergence experiments and property suites.
//! * [`config`]: the plain-text run configuration shared by every entry point.

pub mod config;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod particle;
pub mod pde;
pub mod rng;
pub mod tridiag;
pub mod wfun;

pub use error::{Error, Result};
pub use lattice::{Conductances, LatticeOperator, SpectralDecomp};
pub use particle::{Configuration, ExclusionProcess, ProcessParams};
pub use pde::{DensityProfile, PhiSpec, Scheme, SolverConfig};
pub use wfun::WSpec;
