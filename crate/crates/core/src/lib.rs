//! Third-order maximum-principle-satisfying direct discontinuous Galerkin
//! (DDG) solver with interface correction for two-dimensional
//! convection-diffusion equations on unstructured triangular meshes.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: triangulations with edge/cell adjacency and periodic pairing.
//! - [`poly2`]: quadratic polynomials on a triangle in a barycentric basis.
//! - [`quadrature`]: triangle and edge rules, including the vertex-containing
//!   mapped rule and the selected-point composite rule used by the CFL theory.
//! - [`flux`]: DDG diffusion flux, interface correction, Lax-Friedrichs flux.
//! - [`problems`]: the problem catalog, selected by name.
//! - [`assembly`]: the semi-discrete spatial operator.
//! - [`limiter`]: the bound-preserving scaling limiter and a TVB slope limiter.
//! - [`timestep`]: CFL bounds, forward Euler and SSP-RK3.
//! - [`poisson`]: continuous P2 stream-function solver for the vorticity form
//!   of incompressible Navier-Stokes.
//! - [`harness`]: experiment configuration, runs, tables and field export.

pub mod assembly;
pub mod error;
pub mod flux;
pub mod harness;
pub mod limiter;
pub mod mesh;
pub mod poisson;
pub mod poly2;
pub mod problems;
pub mod quadrature;
pub mod timestep;

pub use error::{Error, Result};
pub use mesh::{Point2, TriMesh};
pub use poly2::{DgField, QuadraticPoly};
