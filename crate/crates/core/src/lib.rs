//! Finite-difference laboratory for semilinear Dirichlet problems
//! `-Δu = f(u)` on epigraphs `{x_N > g(x')}` and strip-like sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] – epigraph catalog, general open sets, caps, reflections and
//!   section measures along a direction.
//! * [`nonlinearity`] – catalog of nonlinearities with Lipschitz data and the
//!   explicit comparison thresholds.
//! * [`discretization`] – masked uniform grids with Shortley–Weller arms and
//!   the assembled discrete `-Δ`.
//! * [`solver`] – Krylov linear solves, Newton/Picard semilinear solves and
//!   principal eigenpairs.
//! * [`moving_plane`], [`comparison`], [`estimates`] – the verification
//!   experiments built on top.
//! * [`io`] – CSV/JSON serialization of fields, grids and report tables.

pub mod comparison;
pub mod discretization;
pub mod error;
pub mod estimates;
pub mod extended;
pub mod geometry;
pub mod io;
pub mod moving_plane;
pub mod nonlinearity;
pub mod solver;

pub use discretization::{assemble_laplacian, build_grid, DomainGrid, GridBox, SparseOperator};
pub use error::{Error, Result};
pub use extended::Extended;
pub use geometry::{EpigraphKind, EpigraphSpec, GeneralOpenSet, SectionMeasure};
pub use moving_plane::MovingPlaneReport;
pub use nonlinearity::{Nonlinearity, ThresholdParams};
pub use solver::{BoundaryTrace, DirichletProblem, EigenPair, Method, SolutionField, SolvePolicy};
