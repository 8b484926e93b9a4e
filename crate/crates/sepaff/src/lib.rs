//! Heuristic solver for separable-affine problems: a separable, possibly
//! nonconvex objective built from univariate piecewise-quadratic functions,
//! minimized subject to affine equality constraints.
//!
//! The solver alternates a componentwise proximal step, a cached-factorization
//! affine projection, and a dual update. Lower bounds come from replacing each
//! component by its convex envelope and solving the resulting convex problem.
//! A portfolio front end assembles tax-aware mean-variance rebalancing
//! problems into this form.

pub mod admm;
pub mod cli;
pub mod kkt;
pub mod oracle;
mod parallel;
pub mod portfolio;
pub mod pwq;
pub mod sap;

pub use admm::{SolveOptions, SolveResult, SolveStatus};
pub use pwq::{PiecewiseQuadratic, QuadPiece};
pub use sap::{MatrixData, SapProblem, Scaling};
