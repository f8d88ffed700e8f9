//! Numerical continuation and verification for Gelfand-type problems on the
//! unit ball: radial discretizations of second- and fourth-order operators,
//! minimal branches and folds, coupled systems, integral identities and
//! deflated enumeration of solutions.

pub mod banded;
pub mod branch;
pub mod continuation;
pub mod deflation;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod identity;
pub mod newton;
pub mod nonlinearity;
pub mod operators;
pub mod problem;
pub mod system;

pub use branch::{
    continue_branch, extremal_solution, minimal_solution, newton_solve, small_solution, stability_eigenvalue,
    weak_residual, Branch, BranchPoint, DivergenceReport, FoldEstimate, MinimalOutcome,
};
pub use continuation::{ContinuationOptions, Termination};
pub use deflation::{deflated_search, uniqueness_region, CollapseReport, SolutionSet};
pub use error::{Error, Result};
pub use grid::{RadialField, RadialGrid};
pub use identity::{IdentityReport, ScanReport, Verdict};
pub use nonlinearity::{ClassTag, Nonlinearity};
pub use problem::{DiscreteProblem, Order, ProblemSpec};
pub use system::{SystemPoint, SystemProblem, SystemRay, SystemSpec, UpsilonCurve};
