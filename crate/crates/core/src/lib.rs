//! Non-smoothed aggregation algebraic multigrid.
//!
//! The crate builds a multigrid hierarchy from a sparse M-matrix by greedy
//! aggregation of strongly connected vertices with piecewise-constant
//! prolongation, and uses one V-cycle of it as a preconditioner for
//! BiCGSTAB. The [`parallel`] module runs the same method over a set of
//! virtual ranks that communicate only through explicit message exchange.

pub mod aggregation;
pub mod error;
pub mod experiment;
pub mod hierarchy;
pub mod parallel;
pub mod problems;
pub mod solvers;
pub mod sparse;
pub mod strength;

pub use aggregation::{aggregate, AggregatesMap, AggregationParams};
pub use error::{AmgError, Result};
pub use sparse::{CsrMatrix, TripletBuilder};
pub use strength::{classify, StrengthProfile, VertexClass};
