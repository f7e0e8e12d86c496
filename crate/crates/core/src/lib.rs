//! Randomized counting of combinatorial solution sets.
//!
//! The [`engine`] runs adaptive multilevel splitting over any
//! [`CountingModel`]; [`caprecap`] layers capture-recapture estimators on top
//! of the final splitting population. Three models ship with the crate:
//! CNF satisfiability ([`sat`]), graphs with a prescribed degree sequence
//! ([`graph`]) and 0-1 tables with fixed margins ([`table`]). [`oracle`]
//! provides exact counts for small instances.

pub mod bigcount;
pub mod caprecap;
pub mod engine;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sat;
pub mod table;

pub use engine::{run_splitting, Boost, IterationTrace, RunResult, SplitConfig, SplitError};
pub use graph::{DegreeInstance, GraphError};
pub use model::CountingModel;
pub use sat::{parse_dimacs, CnfError, CnfInstance};
pub use table::{BranchChoice, TableError, TableInstance, TableSpec};
