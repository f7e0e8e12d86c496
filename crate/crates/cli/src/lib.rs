//! Command-line front end for the splitcount estimators.

pub mod app;
pub mod args;
pub mod report;
pub mod trace;
