//! Front end for running polyloom's kernels and cross-checks from the
//! command line.

pub mod commands;
pub mod config;
pub mod report;
pub mod suites;
