//! Monte Carlo experiments, goodness-of-fit tests and verification suites.

pub mod config;
pub mod experiments;
pub mod ks;
pub mod report;
pub mod suites;
pub mod svg;
