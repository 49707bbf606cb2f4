//! Simulation and verification toolkit for conditionally identically
//! distributed (c.i.d.) sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`sampling`] – seed-addressable random streams, scalar laws and Gaussian vectors.
//! * [`processes`] – generators for the c.i.d. families together with their
//!   closed-form predictive laws.
//! * [`statistics`] – the W/B/C centred statistics, `M_n`, `q_k(t)` and the
//!   indicator empirical processes.
//! * [`limits`] – samplers for the limit laws (normal mixtures, time-changed
//!   Brownian bridges) and the Kolmogorov distribution.
//! * [`oracle`] – exact rational enumeration of small urn models.
//! * [`harness`] – Monte Carlo experiments, goodness-of-fit tests and the
//!   verification suites behind the `cidlab` CLI.

pub mod error;
pub mod harness;
pub mod limits;
pub mod oracle;
pub mod processes;
pub mod sampling;
pub mod statistics;
pub mod summary;

pub use error::{Error, Result};
