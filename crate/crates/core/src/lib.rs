//! Deterministic simulator, bound calculator, and experiment front end for
//! multi-agent tracking of time-varying box-constrained quadratic programs
//! under asynchronous sampling, computation, and communication.
//!
//! The crate is organized around the lifecycle of one experiment:
//!
//! - [`qp_model`] — time-varying QP families, block partitions, box
//!   constraints, and the row-block-stacked aggregate objective that
//!   asynchronous sampling induces.
//! - [`async_schedule`] — seeded generation and validation of sampling sets,
//!   computation sets, and bounded-delay delivery sets.
//! - [`bcd_engine`] — the asynchronous projected block coordinate descent
//!   loop over the sample-event sequence, producing replayable traces.
//! - [`oracle`] — ground-truth numerics: box-QP minimizers, stationary sets
//!   of the (possibly nonconvex) aggregate, dense symmetric eigenvalues,
//!   and exact L2 distances between quadratics over a box.
//! - [`bounds`] — closed-form convergence constants, the admissible
//!   step-size ceiling, and the accumulated tracking-error bounds.
//! - [`baselines`] — dense synchronous coordinate descent and a
//!   consensus-gradient comparison method.
//! - [`config`], [`metrics`], [`report`] — experiment configs, summary
//!   metrics, and CSV/SVG emission behind the `tvqp` CLI.

pub mod async_schedule;
pub mod baselines;
pub mod bcd_engine;
pub mod bounds;
pub mod config;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod qp_model;
pub mod report;

pub use error::{Result, TvqpError};
