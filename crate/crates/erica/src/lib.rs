//! Explicit-rate feedback for ABR-style traffic management.
//!
//! The crate centers on [`controller::PortController`], an embeddable
//! per-output-port rate controller that measures load over fixed averaging
//! intervals and stamps explicit-rate feedback into backward RM cells.
//! Around it sit the tools used to validate that controller:
//!
//! * [`maxmin`] — an independent max-min fairness oracle (progressive
//!   filling), the reference every allocation is judged against.
//! * [`fluid`] — a synchronous fluid model of the feedback loop for
//!   convergence studies over many random initial states.
//! * [`netsim`] — a deterministic cell-level discrete-event simulator.
//! * [`scenario`] — a text format describing topologies and runs, with
//!   built-in benchmark builders.
//! * [`report`] — post-run metric summaries and threshold checks.

pub mod cli;
pub mod controller;
pub mod fluid;
pub mod maxmin;
pub mod netsim;
pub mod params;
pub mod report;
pub mod scenario;
pub mod units;
