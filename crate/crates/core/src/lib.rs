//! Black-box test suite minimization driven by time-decayed change risk.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`change_history`] turns commit-level change records into per-class,
//!    chronologically ordered histories.
//! 2. [`temporal_risk`] scores each class by summing exponentially decayed
//!    event weights (change frequency or log-normalized churn).
//! 3. [`dependency_graph`] loads a static call graph of the test code and
//!    collects the production classes each test method can reach.
//! 4. [`risk_aggregation`] collapses the class risks of a test's
//!    dependencies into one score.
//! 5. [`minimizer`] keeps the highest-scoring tests under a retention budget.
//!
//! [`evaluation`] and [`stats`] measure how well minimized suites keep
//! fault-revealing tests and compare two approaches statistically.

pub mod change_history;
pub mod dependency_graph;
mod error;
pub mod evaluation;
pub mod minimizer;
pub mod risk_aggregation;
pub mod stats;
pub mod temporal_risk;

pub use error::{Error, Result};
