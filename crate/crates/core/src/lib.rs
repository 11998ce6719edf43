//! Online ad assignment driven by virtual queues.
//!
//! The crate simulates two online policies that post ads for arriving search
//! queries. The revenue policy tracks each client's overdraft against its
//! budget; the click-through policy tracks owed impressions. Both choose a
//! maximum-weight assignment per query using queue levels frozen over a
//! budgeting cycle. Alongside sit an offline dual-subgradient solver for the
//! long-run optimum, lower-bound calculators for the overdraft, and a harness
//! that writes reproducible CSV traces.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod ctr_online;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod matching;
pub mod model;
pub mod offline_baseline;
pub mod par;
pub mod revenue_online;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use matching::{max_weight_assignment, Assignment, WeightMatrix};
pub use model::{validate_instance, ProblemInstance, Violation};
