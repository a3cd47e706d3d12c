//! Static threshold policies for the k-unit prophet secretary problem.
//!
//! Applicants with independent, known value distributions arrive in
//! uniformly random order and at most `k` may be accepted. A static policy
//! `(t, p)` accepts values above `t`, and values equal to `t` with
//! probability `p`, until supply runs out. This crate calibrates such
//! policies from demand statistics, evaluates them exactly against the
//! prophet and ex-ante benchmarks, solves the Bernoulli optimization
//! problems behind their guarantees, and reproduces the guarantee numerics.

pub mod bernoulli_opt;
pub mod calibration;
pub mod error;
pub mod evaluation;
pub mod instances;
pub mod probcore;
pub mod verify;

pub use error::{Error, Result};
