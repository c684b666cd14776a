//! Facility location with matching (FLM): open facilities, pick a maximum
//! matching of compatible client pairs and send every pair to one open
//! facility.
//!
//! The crate provides the LP relaxation over the maximum-matching polytope
//! (solved by cutting planes), the rerouting step that moves a fractional
//! solution onto one fixed matching, bifactor UFL rounding, the end-to-end
//! approximation pipelines, and brute-force oracles for small instances.

// dense numeric kernels index several arrays in lockstep; `!(a >= b)` rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod instance;
pub mod lp;
pub mod matching;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod reroute;
pub mod rounding;

pub use error::{FlmError, Result};
