//! Throughput bounds, reflection-phase optimization and relay mode selection for
//! wirelessly powered two-hop networks mixing active amplify-and-forward relays with
//! passive backscatter relays.

// `!(x >= 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod channel;
pub mod config;
pub mod conic;
pub mod error;
pub mod modeselect;
pub mod sweep;

pub use error::{Error, Result};
