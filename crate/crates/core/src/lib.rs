// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod dpm;
pub mod error;
pub mod expm;
pub mod ingest;
mod par;
pub mod partitions;
pub mod phase_type;
pub mod process;
pub mod recursion;
pub mod special;
pub mod sums;
pub mod validation;
