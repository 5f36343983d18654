// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counting;
pub mod domain;
pub mod error;
pub mod field;
pub mod harness;
pub mod max_density;
pub mod quad;
pub mod rice;
pub mod spectral;
pub mod stats;
