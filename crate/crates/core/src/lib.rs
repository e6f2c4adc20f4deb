#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod sparse;
pub mod thermo;
pub mod mesh;
pub mod interface;
pub mod mobility;
pub mod scheme;
pub mod diagnostics;
pub mod config;
pub mod initial;
pub mod output;
pub mod metrics;
pub mod driver;
