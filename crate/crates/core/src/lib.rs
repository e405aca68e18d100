#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod invariants;
pub mod select;
