#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod base_geom;
pub mod cli;
pub mod error;
pub mod expr;
pub mod jets;
pub mod linalg;
pub mod oracle;
pub mod tm_geom;
pub mod verify;
