#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod cpn;
pub mod models;
pub mod orbit;
pub mod reduction;
pub mod error;
pub mod fields;
pub mod flowkn;
pub mod glinalg;
pub mod hamilton;
pub mod sampling;
pub mod structures;
pub mod verify;
