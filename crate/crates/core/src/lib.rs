// NaN must fail range checks, so `!(x <= y)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classic_cr;
pub mod cli;
pub mod ecr;
pub mod error;
pub mod matrices;
pub mod tridiag;
pub mod verify;
pub mod zeros;

pub use error::{Error, Result};
