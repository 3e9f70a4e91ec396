#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ambient;
pub mod applications;
pub mod cli;
pub mod error;
pub mod expr;
pub mod inequalities;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod quadrature;
pub mod sharpness;

pub use error::{Error, Result};
