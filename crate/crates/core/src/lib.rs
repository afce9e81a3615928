#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::should_implement_trait)]

pub mod cli;
pub mod error;
pub mod experiment;
pub mod numerics;
pub mod steppers;
pub mod system;
pub mod quadrature;
pub mod theory;
