// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cheb;
pub mod correction;
pub mod error;
pub mod eta;
pub mod experiments;
pub mod fit;
pub mod flow;
pub mod geometry;
pub mod gluing;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod real;
pub mod series_u;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
