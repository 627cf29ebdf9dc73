// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;

pub use config::RunConfig;
pub use report::{emit_reports, Summary, Table};
