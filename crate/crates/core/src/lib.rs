#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsl;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod process;
pub mod meanfield;
pub mod scenario;
pub mod certificate;
pub mod config;
pub mod bsde;
pub mod diagnostics;
pub mod oracle;
pub mod catalog;
pub mod report;
pub mod acceptance;
