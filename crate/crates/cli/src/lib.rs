//! Command dispatch for the `dti-inpaint` binary.

pub mod commands;

pub use commands::run;
