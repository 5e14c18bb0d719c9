//! Command-line experiment runner and validation suites for `barycenter`.

pub mod config;
pub mod error;
pub mod registry;
pub mod run;
pub mod shift;
pub mod validate;
