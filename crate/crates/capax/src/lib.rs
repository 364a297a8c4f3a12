//! File formats, result cache and command-line front end for `capax-core`.

pub mod cache;
pub mod cli;
pub mod formats;
pub mod json;
