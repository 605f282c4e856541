//! Batch runs, offline validation and the HTTP service around the
//! simulator in `tbo-foc`.

pub mod api;
pub mod cli;
pub mod engine;
