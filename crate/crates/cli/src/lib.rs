//! Library surface of the CLI crate: the HTTP service router, reusable by
//! the binary and by integration tests.

pub mod service;
