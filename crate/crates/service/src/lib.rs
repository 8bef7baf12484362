//! Command-line pipeline and HTTP JSON API for the `contextrec` engine.

pub mod cli;
pub mod engine;
pub mod http;
pub mod openapi;

pub use cli::run_cli;
pub use http::{router, serve, EngineConfig, ROUTES};
pub use openapi::openapi_describe;
