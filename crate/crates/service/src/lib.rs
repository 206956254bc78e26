//! HTTP session-memory service: per-session sentence stores managed by the
//! predictors in memctl-core, with optional snapshot-per-session persistence.

pub mod http;
pub mod store;

pub use http::{router, serve};
pub use store::{AppCore, Observed, ServiceConfig, ServiceError, Session};
