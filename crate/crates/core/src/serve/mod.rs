//! TCP policy service.
//!
//! Each connection starts with a `"VNN1" | version` handshake and then
//! exchanges length-prefixed request/response frames (see [`wire`]). The
//! index, encoder and policy configuration are shared read-only across
//! connection threads, so a response depends only on its request.
//!
//! Observations travel as f32: the server predicts from the f32-rounded
//! observation.

mod client;
mod server;
pub mod wire;

use std::io;

use thiserror::Error;

pub use client::{client_query, Client, DEFAULT_TIMEOUT};
pub use server::{handle_request, serve, Server, ServerHandle};
pub use wire::{Request, Response, Status};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("timed out")]
    Timeout,
    #[error("address resolved to nothing")]
    NoAddress,
    #[error("protocol mismatch: server speaks {server:?}")]
    ProtocolMismatch { server: Option<u16> },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("server answered {0:?}")]
    Status(Status),
    #[error(transparent)]
    Io(io::Error),
}
