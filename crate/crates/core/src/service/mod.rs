//! JSON-lines TCP protocol for beacon queries, with a server over an
//! in-process [`BeaconState`](crate::beacon::BeaconState) and a scanning client.

mod client;
mod protocol;
mod server;

pub use client::{BeaconClient, ClientConfig, RemoteBeacon};
pub use protocol::{
    decode_request, ErrorResponse, Meta, QueryRequest, QueryResponse, Request, BAD_REQUEST,
};
pub use server::{serve, BeaconService, ServiceHandle};
