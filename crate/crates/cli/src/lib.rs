//! Transports around the core harness: the HTTP service, an HTTP agent
//! client and the stdio loop used by the built-in agents.

pub mod remote;
pub mod server;
pub mod stdio;
