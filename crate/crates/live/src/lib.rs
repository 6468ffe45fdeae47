//! Live streaming front end for the reservoir pipeline.
//!
//! One thread owns the [`Simulation`] and advances it at a fixed tick using
//! the most recent gaze. Websocket clients on `/stream` send JSON gaze and
//! config messages and receive one binary [`FramePacket`] per tick.

pub mod packet;
pub mod protocol;
pub mod server;
pub mod sim;

pub use packet::{FramePacket, PacketError, PacketMethod};
pub use protocol::{ClientMessage, LiveMethod};
pub use server::{bind, serve, Server, ServerHandle};
pub use sim::{replay, LiveConfig, LogEntry, Simulation};

#[derive(Debug, thiserror::Error)]
pub enum LiveError {
    #[error("invalid live config: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] wrs_core::Error),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
