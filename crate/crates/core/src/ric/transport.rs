//! Framed E2-lite transport over a reliable ordered byte stream.
//!
//! The default test transport is a loopback TCP socket; any stream with the
//! same ordering guarantees works. Receive timing is recorded per frame:
//! `start` when the first byte of a frame arrives, `done` when the frame is
//! complete.

use super::controller::ReceiveStamps;
use super::protocol::{encode_message, E2LiteMessage, FrameDecoder};
use crate::clock::Clock;
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};

/// Listening side of the E2-lite link.
pub struct E2Listener {
    listener: TcpListener,
}

impl E2Listener {
    /// Bind to an address such as `127.0.0.1:0`.
    pub fn bind(addr: &str) -> Result<E2Listener> {
        let listener =
            TcpListener::bind(addr).map_err(|e| Error::io(addr.to_string(), e))?;
        Ok(E2Listener { listener })
    }

    pub fn local_addr(&self) -> Result<std::net::SocketAddr> {
        self.listener.local_addr().map_err(|e| Error::io("listener", e))
    }

    /// Accept one peer.
    pub fn accept(&self, clock: Clock) -> Result<E2Stream> {
        let (stream, _) = self.listener.accept().map_err(|e| Error::io("accept", e))?;
        stream.set_nodelay(true).ok();
        Ok(E2Stream::new(stream, clock))
    }
}

/// One framed full-duplex connection.
pub struct E2Stream {
    stream: TcpStream,
    decoder: FrameDecoder,
    clock: Clock,
    read_buf: Vec<u8>,
    pending_start_ms: Option<f64>,
}

impl E2Stream {
    pub fn connect<A: ToSocketAddrs + std::fmt::Debug>(addr: A, clock: Clock) -> Result<E2Stream> {
        let stream = TcpStream::connect(&addr)
            .map_err(|e| Error::io(format!("connect {addr:?}"), e))?;
        stream.set_nodelay(true).ok();
        Ok(E2Stream::new(stream, clock))
    }

    fn new(stream: TcpStream, clock: Clock) -> E2Stream {
        E2Stream {
            stream,
            decoder: FrameDecoder::new(),
            clock,
            read_buf: vec![0u8; 64 * 1024],
            pending_start_ms: None,
        }
    }

    /// Send one message.
    pub fn send(&mut self, msg: &E2LiteMessage) -> Result<()> {
        let bytes = encode_message(msg)?;
        self.stream.write_all(&bytes).map_err(|e| Error::io("e2 send", e))
    }

    /// Receive the next message, blocking. Returns the message and its
    /// receive timing (payload transfer window and total frame bytes).
    pub fn recv(&mut self) -> Result<(E2LiteMessage, ReceiveStamps)> {
        loop {
            if let Some(msg) = self.decoder.next_message()? {
                let done_ms = self.clock.now_ms();
                let start_ms = self.pending_start_ms.take().unwrap_or(done_ms);
                // a second buffered message started arriving at the same time
                if self.decoder.buffered() > 0 {
                    self.pending_start_ms = Some(done_ms);
                }
                let bytes = msg.payload.len();
                return Ok((msg, ReceiveStamps { start_ms, done_ms, bytes }));
            }
            let n = self
                .stream
                .read(&mut self.read_buf)
                .map_err(|e| Error::io("e2 recv", e))?;
            if n == 0 {
                return Err(Error::protocol("connection closed mid-stream"));
            }
            if self.pending_start_ms.is_none() {
                self.pending_start_ms = Some(self.clock.now_ms());
            }
            self.decoder.push(&self.read_buf[..n]);
        }
    }
}
