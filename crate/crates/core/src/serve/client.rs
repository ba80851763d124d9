use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::wire::{
    decode_response, encode_request, handshake, parse_handshake, Request, Response, Status,
    HANDSHAKE_LEN, RESPONSE_LEN, VERSION,
};
use super::ServeError;
use crate::data::Action;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(1);

/// One persistent connection; requests are strictly sequential.
#[derive(Debug)]
pub struct Client {
    stream: TcpStream,
}

fn io_err(e: io::Error) -> ServeError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => ServeError::Timeout,
        _ => ServeError::Io(e),
    }
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, ServeError> {
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs().map_err(ServeError::Io)?.collect();
        let mut last = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => return Self::handshake(stream, timeout),
                Err(e) => last = Some(e),
            }
        }
        Err(last.map_or(ServeError::NoAddress, io_err))
    }

    fn handshake(mut stream: TcpStream, timeout: Duration) -> Result<Self, ServeError> {
        stream
            .set_read_timeout(Some(timeout))
            .map_err(ServeError::Io)?;
        stream
            .set_write_timeout(Some(timeout))
            .map_err(ServeError::Io)?;
        stream.set_nodelay(true).map_err(ServeError::Io)?;
        stream.write_all(&handshake()).map_err(io_err)?;
        let mut hs = [0u8; HANDSHAKE_LEN];
        stream.read_exact(&mut hs).map_err(io_err)?;
        match parse_handshake(&hs) {
            Some(VERSION) => Ok(Self { stream }),
            server => Err(ServeError::ProtocolMismatch { server }),
        }
    }

    /// Sends a raw frame payload; useful for fault injection.
    pub fn send_raw(&mut self, payload: &[u8]) -> Result<Response, ServeError> {
        let mut buf = Vec::with_capacity(4 + payload.len());
        buf.extend((payload.len() as u32).to_be_bytes());
        buf.extend(payload);
        self.stream.write_all(&buf).map_err(io_err)?;
        let mut len = [0u8; 4];
        self.stream.read_exact(&mut len).map_err(io_err)?;
        let len = u32::from_be_bytes(len) as usize;
        if len != RESPONSE_LEN {
            return Err(ServeError::BadResponse(format!("response of {len} bytes")));
        }
        let mut body = [0u8; RESPONSE_LEN];
        self.stream.read_exact(&mut body).map_err(io_err)?;
        decode_response(&body).map_err(|e| ServeError::BadResponse(e.to_string()))
    }

    pub fn request(&mut self, req: &Request) -> Result<Response, ServeError> {
        self.send_raw(&encode_request(req))
    }

    /// Server-scaled action; a non-ok status is an error.
    pub fn query(&mut self, obs: &[f64]) -> Result<Action, ServeError> {
        let resp = self.request(&Request {
            flags: 0,
            observation: obs.to_vec(),
        })?;
        match resp.status {
            Status::Ok => Ok(Action::new(resp.translation, resp.gripper)),
            status => Err(ServeError::Status(status)),
        }
    }
}

/// Connects, sends one observation and returns the action (default 1 s timeout).
pub fn client_query(addr: impl ToSocketAddrs, obs: &[f64]) -> Result<Action, ServeError> {
    Client::connect(addr, DEFAULT_TIMEOUT)?.query(obs)
}
