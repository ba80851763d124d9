//! Wire layout.
//!
//! ```text
//! handshake (both directions, once):  "VNN1" | version u16
//! frame:                              length u32 BE | payload
//! request payload:   "VNN1" | version u16 | flags u16 | obs_dim u32 | obs_dim x f32
//! response payload:  status u8 | translation 3 x f32 | gripper u8 | nearest distance f32
//! ```
//!
//! Everything inside handshakes and payloads is little-endian. A server that
//! does not support the client's version answers with its own version and
//! closes the connection.

use crate::data::{round_f32, ByteReader, ByteWriter, FormatError, GripperState};

pub const MAGIC: &[u8; 4] = b"VNN1";
pub const VERSION: u16 = 1;
pub const HANDSHAKE_LEN: usize = 6;
pub const REQUEST_HEADER_LEN: usize = 12;
pub const RESPONSE_LEN: usize = 18;
/// Frames longer than this are drained and answered with [`Status::BadFrame`].
pub const DEFAULT_MAX_FRAME: usize = 1 << 20;

/// Request flag: return the unscaled action; the client applies `c` itself.
pub const FLAG_CLIENT_SCALE: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    BadFrame = 1,
    DimMismatch = 2,
    Internal = 3,
}

impl Status {
    pub fn from_code(code: u8) -> Option<Self> {
        [
            Status::Ok,
            Status::BadFrame,
            Status::DimMismatch,
            Status::Internal,
        ]
        .get(code as usize)
        .copied()
    }
}

pub fn handshake() -> [u8; HANDSHAKE_LEN] {
    handshake_with(VERSION)
}

pub fn handshake_with(version: u16) -> [u8; HANDSHAKE_LEN] {
    let mut h = [0; HANDSHAKE_LEN];
    h[..4].copy_from_slice(MAGIC);
    h[4..].copy_from_slice(&version.to_le_bytes());
    h
}

/// Returns the peer's version, or `None` if the magic is wrong.
pub fn parse_handshake(h: &[u8; HANDSHAKE_LEN]) -> Option<u16> {
    (&h[..4] == MAGIC).then(|| u16::from_le_bytes([h[4], h[5]]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub flags: u16,
    pub observation: Vec<f64>,
}

pub fn encode_request(req: &Request) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u16(req.flags);
    w.u32(req.observation.len() as u32);
    w.f32s(&req.observation);
    w.into_inner()
}

/// Header and payload must agree: the payload carries exactly `obs_dim` floats.
pub fn decode_request(buf: &[u8]) -> Result<Request, FormatError> {
    let mut r = ByteReader::new(buf);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let flags = r.u16()?;
    let n = r.dim("obs_dim")?;
    let mut observation = Vec::new();
    r.f32_into(&mut observation, n)?;
    r.finish()?;
    Ok(Request { flags, observation })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub status: Status,
    pub translation: [f64; 3],
    pub gripper: GripperState,
    pub nearest_distance: f64,
}

impl Response {
    pub fn error(status: Status) -> Self {
        Self {
            status,
            translation: [0.0; 3],
            gripper: GripperState::Open,
            nearest_distance: 0.0,
        }
    }
}

pub fn encode_response(resp: &Response) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u8(resp.status as u8);
    w.f32s(&resp.translation);
    w.u8(resp.gripper.code());
    // Distances may overflow f32; saturate rather than emit infinity.
    w.f32(round_f32(resp.nearest_distance).min(f32::MAX as f64));
    w.into_inner()
}

pub fn decode_response(buf: &[u8]) -> Result<Response, FormatError> {
    let mut r = ByteReader::new(buf);
    let offset = r.offset();
    let code = r.u8()?;
    let status = Status::from_code(code).ok_or(FormatError::InvalidCode {
        offset,
        what: "status",
        code: code.into(),
    })?;
    let translation = [r.f32()?, r.f32()?, r.f32()?];
    let offset = r.offset();
    let code = r.u8()?;
    let gripper = GripperState::from_code(code).ok_or(FormatError::InvalidCode {
        offset,
        what: "gripper",
        code: code.into(),
    })?;
    let nearest_distance = r.f32()?;
    r.finish()?;
    Ok(Response {
        status,
        translation,
        gripper,
        nearest_distance,
    })
}
