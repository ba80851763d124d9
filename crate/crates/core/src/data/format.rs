//! `.vinn` demonstration files and `.vemb` embedding files.
//!
//! `.vinn` layout (all integers little-endian):
//!
//! ```text
//! "VINN" | version u16 = 1 | obs_dim u32 | demo_count u32
//! per demo:  frame_count u32
//!   per frame: observation obs_dim x f32 | translation 3 x f32 | gripper u8 | 3 zero bytes
//! metadata:  pair_count u32, then (key_len u32, key, value_len u32, value) per pair
//! ```
//!
//! `.vemb` layout:
//!
//! ```text
//! "VEMB" | version u16 = 1 | rows u32 | dim u32
//! rows x dim f32 | rows x (translation 3 x f32, gripper f32) | rows x (demo_id u32, timestep u32)
//! ```
//!
//! Values are stored as `f32`. Anything already representable in `f32`
//! (including everything produced by a load) round-trips bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{
    Action, ByteReader, ByteWriter, DataError, DemoSet, Demonstration, EmbeddingMatrix,
    FormatError, Frame, GripperState,
};

const DEMO_MAGIC: &[u8; 4] = b"VINN";
const EMB_MAGIC: &[u8; 4] = b"VEMB";
const VERSION: u16 = 1;

pub fn encode_demoset(set: &DemoSet) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(DEMO_MAGIC);
    w.u16(VERSION);
    w.u32(set.obs_dim() as u32);
    w.u32(set.num_demos() as u32);
    for demo in set.demos() {
        w.u32(demo.len() as u32);
        for frame in &demo.frames {
            w.f32s(&frame.observation);
            w.f32s(&frame.action.translation);
            w.u8(frame.action.gripper.code());
            w.bytes(&[0; 3]);
        }
    }
    w.u32(set.metadata().len() as u32);
    for (k, v) in set.metadata() {
        w.string(k);
        w.string(v);
    }
    w.into_inner()
}

pub fn decode_demoset(buf: &[u8]) -> Result<DemoSet, DataError> {
    let mut r = ByteReader::new(buf);
    r.magic(DEMO_MAGIC)?;
    r.version(VERSION)?;
    let obs_dim = r.dim("obs_dim")?;
    let demo_count = r.dim("demo_count")?;
    let mut demos = Vec::with_capacity(demo_count.min(1 << 16));
    for _ in 0..demo_count {
        let frame_count = r.dim("frame_count")?;
        let mut frames = Vec::with_capacity(frame_count.min(1 << 16));
        for _ in 0..frame_count {
            let mut observation = Vec::new();
            r.f32_into(&mut observation, obs_dim)?;
            let translation = [r.f32()?, r.f32()?, r.f32()?];
            let offset = r.offset();
            let code = r.u8()?;
            let gripper = GripperState::from_code(code).ok_or(FormatError::InvalidCode {
                offset,
                what: "gripper",
                code: u32::from(code),
            })?;
            let pad_offset = r.offset();
            if r.take(3)? != [0, 0, 0] {
                return Err(FormatError::InvalidCode {
                    offset: pad_offset,
                    what: "padding",
                    code: 0,
                }
                .into());
            }
            frames.push(Frame {
                observation,
                action: Action::new(translation, gripper),
            });
        }
        demos.push(Demonstration::new(frames));
    }
    let pairs = r.u32()?;
    let mut metadata = BTreeMap::new();
    for _ in 0..pairs {
        let k = r.string()?;
        let v = r.string()?;
        metadata.insert(k, v);
    }
    r.finish()?;
    DemoSet::with_metadata(demos, obs_dim, metadata)
}

pub fn save_demoset(set: &DemoSet, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_file(path.as_ref(), &encode_demoset(set))
}

pub fn load_demoset(path: impl AsRef<Path>) -> Result<DemoSet, DataError> {
    decode_demoset(&read_file(path.as_ref())?)
}

pub fn encode_embeddings(emb: &EmbeddingMatrix) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(EMB_MAGIC);
    w.u16(VERSION);
    w.u32(emb.len() as u32);
    w.u32(emb.dim() as u32);
    w.f32s(emb.values());
    for a in emb.actions() {
        w.f32s(&a.as_vector());
    }
    for (&d, &t) in emb.demo_ids().iter().zip(emb.timesteps()) {
        w.u32(d);
        w.u32(t);
    }
    w.into_inner()
}

pub fn decode_embeddings(buf: &[u8]) -> Result<EmbeddingMatrix, DataError> {
    let mut r = ByteReader::new(buf);
    r.magic(EMB_MAGIC)?;
    r.version(VERSION)?;
    let n = r.dim("rows")?;
    let dim = r.dim("dim")?;
    let mut rows = Vec::new();
    r.f32_into(&mut rows, n.saturating_mul(dim))?;
    let mut actions = Vec::with_capacity(n);
    for _ in 0..n {
        let translation = [r.f32()?, r.f32()?, r.f32()?];
        let offset = r.offset();
        let g = r.f32()?;
        let gripper = gripper_from_float(g).ok_or(FormatError::InvalidCode {
            offset,
            what: "gripper",
            code: g as u32,
        })?;
        actions.push(Action::new(translation, gripper));
    }
    let mut demo_ids = Vec::with_capacity(n);
    let mut timesteps = Vec::with_capacity(n);
    for _ in 0..n {
        demo_ids.push(r.u32()?);
        timesteps.push(r.u32()?);
    }
    r.finish()?;
    EmbeddingMatrix::new(dim, rows, actions, demo_ids, timesteps)
}

pub fn save_embeddings(emb: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_file(path.as_ref(), &encode_embeddings(emb))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, DataError> {
    decode_embeddings(&read_file(path.as_ref())?)
}

/// Exact integer codes 0.0..=3.0 only.
pub(crate) fn gripper_from_float(g: f64) -> Option<GripperState> {
    if g.fract() != 0.0 || !(0.0..=3.0).contains(&g) {
        return None;
    }
    GripperState::from_code(g as u8)
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}
