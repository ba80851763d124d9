//! `.vidx` index files.
//!
//! ```text
//! "VIDX" | version u16 = 1 | rows u32 | dim u32
//! embeddings rows x dim f32 | actions rows x 4 f32 | provenance rows x (demo_id u32, timestep u32)
//! ```

use std::fs;
use std::path::Path;

use super::{NeighborIndex, PolicyError};
use crate::data::{ByteReader, ByteWriter, DataError};

const MAGIC: &[u8; 4] = b"VIDX";
const VERSION: u16 = 1;

pub fn encode_index(index: &NeighborIndex) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u32(index.len() as u32);
    w.u32(index.dim() as u32);
    w.f32s(index.embeddings());
    for a in index.actions() {
        w.f32s(a);
    }
    for &(d, t) in index.provenance() {
        w.u32(d);
        w.u32(t);
    }
    w.into_inner()
}

pub fn decode_index(buf: &[u8]) -> Result<NeighborIndex, PolicyError> {
    let mut r = ByteReader::new(buf);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let n = r.dim("rows")?;
    let dim = r.dim("dim")?;
    let mut embeddings = Vec::new();
    r.f32_into(&mut embeddings, n.saturating_mul(dim))?;
    let mut flat = Vec::new();
    r.f32_into(&mut flat, n.saturating_mul(4))?;
    let actions = flat
        .chunks_exact(4)
        .map(|c| [c[0], c[1], c[2], c[3]])
        .collect();
    let mut provenance = Vec::with_capacity(n);
    for _ in 0..n {
        provenance.push((r.u32()?, r.u32()?));
    }
    r.finish()?;
    NeighborIndex::new(dim, embeddings, actions, provenance)
}

pub fn save_index(index: &NeighborIndex, path: impl AsRef<Path>) -> Result<(), PolicyError> {
    let path = path.as_ref();
    fs::write(path, encode_index(index)).map_err(|source| {
        PolicyError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub fn load_index(path: impl AsRef<Path>) -> Result<NeighborIndex, PolicyError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        PolicyError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    decode_index(&bytes)
}
