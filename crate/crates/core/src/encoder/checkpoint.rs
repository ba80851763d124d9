//! `.venc` encoder checkpoints.
//!
//! ```text
//! "VENC" | version u16 = 1 | kind u8 | obs_dim u32 | embed_dim u32
//! identity:          (nothing)
//! random_projection: embed_dim x obs_dim f32
//! whitening:         mean obs_dim f32 | transform embed_dim x obs_dim f32
//! byol_mlp:          layer_count u32 | (layer_count + 1) widths u32
//!                    per layer: weights out x in f32 | bias out f32
//! ```

use std::fs;
use std::path::Path;

use super::{Dense, Encoder, EncoderError, EncoderKind, Mlp, RandomProjection, Whitening};
use crate::data::{ByteReader, ByteWriter, DataError, FormatError};

const MAGIC: &[u8; 4] = b"VENC";
const VERSION: u16 = 1;

pub fn encode_encoder(enc: &Encoder) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u8(enc.kind().code());
    w.u32(enc.obs_dim() as u32);
    w.u32(enc.embed_dim() as u32);
    match enc {
        Encoder::Identity { .. } => {}
        Encoder::RandomProjection(p) => w.f32s(&p.matrix),
        Encoder::Whitening(wh) => {
            w.f32s(&wh.mean);
            w.f32s(&wh.transform);
        }
        Encoder::Mlp(m) => {
            w.u32(m.layers().len() as u32);
            for width in m.widths() {
                w.u32(width as u32);
            }
            for layer in m.layers() {
                w.f32s(&layer.weights);
                w.f32s(&layer.bias);
            }
        }
    }
    w.into_inner()
}

pub fn decode_encoder(buf: &[u8]) -> Result<Encoder, EncoderError> {
    let mut r = ByteReader::new(buf);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let kind_offset = r.offset();
    let code = r.u8()?;
    let kind = EncoderKind::from_code(code).ok_or(FormatError::InvalidCode {
        offset: kind_offset,
        what: "encoder kind",
        code: u32::from(code),
    })?;
    let obs_dim = r.dim("obs_dim")?;
    let embed_off = r.offset();
    let embed_dim = r.dim("embed_dim")?;
    let enc = match kind {
        EncoderKind::Identity => {
            if embed_dim != obs_dim {
                return Err(FormatError::InvalidDimension {
                    offset: embed_off,
                    what: "identity embed_dim",
                    found: embed_dim as u64,
                }
                .into());
            }
            Encoder::Identity { dim: obs_dim }
        }
        EncoderKind::RandomProjection => {
            let mut matrix = Vec::new();
            r.f32_into(&mut matrix, embed_dim * obs_dim)?;
            Encoder::RandomProjection(RandomProjection {
                obs_dim,
                embed_dim,
                matrix,
            })
        }
        EncoderKind::Whitening => {
            let mut mean = Vec::new();
            r.f32_into(&mut mean, obs_dim)?;
            let mut transform = Vec::new();
            r.f32_into(&mut transform, embed_dim * obs_dim)?;
            Encoder::Whitening(Whitening {
                obs_dim,
                embed_dim,
                mean,
                transform,
            })
        }
        EncoderKind::ByolMlp => {
            let count = r.dim("layer_count")?;
            let widths_off = r.offset();
            let mut widths = Vec::with_capacity(count + 1);
            for _ in 0..=count {
                widths.push(r.dim("layer width")?);
            }
            if widths[0] != obs_dim || widths[count] != embed_dim {
                return Err(FormatError::InvalidDimension {
                    offset: widths_off,
                    what: "network widths",
                    found: widths[0] as u64,
                }
                .into());
            }
            let mut layers = Vec::with_capacity(count);
            for w in widths.windows(2) {
                let mut weights = Vec::new();
                r.f32_into(&mut weights, w[0] * w[1])?;
                let mut bias = Vec::new();
                r.f32_into(&mut bias, w[1])?;
                layers.push(Dense {
                    inputs: w[0],
                    outputs: w[1],
                    weights,
                    bias,
                });
            }
            Encoder::Mlp(Mlp::from_layers(layers).expect("widths chain by construction"))
        }
    };
    r.finish()?;
    Ok(enc)
}

pub fn save_encoder(enc: &Encoder, path: impl AsRef<Path>) -> Result<(), EncoderError> {
    let path = path.as_ref();
    fs::write(path, encode_encoder(enc)).map_err(|source| {
        EncoderError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub fn load_encoder(path: impl AsRef<Path>) -> Result<Encoder, EncoderError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        EncoderError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    decode_encoder(&bytes)
}
