//! Observation encoders.
//!
//! Fixed encoders ([`EncoderKind::Identity`], [`EncoderKind::RandomProjection`],
//! [`EncoderKind::Whitening`]) are built or fit in one shot. The
//! [`EncoderKind::ByolMlp`] encoder is the online network of a BYOL run; see
//! [`train_encoder`].

mod augment;
mod byol;
mod checkpoint;
mod fixed;
mod mlp;
mod optim;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::{DataError, DemoSet, EmbeddingMatrix, FormatError};

pub use augment::{augment, AugmentConfig};
pub use byol::{
    byol_loss, byol_loss_and_grads, byol_step, train_encoder, ByolGrads, ByolState, TrainConfig,
    TrainedEncoder,
};
pub use checkpoint::{decode_encoder, encode_encoder, load_encoder, save_encoder};
pub use fixed::{RandomProjection, Whitening};
pub use mlp::{Dense, ForwardCache, Mlp};
pub use optim::{Optimizer, OptimizerState};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite observation")]
    NonFiniteInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("covariance has rank {rank}, {requested} whitened dimensions requested; degenerate components {deficient:?}")]
    RankDeficient {
        rank: usize,
        requested: usize,
        deficient: Vec<usize>,
    },
    #[error("batch sizes {left} and {right} must be equal and non-zero")]
    BatchMismatch { left: usize, right: usize },
    #[error("zero-norm vector in {branch} branch (sample {sample})")]
    ZeroNorm { branch: &'static str, sample: usize },
    #[error("non-finite vector in {branch} branch (sample {sample})")]
    NonFinite { branch: &'static str, sample: usize },
    #[error("training diverged at step {step}: non-finite loss or gradient")]
    Diverged { step: u64 },
    #[error("{kind} encoders cannot be fit from data")]
    NotFittable { kind: EncoderKind },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    Identity,
    RandomProjection,
    Whitening,
    ByolMlp,
}

impl EncoderKind {
    pub fn code(self) -> u8 {
        match self {
            EncoderKind::Identity => 0,
            EncoderKind::RandomProjection => 1,
            EncoderKind::Whitening => 2,
            EncoderKind::ByolMlp => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [
            EncoderKind::Identity,
            EncoderKind::RandomProjection,
            EncoderKind::Whitening,
            EncoderKind::ByolMlp,
        ]
        .get(code as usize)
        .copied()
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::Identity => "identity",
            EncoderKind::RandomProjection => "random_projection",
            EncoderKind::Whitening => "whitening",
            EncoderKind::ByolMlp => "byol_mlp",
        })
    }
}

impl FromStr for EncoderKind {
    type Err = EncoderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(EncoderKind::Identity),
            "random_projection" => Ok(EncoderKind::RandomProjection),
            "whitening" => Ok(EncoderKind::Whitening),
            "byol_mlp" => Ok(EncoderKind::ByolMlp),
            other => Err(EncoderError::InvalidConfig(format!(
                "unknown encoder kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub obs_dim: usize,
    pub embed_dim: usize,
    /// Hidden layer widths; used by `byol_mlp` only.
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.obs_dim == 0 || self.embed_dim == 0 {
            return Err(EncoderError::InvalidConfig(
                "dimensions must be positive".into(),
            ));
        }
        match self.kind {
            EncoderKind::Identity if self.embed_dim != self.obs_dim => {
                Err(EncoderError::InvalidConfig(format!(
                    "identity encoder needs embed_dim == obs_dim ({})",
                    self.obs_dim
                )))
            }
            EncoderKind::ByolMlp
                if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) =>
            {
                Err(EncoderError::InvalidConfig(
                    "byol_mlp needs non-empty positive hidden_dims".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Input, hidden and output widths of the online network.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.obs_dim];
        w.extend(&self.hidden_dims);
        w.push(self.embed_dim);
        w
    }
}

/// A deterministic observation -> embedding map.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Identity {
        dim: usize,
    },
    RandomProjection(RandomProjection),
    Whitening(Whitening),
    /// Online network of a BYOL run (predictor discarded).
    Mlp(Mlp),
}

impl Encoder {
    /// Builds an encoder that needs no data: identity, a seeded random
    /// projection, or a freshly initialized `byol_mlp` online network.
    pub fn init(spec: &EncoderSpec) -> Result<Self, EncoderError> {
        spec.validate()?;
        match spec.kind {
            EncoderKind::Identity => Ok(Encoder::Identity { dim: spec.obs_dim }),
            EncoderKind::RandomProjection => Ok(Encoder::RandomProjection(RandomProjection::new(
                spec.obs_dim,
                spec.embed_dim,
                spec.seed,
            ))),
            EncoderKind::ByolMlp => Ok(ByolState::new(spec, 0.0, Optimizer::Sgd)?.into_encoder()),
            EncoderKind::Whitening => Err(EncoderError::InvalidConfig(
                "whitening must be fit from data".into(),
            )),
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Identity { .. } => EncoderKind::Identity,
            Encoder::RandomProjection(_) => EncoderKind::RandomProjection,
            Encoder::Whitening(_) => EncoderKind::Whitening,
            Encoder::Mlp(_) => EncoderKind::ByolMlp,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Encoder::Identity { dim } => *dim,
            Encoder::RandomProjection(p) => p.obs_dim,
            Encoder::Whitening(w) => w.obs_dim,
            Encoder::Mlp(m) => m.input_dim(),
        }
    }

    pub fn embed_dim(&self) -> usize {
        match self {
            Encoder::Identity { dim } => *dim,
            Encoder::RandomProjection(p) => p.embed_dim,
            Encoder::Whitening(w) => w.embed_dim,
            Encoder::Mlp(m) => m.output_dim(),
        }
    }

    pub fn encode(&self, obs: &[f64]) -> Result<Vec<f64>, EncoderError> {
        if obs.len() != self.obs_dim() {
            return Err(EncoderError::DimensionMismatch {
                expected: self.obs_dim(),
                found: obs.len(),
            });
        }
        if !obs.iter().all(|v| v.is_finite()) {
            return Err(EncoderError::NonFiniteInput);
        }
        Ok(match self {
            Encoder::Identity { .. } => obs.to_vec(),
            Encoder::RandomProjection(p) => p.apply(obs),
            Encoder::Whitening(w) => w.apply(obs),
            Encoder::Mlp(m) => m.forward(obs),
        })
    }
}

/// Fits a fixed (non-trained) encoder on raw observations.
pub fn fit_fixed(spec: &EncoderSpec, observations: &[Vec<f64>]) -> Result<Encoder, EncoderError> {
    spec.validate()?;
    if let Some(o) = observations.iter().find(|o| o.len() != spec.obs_dim) {
        return Err(EncoderError::DimensionMismatch {
            expected: spec.obs_dim,
            found: o.len(),
        });
    }
    match spec.kind {
        EncoderKind::RandomProjection => Encoder::init(spec),
        EncoderKind::Whitening => Ok(Encoder::Whitening(Whitening::fit(
            observations,
            spec.embed_dim,
        )?)),
        kind => Err(EncoderError::NotFittable { kind }),
    }
}

/// Produces an encoder of any kind from a training set: data-free kinds are
/// initialized, whitening is fit, and `byol_mlp` is trained with `train`.
pub fn fit_encoder(
    set: &DemoSet,
    spec: &EncoderSpec,
    train: &TrainConfig,
) -> Result<Encoder, EncoderError> {
    match spec.kind {
        EncoderKind::Identity | EncoderKind::RandomProjection => Encoder::init(spec),
        EncoderKind::Whitening => {
            let obs: Vec<Vec<f64>> = set.frames().map(|f| f.frame.observation.clone()).collect();
            fit_fixed(spec, &obs)
        }
        EncoderKind::ByolMlp => Ok(train_encoder(set, spec, train)?.encoder),
    }
}

/// Encodes every frame of `set` in dataset order.
pub fn embed_demoset(encoder: &Encoder, set: &DemoSet) -> Result<EmbeddingMatrix, EncoderError> {
    if encoder.obs_dim() != set.obs_dim() {
        return Err(EncoderError::DimensionMismatch {
            expected: encoder.obs_dim(),
            found: set.obs_dim(),
        });
    }
    let n = set.num_frames();
    let mut rows = Vec::with_capacity(n * encoder.embed_dim());
    let mut actions = Vec::with_capacity(n);
    let mut demo_ids = Vec::with_capacity(n);
    let mut timesteps = Vec::with_capacity(n);
    for f in set.frames() {
        rows.extend(encoder.encode(&f.frame.observation)?);
        actions.push(f.frame.action);
        demo_ids.push(f.demo_id as u32);
        timesteps.push(f.timestep as u32);
    }
    Ok(EmbeddingMatrix::new(
        encoder.embed_dim(),
        rows,
        actions,
        demo_ids,
        timesteps,
    )?)
}
