//! Nearest-neighbor policy and baselines.
//!
//! [`predict`] composes encode -> [`NeighborIndex::nearest`] -> [`lwr_action`]
//! -> optional renormalization -> gripper thresholding.

mod baselines;
mod bc;
mod index;
mod index_file;
mod lwr;

use thiserror::Error;

use crate::data::{norm3, Action, DataError, FormatError, GripperState};
use crate::encoder::{Encoder, EncoderError};

pub use baselines::{open_loop_fit, random_policy, OpenLoopPolicy, RandomPolicy};
pub use bc::{bc_rep_fit, bc_rep_loss_and_grads, bc_rep_predict, BcConfig, BcHead, BcRep};
pub use index::{build_index, Neighbor, NeighborIndex, NeighborSet};
pub use index_file::{decode_index, encode_index, load_index, save_index};
pub use lwr::{lwr_action, softmin_weights, LwrOutput};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("non-finite value in index row {row}")]
    NonFiniteEmbedding { row: usize },
    #[error("non-finite query")]
    NonFiniteQuery,
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot renormalize a zero translation")]
    ZeroTranslation,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub k: usize,
    /// Ascending cut points mapping the averaged gripper code to a state.
    pub gripper_thresholds: [f64; 3],
    pub renormalize_translation: bool,
    /// Componentwise attenuation `c`, each in (0, 1].
    pub action_scale: [f64; 3],
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            k: 10,
            gripper_thresholds: [0.5, 1.5, 2.5],
            renormalize_translation: false,
            action_scale: [0.5, 0.5, 0.5],
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let [a, b, c] = self.gripper_thresholds;
        if self.k == 0 {
            return Err(PolicyError::InvalidConfig("k must be at least 1".into()));
        }
        if !(a < b && b < c) || !a.is_finite() || !c.is_finite() {
            return Err(PolicyError::InvalidConfig(format!(
                "gripper thresholds {:?} must be strictly ascending",
                self.gripper_thresholds
            )));
        }
        check_scale(&self.action_scale)
    }

    /// Closed-loop control needs unit step directions.
    pub fn closed_loop(k: usize) -> Self {
        Self {
            k,
            renormalize_translation: true,
            ..Self::default()
        }
    }
}

fn check_scale(c: &[f64; 3]) -> Result<(), PolicyError> {
    if c.iter().all(|v| *v > 0.0 && *v <= 1.0) {
        Ok(())
    } else {
        Err(PolicyError::InvalidConfig(format!(
            "action scale {c:?} must lie in (0, 1]"
        )))
    }
}

/// `g < t0` -> Open, `< t1` -> AlmostOpen, `< t2` -> AlmostClosed, else Closed.
pub fn map_gripper(g: f64, thresholds: &[f64; 3]) -> GripperState {
    let idx = thresholds.iter().filter(|&&t| g >= t).count();
    GripperState::ALL[idx]
}

pub fn renormalize(t: [f64; 3]) -> Result<[f64; 3], PolicyError> {
    let n = norm3(&t);
    if !(n > 1e-12) {
        return Err(PolicyError::ZeroTranslation);
    }
    Ok(t.map(|v| v / n))
}

/// Policy output with the intermediate quantities kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub action: Action,
    /// Weighted average before renormalization.
    pub raw_translation: [f64; 3],
    pub gripper_float: f64,
    pub nearest_distance: f64,
}

/// Predicts from an already-encoded observation.
pub fn predict_embedded(
    index: &NeighborIndex,
    embedding: &[f64],
    cfg: &PolicyConfig,
) -> Result<Prediction, PolicyError> {
    let nbrs = index.nearest(embedding, cfg.k)?;
    let out = lwr_action(&nbrs);
    let translation = if cfg.renormalize_translation {
        renormalize(out.translation)?
    } else {
        out.translation
    };
    Ok(Prediction {
        action: Action::new(
            translation,
            map_gripper(out.gripper, &cfg.gripper_thresholds),
        ),
        raw_translation: out.translation,
        gripper_float: out.gripper,
        nearest_distance: nbrs.nearest_distance(),
    })
}

pub fn predict_detailed(
    index: &NeighborIndex,
    encoder: &Encoder,
    obs: &[f64],
    cfg: &PolicyConfig,
) -> Result<Prediction, PolicyError> {
    if encoder.embed_dim() != index.dim() {
        return Err(PolicyError::DimensionMismatch {
            expected: index.dim(),
            found: encoder.embed_dim(),
        });
    }
    let e = encoder.encode(obs)?;
    predict_embedded(index, &e, cfg)
}

pub fn predict(
    index: &NeighborIndex,
    encoder: &Encoder,
    obs: &[f64],
    cfg: &PolicyConfig,
) -> Result<Action, PolicyError> {
    predict_detailed(index, encoder, obs, cfg).map(|p| p.action)
}

/// Componentwise `c * translation`; gripper unchanged.
pub fn scale_action(a: &Action, c: &[f64; 3]) -> Result<Action, PolicyError> {
    check_scale(c)?;
    let t = a.translation;
    Ok(Action::new(
        [c[0] * t[0], c[1] * t[1], c[2] * t[2]],
        a.gripper,
    ))
}

/// Index, encoder and configuration bundled as one policy.
#[derive(Debug, Clone)]
pub struct Vinn {
    pub index: NeighborIndex,
    pub encoder: Encoder,
    pub cfg: PolicyConfig,
}

impl Vinn {
    pub fn new(
        index: NeighborIndex,
        encoder: Encoder,
        cfg: PolicyConfig,
    ) -> Result<Self, PolicyError> {
        cfg.validate()?;
        if encoder.embed_dim() != index.dim() {
            return Err(PolicyError::DimensionMismatch {
                expected: index.dim(),
                found: encoder.embed_dim(),
            });
        }
        if cfg.k > index.len() {
            return Err(PolicyError::KOutOfRange {
                k: cfg.k,
                n: index.len(),
            });
        }
        Ok(Self {
            index,
            encoder,
            cfg,
        })
    }

    pub fn predict(&self, obs: &[f64]) -> Result<Prediction, PolicyError> {
        predict_detailed(&self.index, &self.encoder, obs, &self.cfg)
    }
}
