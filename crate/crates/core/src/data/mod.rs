//! Demonstration data: actions, frames, demonstrations and embedding matrices.

mod codec;
mod format;
mod ops;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use codec::{round_f32, FormatError};
pub(crate) use codec::{ByteReader, ByteWriter};
pub use format::{
    decode_demoset, decode_embeddings, encode_demoset, encode_embeddings, load_demoset,
    load_embeddings, save_demoset, save_embeddings,
};
pub use ops::{
    normalize_actions, normalize_actions_with, round_demoset, subsample_demos, synth_demoset,
    DEFAULT_NORM_EPS, GENERATORS,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("demonstration set is empty")]
    EmptyDemoSet,
    #[error("demonstration {demo} has no frames")]
    EmptyDemo { demo: usize },
    #[error("observation dimension must be positive")]
    ZeroObsDim,
    #[error("demo {demo} frame {timestep}: observation has {found} dims, expected {expected}")]
    ObsDimMismatch {
        demo: usize,
        timestep: usize,
        expected: usize,
        found: usize,
    },
    #[error("demo {demo} frame {timestep}: non-finite value")]
    NonFinite { demo: usize, timestep: usize },
    #[error("near-zero translation in {} frame(s), first at demo {} frame {}", .frames.len(), .frames[0].0, .frames[0].1)]
    ZeroTranslation { frames: Vec<(usize, usize)> },
    #[error("cannot subsample {requested} demonstrations from {available}")]
    SubsampleRange { requested: usize, available: usize },
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),
    #[error("generator failed: {0}")]
    Generator(String),
    #[error("requested an empty dataset")]
    EmptyRequest,
    #[error("embedding matrix: {0}")]
    Embedding(String),
}

/// Discrete gripper state with fixed numeric codes 0..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum GripperState {
    Open = 0,
    AlmostOpen = 1,
    AlmostClosed = 2,
    Closed = 3,
}

impl GripperState {
    pub const ALL: [GripperState; 4] = [
        GripperState::Open,
        GripperState::AlmostOpen,
        GripperState::AlmostClosed,
        GripperState::Closed,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self as usize] = 1.0;
        v
    }
}

impl fmt::Display for GripperState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            GripperState::Open => "open",
            GripperState::AlmostOpen => "almost-open",
            GripperState::AlmostClosed => "almost-closed",
            GripperState::Closed => "closed",
        };
        f.write_str(name)
    }
}

/// End-effector translation plus gripper state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub translation: [f64; 3],
    pub gripper: GripperState,
}

impl Action {
    pub fn new(translation: [f64; 3], gripper: GripperState) -> Self {
        Self {
            translation,
            gripper,
        }
    }

    pub fn norm(&self) -> f64 {
        norm3(&self.translation)
    }

    /// Translation and gripper code as the 4-vector regressed by the policies.
    pub fn as_vector(&self) -> [f64; 4] {
        let [x, y, z] = self.translation;
        [x, y, z, f64::from(self.gripper.code())]
    }
}

pub fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub observation: Vec<f64>,
    pub action: Action,
}

/// One expert trajectory. Timesteps are the frame positions 0, 1, 2, ...
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub frames: Vec<Frame>,
}

impl Demonstration {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A validated, non-empty collection of demonstrations sharing one observation
/// dimension. Demo ids are positions in the set.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    demos: Vec<Demonstration>,
    obs_dim: usize,
    metadata: BTreeMap<String, String>,
}

/// Borrowed view of one frame with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct FrameRef<'a> {
    pub demo_id: usize,
    pub timestep: usize,
    pub frame: &'a Frame,
}

impl DemoSet {
    pub fn new(demos: Vec<Demonstration>, obs_dim: usize) -> Result<Self, DataError> {
        Self::with_metadata(demos, obs_dim, BTreeMap::new())
    }

    pub fn with_metadata(
        demos: Vec<Demonstration>,
        obs_dim: usize,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, DataError> {
        if obs_dim == 0 {
            return Err(DataError::ZeroObsDim);
        }
        if demos.is_empty() {
            return Err(DataError::EmptyDemoSet);
        }
        for (d, demo) in demos.iter().enumerate() {
            if demo.frames.is_empty() {
                return Err(DataError::EmptyDemo { demo: d });
            }
            for (t, frame) in demo.frames.iter().enumerate() {
                if frame.observation.len() != obs_dim {
                    return Err(DataError::ObsDimMismatch {
                        demo: d,
                        timestep: t,
                        expected: obs_dim,
                        found: frame.observation.len(),
                    });
                }
                let finite = frame.observation.iter().all(|v| v.is_finite())
                    && frame.action.translation.iter().all(|v| v.is_finite());
                if !finite {
                    return Err(DataError::NonFinite {
                        demo: d,
                        timestep: t,
                    });
                }
            }
        }
        Ok(Self {
            demos,
            obs_dim,
            metadata,
        })
    }

    pub fn demos(&self) -> &[Demonstration] {
        &self.demos
    }

    pub fn into_demos(self) -> Vec<Demonstration> {
        self.demos
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn num_demos(&self) -> usize {
        self.demos.len()
    }

    pub fn num_frames(&self) -> usize {
        self.demos.iter().map(Demonstration::len).sum()
    }

    pub fn max_len(&self) -> usize {
        self.demos.iter().map(Demonstration::len).max().unwrap_or(0)
    }

    /// All frames in dataset order (demo-major, then timestep).
    pub fn frames(&self) -> impl Iterator<Item = FrameRef<'_>> + '_ {
        self.demos.iter().enumerate().flat_map(|(demo_id, demo)| {
            demo.frames
                .iter()
                .enumerate()
                .map(move |(timestep, frame)| FrameRef {
                    demo_id,
                    timestep,
                    frame,
                })
        })
    }

    /// Same demonstrations, a different selection or order.
    pub(crate) fn derive(&self, demos: Vec<Demonstration>) -> Self {
        Self {
            demos,
            obs_dim: self.obs_dim,
            metadata: self.metadata.clone(),
        }
    }
}

/// Row-major N x d embeddings with parallel per-row actions and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    rows: Vec<f64>,
    actions: Vec<Action>,
    demo_ids: Vec<u32>,
    timesteps: Vec<u32>,
}

impl EmbeddingMatrix {
    pub fn new(
        dim: usize,
        rows: Vec<f64>,
        actions: Vec<Action>,
        demo_ids: Vec<u32>,
        timesteps: Vec<u32>,
    ) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::Embedding("dimension must be positive".into()));
        }
        let n = actions.len();
        if rows.len() != n * dim || demo_ids.len() != n || timesteps.len() != n {
            return Err(DataError::Embedding(format!(
                "inconsistent lengths: {} values for {} rows of dim {}, {} demo ids, {} timesteps",
                rows.len(),
                n,
                dim,
                demo_ids.len(),
                timesteps.len()
            )));
        }
        if let Some(bad) = rows.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Embedding(format!(
                "non-finite entry in row {}",
                bad / dim
            )));
        }
        Ok(Self {
            dim,
            rows,
            actions,
            demo_ids,
            timesteps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.rows.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.rows
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn demo_ids(&self) -> &[u32] {
        &self.demo_ids
    }

    pub fn timesteps(&self) -> &[u32] {
        &self.timesteps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(obs: Vec<f64>) -> Frame {
        Frame {
            observation: obs,
            action: Action::new([1.0, 0.0, 0.0], GripperState::Open),
        }
    }

    #[test]
    fn gripper_codes_round_trip() {
        for g in GripperState::ALL {
            assert_eq!(GripperState::from_code(g.code()), Some(g));
        }
        assert_eq!(GripperState::from_code(4), None);
        assert_eq!(GripperState::Closed.code(), 3);
    }

    #[test]
    fn rejects_mixed_dims() {
        let demos = vec![Demonstration::new(vec![
            frame(vec![0.0; 3]),
            frame(vec![0.0; 2]),
        ])];
        assert!(matches!(
            DemoSet::new(demos, 3),
            Err(DataError::ObsDimMismatch {
                demo: 0,
                timestep: 1,
                ..
            })
        ));
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(
            DemoSet::new(vec![], 3),
            Err(DataError::EmptyDemoSet)
        ));
        assert!(matches!(
            DemoSet::new(vec![Demonstration::new(vec![])], 3),
            Err(DataError::EmptyDemo { demo: 0 })
        ));
    }

    #[test]
    fn frames_iterate_in_order() {
        let demos = vec![
            Demonstration::new(vec![frame(vec![0.0]), frame(vec![1.0])]),
            Demonstration::new(vec![frame(vec![2.0])]),
        ];
        let set = DemoSet::new(demos, 1).unwrap();
        let ids: Vec<_> = set.frames().map(|f| (f.demo_id, f.timestep)).collect();
        assert_eq!(ids, vec![(0, 0), (0, 1), (1, 0)]);
        assert_eq!(set.num_frames(), 3);
    }

    #[test]
    fn embedding_matrix_rejects_nan() {
        let a = Action::new([1.0, 0.0, 0.0], GripperState::Open);
        let err = EmbeddingMatrix::new(
            2,
            vec![0.0, 1.0, f64::NAN, 0.0],
            vec![a, a],
            vec![0, 0],
            vec![0, 1],
        );
        assert!(matches!(err, Err(DataError::Embedding(msg)) if msg.contains("row 1")));
    }
}
