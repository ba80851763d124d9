use rand::Rng as _;
use rand_distr::StandardNormal;

use super::SimError;
use crate::data::{norm3, Action, GripperState};
use crate::rng::{self, Rng};

/// Direction along which a grasped handle opens the door (away from the cabinet).
pub const PULL_AXIS: [f64; 3] = [1.0, 0.0, 0.0];

/// Number of distinct cabinet appearances.
pub const CABINETS: usize = 3;

/// How much of the scene is hidden from the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OcclusionLevel {
    None = 0,
    /// Half of the appearance features.
    Partial = 1,
    /// All appearance features and the lateral handle offset.
    Heavy = 2,
    /// Every scene dimension; only the gripper state remains.
    Full = 3,
}

impl OcclusionLevel {
    pub const ALL: [OcclusionLevel; 4] = [
        OcclusionLevel::None,
        OcclusionLevel::Partial,
        OcclusionLevel::Heavy,
        OcclusionLevel::Full,
    ];

    pub fn from_level(level: u8) -> Option<Self> {
        Self::ALL.get(level as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Nominal effector distance from the handle at reset (m).
    pub start_offset: f64,
    /// Half-width of the uniform lateral offset at reset (m).
    pub lateral_jitter: f64,
    /// Effector displacement per unit action (m).
    pub step_size: f64,
    /// A Closed gripper within this distance grasps the handle (m).
    pub grasp_radius: f64,
    /// Pull distance that fully opens the door (m).
    pub door_travel: f64,
    /// Door progress counted as opened.
    pub success_progress: f64,
    /// Observation units per meter for the relative handle vector (default: cm).
    pub position_scale: f64,
    /// Number of cabinet appearance features.
    pub distractor_dims: usize,
    /// Norm of each cabinet's appearance vector.
    pub distractor_norm: f64,
    /// Fixed cabinet identity; `None` draws one from the reset seed.
    pub cabinet: Option<usize>,
    /// Observation dimensions zeroed after noise is added.
    pub occlusion_mask: Vec<usize>,
    pub obs_noise_std: f64,
    /// Demonstrator execution noise: recorded expert translations are
    /// `normalize(a + N(0, s^2 I))`. The expert controller itself is exact.
    pub expert_noise_std: f64,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            start_offset: 0.15,
            lateral_jitter: 0.05,
            step_size: 0.01,
            grasp_radius: 0.02,
            door_travel: 0.10,
            success_progress: 0.95,
            position_scale: 100.0,
            distractor_dims: 8,
            distractor_norm: 1.0,
            cabinet: None,
            occlusion_mask: Vec::new(),
            obs_noise_std: 0.0,
            expert_noise_std: 0.3,
            max_steps: 60,
        }
    }
}

/// Observation layout: `[handle - effector (3) | gripper one-hot (4) | door opening (1) | appearance (m)]`.
/// Positions and the door opening are in meters times `position_scale`.
pub const REL_DIMS: std::ops::Range<usize> = 0..3;
pub const GRIPPER_DIMS: std::ops::Range<usize> = 3..7;
pub const DOOR_DIM: usize = 7;
const APPEARANCE_START: usize = DOOR_DIM + 1;

impl EnvConfig {
    pub fn obs_dim(&self) -> usize {
        APPEARANCE_START + self.distractor_dims
    }

    /// Dimensions describing the scene (everything except the gripper one-hot).
    pub fn scene_dims(&self) -> Vec<usize> {
        REL_DIMS.chain(GRIPPER_DIMS.end..self.obs_dim()).collect()
    }

    pub fn occlusion_for(&self, level: OcclusionLevel) -> Vec<usize> {
        let appearance = APPEARANCE_START..self.obs_dim();
        match level {
            OcclusionLevel::None => Vec::new(),
            OcclusionLevel::Partial => appearance.take(self.distractor_dims / 2).collect(),
            OcclusionLevel::Heavy => std::iter::once(1).chain(appearance).collect(),
            OcclusionLevel::Full => self.scene_dims(),
        }
    }

    pub fn with_occlusion(&self, level: OcclusionLevel) -> Self {
        Self {
            occlusion_mask: self.occlusion_for(level),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            self.start_offset,
            self.step_size,
            self.grasp_radius,
            self.door_travel,
            self.position_scale,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite())
            || !(self.lateral_jitter >= 0.0)
            || !(self.obs_noise_std >= 0.0)
            || !(self.expert_noise_std >= 0.0)
            || !(self.success_progress > 0.0 && self.success_progress <= 1.0)
        {
            return Err(SimError::InvalidConfig(
                "geometry parameters must be positive".into(),
            ));
        }
        if let Some(&d) = self.occlusion_mask.iter().find(|&&d| d >= self.obs_dim()) {
            return Err(SimError::InvalidConfig(format!(
                "occlusion dimension {d} outside observation of {}",
                self.obs_dim()
            )));
        }
        if matches!(self.cabinet, Some(c) if c >= CABINETS) {
            return Err(SimError::InvalidConfig(format!(
                "cabinet must be < {CABINETS}"
            )));
        }
        Ok(())
    }
}

/// Appearance features of a cabinet: a fixed pseudo-random direction scaled to `norm`.
pub fn cabinet_features(cabinet: usize, dims: usize, norm: f64) -> Vec<f64> {
    let mut r = rng::seeded(rng::derive(0x0CAB_12E7, cabinet as u64));
    let v: Vec<f64> = (0..dims).map(|_| r.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x * norm / n).collect()
}

#[derive(Debug, Clone)]
pub struct EnvState {
    pub effector: [f64; 3],
    pub handle: [f64; 3],
    /// Handle position with the door closed.
    pub handle_rest: [f64; 3],
    pub door_progress: f64,
    pub gripper: GripperState,
    pub grasped: bool,
    pub cabinet: usize,
    pub distractors: Vec<f64>,
    pub step: usize,
    noise: Rng,
}

impl EnvState {
    pub fn handle_distance(&self) -> f64 {
        norm3(&sub(&self.handle, &self.effector))
    }

    pub fn opened(&self, cfg: &EnvConfig) -> bool {
        self.door_progress >= cfg.success_progress
    }

    pub fn done(&self, cfg: &EnvConfig) -> bool {
        self.opened(cfg) || self.step >= cfg.max_steps
    }

    fn observe(&mut self, cfg: &EnvConfig) -> Vec<f64> {
        let rel = sub(&self.handle, &self.effector);
        let mut obs: Vec<f64> = rel.iter().map(|v| v * cfg.position_scale).collect();
        obs.extend(self.gripper.one_hot());
        obs.push(self.door_progress * cfg.door_travel * cfg.position_scale);
        obs.extend(&self.distractors);
        if cfg.obs_noise_std > 0.0 {
            for v in &mut obs {
                *v += cfg.obs_noise_std * self.noise.sample::<f64, _>(StandardNormal);
            }
        }
        for &d in &cfg.occlusion_mask {
            obs[d] = 0.0;
        }
        obs
    }
}

pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Places the effector `start_offset` in front of the handle with a uniform
/// lateral offset in `[-lateral_jitter, lateral_jitter]`.
pub fn env_reset(cfg: &EnvConfig, seed: u64) -> Result<(EnvState, Vec<f64>), SimError> {
    cfg.validate()?;
    let mut r = rng::seeded(seed);
    let u: f64 = r.random();
    let lateral = cfg.lateral_jitter * (2.0 * u - 1.0);
    let drawn = r.random_range(0..CABINETS);
    let cabinet = cfg.cabinet.unwrap_or(drawn);
    let handle = [0.0; 3];
    let mut state = EnvState {
        effector: [cfg.start_offset, lateral, 0.0],
        handle,
        handle_rest: handle,
        door_progress: 0.0,
        gripper: GripperState::Open,
        grasped: false,
        cabinet,
        distractors: cabinet_features(cabinet, cfg.distractor_dims, cfg.distractor_norm),
        step: 0,
        noise: rng::seeded(rng::derive(seed, 1)),
    };
    let obs = state.observe(cfg);
    Ok((state, obs))
}

/// Tolerance on the unit-norm action contract.
pub const UNIT_TOL: f64 = 1e-3;

/// Applies one unit-norm action. Gripper first (grasp, release), then motion:
/// a grasped effector only moves the handle along [`PULL_AXIS`].
pub fn env_step(
    state: &EnvState,
    action: &Action,
    cfg: &EnvConfig,
) -> Result<(EnvState, Vec<f64>, bool), SimError> {
    let n = action.norm();
    if !((n - 1.0).abs() <= UNIT_TOL) {
        return Err(SimError::NonUnitAction { norm: n });
    }
    let mut s = state.clone();
    s.gripper = action.gripper;
    if s.grasped && s.gripper != GripperState::Closed {
        s.grasped = false;
    }
    if !s.grasped && s.gripper == GripperState::Closed && s.handle_distance() <= cfg.grasp_radius {
        s.grasped = true;
        s.effector = s.handle;
    }
    let delta = action.translation.map(|v| v * cfg.step_size);
    if s.grasped {
        let pull = dot(&delta, &PULL_AXIS).max(0.0);
        s.door_progress = (s.door_progress + pull / cfg.door_travel).min(1.0);
        let travel = s.door_progress * cfg.door_travel;
        s.handle = std::array::from_fn(|i| s.handle_rest[i] + PULL_AXIS[i] * travel);
        s.effector = s.handle;
    } else {
        s.effector = std::array::from_fn(|i| s.effector[i] + delta[i]);
    }
    s.step += 1;
    let obs = s.observe(cfg);
    let done = s.done(cfg);
    Ok((s, obs, done))
}
