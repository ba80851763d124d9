//! Reach-grasp-pull environment.
//!
//! An effector starts about 0.15 m in front of a cabinet handle with a random
//! lateral offset, approaches it, closes the gripper within the grasp radius
//! and pulls the door open along +x. The geometry is abstract: no contacts, no
//! kinematics. Three cabinet identities differ only in their appearance
//! features; occlusion zeroes observation dimensions.

mod env;
mod expert;
mod rollout;
mod trace;

use thiserror::Error;

use crate::policy::PolicyError;

pub use env::{
    cabinet_features, env_reset, env_step, EnvConfig, EnvState, OcclusionLevel, CABINETS, DOOR_DIM,
    GRIPPER_DIMS, PULL_AXIS, REL_DIMS, UNIT_TOL,
};
pub use expert::{expert_action, expert_demonstration, expert_demoset};
pub use rollout::{
    rates, rollout, success_rate, trial_rollouts, Controller, ExpertController, RolloutResult,
    StepInput, SuccessRates, TraceStep,
};
pub use trace::{format_trace, TRACE_HEADER};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("action translation has norm {norm}, expected 1")]
    NonUnitAction { norm: f64 },
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}
