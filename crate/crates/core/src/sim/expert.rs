use super::env::{env_reset, env_step, sub, EnvConfig, EnvState, PULL_AXIS};
use super::SimError;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::env::CABINETS;
use crate::data::{
    norm3, normalize_actions, round_demoset, Action, DemoSet, Demonstration, Frame, GripperState,
};
use crate::rng::{self, Rng};

/// Scripted reach-grasp-pull expert.
///
/// Far from the handle it heads straight for it, closing the gripper in
/// stages (Open beyond 4 grasp radii, AlmostOpen beyond 2, then AlmostClosed).
/// Within the grasp radius, or once grasped, it emits Closed and pulls along
/// [`PULL_AXIS`].
pub fn expert_action(state: &EnvState, cfg: &EnvConfig) -> Action {
    let to_handle = sub(&state.handle, &state.effector);
    let d = norm3(&to_handle);
    if state.grasped || d <= cfg.grasp_radius {
        return Action::new(PULL_AXIS, GripperState::Closed);
    }
    let gripper = if d > 4.0 * cfg.grasp_radius {
        GripperState::Open
    } else if d > 2.0 * cfg.grasp_radius {
        GripperState::AlmostOpen
    } else {
        GripperState::AlmostClosed
    };
    Action::new(to_handle.map(|v| v / d), gripper)
}

fn perturb(a: Action, std: f64, rng: &mut Rng) -> Action {
    if std == 0.0 {
        return a;
    }
    loop {
        let t: [f64; 3] =
            std::array::from_fn(|i| a.translation[i] + std * rng.sample::<f64, _>(StandardNormal));
        let n = norm3(&t);
        if n > 1e-6 {
            return Action::new(t.map(|v| v / n), a.gripper);
        }
    }
}

/// One expert episode recorded as (observation, action) frames, with
/// `cfg.expert_noise_std` applied to the executed translations. The episode
/// always contains at least one frame, even with `max_steps == 0`.
pub fn expert_demonstration(cfg: &EnvConfig, seed: u64) -> Result<Demonstration, SimError> {
    let (mut state, mut obs) = env_reset(cfg, seed)?;
    let mut noise = rng::seeded(rng::derive(seed, 2));
    let mut frames = Vec::new();
    loop {
        let action = perturb(expert_action(&state, cfg), cfg.expert_noise_std, &mut noise);
        frames.push(Frame {
            observation: obs,
            action,
        });
        if state.done(cfg) {
            break;
        }
        let (next, next_obs, done) = env_step(&state, &action, cfg)?;
        state = next;
        obs = next_obs;
        if done {
            break;
        }
    }
    Ok(Demonstration::new(frames))
}

/// `n` expert demonstrations with seeds `derive(seed, i)`; unless the config
/// pins one, demo `i` uses cabinet `i mod 3`. Values are rounded to f32 so
/// the set survives a save/load unchanged.
pub fn expert_demoset(cfg: &EnvConfig, n: usize, seed: u64) -> Result<DemoSet, SimError> {
    let demos = (0..n)
        .map(|i| {
            let c = EnvConfig {
                cabinet: cfg.cabinet.or(Some(i % CABINETS)),
                ..cfg.clone()
            };
            expert_demonstration(&c, rng::derive(seed, i as u64))
        })
        .collect::<Result<Vec<_>, _>>()?;
    DemoSet::new(demos, cfg.obs_dim())
        .and_then(|s| normalize_actions(&s))
        .map(|s| round_demoset(&s))
        .map_err(|e| SimError::InvalidConfig(e.to_string()))
}
