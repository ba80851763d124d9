use super::env::{env_reset, env_step, EnvConfig, EnvState, CABINETS};
use super::expert::expert_action;
use super::SimError;
use crate::data::Action;
use crate::policy::{renormalize, BcRep, OpenLoopPolicy, RandomPolicy, Vinn};
use crate::rng;

/// What a controller sees at each step. `state` is privileged information;
/// only the scripted expert reads it.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub obs: &'a [f64],
    pub state: &'a EnvState,
    pub t: usize,
}

pub trait Controller {
    /// Must return a unit-norm translation.
    fn act(&mut self, input: &StepInput<'_>) -> Result<Action, SimError>;
}

impl<F> Controller for F
where
    F: FnMut(&StepInput<'_>) -> Result<Action, SimError>,
{
    fn act(&mut self, input: &StepInput<'_>) -> Result<Action, SimError> {
        self(input)
    }
}

#[derive(Debug, Clone)]
pub struct ExpertController {
    pub cfg: EnvConfig,
}

impl Controller for ExpertController {
    fn act(&mut self, input: &StepInput<'_>) -> Result<Action, SimError> {
        Ok(expert_action(input.state, &self.cfg))
    }
}

/// Closed-loop VINN: the raw weighted average is always renormalized.
impl Controller for Vinn {
    fn act(&mut self, input: &StepInput<'_>) -> Result<Action, SimError> {
        let p = self.predict(input.obs)?;
        Ok(Action::new(
            renormalize(p.raw_translation)?,
            p.action.gripper,
        ))
    }
}

impl Controller for BcRep {
    fn act(&mut self, input: &StepInput<'_>) -> Result<Action, SimError> {
        Ok(self.predict(input.obs, true)?)
    }
}

impl Controller for OpenLoopPolicy {
    fn act(&mut self, input: &StepInput<'_>) -> Result<Action, SimError> {
        let a = self.action_at(input.t);
        Ok(Action::new(renormalize(a.translation)?, a.gripper))
    }
}

impl Controller for RandomPolicy {
    fn act(&mut self, _: &StepInput<'_>) -> Result<Action, SimError> {
        Ok(self.next_action())
    }
}

/// One executed step: the observation the controller saw, its action, and
/// the state reached afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub obs: Vec<f64>,
    pub action: Action,
    pub handle_distance: f64,
    pub door_progress: f64,
    pub grasped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub handle_grasped: bool,
    /// Door progress reached the success threshold; implies `handle_grasped`.
    pub door_opened: bool,
    pub steps_taken: usize,
    pub trace: Vec<TraceStep>,
}

pub fn rollout(
    controller: &mut dyn Controller,
    cfg: &EnvConfig,
    seed: u64,
) -> Result<RolloutResult, SimError> {
    let (mut state, mut obs) = env_reset(cfg, seed)?;
    let mut trace = Vec::new();
    let mut grasped_ever = false;
    while !state.done(cfg) {
        let action = controller.act(&StepInput {
            obs: &obs,
            state: &state,
            t: state.step,
        })?;
        let (next, next_obs, _) = env_step(&state, &action, cfg)?;
        grasped_ever |= next.grasped;
        trace.push(TraceStep {
            step: state.step,
            obs,
            action,
            handle_distance: next.handle_distance(),
            door_progress: next.door_progress,
            grasped: next.grasped,
        });
        state = next;
        obs = next_obs;
    }
    Ok(RolloutResult {
        handle_grasped: grasped_ever,
        door_opened: state.opened(cfg),
        steps_taken: trace.len(),
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessRates {
    pub grasp_rate: f64,
    pub open_rate: f64,
    pub trials: usize,
}

/// Runs `n_trials` episodes with seeds `derive(seed, i)`, returned with their
/// seeds. Unless the config pins a cabinet, trial `i` uses cabinet `i mod 3`.
pub fn trial_rollouts(
    controller: &mut dyn Controller,
    cfg: &EnvConfig,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<(u64, RolloutResult)>, SimError> {
    if n_trials == 0 {
        return Err(SimError::NoTrials);
    }
    (0..n_trials)
        .map(|i| {
            let trial_cfg = EnvConfig {
                cabinet: cfg.cabinet.or(Some(i % CABINETS)),
                ..cfg.clone()
            };
            let s = rng::derive(seed, i as u64);
            rollout(controller, &trial_cfg, s).map(|r| (s, r))
        })
        .collect()
}

pub fn rates(results: &[(u64, RolloutResult)]) -> SuccessRates {
    let n = results.len();
    let grasped = results.iter().filter(|(_, r)| r.handle_grasped).count();
    let opened = results.iter().filter(|(_, r)| r.door_opened).count();
    SuccessRates {
        grasp_rate: grasped as f64 / n.max(1) as f64,
        open_rate: opened as f64 / n.max(1) as f64,
        trials: n,
    }
}

/// Grasp and open rates over [`trial_rollouts`].
pub fn success_rate(
    controller: &mut dyn Controller,
    cfg: &EnvConfig,
    n_trials: usize,
    seed: u64,
) -> Result<SuccessRates, SimError> {
    trial_rollouts(controller, cfg, n_trials, seed).map(|r| rates(&r))
}
