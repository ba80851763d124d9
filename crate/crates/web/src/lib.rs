//! Browser demo over the synthetic reach-grasp-pull task.
//!
//! Three operations, each a method on [`Demo`]:
//! - [`Demo::action_field`]: the VINN action predicted on a grid of effector positions;
//! - [`Demo::rollout`]: one closed-loop episode with its effector path and trace;
//! - [`Demo::k_sweep`]: held-out MSE as a function of k.
//!
//! The same methods are called from JavaScript and from native tests.

use thiserror::Error;
use wasm_bindgen::prelude::*;

use vinn::encoder::{embed_demoset, EncoderError};
use vinn::eval::{sweep_k, EvalError};
use vinn::policy::{build_index, PolicyError, Vinn};
use vinn::rng;
use vinn::sim::{
    cabinet_features, expert_demoset, format_trace, rollout, Controller, EnvConfig, OcclusionLevel,
    SimError, StepInput,
};
use vinn::{Action, DemoSet, Encoder, EncoderKind, EncoderSpec, GripperState, PolicyConfig};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("occlusion level must be 0..=3, got {0}")]
    Occlusion(u8),
    #[error("grid needs at least 2 points per side")]
    Grid,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<DemoError> for JsValue {
    fn from(e: DemoError) -> Self {
        JsValue::from_str(&e.to_string())
    }
}

/// Held-out demonstrations used by [`Demo::k_sweep`].
const TEST_DEMOS: usize = 10;

/// Field extent in meters around the handle: x range, and y in `[-FIELD_Y, FIELD_Y]`.
const FIELD_X: (f64, f64) = (-0.02, 0.18);
const FIELD_Y: f64 = 0.08;

/// Expert demonstrations, an identity encoder and the neighbor index built from them.
#[wasm_bindgen]
pub struct Demo {
    env: EnvConfig,
    train: DemoSet,
    test: DemoSet,
    encoder: Encoder,
    index: vinn::NeighborIndex,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(n_demos: usize, seed: u64) -> Result<Demo, DemoError> {
        let env = EnvConfig::default();
        let train = expert_demoset(&env, n_demos.max(1), seed)?;
        let test = expert_demoset(&env, TEST_DEMOS, rng::derive(seed, 1))?;
        let encoder = Encoder::init(&EncoderSpec {
            kind: EncoderKind::Identity,
            obs_dim: env.obs_dim(),
            embed_dim: env.obs_dim(),
            hidden_dims: Vec::new(),
            seed: 0,
        })?;
        let index = build_index(&embed_demoset(&encoder, &train)?)?;
        Ok(Demo {
            env,
            train,
            test,
            encoder,
            index,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.train.num_frames()
    }

    /// Predicted actions on a `grid x grid` lattice of open-gripper effector
    /// positions in front of `cabinet`'s closed door. Five values per point,
    /// row-major from (x0, -y): `x, y, tx, ty, gripper` (meters, raw average).
    pub fn action_field(
        &self,
        k: usize,
        cabinet: usize,
        grid: usize,
    ) -> Result<Vec<f64>, DemoError> {
        if grid < 2 {
            return Err(DemoError::Grid);
        }
        let vinn = self.policy(PolicyConfig {
            k,
            ..PolicyConfig::default()
        })?;
        let appearance = cabinet_features(
            cabinet % vinn::sim::CABINETS,
            self.env.distractor_dims,
            self.env.distractor_norm,
        );
        let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        let mut out = Vec::with_capacity(grid * grid * 5);
        for iy in 0..grid {
            for ix in 0..grid {
                let (x, y) = (step(FIELD_X.0, FIELD_X.1, ix), step(-FIELD_Y, FIELD_Y, iy));
                // The handle sits at the origin, so rel = -effector.
                let mut obs: Vec<f64> = [-x, -y, 0.0]
                    .iter()
                    .map(|v| v * self.env.position_scale)
                    .collect();
                obs.extend(GripperState::Open.one_hot());
                obs.push(0.0);
                obs.extend(&appearance);
                let p = vinn.predict(&obs)?;
                out.extend([
                    x,
                    y,
                    p.raw_translation[0],
                    p.raw_translation[1],
                    p.gripper_float,
                ]);
            }
        }
        Ok(out)
    }

    /// One closed-loop VINN episode at the given occlusion level.
    pub fn rollout(&self, k: usize, occlusion: u8, seed: u64) -> Result<Episode, DemoError> {
        let level = OcclusionLevel::from_level(occlusion).ok_or(DemoError::Occlusion(occlusion))?;
        let cfg = self.env.with_occlusion(level);
        let mut rec = Recorder {
            inner: self.policy(PolicyConfig::closed_loop(k))?,
            path: Vec::new(),
        };
        let result = rollout(&mut rec, &cfg, seed)?;
        Ok(Episode {
            path: rec.path,
            progress: result.trace.iter().map(|s| s.door_progress).collect(),
            grasped: result.handle_grasped,
            opened: result.door_opened,
            trace: format_trace(&result, seed),
        })
    }

    /// Held-out MSE for each `k` (ascending, each at most the frame count).
    pub fn k_sweep(&self, ks: Vec<u32>) -> Result<Vec<f64>, DemoError> {
        let ks: Vec<usize> = ks.into_iter().map(|k| k as usize).collect();
        let curve = sweep_k(&self.index, &self.encoder, &self.test, &ks, &[])?;
        Ok(curve.points.iter().map(|p| p.mse).collect())
    }
}

impl Demo {
    fn policy(&self, cfg: PolicyConfig) -> Result<Vinn, DemoError> {
        Ok(Vinn::new(self.index.clone(), self.encoder.clone(), cfg)?)
    }
}

/// Effector xy before every step, in meters.
struct Recorder {
    inner: Vinn,
    path: Vec<f64>,
}

impl Controller for Recorder {
    fn act(&mut self, input: &StepInput<'_>) -> Result<Action, SimError> {
        self.path.extend(&input.state.effector[..2]);
        self.inner.act(input)
    }
}

#[wasm_bindgen]
pub struct Episode {
    path: Vec<f64>,
    progress: Vec<f64>,
    grasped: bool,
    opened: bool,
    trace: String,
}

#[wasm_bindgen]
impl Episode {
    /// Flattened `x, y` pairs, one per step.
    #[wasm_bindgen(getter)]
    pub fn path(&self) -> Vec<f64> {
        self.path.clone()
    }

    /// Door progress after every step.
    #[wasm_bindgen(getter)]
    pub fn progress(&self) -> Vec<f64> {
        self.progress.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn grasped(&self) -> bool {
        self.grasped
    }

    #[wasm_bindgen(getter)]
    pub fn opened(&self) -> bool {
        self.opened
    }

    #[wasm_bindgen(getter)]
    pub fn trace(&self) -> String {
        self.trace.clone()
    }
}
