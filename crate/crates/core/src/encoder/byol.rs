//! BYOL-style self-supervised training: an online network plus predictor head
//! regresses the output of an exponential-moving-average target network on a
//! differently augmented view of the same observation.

use rand::seq::SliceRandom;

use super::augment::{augment, AugmentConfig};
use super::fixed::Whitening;
use super::mlp::{ForwardCache, Mlp};
use super::optim::{Optimizer, OptimizerState};
use super::{Encoder, EncoderError, EncoderKind, EncoderSpec};
use crate::data::{round_f32, DemoSet};
use crate::rng;

/// Online/target/predictor networks and the optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ByolState {
    pub online: Mlp,
    pub target: Mlp,
    pub predictor: Mlp,
    tau: f64,
    step: u64,
    opt: OptimizerState,
}

/// Gradients of the BYOL loss. There is no target component: the target
/// branch is outside the gradient path.
#[derive(Debug, Clone, PartialEq)]
pub struct ByolGrads {
    pub online: Mlp,
    pub predictor: Mlp,
}

impl ByolState {
    pub fn new(spec: &EncoderSpec, tau: f64, optimizer: Optimizer) -> Result<Self, EncoderError> {
        if spec.kind != EncoderKind::ByolMlp {
            return Err(EncoderError::InvalidConfig(format!(
                "BYOL training needs a byol_mlp spec, got {:?}",
                spec.kind
            )));
        }
        spec.validate()?;
        let mut r = rng::seeded(spec.seed);
        let online = Mlp::he(&spec.widths(), &mut r);
        let d = spec.embed_dim;
        let predictor = Mlp::he(&[d, d, d], &mut r);
        Self::from_parts(online, predictor, tau, optimizer)
    }

    /// Target starts as a copy of `online`.
    pub fn from_parts(
        online: Mlp,
        predictor: Mlp,
        tau: f64,
        optimizer: Optimizer,
    ) -> Result<Self, EncoderError> {
        if !(0.0..1.0).contains(&tau) {
            return Err(EncoderError::InvalidConfig(format!(
                "tau {tau} outside [0, 1)"
            )));
        }
        if predictor.input_dim() != online.output_dim()
            || predictor.output_dim() != online.output_dim()
        {
            return Err(EncoderError::InvalidConfig(
                "predictor must map embed_dim to embed_dim".into(),
            ));
        }
        let n = online.param_count() + predictor.param_count();
        Ok(Self {
            target: online.clone(),
            online,
            predictor,
            tau,
            step: 0,
            opt: OptimizerState::new(optimizer, n),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Replaces the first online layer (and the target copy) by a whitening map,
    /// standing in for a pretrained initialization.
    pub fn warm_start(&mut self, whitening: &Whitening) -> Result<(), EncoderError> {
        let first = &mut self.online.layers_mut()[0];
        if first.inputs != whitening.obs_dim || first.outputs != whitening.embed_dim {
            return Err(EncoderError::InvalidConfig(format!(
                "warm start needs a {}x{} whitening map, got {}x{}",
                first.outputs, first.inputs, whitening.embed_dim, whitening.obs_dim
            )));
        }
        first.weights.clone_from(&whitening.transform);
        first.bias = whitening
            .transform
            .chunks_exact(whitening.obs_dim)
            .map(|row| {
                -row.iter()
                    .zip(&whitening.mean)
                    .map(|(w, m)| w * m)
                    .sum::<f64>()
            })
            .collect();
        self.target = self.online.clone();
        Ok(())
    }

    /// `target <- tau * target + (1 - tau) * online`
    pub fn update_target(&mut self) {
        let tau = self.tau;
        for (t, o) in self.target.params_mut().zip(self.online.params()) {
            *t = tau * *t + (1.0 - tau) * o;
        }
    }

    /// The online network rounded to f32, the checkpoint precision.
    pub fn into_encoder(mut self) -> Encoder {
        for p in self.online.params_mut() {
            *p = round_f32(*p);
        }
        Encoder::Mlp(self.online)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity and its gradient with respect to `p` (with `t` held fixed).
fn cosine_with_grad(p: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let (np, nt) = (norm(p), norm(t));
    let c = dot(p, t) / (np * nt);
    let g = p
        .iter()
        .zip(t)
        .map(|(pi, ti)| ti / (np * nt) - c * pi / (np * np))
        .collect();
    // rounding can push |c| past 1 by an ulp; keep the loss inside [0, 4]
    (c.clamp(-1.0, 1.0), g)
}

struct Branch {
    online: ForwardCache,
    pred: ForwardCache,
}

fn check_nonzero(v: &[f64], branch: &'static str, sample: usize) -> Result<(), EncoderError> {
    let n = norm(v);
    if !n.is_finite() {
        return Err(EncoderError::NonFinite { branch, sample });
    }
    if n == 0.0 {
        return Err(EncoderError::ZeroNorm { branch, sample });
    }
    Ok(())
}

/// Symmetric loss `mean_b [ (2 - 2 cos(q1, z2')) + (2 - 2 cos(q2, z1')) ] / 2`,
/// where `q = predictor(online(view))` and `z' = target(view)`.
pub fn byol_loss(
    state: &ByolState,
    view1: &[Vec<f64>],
    view2: &[Vec<f64>],
) -> Result<f64, EncoderError> {
    loss_impl(state, view1, view2, false).map(|(l, _)| l)
}

/// Loss together with gradients for the online network and predictor.
pub fn byol_loss_and_grads(
    state: &ByolState,
    view1: &[Vec<f64>],
    view2: &[Vec<f64>],
) -> Result<(f64, ByolGrads), EncoderError> {
    loss_impl(state, view1, view2, true).map(|(l, g)| (l, g.expect("requested")))
}

fn loss_impl(
    state: &ByolState,
    view1: &[Vec<f64>],
    view2: &[Vec<f64>],
    want_grads: bool,
) -> Result<(f64, Option<ByolGrads>), EncoderError> {
    if view1.is_empty() || view1.len() != view2.len() {
        return Err(EncoderError::BatchMismatch {
            left: view1.len(),
            right: view2.len(),
        });
    }
    let in_dim = state.online.input_dim();
    for v in view1.iter().chain(view2) {
        if v.len() != in_dim {
            return Err(EncoderError::DimensionMismatch {
                expected: in_dim,
                found: v.len(),
            });
        }
    }
    let b = view1.len() as f64;
    let mut grads = want_grads.then(|| ByolGrads {
        online: state.online.zeros_like(),
        predictor: state.predictor.zeros_like(),
    });
    let mut total = 0.0;
    for (i, (v1, v2)) in view1.iter().zip(view2).enumerate() {
        let forward = |v: &[f64]| {
            let online = state.online.forward_cached(v);
            let pred = state.predictor.forward_cached(online.output());
            Branch { online, pred }
        };
        let (b1, b2) = (forward(v1), forward(v2));
        let t1 = state.target.forward(v1);
        let t2 = state.target.forward(v2);
        check_nonzero(b1.pred.output(), "online view 1", i)?;
        check_nonzero(b2.pred.output(), "online view 2", i)?;
        check_nonzero(&t1, "target view 1", i)?;
        check_nonzero(&t2, "target view 2", i)?;
        let (c12, g1) = cosine_with_grad(b1.pred.output(), &t2);
        let (c21, g2) = cosine_with_grad(b2.pred.output(), &t1);
        total += ((2.0 - 2.0 * c12) + (2.0 - 2.0 * c21)) / 2.0;
        if let Some(grads) = grads.as_mut() {
            // d/dq of (2 - 2cos)/2 / B = -cos'(q) / B
            for (branch, g) in [(&b1, g1), (&b2, g2)] {
                let dq: Vec<f64> = g.iter().map(|x| -x / b).collect();
                let dz = state
                    .predictor
                    .backward(&branch.pred, &dq, &mut grads.predictor);
                state
                    .online
                    .backward(&branch.online, &dz, &mut grads.online);
            }
        }
    }
    Ok((total / b, grads))
}

/// One optimization step on a batch of raw observations.
///
/// Each observation is augmented twice (seeds derived from `seed`); online and
/// predictor take a gradient step, then the target moves toward the new online
/// parameters. Returns the loss before the update. On a non-finite loss or
/// gradient the state is left untouched.
pub fn byol_step(
    state: &mut ByolState,
    batch: &[Vec<f64>],
    cfg: &AugmentConfig,
    lr: f64,
    seed: u64,
) -> Result<f64, EncoderError> {
    if batch.is_empty() {
        return Err(EncoderError::BatchMismatch { left: 0, right: 0 });
    }
    let mut view1 = Vec::with_capacity(batch.len());
    let mut view2 = Vec::with_capacity(batch.len());
    for (i, obs) in batch.iter().enumerate() {
        view1.push(augment(obs, cfg, rng::derive(seed, 2 * i as u64))?);
        view2.push(augment(obs, cfg, rng::derive(seed, 2 * i as u64 + 1))?);
    }
    let diverged = EncoderError::Diverged { step: state.step };
    let (loss, grads) = match byol_loss_and_grads(state, &view1, &view2) {
        Err(EncoderError::NonFinite { .. }) => return Err(diverged),
        other => other?,
    };
    if !loss.is_finite() || !grads.online.is_finite() || !grads.predictor.is_finite() {
        return Err(diverged);
    }
    let mut online = state.online.clone();
    let mut predictor = state.predictor.clone();
    let mut opt = state.opt.clone();
    opt.update(
        online.params_mut().chain(predictor.params_mut()),
        grads.online.params().chain(grads.predictor.params()),
        lr,
    );
    if !online.is_finite() || !predictor.is_finite() {
        return Err(diverged);
    }
    state.online = online;
    state.predictor = predictor;
    state.opt = opt;
    state.update_target();
    state.step += 1;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub augment: AugmentConfig,
    pub optimizer: Optimizer,
    /// Initialize the first layer from a whitening fit on the training observations.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 3e-4,
            tau: 0.99,
            batch_size: 32,
            augment: AugmentConfig::default(),
            optimizer: Optimizer::adam(),
            warm_start: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEncoder {
    pub encoder: Encoder,
    /// Mean batch loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Trains a `byol_mlp` encoder on every frame of `set` and returns the online
/// network; the predictor and target are discarded.
pub fn train_encoder(
    set: &DemoSet,
    spec: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<TrainedEncoder, EncoderError> {
    if spec.obs_dim != set.obs_dim() {
        return Err(EncoderError::DimensionMismatch {
            expected: spec.obs_dim,
            found: set.obs_dim(),
        });
    }
    if cfg.batch_size == 0 {
        return Err(EncoderError::InvalidConfig(
            "batch_size must be positive".into(),
        ));
    }
    cfg.augment.validate()?;
    let mut state = ByolState::new(spec, cfg.tau, cfg.optimizer)?;
    let observations: Vec<Vec<f64>> = set.frames().map(|f| f.frame.observation.clone()).collect();
    if cfg.warm_start {
        let width = spec.hidden_dims[0];
        state.warm_start(&Whitening::fit(&observations, width)?)?;
    }
    let mut order: Vec<usize> = (0..observations.len()).collect();
    let mut shuffle = rng::seeded(rng::derive(cfg.seed, 0));
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| observations[i].clone()).collect();
            let seed = rng::derive(rng::derive(cfg.seed, 1 + epoch as u64), bi as u64);
            sum += byol_step(&mut state, &batch, &cfg.augment, cfg.lr, seed)?;
            batches += 1;
        }
        loss_curve.push(sum / batches as f64);
    }
    Ok(TrainedEncoder {
        encoder: state.into_encoder(),
        loss_curve,
    })
}
