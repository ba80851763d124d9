//! Behavior cloning on frozen representations: an MLP regressing the
//! translation and a linear layer classifying the gripper state.

use rand::seq::SliceRandom;

use super::{renormalize, PolicyError};
use crate::data::{Action, EmbeddingMatrix, GripperState};
use crate::encoder::{Dense, Encoder, Mlp, Optimizer, OptimizerState};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BcHead {
    pub translation: Mlp,
    /// `embed_dim -> 4` gripper logits.
    pub gripper: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcConfig {
    /// Hidden widths of the translation MLP (output width 3 is implied).
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    /// Minibatch size; 0 trains full-batch.
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![64],
            epochs: 8000,
            lr: 1e-3,
            batch_size: 0,
            optimizer: Optimizer::adam(),
            seed: 0,
        }
    }
}

impl BcHead {
    pub fn init(embed_dim: usize, hidden_dims: &[usize], seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut widths = vec![embed_dim];
        widths.extend(hidden_dims);
        widths.push(3);
        Self {
            translation: Mlp::he(&widths, &mut r),
            gripper: Dense::he(embed_dim, 4, &mut r),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.gripper.inputs
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            translation: self.translation.zeros_like(),
            gripper: Dense::zeros(self.gripper.inputs, self.gripper.outputs),
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> + '_ {
        self.translation
            .params()
            .chain(self.gripper.weights.iter())
            .chain(self.gripper.bias.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.translation
            .params_mut()
            .chain(self.gripper.weights.iter_mut())
            .chain(self.gripper.bias.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.translation.param_count() + self.gripper.weights.len() + self.gripper.bias.len()
    }

    pub fn logits(&self, e: &[f64]) -> [f64; 4] {
        let mut out = Vec::with_capacity(4);
        self.gripper.apply(e, &mut out);
        [out[0], out[1], out[2], out[3]]
    }
}

fn softmax(logits: &[f64; 4]) -> [f64; 4] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Mean over `rows` of `mean_c (t_c - y_c)^2 + cross_entropy(gripper)`, with gradients.
pub fn bc_rep_loss_and_grads(
    head: &BcHead,
    emb: &EmbeddingMatrix,
    rows: &[usize],
) -> (f64, BcHead) {
    let mut grads = head.zeros_like();
    let n = rows.len() as f64;
    let mut total = 0.0;
    for &i in rows {
        let e = emb.row(i);
        let a = emb.actions()[i];
        let cache = head.translation.forward_cached(e);
        let y = cache.output();
        let mut dy = [0.0; 3];
        for c in 0..3 {
            let diff = y[c] - a.translation[c];
            total += diff * diff / 3.0;
            dy[c] = 2.0 * diff / 3.0 / n;
        }
        head.translation
            .backward(&cache, &dy, &mut grads.translation);

        let logits = head.logits(e);
        let p = softmax(&logits);
        let label = a.gripper.code() as usize;
        total += -p[label].max(f64::MIN_POSITIVE).ln();
        let g = &mut grads.gripper;
        for (o, po) in p.iter().enumerate() {
            let d = (po - if o == label { 1.0 } else { 0.0 }) / n;
            g.bias[o] += d;
            for (w, x) in g.weights[o * g.inputs..(o + 1) * g.inputs]
                .iter_mut()
                .zip(e)
            {
                *w += d * x;
            }
        }
    }
    (total / n, grads)
}

/// Trains a head on frozen embeddings. Deterministic in `cfg.seed`.
pub fn bc_rep_fit(emb: &EmbeddingMatrix, cfg: &BcConfig) -> Result<BcHead, PolicyError> {
    if emb.is_empty() {
        return Err(PolicyError::EmptyIndex);
    }
    if cfg.hidden_dims.contains(&0) {
        return Err(PolicyError::InvalidConfig(
            "hidden widths must be positive".into(),
        ));
    }
    let mut head = BcHead::init(emb.dim(), &cfg.hidden_dims, cfg.seed);
    let mut opt = OptimizerState::new(cfg.optimizer, head.param_count());
    let mut order: Vec<usize> = (0..emb.len()).collect();
    let mut shuffle = rng::seeded(rng::derive(cfg.seed, 1));
    let batch = if cfg.batch_size == 0 {
        emb.len()
    } else {
        cfg.batch_size
    };
    for epoch in 0..cfg.epochs {
        if batch < emb.len() {
            order.shuffle(&mut shuffle);
        }
        for chunk in order.chunks(batch) {
            let (loss, grads) = bc_rep_loss_and_grads(&head, emb, chunk);
            if !loss.is_finite() || !grads.params().all(|g| g.is_finite()) {
                return Err(PolicyError::Diverged { epoch });
            }
            opt.update(head.params_mut(), grads.params(), cfg.lr);
        }
    }
    if !head.params().all(|p| p.is_finite()) {
        return Err(PolicyError::Diverged { epoch: cfg.epochs });
    }
    Ok(head)
}

/// Translation from the regression head (optionally renormalized) and the
/// arg-max gripper class (lowest index on ties).
pub fn bc_rep_predict(head: &BcHead, e: &[f64], renorm: bool) -> Result<Action, PolicyError> {
    if e.len() != head.embed_dim() {
        return Err(PolicyError::DimensionMismatch {
            expected: head.embed_dim(),
            found: e.len(),
        });
    }
    let y = head.translation.forward(e);
    let t = [y[0], y[1], y[2]];
    let t = if renorm { renormalize(t)? } else { t };
    let logits = head.logits(e);
    let mut best = 0;
    for (i, l) in logits.iter().enumerate() {
        if *l > logits[best] {
            best = i;
        }
    }
    Ok(Action::new(t, GripperState::ALL[best]))
}

/// A trained head together with the frozen encoder it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct BcRep {
    pub encoder: Encoder,
    pub head: BcHead,
}

impl BcRep {
    pub fn new(encoder: Encoder, head: BcHead) -> Result<Self, PolicyError> {
        if encoder.embed_dim() != head.embed_dim() {
            return Err(PolicyError::DimensionMismatch {
                expected: head.embed_dim(),
                found: encoder.embed_dim(),
            });
        }
        Ok(Self { encoder, head })
    }

    pub fn predict(&self, obs: &[f64], renorm: bool) -> Result<Action, PolicyError> {
        bc_rep_predict(&self.head, &self.encoder.encode(obs)?, renorm)
    }
}
