//! Offline metrics: per-component MSE, k and dataset-size sweeps, latency.

mod latency;
mod sweep;
mod table;

use thiserror::Error;

use crate::data::{DataError, DemoSet};
use crate::encoder::{Encoder, EncoderError};
use crate::policy::{
    bc_rep_predict, predict_embedded, random_policy, BcRep, NeighborIndex, OpenLoopPolicy,
    PolicyConfig, PolicyError,
};

pub use latency::{latency_report, LatencyReport};
pub use sweep::{
    dataset_size_sweep, sweep_k, Cell, PolicyKind, SizeSweep, SweepCurve, SweepOptions, SweepPoint,
};
pub use table::{format_cells, format_curves, format_reports};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{pred} predictions for {truth} targets")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// `(1 / 3N) * sum ||p - t||^2`: the mean over every scalar component.
pub fn mse(pred: &[[f64; 3]], truth: &[[f64; 3]]) -> Result<f64, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok(sum / (3 * pred.len()) as f64)
}

/// Policies that can be scored frame by frame.
#[derive(Debug, Clone)]
pub enum EvalPolicy<'a> {
    /// Raw softmin average, never renormalized.
    Vinn {
        index: &'a NeighborIndex,
        encoder: &'a Encoder,
        cfg: PolicyConfig,
    },
    BcRep(&'a BcRep),
    /// Receives the frame's timestep, not its observation.
    OpenLoop(&'a OpenLoopPolicy),
    /// A fresh random stream per evaluation.
    Random {
        seed: u64,
    },
}

impl EvalPolicy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            EvalPolicy::Vinn { .. } => "vinn",
            EvalPolicy::BcRep(_) => "bc-rep",
            EvalPolicy::OpenLoop(_) => "open-loop",
            EvalPolicy::Random { .. } => "random",
        }
    }

    fn describe(&self) -> String {
        match self {
            EvalPolicy::Vinn {
                encoder,
                cfg,
                index,
            } => {
                format!("k={} encoder={} n={}", cfg.k, encoder.kind(), index.len())
            }
            EvalPolicy::BcRep(p) => format!(
                "encoder={} params={}",
                p.encoder.kind(),
                p.head.param_count()
            ),
            EvalPolicy::OpenLoop(p) => format!("horizon={}", p.horizon()),
            EvalPolicy::Random { seed } => format!("seed={seed}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub policy: String,
    pub mse: f64,
    pub frames: usize,
    pub config: String,
}

impl MseReport {
    /// The MSE expressed in units of 1e-1 (0.634 -> 6.34).
    pub fn mse_x10(&self) -> f64 {
        self.mse * 10.0
    }
}

/// Raw translation predictions for every frame of `test`, in dataset order.
pub fn predict_translations(
    policy: &EvalPolicy<'_>,
    test: &DemoSet,
) -> Result<Vec<[f64; 3]>, EvalError> {
    let mut out = Vec::with_capacity(test.num_frames());
    match policy {
        EvalPolicy::Vinn {
            index,
            encoder,
            cfg,
        } => {
            let cfg = PolicyConfig {
                renormalize_translation: false,
                ..*cfg
            };
            for f in test.frames() {
                let e = encoder.encode(&f.frame.observation)?;
                out.push(predict_embedded(index, &e, &cfg)?.raw_translation);
            }
        }
        EvalPolicy::BcRep(p) => {
            for f in test.frames() {
                let e = p.encoder.encode(&f.frame.observation)?;
                out.push(bc_rep_predict(&p.head, &e, false)?.translation);
            }
        }
        EvalPolicy::OpenLoop(p) => out.extend(test.frames().map(|f| p.translation_at(f.timestep))),
        EvalPolicy::Random { seed } => out.extend(
            random_policy(*seed)
                .take(test.num_frames())
                .map(|a| a.translation),
        ),
    }
    Ok(out)
}

pub fn eval_policy(policy: &EvalPolicy<'_>, test: &DemoSet) -> Result<MseReport, EvalError> {
    let pred = predict_translations(policy, test)?;
    let truth: Vec<[f64; 3]> = test.frames().map(|f| f.frame.action.translation).collect();
    Ok(MseReport {
        policy: policy.name().to_string(),
        mse: mse(&pred, &truth)?,
        frames: truth.len(),
        config: policy.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let a = [[0.3, -0.2, 0.9], [1.0, 0.0, 0.0]];
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let m = mse(&[[1.0, 0.0, 0.0]], &[[0.0, 1.0, 0.0]]).unwrap();
        assert!((m - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            mse(&a, &a[..1]),
            Err(EvalError::LengthMismatch { pred: 2, truth: 1 })
        ));
        assert!(matches!(mse(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn report_scale() {
        let r = MseReport {
            policy: "x".into(),
            mse: 0.634,
            frames: 1,
            config: String::new(),
        };
        assert!((r.mse_x10() - 6.34).abs() < 1e-12);
    }
}
