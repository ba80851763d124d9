use std::fmt;
use std::str::FromStr;

use super::{eval_policy, mse, EvalError, EvalPolicy};
use crate::data::{subsample_demos, DemoSet};
use crate::encoder::{embed_demoset, fit_encoder, Encoder, EncoderSpec, TrainConfig};
use crate::policy::{
    bc_rep_fit, build_index, lwr_action, open_loop_fit, BcConfig, BcRep, NeighborIndex,
    NeighborSet, PolicyConfig,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// `k` or the number of training demonstrations.
    pub x: usize,
    /// Mean over seeds.
    pub mse: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    /// Strictly increasing in `x`.
    pub points: Vec<SweepPoint>,
    pub seeds: Vec<u64>,
}

impl SweepCurve {
    pub fn at(&self, x: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.x == x)
    }
}

fn check_increasing(xs: &[usize], what: &str) -> Result<(), EvalError> {
    if xs.is_empty() || xs.contains(&0) || xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidSweep(format!(
            "{what} must be positive and strictly increasing, got {xs:?}"
        )));
    }
    Ok(())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// VINN test MSE for each `k`. Every query is searched once at `max(ks)`;
/// smaller `k` reuse the sorted prefix, which is exactly what a direct
/// `k`-query returns. The result does not depend on `seeds`, which are only
/// recorded.
pub fn sweep_k(
    index: &NeighborIndex,
    encoder: &Encoder,
    test: &DemoSet,
    ks: &[usize],
    seeds: &[u64],
) -> Result<SweepCurve, EvalError> {
    check_increasing(ks, "ks")?;
    let kmax = *ks.last().unwrap();
    let mut preds: Vec<Vec<[f64; 3]>> = vec![Vec::new(); ks.len()];
    let mut truth = Vec::new();
    for f in test.frames() {
        let e = encoder.encode(&f.frame.observation)?;
        let nbrs = index.nearest(&e, kmax)?;
        truth.push(f.frame.action.translation);
        for (p, &k) in preds.iter_mut().zip(ks) {
            let prefix = NeighborSet::new(nbrs.entries()[..k].to_vec()).expect("k >= 1");
            p.push(lwr_action(&prefix).translation);
        }
    }
    let points = ks
        .iter()
        .zip(&preds)
        .map(|(&k, p)| {
            Ok(SweepPoint {
                x: k,
                mse: mse(p, &truth)?,
                std: 0.0,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(SweepCurve {
        points,
        seeds: seeds.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Vinn,
    BcRep,
    OpenLoop,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Vinn,
        PolicyKind::BcRep,
        PolicyKind::OpenLoop,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Vinn => "vinn",
            PolicyKind::BcRep => "bc-rep",
            PolicyKind::OpenLoop => "open-loop",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| EvalError::InvalidSweep(format!("unknown policy {s:?}")))
    }
}

/// How each cell of a dataset-size sweep trains its policies.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// The spec's seed is replaced per cell.
    pub encoder: EncoderSpec,
    pub train: TrainConfig,
    pub policy: PolicyConfig,
    /// The BC head's seed is replaced per cell.
    pub bc: BcConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub policy: PolicyKind,
    pub x: usize,
    pub seed: u64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeSweep {
    /// One entry per (size, seed, policy), in that nesting order.
    pub cells: Vec<Cell>,
    pub curves: Vec<(PolicyKind, SweepCurve)>,
}

/// Cell seeds: subsample `derive(seed, size)`, encoder `derive(seed, 1)`,
/// BC head and random policy `derive(seed, 2)`. With `size == |train|` the
/// subsample is the full set in its original order.
pub fn dataset_size_sweep(
    train: &DemoSet,
    test: &DemoSet,
    sizes: &[usize],
    seeds: &[u64],
    policies: &[PolicyKind],
    opts: &SweepOptions,
) -> Result<SizeSweep, EvalError> {
    check_increasing(sizes, "sizes")?;
    if seeds.is_empty() || policies.is_empty() {
        return Err(EvalError::InvalidSweep(
            "need at least one seed and one policy".into(),
        ));
    }
    let mut cells = Vec::new();
    for &size in sizes {
        for &seed in seeds {
            let sub = subsample_demos(train, size, rng::derive(seed, size as u64))?;
            let needs_encoder = policies
                .iter()
                .any(|p| matches!(p, PolicyKind::Vinn | PolicyKind::BcRep));
            let trained = if needs_encoder {
                let spec = EncoderSpec {
                    seed: rng::derive(seed, 1),
                    ..opts.encoder.clone()
                };
                let train_cfg = TrainConfig {
                    seed: rng::derive(seed, 1),
                    ..opts.train.clone()
                };
                let encoder = fit_encoder(&sub, &spec, &train_cfg)?;
                let emb = embed_demoset(&encoder, &sub)?;
                Some((encoder, emb))
            } else {
                None
            };
            for &kind in policies {
                let report = match kind {
                    PolicyKind::Vinn => {
                        let (encoder, emb) = trained.as_ref().unwrap();
                        let index = build_index(emb)?;
                        let cfg = PolicyConfig {
                            k: opts.policy.k.min(index.len()),
                            ..opts.policy
                        };
                        eval_policy(
                            &EvalPolicy::Vinn {
                                index: &index,
                                encoder,
                                cfg,
                            },
                            test,
                        )?
                    }
                    PolicyKind::BcRep => {
                        let (encoder, emb) = trained.as_ref().unwrap();
                        let bc = BcConfig {
                            seed: rng::derive(seed, 2),
                            ..opts.bc.clone()
                        };
                        let policy = BcRep::new(encoder.clone(), bc_rep_fit(emb, &bc)?)?;
                        eval_policy(&EvalPolicy::BcRep(&policy), test)?
                    }
                    PolicyKind::OpenLoop => {
                        let ol = open_loop_fit(&sub, opts.policy.gripper_thresholds);
                        eval_policy(&EvalPolicy::OpenLoop(&ol), test)?
                    }
                    PolicyKind::Random => eval_policy(
                        &EvalPolicy::Random {
                            seed: rng::derive(seed, 2),
                        },
                        test,
                    )?,
                };
                cells.push(Cell {
                    policy: kind,
                    x: size,
                    seed,
                    mse: report.mse,
                });
            }
        }
    }
    let curves = policies
        .iter()
        .map(|&kind| {
            let points = sizes
                .iter()
                .map(|&x| {
                    let v: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.policy == kind && c.x == x)
                        .map(|c| c.mse)
                        .collect();
                    let (mse, std) = mean_std(&v);
                    SweepPoint { x, mse, std }
                })
                .collect();
            (
                kind,
                SweepCurve {
                    points,
                    seeds: seeds.to_vec(),
                },
            )
        })
        .collect();
    Ok(SizeSweep { cells, curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn increasing_check() {
        assert!(check_increasing(&[1, 2, 4], "ks").is_ok());
        assert!(check_increasing(&[1, 1], "ks").is_err());
        assert!(check_increasing(&[0, 1], "ks").is_err());
        assert!(check_increasing(&[], "ks").is_err());
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("bc".parse::<PolicyKind>().is_err());
    }
}
