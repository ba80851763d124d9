//! Encoders that are fit once and never trained: random projection and PCA whitening.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::EncoderError;
use crate::data::round_f32;
use crate::rng;

/// Gaussian random projection, entries N(0, 1/d). Depends only on the seed.
///
/// Fixed encoders keep their parameters at f32 precision so a checkpoint
/// reloads exactly the encoder that was saved.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProjection {
    pub(crate) obs_dim: usize,
    pub(crate) embed_dim: usize,
    /// `embed_dim x obs_dim`, row-major.
    pub(crate) matrix: Vec<f64>,
}

impl RandomProjection {
    pub fn new(obs_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let scale = 1.0 / (embed_dim as f64).sqrt();
        let matrix = (0..obs_dim * embed_dim)
            .map(|_| round_f32(scale * r.sample::<f64, _>(StandardNormal)))
            .collect();
        Self {
            obs_dim,
            embed_dim,
            matrix,
        }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.obs_dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// PCA whitening onto the top `embed_dim` principal directions:
/// `y = W (x - mean)`, `W = diag(lambda)^(-1/2) U^T`.
///
/// Uses the population covariance (divide by N), so the fitting data maps to
/// zero mean and exactly unit population variance per output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    pub(crate) obs_dim: usize,
    pub(crate) embed_dim: usize,
    pub(crate) mean: Vec<f64>,
    /// `embed_dim x obs_dim`, row-major.
    pub(crate) transform: Vec<f64>,
}

/// Relative eigenvalue floor below which a principal direction counts as degenerate.
const RANK_TOL: f64 = 1e-10;

impl Whitening {
    pub fn fit(observations: &[Vec<f64>], embed_dim: usize) -> Result<Self, EncoderError> {
        let n = observations.len();
        let obs_dim = observations.first().map_or(0, Vec::len);
        if obs_dim == 0 {
            return Err(EncoderError::InvalidConfig(
                "whitening needs observations".into(),
            ));
        }
        if embed_dim == 0 || embed_dim > obs_dim {
            return Err(EncoderError::InvalidConfig(format!(
                "whitening embed_dim {embed_dim} must be in 1..={obs_dim}"
            )));
        }
        if let Some(bad) = observations.iter().position(|o| o.len() != obs_dim) {
            return Err(EncoderError::DimensionMismatch {
                expected: obs_dim,
                found: observations[bad].len(),
            });
        }
        let mut mean = vec![0.0; obs_dim];
        for o in observations {
            for (m, v) in mean.iter_mut().zip(o) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = DMatrix::<f64>::zeros(obs_dim, obs_dim);
        for o in observations {
            let c: Vec<f64> = o.iter().zip(&mean).map(|(v, m)| v - m).collect();
            for i in 0..obs_dim {
                for j in 0..=i {
                    cov[(i, j)] += c[i] * c[j];
                }
            }
        }
        for i in 0..obs_dim {
            for j in 0..=i {
                let v = cov[(i, j)] / n as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..obs_dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let floor = RANK_TOL * top.max(f64::MIN_POSITIVE);
        let deficient: Vec<usize> = (0..embed_dim)
            .filter(|&k| !(eig.eigenvalues[order[k]] > floor) || top == 0.0)
            .collect();
        if !deficient.is_empty() {
            let rank = (0..obs_dim)
                .filter(|&k| top > 0.0 && eig.eigenvalues[order[k]] > floor)
                .count();
            return Err(EncoderError::RankDeficient {
                rank,
                requested: embed_dim,
                deficient,
            });
        }
        let mut transform = Vec::with_capacity(embed_dim * obs_dim);
        for &k in order.iter().take(embed_dim) {
            let s = 1.0 / eig.eigenvalues[k].sqrt();
            transform.extend(eig.eigenvectors.column(k).iter().map(|u| round_f32(u * s)));
        }
        let mean = mean.into_iter().map(round_f32).collect();
        Ok(Self {
            obs_dim,
            embed_dim,
            mean,
            transform,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn transform(&self) -> &[f64] {
        &self.transform
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        self.transform
            .chunks_exact(self.obs_dim)
            .map(|row| row.iter().zip(&c).map(|(a, b)| a * b).sum())
            .collect()
    }
}
