//! Vector-space augmentations: coordinate dropout, scale jitter, Gaussian noise.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::EncoderError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub noise_std: f64,
    pub dropout_prob: f64,
    pub scale_jitter: (f64, f64),
}

impl AugmentConfig {
    /// No-op configuration.
    pub fn identity() -> Self {
        Self {
            noise_std: 0.0,
            dropout_prob: 0.0,
            scale_jitter: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let (lo, hi) = self.scale_jitter;
        let ok = self.noise_std.is_finite()
            && self.noise_std >= 0.0
            && (0.0..1.0).contains(&self.dropout_prob)
            && lo > 0.0
            && lo <= 1.0
            && hi >= 1.0
            && hi.is_finite();
        if ok {
            Ok(())
        } else {
            Err(EncoderError::InvalidConfig(format!(
                "augmentation {self:?}"
            )))
        }
    }
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            noise_std: 0.01,
            dropout_prob: 0.1,
            scale_jitter: (0.9, 1.1),
        }
    }
}

/// `(obs * mask / (1 - p)) * s + noise`, mask ~ Bernoulli(1 - p) per
/// coordinate, s ~ U[lo, hi], noise ~ N(0, sigma^2 I). Deterministic in `seed`.
pub fn augment(obs: &[f64], cfg: &AugmentConfig, seed: u64) -> Result<Vec<f64>, EncoderError> {
    cfg.validate()?;
    let mut r = rng::seeded(seed);
    let keep = 1.0 - cfg.dropout_prob;
    let mask: Vec<f64> = obs
        .iter()
        .map(|_| {
            if r.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect();
    let (lo, hi) = cfg.scale_jitter;
    let s = lo + (hi - lo) * r.random::<f64>();
    Ok(obs
        .iter()
        .zip(mask)
        .map(|(&x, m)| {
            let noise = if cfg.noise_std > 0.0 {
                cfg.noise_std * r.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            x * m * s + noise
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const OBS: [f64; 5] = [0.5, -1.0, 2.0, 0.0, 3.25];

    #[test]
    fn identity_config_is_identity() {
        assert_eq!(
            augment(&OBS, &AugmentConfig::identity(), 9).unwrap(),
            OBS.to_vec()
        );
    }

    #[test]
    fn pure_scale_multiplies_every_coordinate_by_one_draw() {
        let cfg = AugmentConfig {
            scale_jitter: (0.5, 2.0),
            ..AugmentConfig::identity()
        };
        let out = augment(&OBS, &cfg, 1).unwrap();
        let s = out[0] / OBS[0];
        assert!((0.5..=2.0).contains(&s));
        for (o, x) in out.iter().zip(OBS) {
            assert!((o - s * x).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_scale_outside_band_is_rejected() {
        let cfg = AugmentConfig {
            scale_jitter: (2.0, 2.0),
            ..AugmentConfig::identity()
        };
        assert!(augment(&OBS, &cfg, 1).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = AugmentConfig::default();
        assert_eq!(
            augment(&OBS, &cfg, 4).unwrap(),
            augment(&OBS, &cfg, 4).unwrap()
        );
        assert_ne!(
            augment(&OBS, &cfg, 4).unwrap(),
            augment(&OBS, &cfg, 5).unwrap()
        );
    }

    #[test]
    fn dropout_is_mean_preserving() {
        let cfg = AugmentConfig {
            dropout_prob: 0.3,
            ..AugmentConfig::identity()
        };
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|s| augment(&[1.0], &cfg, s).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            AugmentConfig {
                noise_std: -1.0,
                ..AugmentConfig::identity()
            },
            AugmentConfig {
                dropout_prob: 1.0,
                ..AugmentConfig::identity()
            },
            AugmentConfig {
                scale_jitter: (0.0, 1.0),
                ..AugmentConfig::identity()
            },
            AugmentConfig {
                scale_jitter: (0.5, 0.9),
                ..AugmentConfig::identity()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
