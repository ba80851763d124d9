use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{norm3, round_f32, Action, DataError, DemoSet, Demonstration, Frame, GripperState};
use crate::rng;
use crate::sim::{self, EnvConfig};

pub const DEFAULT_NORM_EPS: f64 = 1e-8;

/// Registered synthetic generators for [`synth_demoset`].
pub const GENERATORS: [&str; 2] = ["expert", "random-walk"];

pub fn normalize_actions(set: &DemoSet) -> Result<DemoSet, DataError> {
    normalize_actions_with(set, DEFAULT_NORM_EPS)
}

/// Scales every translation to unit length. Gripper states are untouched.
///
/// Any translation with norm `<= eps` is an error; all offending
/// `(demo_id, timestep)` pairs are listed.
pub fn normalize_actions_with(set: &DemoSet, eps: f64) -> Result<DemoSet, DataError> {
    let bad: Vec<(usize, usize)> = set
        .frames()
        .filter(|f| f.frame.action.norm() <= eps)
        .map(|f| (f.demo_id, f.timestep))
        .collect();
    if !bad.is_empty() {
        return Err(DataError::ZeroTranslation { frames: bad });
    }
    let demos = set
        .demos()
        .iter()
        .map(|demo| {
            Demonstration::new(
                demo.frames
                    .iter()
                    .map(|f| {
                        let n = f.action.norm();
                        let t = f.action.translation;
                        Frame {
                            observation: f.observation.clone(),
                            action: Action::new([t[0] / n, t[1] / n, t[2] / n], f.action.gripper),
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(set.derive(demos))
}

/// Picks `n` whole demonstrations uniformly without replacement, keeping their
/// original relative order.
pub fn subsample_demos(set: &DemoSet, n: usize, seed: u64) -> Result<DemoSet, DataError> {
    let available = set.num_demos();
    if n == 0 || n > available {
        return Err(DataError::SubsampleRange {
            requested: n,
            available,
        });
    }
    let mut picked = sample(&mut rng::seeded(seed), available, n).into_vec();
    picked.sort_unstable();
    let demos = picked.into_iter().map(|i| set.demos()[i].clone()).collect();
    Ok(set.derive(demos))
}

/// Generates a normalized synthetic dataset.
///
/// `"expert"` runs the scripted expert in the default environment (cabinet
/// identities cycle through the three analogs); `"random-walk"` emits random
/// unit actions over a drifting 8-dimensional state.
pub fn synth_demoset(generator: &str, n_demos: usize, seed: u64) -> Result<DemoSet, DataError> {
    if !GENERATORS.contains(&generator) {
        return Err(DataError::UnknownGenerator(generator.to_string()));
    }
    if n_demos == 0 {
        return Err(DataError::EmptyRequest);
    }
    let mut set = match generator {
        "expert" => sim::expert_demoset(&EnvConfig::default(), n_demos, seed)
            .map_err(|e| DataError::Generator(e.to_string()))?,
        _ => {
            let demos = (0..n_demos)
                .map(|i| random_walk(rng::derive(seed, i as u64)))
                .collect();
            round_demoset(&normalize_actions(&DemoSet::new(demos, RANDOM_WALK_DIM)?)?)
        }
    };
    set.set_metadata("generator", generator);
    set.set_metadata("seed", seed.to_string());
    Ok(set)
}

/// Rounds every observation and translation to the nearest f32, the
/// precision of the on-disk format.
pub fn round_demoset(set: &DemoSet) -> DemoSet {
    let demos = set
        .demos()
        .iter()
        .map(|d| {
            Demonstration::new(
                d.frames
                    .iter()
                    .map(|f| Frame {
                        observation: f.observation.iter().map(|&v| round_f32(v)).collect(),
                        action: Action::new(f.action.translation.map(round_f32), f.action.gripper),
                    })
                    .collect(),
            )
        })
        .collect();
    set.derive(demos)
}

const RANDOM_WALK_DIM: usize = 8;
const RANDOM_WALK_LEN: usize = 20;

fn random_walk(seed: u64) -> Demonstration {
    let mut rng = rng::seeded(seed);
    let mut state: Vec<f64> = (0..RANDOM_WALK_DIM)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let frames = (0..RANDOM_WALK_LEN)
        .map(|_| {
            let dir = loop {
                let v: [f64; 3] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                if norm3(&v) > 1e-6 {
                    break v;
                }
            };
            let gripper = GripperState::ALL[rng.random_range(0..4)];
            let frame = Frame {
                observation: state.clone(),
                action: Action::new(dir, gripper),
            };
            for (s, d) in state.iter_mut().zip(dir) {
                *s += 0.1 * d;
            }
            frame
        })
        .collect();
    Demonstration::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(translations: &[[f64; 3]]) -> DemoSet {
        let frames = translations
            .iter()
            .map(|&t| Frame {
                observation: vec![0.0],
                action: Action::new(t, GripperState::AlmostClosed),
            })
            .collect();
        DemoSet::new(vec![Demonstration::new(frames)], 1).unwrap()
    }

    #[test]
    fn normalizes_axis_and_diagonal() {
        let out = normalize_actions(&set_with(&[[3.0, 0.0, 0.0], [1.0, 1.0, 1.0]])).unwrap();
        let f = &out.demos()[0].frames;
        assert_eq!(f[0].action.translation, [1.0, 0.0, 0.0]);
        let s = 1.0 / 3f64.sqrt();
        for v in f[1].action.translation {
            assert!((v - s).abs() < 1e-12);
            assert!((v - 0.57735).abs() < 1e-5);
        }
        assert_eq!(f[1].action.gripper, GripperState::AlmostClosed);
    }

    #[test]
    fn zero_translation_is_rejected_with_location() {
        let err = normalize_actions(&set_with(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])).unwrap_err();
        match err {
            DataError::ZeroTranslation { frames } => assert_eq!(frames, vec![(0, 1)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn subsample_full_is_identity() {
        let set = synth_demoset("random-walk", 6, 1).unwrap();
        assert_eq!(subsample_demos(&set, 6, 99).unwrap(), set);
    }

    #[test]
    fn subsample_is_deterministic_and_verbatim() {
        let set = synth_demoset("random-walk", 10, 1).unwrap();
        let a = subsample_demos(&set, 1, 3).unwrap();
        let b = subsample_demos(&set, 1, 3).unwrap();
        assert_eq!(a, b);
        for seed in [3, 4] {
            let one = subsample_demos(&set, 1, seed).unwrap();
            assert!(set.demos().contains(&one.demos()[0]));
        }
    }

    #[test]
    fn subsample_out_of_range() {
        let set = synth_demoset("random-walk", 3, 1).unwrap();
        assert!(matches!(
            subsample_demos(&set, 0, 1),
            Err(DataError::SubsampleRange { .. })
        ));
        assert!(matches!(
            subsample_demos(&set, 4, 1),
            Err(DataError::SubsampleRange { .. })
        ));
    }

    #[test]
    fn synth_errors() {
        assert!(matches!(
            synth_demoset("expert", 0, 7),
            Err(DataError::EmptyRequest)
        ));
        assert!(matches!(
            synth_demoset("teleop", 3, 7),
            Err(DataError::UnknownGenerator(_))
        ));
    }

    #[test]
    fn synth_is_deterministic_and_normalized() {
        let a = synth_demoset("expert", 5, 7).unwrap();
        assert_eq!(a, synth_demoset("expert", 5, 7).unwrap());
        assert_eq!(a.num_demos(), 5);
        for f in a.frames() {
            assert!((f.frame.action.norm() - 1.0).abs() < 1e-6);
        }
    }
}
