//! Random and open-loop baselines.

use rand::Rng as _;

use super::map_gripper;
use crate::data::{norm3, Action, DemoSet, GripperState};
use crate::rng::{self, Rng};

/// Endless stream of uniformly random actions: translation drawn from
/// `[-1, 1]^3` and normalized, gripper uniform over the four states.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: Rng,
}

pub fn random_policy(seed: u64) -> RandomPolicy {
    RandomPolicy {
        rng: rng::seeded(seed),
    }
}

impl RandomPolicy {
    pub fn next_action(&mut self) -> Action {
        let t = loop {
            let v: [f64; 3] = std::array::from_fn(|_| self.rng.random_range(-1.0..=1.0));
            let n = norm3(&v);
            if n > 1e-12 {
                break v.map(|x| x / n);
            }
        };
        let g = GripperState::ALL[self.rng.random_range(0..4)];
        Action::new(t, g)
    }
}

impl Iterator for RandomPolicy {
    type Item = Action;

    fn next(&mut self) -> Option<Action> {
        Some(self.next_action())
    }
}

/// Time-indexed mean action `a(t)` over all demonstrations.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopPolicy {
    /// `[tx, ty, tz, mean gripper code]` per timestep.
    means: Vec<[f64; 4]>,
    thresholds: [f64; 3],
}

pub fn open_loop_fit(train: &DemoSet, thresholds: [f64; 3]) -> OpenLoopPolicy {
    let len = train.max_len();
    let mut means = vec![[0.0; 4]; len];
    let mut counts = vec![0usize; len];
    // Running mean: identical inputs give back exactly that value.
    for f in train.frames() {
        counts[f.timestep] += 1;
        let n = counts[f.timestep] as f64;
        for (m, v) in means[f.timestep].iter_mut().zip(f.frame.action.as_vector()) {
            *m += (v - *m) / n;
        }
    }
    OpenLoopPolicy { means, thresholds }
}

impl OpenLoopPolicy {
    pub fn horizon(&self) -> usize {
        self.means.len()
    }

    fn mean_at(&self, t: usize) -> &[f64; 4] {
        &self.means[t.min(self.means.len() - 1)]
    }

    /// Mean translation at `t`; timesteps past the longest demo clamp to the last one.
    pub fn translation_at(&self, t: usize) -> [f64; 3] {
        let m = self.mean_at(t);
        [m[0], m[1], m[2]]
    }

    pub fn action_at(&self, t: usize) -> Action {
        let m = self.mean_at(t);
        Action::new([m[0], m[1], m[2]], map_gripper(m[3], &self.thresholds))
    }
}
