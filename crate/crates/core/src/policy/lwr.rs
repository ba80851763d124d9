//! Locally weighted regression with a Euclidean (exp(-d)) kernel.

use super::index::NeighborSet;

/// Softmin over distances: `w_i = exp(-d_i) / sum_j exp(-d_j)`.
///
/// Computed as `exp(-(d_i - d_min))` so that large distances do not underflow
/// every weight to zero; the shift cancels in the normalization.
pub fn softmin_weights(distances: &[f64]) -> Vec<f64> {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = distances.iter().map(|d| (-(d - min)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LwrOutput {
    pub translation: [f64; 3],
    /// Weighted average of gripper codes, in `[0, 3]`.
    pub gripper: f64,
}

/// Kernel-weighted average of the neighbors' actions.
pub fn lwr_action(nbrs: &NeighborSet) -> LwrOutput {
    let distances: Vec<f64> = nbrs.entries().iter().map(|e| e.distance).collect();
    let weights = softmin_weights(&distances);
    let entries = nbrs.entries();
    // seeded with the first term so that k = 1 reproduces the action bit for bit
    let mut acc = entries[0].action.map(|v| weights[0] * v);
    for (w, e) in weights.iter().zip(entries).skip(1) {
        for (a, v) in acc.iter_mut().zip(e.action) {
            *a += w * v;
        }
    }
    LwrOutput {
        translation: [acc[0], acc[1], acc[2]],
        gripper: acc[3],
    }
}
