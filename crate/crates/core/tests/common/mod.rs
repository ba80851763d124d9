//! Reference implementations shared by the integration tests and the
//! acceptance runner. They are deliberately naive and share no code with the
//! library beyond plain data accessors.
#![allow(dead_code)]

use rand::Rng as _;
use vinn::encoder::{byol_loss, byol_loss_and_grads, ByolState, Dense, Mlp, Optimizer};
use vinn::policy::NeighborIndex;
use vinn::rng::{self, Rng};

/// The appendix pseudocode: distance to every row, sort, take k, weight each
/// neighbor by `exp(-d)` and divide by the total weight. Returns translation
/// and gripper code.
pub fn pseudocode_predict(
    rows: &[Vec<f64>],
    actions: &[[f64; 4]],
    query: &[f64],
    k: usize,
) -> [f64; 4] {
    let mut dist_list: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d2: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2.sqrt(), i)
        })
        .collect();
    dist_list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut top = [0.0; 4];
    let mut bottom = 0.0;
    for &(d, i) in &dist_list[..k] {
        let w = (-d).exp();
        for c in 0..4 {
            top[c] += w * actions[i][c];
        }
        bottom += w;
    }
    top.map(|v| v / bottom)
}

/// Brute-force k nearest rows as (distance, row), ties by row.
pub fn brute_force_knn(rows: &[Vec<f64>], query: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            (
                r.iter()
                    .zip(query)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt(),
                i,
            )
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

pub struct Instance {
    pub rows: Vec<Vec<f64>>,
    pub actions: Vec<[f64; 4]>,
    pub index: NeighborIndex,
}

/// Random index: embeddings U[-1,1]^d, unit translations, gripper codes 0..=3.
pub fn random_instance(r: &mut Rng, n: usize, d: usize) -> Instance {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let actions: Vec<[f64; 4]> = (0..n)
        .map(|_| {
            let t: [f64; 3] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
            let n = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt().max(1e-9);
            [t[0] / n, t[1] / n, t[2] / n, r.random_range(0..4u8) as f64]
        })
        .collect();
    let index = NeighborIndex::new(
        d,
        rows.concat(),
        actions.clone(),
        (0..n as u32).map(|i| (0, i)).collect(),
    )
    .unwrap();
    Instance {
        rows,
        actions,
        index,
    }
}

/// Forward pass written out from the layer parameters.
// Index loops on purpose: this mirrors the textbook formula, not the library.
#[allow(clippy::needless_range_loop)]
pub fn mlp_forward(m: &Mlp, x: &[f64]) -> Vec<f64> {
    let n = m.layers().len();
    let mut h = x.to_vec();
    for (li, l) in m.layers().iter().enumerate() {
        let mut out = vec![0.0; l.outputs];
        for (o, v) in out.iter_mut().enumerate() {
            *v = l.bias[o];
            for i in 0..l.inputs {
                *v += l.weights[o * l.inputs + i] * h[i];
            }
            if li + 1 < n && *v < 0.0 {
                *v = 0.0;
            }
        }
        h = out;
    }
    h
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Symmetrized BYOL loss from independent forward passes.
pub fn byol_loss_oracle(s: &ByolState, v1: &[Vec<f64>], v2: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (a, b) in v1.iter().zip(v2) {
        let qa = mlp_forward(&s.predictor, &mlp_forward(&s.online, a));
        let qb = mlp_forward(&s.predictor, &mlp_forward(&s.online, b));
        let za = mlp_forward(&s.target, a);
        let zb = mlp_forward(&s.target, b);
        total += (2.0 - 2.0 * cos(&qa, &zb) + 2.0 - 2.0 * cos(&qb, &za)) / 2.0;
    }
    total / v1.len() as f64
}

/// A tiny randomly initialized BYOL state with a perturbed target and a batch
/// of two views.
pub fn tiny_byol(seed: u64) -> (ByolState, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = rng::seeded(seed);
    let obs = r.random_range(2..5usize);
    let hidden = r.random_range(3..7usize);
    let embed = r.random_range(2..4usize);
    let mut online = Mlp::he(&[obs, hidden, embed], &mut r);
    let mut predictor = Mlp::he(&[embed, embed + 1, embed], &mut r);
    // nonzero biases keep a fully inactive ReLU layer from zeroing the output
    for l in online.layers_mut().iter_mut().chain(predictor.layers_mut()) {
        for b in &mut l.bias {
            *b = r.random_range(-0.5..0.5);
        }
    }
    let mut s = ByolState::from_parts(online, predictor, 0.9, Optimizer::Sgd).unwrap();
    for p in s.target.params_mut() {
        *p += 0.3 * r.random_range(-1.0..1.0);
    }
    let batch = r.random_range(1..4usize);
    let mut view = || -> Vec<Vec<f64>> {
        (0..batch)
            .map(|_| (0..obs).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect()
    };
    let (v1, v2) = (view(), view());
    (s, v1, v2)
}

/// Largest relative error between analytic and central-difference gradients
/// (online and predictor parameters, target held fixed). Entries whose
/// absolute difference is below 1e-9 count as exact.
pub fn byol_gradient_error(seed: u64) -> f64 {
    let (s, v1, v2) = tiny_byol(seed);
    let (_, g) = byol_loss_and_grads(&s, &v1, &v2).unwrap();
    let analytic: Vec<f64> = g
        .online
        .params()
        .chain(g.predictor.params())
        .copied()
        .collect();
    let n_online = s.online.param_count();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let shifted = |delta: f64| {
            let mut t = s.clone();
            if i < n_online {
                *t.online.params_mut().nth(i).unwrap() += delta;
            } else {
                *t.predictor.params_mut().nth(i - n_online).unwrap() += delta;
            }
            byol_loss(&t, &v1, &v2).unwrap()
        };
        let num = (shifted(h) - shifted(-h)) / (2.0 * h);
        let abs = (a - num).abs();
        if abs < 1e-9 {
            continue;
        }
        worst = worst.max(abs / a.abs().max(num.abs()));
    }
    worst
}

/// VINN over `n` expert demonstrations with the identity encoder.
pub fn expert_vinn(n: usize, seed: u64, cfg: vinn::policy::PolicyConfig) -> vinn::policy::Vinn {
    let set = vinn::sim::expert_demoset(&vinn::sim::EnvConfig::default(), n, seed).unwrap();
    let enc = vinn::Encoder::Identity { dim: set.obs_dim() };
    let index =
        vinn::policy::build_index(&vinn::encoder::embed_demoset(&enc, &set).unwrap()).unwrap();
    vinn::policy::Vinn::new(index, enc, cfg).unwrap()
}

/// Observations drawn around the expert's working range, rounded to f32 so
/// they cross the wire unchanged.
pub fn wire_observations(r: &mut Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| vinn::data::round_f32(r.random_range(-15.0..15.0)))
                .collect()
        })
        .collect()
}

fn linear(w: [[f64; 2]; 2]) -> Mlp {
    Mlp::from_layers(vec![Dense {
        inputs: 2,
        outputs: 2,
        weights: w.concat(),
        bias: vec![0.0; 2],
    }])
    .unwrap()
}

/// Identity online network and predictor with a linear 2x2 target, so the
/// cosine between prediction and target is set by `target` alone.
pub fn aligned_state(target: [[f64; 2]; 2]) -> ByolState {
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let mut s = ByolState::from_parts(linear(id), linear(id), 0.99, Optimizer::Sgd).unwrap();
    s.target = linear(target);
    s
}
