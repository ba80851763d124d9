use std::time::{Duration, Instant};

use rand_distr::{Distribution, StandardNormal};

use super::EvalError;
use crate::encoder::Encoder;
use crate::policy::NeighborIndex;
use crate::rng;

const WARMUP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub index_rows: usize,
    pub embed_dim: usize,
    pub obs_dim: usize,
    pub k: usize,
    pub queries: usize,
    /// Mean wall-clock time per call.
    pub encode_time: Duration,
    pub query_time: Duration,
}

/// Times `encode` and `nearest` separately on `n_queries` standard-normal
/// observations after a short warm-up.
pub fn latency_report(
    index: &NeighborIndex,
    encoder: &Encoder,
    k: usize,
    n_queries: usize,
    seed: u64,
) -> Result<LatencyReport, EvalError> {
    if n_queries < 100 {
        return Err(EvalError::InvalidSweep(
            "latency needs at least 100 queries".into(),
        ));
    }
    let mut r = rng::seeded(seed);
    let obs: Vec<Vec<f64>> = (0..n_queries + WARMUP)
        .map(|_| {
            (0..encoder.obs_dim())
                .map(|_| StandardNormal.sample(&mut r))
                .collect()
        })
        .collect();
    for o in &obs[..WARMUP] {
        let e = encoder.encode(o)?;
        std::hint::black_box(index.nearest(&e, k)?);
    }
    let mut encode_time = Duration::ZERO;
    let mut query_time = Duration::ZERO;
    for o in &obs[WARMUP..] {
        let t0 = Instant::now();
        let e = std::hint::black_box(encoder.encode(o)?);
        let t1 = Instant::now();
        std::hint::black_box(index.nearest(&e, k)?);
        query_time += t1.elapsed();
        encode_time += t1 - t0;
    }
    Ok(LatencyReport {
        index_rows: index.len(),
        embed_dim: index.dim(),
        obs_dim: encoder.obs_dim(),
        k,
        queries: n_queries,
        encode_time: encode_time / n_queries as u32,
        query_time: query_time / n_queries as u32,
    })
}
