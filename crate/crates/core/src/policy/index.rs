//! Exact k-nearest-neighbor index over demonstration embeddings.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::PolicyError;
use crate::data::EmbeddingMatrix;

/// Immutable store of `(embedding, action)` pairs. Actions are kept as
/// `[tx, ty, tz, gripper_code]` floats so they can be averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    dim: usize,
    embeddings: Vec<f64>,
    actions: Vec<[f64; 4]>,
    provenance: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    /// `[tx, ty, tz, gripper_code]`
    pub action: [f64; 4],
    pub row: usize,
}

/// k neighbors sorted by ascending distance, ties by ascending row.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    entries: Vec<Neighbor>,
}

impl NeighborSet {
    /// Accepts any non-empty list; entries are re-sorted into canonical order.
    pub fn new(mut entries: Vec<Neighbor>) -> Option<Self> {
        if entries.is_empty()
            || entries
                .iter()
                .any(|e| !(e.distance >= 0.0) || !e.distance.is_finite())
        {
            return None;
        }
        entries.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.row.cmp(&b.row)));
        Some(Self { entries })
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nearest_distance(&self) -> f64 {
        self.entries[0].distance
    }
}

#[derive(PartialEq)]
struct Candidate {
    distance: f64,
    row: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.row.cmp(&other.row))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Rows scanned per block before their distances are offered to the heap.
const BLOCK_ROWS: usize = 256;

impl NeighborIndex {
    pub fn new(
        dim: usize,
        embeddings: Vec<f64>,
        actions: Vec<[f64; 4]>,
        provenance: Vec<(u32, u32)>,
    ) -> Result<Self, PolicyError> {
        if dim == 0 {
            return Err(PolicyError::InvalidConfig(
                "index dimension must be positive".into(),
            ));
        }
        let n = actions.len();
        if n == 0 {
            return Err(PolicyError::EmptyIndex);
        }
        if embeddings.len() != n * dim || provenance.len() != n {
            return Err(PolicyError::InvalidConfig(format!(
                "inconsistent index arrays: {} values, {} actions, {} provenance entries, dim {dim}",
                embeddings.len(),
                n,
                provenance.len()
            )));
        }
        if let Some(i) = embeddings.iter().position(|v| !v.is_finite()) {
            return Err(PolicyError::NonFiniteEmbedding { row: i / dim });
        }
        if let Some(i) = actions
            .iter()
            .position(|a| !a.iter().all(|v| v.is_finite()))
        {
            return Err(PolicyError::NonFiniteEmbedding { row: i });
        }
        Ok(Self {
            dim,
            embeddings,
            actions,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn embedding(&self, row: usize) -> &[f64] {
        &self.embeddings[row * self.dim..(row + 1) * self.dim]
    }

    pub fn embeddings(&self) -> &[f64] {
        &self.embeddings
    }

    pub fn actions(&self) -> &[[f64; 4]] {
        &self.actions
    }

    pub fn provenance(&self) -> &[(u32, u32)] {
        &self.provenance
    }

    /// Exact k nearest rows by Euclidean distance.
    pub fn nearest(&self, query: &[f64], k: usize) -> Result<NeighborSet, PolicyError> {
        if query.len() != self.dim {
            return Err(PolicyError::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        if !query.iter().all(|v| v.is_finite()) {
            return Err(PolicyError::NonFiniteQuery);
        }
        if k == 0 || k > self.len() {
            return Err(PolicyError::KOutOfRange { k, n: self.len() });
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut block = [0.0f64; BLOCK_ROWS];
        let stride = BLOCK_ROWS * self.dim;
        for (b, chunk) in self.embeddings.chunks(stride).enumerate() {
            let rows = chunk.len() / self.dim;
            for (slot, row) in block.iter_mut().zip(chunk.chunks_exact(self.dim)) {
                *slot = row
                    .iter()
                    .zip(query)
                    .map(|(a, q)| (a - q) * (a - q))
                    .sum::<f64>()
                    .sqrt();
            }
            for (j, &distance) in block[..rows].iter().enumerate() {
                let cand = Candidate {
                    distance,
                    row: b * BLOCK_ROWS + j,
                };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("k >= 1") {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        let entries = heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                distance: c.distance,
                action: self.actions[c.row],
                row: c.row,
            })
            .collect();
        Ok(NeighborSet { entries })
    }
}

/// Builds an index whose rows follow the matrix (dataset) order.
pub fn build_index(emb: &EmbeddingMatrix) -> Result<NeighborIndex, PolicyError> {
    NeighborIndex::new(
        emb.dim(),
        emb.values().to_vec(),
        emb.actions().iter().map(|a| a.as_vector()).collect(),
        emb.demo_ids()
            .iter()
            .zip(emb.timesteps())
            .map(|(&d, &t)| (d, t))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Action, GripperState};

    fn matrix(rows: &[[f64; 2]]) -> EmbeddingMatrix {
        let n = rows.len();
        EmbeddingMatrix::new(
            2,
            rows.iter().flatten().copied().collect(),
            (0..n)
                .map(|i| {
                    Action::new(
                        [i as f64, 0.0, 0.0],
                        GripperState::from_code((i % 4) as u8).unwrap(),
                    )
                })
                .collect(),
            vec![0; n],
            (0..n as u32).collect(),
        )
        .unwrap()
    }

    #[test]
    fn size_and_codes_preserved() {
        let idx = build_index(&matrix(&[
            [0.0, 0.0],
            [1.0, 0.0],
            [2.0, 0.0],
            [3.0, 0.0],
            [4.0, 0.0],
            [5.0, 0.0],
        ]))
        .unwrap();
        assert_eq!(idx.len(), 6);
        assert_eq!(idx.actions()[3][3], 3.0);
        assert_eq!(idx.provenance()[5], (0, 5));
    }

    #[test]
    fn exact_match_first() {
        let idx = build_index(&matrix(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, -1.0]])).unwrap();
        let set = idx.nearest(&[3.0, -1.0], 2).unwrap();
        assert_eq!(set.entries()[0].row, 3);
        assert_eq!(set.entries()[0].distance, 0.0);
    }

    #[test]
    fn duplicates_retained_and_ties_by_row() {
        let idx = build_index(&matrix(&[[1.0, 0.0], [0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])).unwrap();
        assert_eq!(idx.len(), 4);
        let rows: Vec<usize> = idx
            .nearest(&[0.0, 0.0], 4)
            .unwrap()
            .entries()
            .iter()
            .map(|e| e.row)
            .collect();
        // distances 1, 0, 1, 1
        assert_eq!(rows, vec![1, 0, 2, 3]);
    }

    #[test]
    fn full_scan_sorted() {
        let pts: Vec<[f64; 2]> = (0..600)
            .map(|i| [((i * 37) % 101) as f64, ((i * 53) % 97) as f64])
            .collect();
        let idx = build_index(&matrix(&pts)).unwrap();
        let set = idx.nearest(&[50.0, 50.0], 600).unwrap();
        assert_eq!(set.len(), 600);
        assert!(set
            .entries()
            .windows(2)
            .all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn errors() {
        let idx = build_index(&matrix(&[[0.0, 0.0], [1.0, 1.0]])).unwrap();
        assert!(matches!(
            idx.nearest(&[0.0, 0.0], 3),
            Err(PolicyError::KOutOfRange { k: 3, n: 2 })
        ));
        assert!(matches!(
            idx.nearest(&[0.0, 0.0], 0),
            Err(PolicyError::KOutOfRange { .. })
        ));
        assert!(matches!(
            idx.nearest(&[0.0], 1),
            Err(PolicyError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            idx.nearest(&[f64::NAN, 0.0], 1),
            Err(PolicyError::NonFiniteQuery)
        ));
        let a = [0.0; 4];
        assert!(matches!(
            NeighborIndex::new(
                2,
                vec![0.0, 0.0, f64::INFINITY, 0.0],
                vec![a, a],
                vec![(0, 0); 2]
            ),
            Err(PolicyError::NonFiniteEmbedding { row: 1 })
        ));
        assert!(matches!(
            NeighborIndex::new(2, vec![], vec![], vec![]),
            Err(PolicyError::EmptyIndex)
        ));
    }
}
