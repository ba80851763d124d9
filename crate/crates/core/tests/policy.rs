mod common;

use proptest::prelude::*;
use rand::Rng as _;
use vinn::data::{Action, DemoSet, Demonstration, EmbeddingMatrix, Frame, GripperState};
use vinn::encoder::Encoder;
use vinn::policy::{
    build_index, lwr_action, open_loop_fit, predict, predict_detailed, random_policy, scale_action,
    softmin_weights, Neighbor, NeighborIndex, NeighborSet, PolicyConfig, PolicyError,
};
use vinn::rng;

fn neighbor_set(entries: Vec<(f64, [f64; 4])>) -> NeighborSet {
    let mut e: Vec<Neighbor> = entries
        .into_iter()
        .enumerate()
        .map(|(row, (distance, action))| Neighbor {
            distance,
            action,
            row,
        })
        .collect();
    e.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.row.cmp(&b.row)));
    NeighborSet::new(e).unwrap()
}

fn entries(max_k: usize) -> impl Strategy<Value = Vec<(f64, [f64; 4])>> {
    prop::collection::vec(
        (0.0..50.0f64, prop::array::uniform4(-1.0..1.0f64)),
        1..=max_k,
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn softmin_is_a_distribution(d in prop::collection::vec(0.0..200.0f64, 1..40)) {
        let w = softmin_weights(&d);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmin_shift_invariant(d in prop::collection::vec(0.0..50.0f64, 1..40), c in 0.0..100.0f64) {
        let w = softmin_weights(&d);
        let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
        for (a, b) in w.iter().zip(softmin_weights(&shifted)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_neighbor_is_copied_bitwise(d in 0.0..1e3f64, a in prop::array::uniform4(-1e3..1e3f64)) {
        let out = lwr_action(&neighbor_set(vec![(d, a)]));
        prop_assert_eq!(out.translation, [a[0], a[1], a[2]]);
        prop_assert_eq!(out.gripper.to_bits(), a[3].to_bits());
    }

    #[test]
    fn output_in_convex_hull(e in entries(20)) {
        let out = lwr_action(&neighbor_set(e.clone()));
        let v = [out.translation[0], out.translation[1], out.translation[2], out.gripper];
        for c in 0..4 {
            let lo = e.iter().map(|x| x.1[c]).fold(f64::INFINITY, f64::min);
            let hi = e.iter().map(|x| x.1[c]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v[c] >= lo - 1e-12 && v[c] <= hi + 1e-12);
        }
    }

    #[test]
    fn permutation_invariant(e in entries(12), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let a = lwr_action(&neighbor_set(e.clone()));
        // rows are renumbered by the shuffle, so only the multiset of (distance, action) is kept
        let mut p = e;
        p.shuffle(&mut rng::seeded(seed));
        let b = lwr_action(&neighbor_set(p));
        for (x, y) in a.translation.iter().zip(b.translation) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((a.gripper - b.gripper).abs() < 1e-12);
    }

    #[test]
    fn shared_action_is_returned(d in prop::collection::vec(0.0..30.0f64, 1..20), a in prop::array::uniform4(-1.0..1.0f64)) {
        let out = lwr_action(&neighbor_set(d.iter().map(|&x| (x, a)).collect()));
        for c in 0..3 {
            prop_assert!((out.translation[c] - a[c]).abs() < 1e-12);
        }
        prop_assert!((out.gripper - a[3]).abs() < 1e-12);
    }
}

#[test]
fn hand_computed_softmin() {
    let out = lwr_action(&neighbor_set(vec![
        (0.0, [1.0, 0.0, 0.0, 0.0]),
        (2f64.ln(), [0.0, 1.0, 0.0, 3.0]),
    ]));
    let w = softmin_weights(&[0.0, 2f64.ln()]);
    assert!((w[0] - 2.0 / 3.0).abs() < 1e-12 && (w[1] - 1.0 / 3.0).abs() < 1e-12);
    assert!((out.translation[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((out.translation[1] - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(out.translation[2], 0.0);
    assert!((out.gripper - 1.0).abs() < 1e-12);
}

#[test]
fn far_distances_do_not_underflow() {
    let w = softmin_weights(&[1e4, 1e4 + 1.0]);
    assert!((w[0] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-12);
}

#[test]
fn nearest_matches_brute_force() {
    let mut r = rng::seeded(50);
    let inst = common::random_instance(&mut r, 50, 8);
    for _ in 0..100 {
        let q: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
        let k = r.random_range(1..=50);
        let got = inst.index.nearest(&q, k).unwrap();
        let want = common::brute_force_knn(&inst.rows, &q, k);
        assert_eq!(got.len(), k);
        for (e, (d, row)) in got.entries().iter().zip(want) {
            assert_eq!(e.row, row);
            assert!((e.distance - d).abs() < 1e-12);
        }
    }
}

#[test]
fn blocked_scan_crosses_block_boundaries() {
    // more rows than one scan block, with exact duplicates to exercise ties
    let mut r = rng::seeded(7);
    let mut inst = common::random_instance(&mut r, 700, 3);
    inst.rows[650] = inst.rows[3].clone();
    inst.rows[300] = inst.rows[3].clone();
    let index = NeighborIndex::new(
        3,
        inst.rows.concat(),
        inst.actions.clone(),
        (0..700).map(|i| (0, i)).collect(),
    )
    .unwrap();
    let q = inst.rows[3].clone();
    let got = index.nearest(&q, 5).unwrap();
    let rows: Vec<usize> = got.entries().iter().map(|e| e.row).collect();
    assert_eq!(&rows[..3], &[3, 300, 650]);
    let want = common::brute_force_knn(&inst.rows, &q, 5);
    assert_eq!(rows, want.iter().map(|w| w.1).collect::<Vec<_>>());
}

#[test]
fn exact_match_and_full_scan() {
    let mut r = rng::seeded(6);
    let inst = common::random_instance(&mut r, 6, 4);
    let got = inst.index.nearest(&inst.rows[3], 1).unwrap();
    assert_eq!((got.entries()[0].row, got.entries()[0].distance), (3, 0.0));
    let all = inst.index.nearest(&inst.rows[0], 6).unwrap();
    assert_eq!(all.len(), 6);
    assert!(all
        .entries()
        .windows(2)
        .all(|w| w[0].distance <= w[1].distance));
    assert!(matches!(
        inst.index.nearest(&inst.rows[0], 7),
        Err(PolicyError::KOutOfRange { k: 7, n: 6 })
    ));
    assert!(matches!(
        inst.index.nearest(&inst.rows[0], 0),
        Err(PolicyError::KOutOfRange { .. })
    ));
    assert!(matches!(
        inst.index.nearest(&[0.0; 3], 1),
        Err(PolicyError::DimensionMismatch {
            expected: 4,
            found: 3
        })
    ));
}

#[test]
fn build_index_keeps_rows_and_duplicates() {
    let a = Action::new([1.0, 0.0, 0.0], GripperState::Closed);
    let emb = EmbeddingMatrix::new(
        2,
        vec![1.0, 1.0, 1.0, 1.0, 0.0, 2.0],
        vec![a; 3],
        vec![0, 0, 1],
        vec![0, 1, 0],
    )
    .unwrap();
    let idx = build_index(&emb).unwrap();
    assert_eq!(idx.len(), 3);
    assert_eq!(idx.actions()[0], [1.0, 0.0, 0.0, 3.0]);
    assert_eq!(idx.provenance(), &[(0, 0), (0, 1), (1, 0)]);
    let nbrs = idx.nearest(&[1.0, 1.0], 2).unwrap();
    assert_eq!(
        nbrs.entries().iter().map(|e| e.row).collect::<Vec<_>>(),
        vec![0, 1]
    );
    assert!(matches!(
        NeighborIndex::new(2, vec![0.0, f64::NAN], vec![[0.0; 4]], vec![(0, 0)]),
        Err(PolicyError::NonFiniteEmbedding { row: 0 })
    ));
}

#[test]
fn predict_matches_pseudocode() {
    let mut r = rng::seeded(1);
    for _ in 0..200 {
        let n = r.random_range(1..=200);
        let d = r.random_range(1..=16);
        let k = r.random_range(1..=n.min(20));
        let inst = common::random_instance(&mut r, n, d);
        let q: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let cfg = PolicyConfig {
            k,
            ..PolicyConfig::default()
        };
        let p = predict_detailed(&inst.index, &Encoder::Identity { dim: d }, &q, &cfg).unwrap();
        let want = common::pseudocode_predict(&inst.rows, &inst.actions, &q, k);
        for c in 0..3 {
            assert!((p.raw_translation[c] - want[c]).abs() < 1e-9);
        }
        assert!((p.gripper_float - want[3]).abs() < 1e-9);
    }
}

#[test]
fn duplicating_the_nearest_row_pulls_toward_it() {
    let mut r = rng::seeded(3);
    for _ in 0..50 {
        let inst = common::random_instance(&mut r, 30, 4);
        let q: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let k = 10;
        let before = common::pseudocode_predict(&inst.rows, &inst.actions, &q, k);
        let first = inst.index.nearest(&q, 1).unwrap().entries()[0].row;
        let mut rows = inst.rows.clone();
        let mut actions = inst.actions.clone();
        rows.push(rows[first].clone());
        actions.push(actions[first]);
        let idx = NeighborIndex::new(
            4,
            rows.concat(),
            actions.clone(),
            (0..31).map(|i| (0, i)).collect(),
        )
        .unwrap();
        let cfg = PolicyConfig {
            k,
            ..PolicyConfig::default()
        };
        let p = predict_detailed(&idx, &Encoder::Identity { dim: 4 }, &q, &cfg).unwrap();
        let after = [
            p.raw_translation[0],
            p.raw_translation[1],
            p.raw_translation[2],
            p.gripper_float,
        ];
        let target = actions[first];
        let dist = |v: &[f64; 4]| {
            v.iter()
                .zip(target)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        };
        if dist(&before) > 1e-12 {
            assert!(dist(&after) < dist(&before));
        }
    }
}

#[test]
fn predict_thresholds_and_renormalization() {
    let emb = EmbeddingMatrix::new(
        1,
        vec![0.0, 0.0],
        vec![
            Action::new([0.6, 0.8, 0.0], GripperState::Closed),
            Action::new([0.0, 0.0, 0.0], GripperState::Closed),
        ],
        vec![0, 0],
        vec![0, 1],
    )
    .unwrap();
    let idx = build_index(&emb).unwrap();
    let enc = Encoder::Identity { dim: 1 };
    let raw = predict(
        &idx,
        &enc,
        &[0.0],
        &PolicyConfig {
            k: 2,
            ..PolicyConfig::default()
        },
    )
    .unwrap();
    assert!((raw.translation[0] - 0.3).abs() < 1e-12 && (raw.translation[1] - 0.4).abs() < 1e-12);
    assert_eq!(raw.gripper, GripperState::Closed);
    let unit = predict(&idx, &enc, &[0.0], &PolicyConfig::closed_loop(2)).unwrap();
    assert!((unit.translation[0] - 0.6).abs() < 1e-12 && (unit.translation[1] - 0.8).abs() < 1e-12);
}

#[test]
fn scale_action_examples() {
    let a = Action::new([1.0, 0.0, 0.0], GripperState::AlmostOpen);
    assert_eq!(scale_action(&a, &[1.0; 3]).unwrap(), a);
    let s = scale_action(&a, &[0.5; 3]).unwrap();
    assert_eq!(s.translation, [0.5, 0.0, 0.0]);
    assert_eq!(s.gripper, GripperState::AlmostOpen);
    assert!(matches!(
        scale_action(&a, &[0.5, 0.0, 0.5]),
        Err(PolicyError::InvalidConfig(_))
    ));
    assert!(scale_action(&a, &[1.5, 0.5, 0.5]).is_err());
}

#[test]
fn random_policy_stream() {
    let samples: Vec<Action> = random_policy(9).take(100_000).collect();
    assert!(samples.iter().all(|a| (a.norm() - 1.0).abs() < 1e-6));
    for c in 0..3 {
        let mean = samples.iter().map(|a| a.translation[c]).sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() < 0.02, "component {c}: {mean}");
    }
    let mut counts = [0usize; 4];
    for a in &samples {
        counts[a.gripper.code() as usize] += 1;
    }
    assert!(counts.iter().all(|&c| (c as f64 / 1e5 - 0.25).abs() < 0.01));
    assert!(random_policy(9).take(50).eq(samples.into_iter().take(50)));
    assert!(!random_policy(9).take(5).eq(random_policy(10).take(5)));
}

fn demo(actions: &[([f64; 3], GripperState)]) -> Demonstration {
    Demonstration::new(
        actions
            .iter()
            .map(|&(t, g)| Frame {
                observation: vec![0.0],
                action: Action::new(t, g),
            })
            .collect(),
    )
}

#[test]
fn open_loop_examples() {
    let a = demo(&[
        ([1.0, 0.0, 0.0], GripperState::Open),
        ([0.0, 0.0, 1.0], GripperState::Closed),
    ]);
    let same = DemoSet::new(vec![a.clone(), a.clone()], 1).unwrap();
    let p = open_loop_fit(&same, [0.5, 1.5, 2.5]);
    assert_eq!(p.action_at(0), a.frames[0].action);
    assert_eq!(p.action_at(1), a.frames[1].action);
    assert_eq!(p.action_at(6), a.frames[1].action);

    let b = demo(&[([0.0, 1.0, 0.0], GripperState::Open)]);
    let mixed = DemoSet::new(vec![a, b], 1).unwrap();
    let p = open_loop_fit(&mixed, [0.5, 1.5, 2.5]);
    assert_eq!(p.translation_at(0), [0.5, 0.5, 0.0]);
    assert_eq!(p.horizon(), 2);
    assert_eq!(p.translation_at(1), [0.0, 0.0, 1.0]);
}
