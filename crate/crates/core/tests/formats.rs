use std::collections::BTreeMap;

use proptest::prelude::*;
use vinn::data::{
    decode_demoset, decode_embeddings, encode_demoset, encode_embeddings, load_demoset,
    save_demoset, DataError, FormatError,
};
use vinn::encoder::{decode_encoder, encode_encoder, Dense, Mlp, RandomProjection};
use vinn::policy::{decode_index, encode_index, NeighborIndex};
use vinn::{Action, DemoSet, Demonstration, EmbeddingMatrix, Encoder, Frame, GripperState};

fn f32_val() -> impl Strategy<Value = f64> {
    (-1e4f32..1e4f32).prop_map(f64::from)
}

fn gripper() -> impl Strategy<Value = GripperState> {
    (0u8..4).prop_map(|c| GripperState::from_code(c).unwrap())
}

fn action() -> impl Strategy<Value = Action> {
    ([f32_val(), f32_val(), f32_val()], gripper()).prop_map(|(t, g)| Action::new(t, g))
}

fn demoset() -> impl Strategy<Value = DemoSet> {
    (1usize..6).prop_flat_map(|dim| {
        let frame =
            (prop::collection::vec(f32_val(), dim), action()).prop_map(|(observation, action)| {
                Frame {
                    observation,
                    action,
                }
            });
        let demo = prop::collection::vec(frame, 1..6).prop_map(Demonstration::new);
        let meta = prop::collection::btree_map("[a-z]{0,6}", "[ -~]{0,12}", 0..3);
        (prop::collection::vec(demo, 1..5), meta).prop_map(
            move |(demos, meta): (_, BTreeMap<String, String>)| {
                DemoSet::with_metadata(demos, dim, meta).unwrap()
            },
        )
    })
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn assert_demosets_bit_equal(a: &DemoSet, b: &DemoSet) {
    assert_eq!(a.obs_dim(), b.obs_dim());
    assert_eq!(a.metadata(), b.metadata());
    assert_eq!(a.num_demos(), b.num_demos());
    for (x, y) in a.frames().zip(b.frames()) {
        assert_eq!(bits(&x.frame.observation), bits(&y.frame.observation));
        assert_eq!(
            bits(&x.frame.action.translation),
            bits(&y.frame.action.translation)
        );
        assert_eq!(x.frame.action.gripper, y.frame.action.gripper);
        assert_eq!((x.demo_id, x.timestep), (y.demo_id, y.timestep));
    }
}

fn mlp(widths: Vec<usize>) -> impl Strategy<Value = Mlp> {
    let layers: Vec<_> = widths
        .windows(2)
        .map(|w| {
            let (i, o) = (w[0], w[1]);
            (
                prop::collection::vec(f32_val(), i * o),
                prop::collection::vec(f32_val(), o),
            )
                .prop_map(move |(weights, bias)| Dense {
                    inputs: i,
                    outputs: o,
                    weights,
                    bias,
                })
        })
        .collect();
    layers.prop_map(|l| Mlp::from_layers(l).unwrap())
}

fn encoder() -> impl Strategy<Value = Encoder> {
    prop_oneof![
        (1usize..8).prop_map(|dim| Encoder::Identity { dim }),
        (1usize..8, 1usize..8, any::<u64>())
            .prop_map(|(n, d, s)| Encoder::RandomProjection(RandomProjection::new(n, d, s))),
        prop::collection::vec(1usize..6, 3..5)
            .prop_flat_map(mlp)
            .prop_map(Encoder::Mlp),
    ]
}

fn index() -> impl Strategy<Value = NeighborIndex> {
    (1usize..20, 1usize..6).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(f32_val(), n * d),
            prop::collection::vec(
                (f32_val(), f32_val(), f32_val(), 0u8..4)
                    .prop_map(|(x, y, z, g)| [x, y, z, f64::from(g)]),
                n,
            ),
            prop::collection::vec((any::<u32>(), any::<u32>()), n),
        )
            .prop_map(move |(e, a, p)| NeighborIndex::new(d, e, a, p).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn demoset_bytes_round_trip(set in demoset()) {
        let bytes = encode_demoset(&set);
        let back = decode_demoset(&bytes).unwrap();
        assert_demosets_bit_equal(&set, &back);
        prop_assert_eq!(encode_demoset(&back), bytes);
    }

    #[test]
    fn truncation_reports_where_the_bytes_ran_out(set in demoset(), frac in 0.0f64..1.0) {
        let bytes = encode_demoset(&set);
        let cut = (frac * bytes.len() as f64) as usize;
        match decode_demoset(&bytes[..cut]) {
            Err(DataError::Format(FormatError::Truncated { offset, needed, available })) => {
                prop_assert_eq!(offset + available, cut);
                prop_assert!(needed > available);
            }
            other => prop_assert!(false, "cut at {} of {}: {:?}", cut, bytes.len(), other),
        }
    }

    #[test]
    fn encoder_checkpoint_round_trip(enc in encoder()) {
        let bytes = encode_encoder(&enc);
        let back = decode_encoder(&bytes).unwrap();
        prop_assert_eq!(encode_encoder(&back), bytes);
        prop_assert_eq!(back, enc);
    }

    #[test]
    fn index_round_trip(idx in index()) {
        let bytes = encode_index(&idx);
        let back = decode_index(&bytes).unwrap();
        prop_assert_eq!(bits(back.embeddings()), bits(idx.embeddings()));
        prop_assert_eq!(encode_index(&back), bytes);
    }

    #[test]
    fn embeddings_round_trip(idx in index()) {
        let n = idx.len();
        let emb = EmbeddingMatrix::new(
            idx.dim(),
            idx.embeddings().to_vec(),
            (0..n).map(|i| Action::new([1.0, 0.0, 0.0], GripperState::ALL[i % 4])).collect(),
            idx.provenance().iter().map(|p| p.0).collect(),
            idx.provenance().iter().map(|p| p.1).collect(),
        ).unwrap();
        let bytes = encode_embeddings(&emb);
        prop_assert_eq!(decode_embeddings(&bytes).unwrap(), emb);
    }
}

#[test]
fn seventy_one_demos_survive_a_file() {
    let set = vinn::data::synth_demoset("expert", 71, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.vinn");
    save_demoset(&set, &path).unwrap();
    let back = load_demoset(&path).unwrap();
    assert_eq!(back.num_demos(), 71);
    assert_demosets_bit_equal(&set, &back);
    let again = dir.path().join("again.vinn");
    save_demoset(&back, &again).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn distinct_errors() {
    let set = vinn::data::synth_demoset("random-walk", 2, 0).unwrap();
    let good = encode_demoset(&set);

    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        decode_demoset(&bad_magic),
        Err(DataError::Format(FormatError::BadMagic { offset: 0, .. }))
    ));

    let mut bad_version = good.clone();
    bad_version[4] = 9;
    assert!(matches!(
        decode_demoset(&bad_version),
        Err(DataError::Format(FormatError::UnsupportedVersion {
            offset: 4,
            found: 9
        }))
    ));

    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_demoset(dir.path().join("nope.vinn")),
        Err(DataError::Io { .. })
    ));
    assert!(matches!(
        save_demoset(&set, dir.path().join("no/such/dir.vinn")),
        Err(DataError::Io { .. })
    ));
}
