use hiercap::checkpoint;
use hiercap::vfea;
use hiercap_core::features::VideoFeatures;
use hiercap_core::model::{Model, ModelConfig, Variant};
use hiercap_core::decode::greedy_decode;
use hiercap_core::train::AdamState;
use hiercap_core::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn zero_features_read_back_as_zero_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("z.vfea");
    let v = VideoFeatures::new("z", Tensor::zeros(&[20, 4])).unwrap();
    vfea::write(&p, &v).unwrap();
    let back = vfea::read(&p, "z", Some(20)).unwrap();
    assert_eq!(back.frames().shape(), &[20, 4]);
    assert!(back.frames().data().iter().all(|&x| x == 0.0));
}

#[test]
fn longer_videos_are_resampled_at_equal_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("long.vfea");
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
    vfea::write(&p, &VideoFeatures::from_rows("long", &rows).unwrap()).unwrap();
    let back = vfea::read(&p, "long", Some(20)).unwrap();
    let picked: Vec<f64> = (0..20).map(|i| back.frame(i)[0]).collect();
    let expected: Vec<f64> = (0..20).map(|i| (2 * i) as f64).collect();
    assert_eq!(picked, expected);
}

proptest! {
    #[test]
    fn vfea_round_trip_is_exact_at_f32(values in prop::collection::vec(-1e6f32..1e6f32, 1..60), d in 1usize..6) {
        let n = values.len().div_ceil(d);
        let mut data: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        data.resize(n * d, 0.5);
        let v = VideoFeatures::new("p", Tensor::new(vec![n, d], data).unwrap()).unwrap();
        let back = vfea::decode(&vfea::encode(&v), "p").unwrap();
        prop_assert_eq!(back, v);
    }
}

fn toy_model(variant: Variant) -> Model {
    let cfg = ModelConfig {
        feature_dim: 3,
        hidden_dim: 4,
        embedding_dim: 4,
        vocab_size: 9,
        max_caption_len: 5,
        frames_per_video: 4,
        variant,
    };
    Model::new(cfg, &mut hiercap_core::rng::StreamRng::seed_from_u64(5)).unwrap()
}

#[test]
fn checkpoint_save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let m = toy_model(Variant::Full);
    let mut adam = AdamState::for_registry(&m.params);
    adam.step = 17;
    adam.m[3][0] = -0.125;
    let a = dir.path().join("a.vckp");
    let b = dir.path().join("b.vckp");
    checkpoint::save(&a, &m.params, &adam).unwrap();
    let loaded = checkpoint::load(&a).unwrap();
    checkpoint::save(&b, &loaded.params, &loaded.adam).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(loaded.adam, adam);
}

#[test]
fn loaded_model_decodes_identically() {
    let m = toy_model(Variant::Full);
    let bytes = checkpoint::encode(&m.params, &AdamState::for_registry(&m.params));
    let loaded = checkpoint::decode(&bytes).unwrap();
    let again = Model::with_params(m.config.clone(), &loaded.params).unwrap();
    let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![0.3 * i as f64, -0.2, 0.9]).collect();
    let v = VideoFeatures::from_rows("v", &rows).unwrap();
    assert_eq!(greedy_decode(&m, &v).unwrap(), greedy_decode(&again, &v).unwrap());
}

#[test]
fn corrupted_magic_is_a_format_error() {
    let m = toy_model(Variant::Bi);
    let mut bytes = checkpoint::encode(&m.params, &AdamState::for_registry(&m.params));
    bytes[0..4].copy_from_slice(b"XCKP");
    let err = checkpoint::decode(&bytes).unwrap_err();
    assert_eq!(err.kind(), "format");
    assert!(err.to_string().contains("byte 0"));
}

#[test]
fn structure_mismatch_is_rejected_on_load() {
    let full = toy_model(Variant::Full);
    let bytes = checkpoint::encode(&full.params, &AdamState::for_registry(&full.params));
    let loaded = checkpoint::decode(&bytes).unwrap();
    let bi = toy_model(Variant::Bi);
    assert!(Model::with_params(bi.config.clone(), &loaded.params).is_err());
}
