#![allow(dead_code)]

use hiercap_core::features::VideoFeatures;
use hiercap_core::model::{Model, ModelConfig, Variant};
use hiercap_core::vocab::{CaptionRecord, EOS, RESERVED};
use hiercap_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config(variant: Variant, v: usize, h: usize, d: usize, n: usize, t: usize) -> ModelConfig {
    ModelConfig {
        feature_dim: d,
        hidden_dim: h,
        embedding_dim: h,
        vocab_size: v,
        max_caption_len: t,
        frames_per_video: n,
        variant,
    }
}

pub fn model(cfg: ModelConfig, seed: u64) -> Model {
    Model::new(cfg, &mut rng(seed)).unwrap()
}

pub fn features(id: &str, n: usize, d: usize, r: &mut impl Rng) -> VideoFeatures {
    let data = (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect();
    VideoFeatures::new(id, Tensor::new(vec![n, d], data).unwrap()).unwrap()
}

/// Random caption of `len` content words plus `<EOS>`.
pub fn caption(id: &str, len: usize, vocab: usize, max_len: usize, r: &mut impl Rng) -> CaptionRecord {
    let first = RESERVED.len() as u32;
    let mut tokens: Vec<u32> = (0..len).map(|_| r.random_range(first..vocab as u32)).collect();
    tokens.push(EOS);
    CaptionRecord::new(id, tokens, max_len).unwrap()
}

/// Parameter bytes, for bitwise comparisons.
pub fn snapshot(model: &Model, names: &[String]) -> Vec<Vec<u64>> {
    names
        .iter()
        .map(|n| {
            model
                .params
                .by_name(n)
                .unwrap()
                .data()
                .iter()
                .map(|x| x.to_bits())
                .collect()
        })
        .collect()
}
