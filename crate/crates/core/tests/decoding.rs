mod common;

use common::*;
use hiercap_core::decode::{beam_decode, can_emit, greedy_decode, DecodeResult};
use hiercap_core::features::VideoFeatures;
use hiercap_core::model::{Model, RunOptions, Variant};
use hiercap_core::tensor::log_softmax;
use hiercap_core::vocab::{BOS, EOS};
use hiercap_core::Tape;

/// Log-probability of a full token sequence, re-running the decoder from
/// scratch for each sequence.
fn sequence_logprob(model: &Model, video: &VideoFeatures, seq: &[u32]) -> f64 {
    let mut tape = Tape::new(&model.params);
    let mut opts = RunOptions::default();
    let (ctx, mut state) = model.begin_caption(&mut tape, video, &mut opts).unwrap();
    let mut prev = BOS;
    let mut total = 0.0;
    for (t, &tok) in seq.iter().enumerate() {
        let (out, next) = model
            .caption_step(&mut tape, &ctx, &state, prev, t, &mut opts)
            .unwrap();
        total += log_softmax(tape.data(out.logits))[tok as usize];
        prev = tok;
        state = next;
    }
    total
}

/// Every emittable sequence: those ending in `<EOS>` within `T` steps and
/// those that reach `T` words without it.
fn enumerate(vocab: usize, max_len: usize) -> Vec<Vec<u32>> {
    let alphabet: Vec<u32> = (0..vocab as u32).filter(|&t| can_emit(t)).collect();
    let mut done = Vec::new();
    let mut open = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &open {
            for &tok in &alphabet {
                let mut s: Vec<u32> = seq.clone();
                s.push(tok);
                if tok == EOS {
                    done.push(s);
                } else {
                    next.push(s);
                }
            }
        }
        open = next;
    }
    done.extend(open);
    done
}

fn brute_force(model: &Model, video: &VideoFeatures) -> (Vec<u32>, f64) {
    let cfg = &model.config;
    enumerate(cfg.vocab_size, cfg.max_caption_len)
        .into_iter()
        .map(|s| {
            let lp = sequence_logprob(model, video, &s);
            (s, lp)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

fn emitted(r: &DecodeResult) -> Vec<u32> {
    let mut s = r.tokens.clone();
    if r.terminated {
        s.push(EOS);
    }
    s
}

fn exhaustive_matches_brute_force(variant: Variant, vocab: usize, seeds: std::ops::Range<u64>) {
    let t = 3;
    let beam = vocab.pow(t as u32);
    for seed in seeds {
        let m = model(config(variant, vocab, 4, 3, 4, t), seed);
        let video = features("v", 4, 3, &mut rng(seed + 1000));
        let (best, lp) = brute_force(&m, &video);
        let out = beam_decode(&m, &video, beam).unwrap();
        assert_eq!(emitted(&out.best), best, "seed {seed}, {variant}");
        assert!((out.best.logprob - lp).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn exhaustive_beam_equals_brute_force_reserved_vocab() {
    exhaustive_matches_brute_force(Variant::Full, 4, 0..20);
}

#[test]
fn exhaustive_beam_equals_brute_force_with_content_words() {
    exhaustive_matches_brute_force(Variant::Full, 7, 0..10);
    exhaustive_matches_brute_force(Variant::Bi, 7, 10..15);
    exhaustive_matches_brute_force(Variant::BiBdSa, 7, 15..20);
}

#[test]
fn beam_of_one_is_greedy() {
    for seed in 0..50 {
        let variant = [Variant::Full, Variant::Bi, Variant::BiBdSaVp][seed as usize % 3];
        let m = model(config(variant, 9, 5, 3, 4, 6), 500 + seed);
        let video = features("v", 4, 3, &mut rng(seed));
        let greedy = greedy_decode(&m, &video).unwrap();
        let beam = beam_decode(&m, &video, 1).unwrap();
        assert_eq!(beam.best.tokens, greedy.tokens, "seed {seed}");
        assert_eq!(beam.best.boundary_signals, greedy.boundary_signals);
        assert!((beam.best.logprob - greedy.logprob).abs() < 1e-12);
    }
}

#[test]
fn kbest_is_sorted_and_bounded() {
    let m = model(config(Variant::Full, 10, 6, 4, 4, 6), 7);
    let video = features("v", 4, 4, &mut rng(8));
    for k in [1, 2, 3, 6] {
        let out = beam_decode(&m, &video, k).unwrap();
        assert!(out.kbest.len() <= k);
        assert!(out.kbest.windows(2).all(|w| w[0].logprob >= w[1].logprob));
        assert_eq!(out.best, out.kbest[0]);
        for h in &out.kbest {
            assert!(h.tokens.len() <= 6);
            assert!(h.tokens.iter().all(|&t| can_emit(t) && t != EOS));
        }
    }
    assert!(beam_decode(&m, &video, 0).is_err());
}

#[test]
fn attention_weights_are_distributions() {
    for seed in 0..20 {
        let variant = [Variant::Full, Variant::BiBdSa][seed as usize % 2];
        let m = model(config(variant, 12, 6, 5, 6, 8), 900 + seed);
        let video = features("v", 6, 5, &mut rng(seed));
        let outs = [greedy_decode(&m, &video).unwrap()]
            .into_iter()
            .chain(beam_decode(&m, &video, 4).unwrap().kbest);
        for r in outs {
            assert_eq!(r.attention_maps.len(), r.steps());
            for w in &r.attention_maps {
                assert_eq!(w.len(), 6);
                assert!(w.iter().all(|&x| x >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn decode_is_deterministic_and_flat_reports_no_splits() {
    let m = model(config(Variant::BiBdSa, 9, 5, 3, 4, 6), 3);
    let video = features("v", 4, 3, &mut rng(4));
    let a = beam_decode(&m, &video, 3).unwrap();
    let b = beam_decode(&m, &video, 3).unwrap();
    assert_eq!(a, b);
    assert!(a.best.boundary_signals.iter().all(|&s| s == 1));
    assert_eq!(a.best.boundary_signals.len(), a.best.tokens.len());
}
