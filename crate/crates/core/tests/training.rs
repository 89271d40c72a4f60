mod common;

use common::*;
use hiercap_core::attention::ATTENTION_PARAM_NAMES;
use hiercap_core::model::{Model, RunOptions, Variant};
use hiercap_core::train::{eval_caption_loss, Corpus, OptimConfig, ScheduleConfig, Trainer};
use hiercap_core::Tape;

fn toy_corpus(videos: usize, cfg: &hiercap_core::model::ModelConfig, seed: u64) -> Corpus {
    let mut r = rng(seed);
    let mut feats = Vec::new();
    let mut caps = Vec::new();
    for i in 0..videos {
        let id = format!("v{i}");
        feats.push(features(&id, cfg.frames_per_video, cfg.feature_dim, &mut r));
        for _ in 0..2 {
            caps.push(caption(&id, 3, cfg.vocab_size, cfg.max_caption_len, &mut r));
        }
    }
    Corpus::new(feats, caps).unwrap()
}

fn names_of(model: &Model, ids: &[hiercap_core::ParamId]) -> Vec<String> {
    ids.iter().map(|&id| model.params.name(id).to_string()).collect()
}

fn trainer(model: &Model, prob: f64, seed: u64) -> Trainer {
    let optim = OptimConfig {
        lr: 1e-2,
        ..OptimConfig::default()
    };
    let schedule = ScheduleConfig {
        task_caption_prob: prob,
        batch_size: 2,
        seed,
        ..ScheduleConfig::default()
    };
    Trainer::new(model, optim, schedule).unwrap()
}

#[test]
fn caption_only_epoch_freezes_video_decoder() {
    let cfg = config(Variant::Full, 10, 6, 4, 4, 5);
    let mut m = model(cfg.clone(), 1);
    let corpus = toy_corpus(4, &cfg, 2);
    let frozen = names_of(&m, &m.video_decoder_ids());
    let live = names_of(&m, &m.language_decoder_ids());
    let (f0, l0) = (snapshot(&m, &frozen), snapshot(&m, &live));
    let mut tr = trainer(&m, 1.0, 3);
    let stats = tr.train_epoch(&mut m, &corpus, 0).unwrap();
    assert_eq!(stats.video_batches, 0);
    assert!(stats.mean_mse.is_none());
    assert_eq!(snapshot(&m, &frozen), f0);
    assert_ne!(snapshot(&m, &live), l0);
}

#[test]
fn video_only_epoch_freezes_language_decoder() {
    let cfg = config(Variant::Full, 10, 6, 4, 4, 5);
    let mut m = model(cfg.clone(), 4);
    let corpus = toy_corpus(4, &cfg, 5);
    let frozen = names_of(&m, &m.language_decoder_ids());
    assert!(frozen.iter().any(|n| n == "embed"));
    assert!(frozen.iter().any(|n| n.starts_with("bgru.")));
    assert!(frozen.iter().any(|n| n.starts_with("out_l.")));
    let live = names_of(&m, &m.video_decoder_ids());
    let (f0, l0) = (snapshot(&m, &frozen), snapshot(&m, &live));
    let mut tr = trainer(&m, 0.0, 6);
    let stats = tr.train_epoch(&mut m, &corpus, 0).unwrap();
    assert_eq!(stats.caption_batches, 0);
    assert_eq!(snapshot(&m, &frozen), f0);
    assert_ne!(snapshot(&m, &live), l0);
}

#[test]
fn attention_is_shared_between_paths() {
    let cfg = config(Variant::Full, 10, 6, 4, 4, 5);
    let mut m = model(cfg.clone(), 7);
    for name in ATTENTION_PARAM_NAMES {
        assert_eq!(m.param_names().iter().filter(|n| *n == name).count(), 1);
    }
    let att_like = m.param_names().iter().filter(|n| n.starts_with("att.")).count();
    assert_eq!(att_like, ATTENTION_PARAM_NAMES.len());

    let corpus = toy_corpus(2, &cfg, 8);
    let probe = &corpus.samples[0];
    let maps = |m: &Model| {
        let mut tape = Tape::new(&m.params);
        m.caption_loss(&mut tape, &corpus.videos[probe.video], &probe.caption, &mut RunOptions::default())
            .unwrap()
            .attention_maps
    };
    let before = maps(&m);
    let mut tr = trainer(&m, 0.0, 9);
    tr.train_epoch(&mut m, &corpus, 0).unwrap();
    let after = maps(&m);
    let diff: f64 = before
        .iter()
        .flatten()
        .zip(after.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(diff > 0.0);
}

#[test]
fn fixed_seed_runs_are_bitwise_identical() {
    let cfg = config(Variant::Full, 10, 6, 4, 4, 5);
    let corpus = toy_corpus(5, &cfg, 10);
    let run = || {
        let mut m = model(cfg.clone(), 11);
        let mut tr = trainer(&m, 0.5, 12);
        let trace: Vec<(Option<u64>, Option<u64>)> = (0..3)
            .map(|e| {
                let s = tr.train_epoch(&mut m, &corpus, e).unwrap();
                (s.mean_xe.map(f64::to_bits), s.mean_mse.map(f64::to_bits))
            })
            .collect();
        (trace, snapshot(&m, &m.param_names()))
    };
    assert_eq!(run(), run());
}

#[test]
fn different_seeds_draw_different_dropout() {
    let cfg = config(Variant::Full, 10, 6, 4, 4, 5);
    let corpus = toy_corpus(3, &cfg, 13);
    let first_loss = |seed| {
        let mut m = model(cfg.clone(), 14);
        let mut tr = trainer(&m, 1.0, seed);
        tr.train_epoch(&mut m, &corpus, 0).unwrap().mean_xe.unwrap()
    };
    assert_ne!(first_loss(1).to_bits(), first_loss(2).to_bits());
}

#[test]
fn evaluation_is_repeatable_and_training_lowers_loss() {
    let cfg = config(Variant::Full, 10, 6, 4, 4, 5);
    let mut m = model(cfg.clone(), 15);
    let corpus = toy_corpus(3, &cfg, 16);
    let l0 = eval_caption_loss(&m, &corpus).unwrap();
    assert_eq!(l0.to_bits(), eval_caption_loss(&m, &corpus).unwrap().to_bits());
    let mut tr = trainer(&m, 1.0, 17);
    tr.optim.dropout = 0.0;
    for e in 0..30 {
        tr.train_epoch(&mut m, &corpus, e).unwrap();
    }
    assert!(eval_caption_loss(&m, &corpus).unwrap() < l0);
}

#[test]
fn baseline_rejects_video_path_probability() {
    let cfg = config(Variant::Bi, 10, 6, 4, 4, 5);
    let m = model(cfg, 18);
    let schedule = ScheduleConfig {
        task_caption_prob: 0.5,
        ..ScheduleConfig::default()
    };
    assert!(Trainer::new(&m, OptimConfig::default(), schedule).is_err());
    assert!(!m.param_names().iter().any(|n| n.starts_with("dec_v") || n.starts_with("out_v")));
}

#[test]
fn steps_count_only_applied_updates() {
    let cfg = config(Variant::Full, 10, 6, 4, 4, 5);
    let mut m = model(cfg.clone(), 19);
    let corpus = toy_corpus(4, &cfg, 20);
    let mut tr = trainer(&m, 0.5, 21);
    let s = tr.train_epoch(&mut m, &corpus, 0).unwrap();
    assert_eq!(tr.adam.step as usize, s.caption_batches + s.video_batches);
}
