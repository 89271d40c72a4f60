//! The five subcommands, writing their primary output to a caller-supplied
//! sink so they can be driven from tests.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use hiercap_core::decode::{beam_decode, DecodeResult};
use hiercap_core::features::VideoFeatures;
use hiercap_core::metrics::{
    beta_positions, bleu_stats, boundary_score, cider, split_positions, BoundaryCounts, EvalCorpus,
};
use hiercap_core::model::Model;
use hiercap_core::rng::{stream, Stream};
use hiercap_core::train::{AdamState, Corpus, Trainer};
use hiercap_core::vocab::{build_vocab, frame_caption, Vocabulary, UNK};
use rand::Rng;
use serde_json::{json, Value};

use crate::checkpoint;
use crate::config::{FlatConfig, RunConfig};
use crate::error::{Error, Result};
use crate::synth::{synth_corpus, SyntheticSpec};
use crate::text::{self, BoundaryAnnotation, RawCaption};
use crate::vfea;

pub const CONFIG_FILE: &str = "config.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const LOG_FILE: &str = "train.log";
pub const FINAL_CHECKPOINT: &str = "model.vckp";

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    io(path, fs::create_dir_all(path))
}

/// Writes manifest, VFEA files, captions, boundary annotations and the
/// resolved spec under `out`.
pub fn synth(spec_path: &Path, out: &Path) -> Result<SyntheticSpec> {
    let spec = SyntheticSpec::from_flat(FlatConfig::load(spec_path)?)?;
    synth_to_dir(&spec, out)?;
    Ok(spec)
}

pub fn synth_to_dir(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    let corpus = synth_corpus(spec)?;
    let feat_dir = out.join("features");
    create_dir(&feat_dir)?;
    let mut manifest = Vec::new();
    for v in &corpus.videos {
        let rel = format!("features/{}.vfea", v.video_id);
        vfea::write(&out.join(&rel), v)?;
        manifest.push((v.video_id.clone(), rel));
    }
    text::write_string(&out.join("manifest.tsv"), &text::format_manifest(&manifest))?;
    text::write_string(&out.join("captions.tsv"), &text::format_captions(&corpus.captions))?;
    text::write_string(
        &out.join("boundaries.tsv"),
        &text::format_boundaries(&corpus.annotations),
    )?;
    text::write_string(&out.join("spec.txt"), &spec.to_text())
}

/// Reads every manifest video, resampled to `frames`, in manifest order.
pub fn load_videos(manifest: &Path, frames: usize) -> Result<Vec<VideoFeatures>> {
    text::read_manifest(manifest)?
        .iter()
        .map(|e| vfea::read(&e.path, &e.video_id, Some(frames)))
        .collect()
}

fn feature_dim(videos: &[VideoFeatures], expected: Option<usize>) -> Result<usize> {
    let d = expected.unwrap_or(videos[0].dim());
    if let Some(v) = videos.iter().find(|v| v.dim() != d) {
        return Err(Error::Config(format!(
            "video `{}` has feature dim {}, expected {d}",
            v.video_id,
            v.dim()
        )));
    }
    Ok(d)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub log_lines: Vec<String>,
    pub checkpoint: PathBuf,
}

/// Trains for the configured epochs. The resolved config and vocabulary
/// are written first; each epoch appends one log line.
pub fn train(cfg: &RunConfig, echo: &mut dyn Write) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let videos = load_videos(&cfg.manifest, cfg.frames_per_video)?;
    let dim = feature_dim(&videos, cfg.feature_dim)?;
    let raw = text::read_captions(&cfg.captions)?;
    if raw.is_empty() {
        return Err(Error::Config(format!("{}: no captions", cfg.captions.display())));
    }
    let vocab = match &cfg.vocab {
        Some(p) => text::read_vocab(p)?,
        None => {
            let words: Vec<Vec<String>> = raw.iter().map(|c| c.words.clone()).collect();
            build_vocab(&words, cfg.min_count)?
        }
    };
    let records = raw
        .iter()
        .map(|c| Ok(frame_caption(&c.video_id, &c.words, &vocab, cfg.max_caption_len)?.record))
        .collect::<Result<Vec<_>>>()?;

    let mut resolved = cfg.clone();
    resolved.feature_dim = Some(dim);
    text::write_string(&out.join(CONFIG_FILE), &resolved.to_text())?;
    text::write_string(&out.join(VOCAB_FILE), &text::format_vocab(&vocab))?;

    let corpus = Corpus::new(videos, records)?;
    let mut model = Model::new(
        resolved.model_config(dim, vocab.len()),
        &mut stream(cfg.schedule.seed, Stream::Init, 0),
    )?;
    let mut trainer = Trainer::new(&model, cfg.optim.clone(), cfg.schedule.clone())?;
    trainer.gate = cfg.train_gate.mode();

    let log_path = out.join(LOG_FILE);
    let mut log = io(&log_path, File::create(&log_path))?;
    let mut lines = Vec::with_capacity(cfg.schedule.epochs);
    for epoch in 0..cfg.schedule.epochs {
        let m = trainer.train_epoch(&mut model, &corpus, epoch)?;
        let line = format!(
            "epoch={epoch} xe={} mse={} ss={}",
            fmt_opt(m.mean_xe),
            fmt_opt(m.mean_mse),
            m.ss_ratio
        );
        io(&log_path, writeln!(log, "{line}").and_then(|_| log.flush()))?;
        let _ = writeln!(echo, "{line}");
        lines.push(line);
        if cfg.save_interval > 0 && (epoch + 1) % cfg.save_interval == 0 {
            let p = out.join(format!("ckpt-{:05}.vckp", epoch + 1));
            checkpoint::save(&p, &model.params, &trainer.adam)?;
        }
    }
    let ckpt = out.join(FINAL_CHECKPOINT);
    checkpoint::save(&ckpt, &model.params, &trainer.adam)?;
    Ok(TrainSummary {
        log_lines: lines,
        checkpoint: ckpt,
    })
}

/// A trained model with the vocabulary and config stored beside it.
pub struct LoadedRun {
    pub model: Model,
    pub adam: AdamState,
    pub vocab: Vocabulary,
    pub config: RunConfig,
}

pub fn load_run(checkpoint_path: &Path) -> Result<LoadedRun> {
    let dir = checkpoint_path.parent().unwrap_or(Path::new("."));
    let config = RunConfig::from_flat(FlatConfig::load(&dir.join(CONFIG_FILE))?, dir)?;
    let vocab = text::read_vocab(&dir.join(VOCAB_FILE))?;
    let dim = config.feature_dim.ok_or_else(|| {
        Error::Config(format!("{}: feature_dim missing", dir.join(CONFIG_FILE).display()))
    })?;
    let ckpt = checkpoint::load(checkpoint_path)?;
    let model = Model::with_params(config.model_config(dim, vocab.len()), &ckpt.params)?;
    let mut adam = AdamState::for_registry(&model.params);
    for (id, name, _) in model.params.iter() {
        let src = ckpt.params.id(name).expect("names matched on load").index();
        adam.m[id.index()] = ckpt.adam.m[src].clone();
        adam.v[id.index()] = ckpt.adam.v[src].clone();
    }
    adam.step = ckpt.adam.step;
    Ok(LoadedRun {
        model,
        adam,
        vocab,
        config,
    })
}

/// A single VFEA file (video id from the file stem) or a manifest.
pub fn load_feature_arg(path: &Path, frames: usize) -> Result<Vec<VideoFeatures>> {
    let head = io(path, fs::read(path))?;
    let mut videos = if head.starts_with(vfea::MAGIC) {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into());
        vec![vfea::read(path, &id, Some(frames))?]
    } else {
        load_videos(path, frames)?
    };
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    Ok(videos)
}

fn words(tokens: &[u32], vocab: &Vocabulary) -> Vec<String> {
    tokens
        .iter()
        .map(|&t| vocab.token(t).unwrap_or(vocab.token(UNK).unwrap()).to_string())
        .collect()
}

pub fn caption(checkpoint_path: &Path, features: &Path, beam: usize, out: &mut dyn Write) -> Result<()> {
    let run = load_run(checkpoint_path)?;
    for v in load_feature_arg(features, run.config.frames_per_video)? {
        let best = beam_decode(&run.model, &v, beam)?.best;
        let line = format!(
            "{}\t{}\t{}",
            v.video_id,
            words(&best.tokens, &run.vocab).join(" "),
            best.logprob
        );
        io(Path::new("<stdout>"), writeln!(out, "{line}"))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub beam: usize,
    pub boundaries: Option<PathBuf>,
    pub tolerance: usize,
    pub out_dir: Option<PathBuf>,
    /// Seed of the random-gate baseline.
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            beam: 6,
            boundaries: None,
            tolerance: 1,
            out_dir: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `key=value` pairs in output order.
    pub scalars: Vec<(String, f64)>,
    pub json: Value,
}

impl EvalReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub fn to_text(&self) -> String {
        self.scalars.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Split signals drawn uniformly from {0, 1}, one per decoded word.
fn random_gate(len: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

/// Decodes every manifest video and scores BLEU-4 and CIDEr against the
/// captions file; adds boundary scores when annotations are available.
pub fn eval(
    checkpoint_path: &Path,
    manifest: &Path,
    captions: &Path,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let run = load_run(checkpoint_path)?;
    let videos = load_feature_arg(manifest, run.config.frames_per_video)?;
    let mut refs: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for RawCaption { video_id, words } in text::read_captions(captions)? {
        refs.entry(video_id).or_default().push(words);
    }
    let ann_path = opts.boundaries.clone().or_else(|| {
        let p = manifest.parent()?.join("boundaries.tsv");
        p.exists().then_some(p)
    });
    let annotations: Option<BTreeMap<String, BoundaryAnnotation>> =
        ann_path.as_deref().map(text::read_boundaries).transpose()?;

    let mut corpus = EvalCorpus::default();
    let mut decoded: Vec<DecodeResult> = Vec::new();
    for v in &videos {
        let r = refs.get(&v.video_id).ok_or_else(|| {
            Error::Config(format!("video `{}` has no reference caption", v.video_id))
        })?;
        let best = beam_decode(&run.model, v, opts.beam)?.best;
        corpus.push(&v.video_id, words(&best.tokens, &run.vocab), r.clone());
        decoded.push(best);
    }
    let stats = bleu_stats(&corpus);
    let p = stats.precisions();
    let cid = cider(&corpus)?;
    let mut scalars = vec![
        ("videos".to_string(), videos.len() as f64),
        ("bleu4".into(), stats.bleu()),
        ("bleu_p1".into(), p[0]),
        ("bleu_p2".into(), p[1]),
        ("bleu_p3".into(), p[2]),
        ("bleu_p4".into(), p[3]),
        ("bleu_bp".into(), stats.brevity_penalty()),
        ("cider".into(), cid.score),
    ];
    let mut per_video: Vec<Value> = corpus
        .entries
        .iter()
        .zip(&decoded)
        .zip(&cid.per_video)
        .map(|((e, d), c)| {
            json!({
                "video_id": e.video_id,
                "candidate": e.candidate.join(" "),
                "references": e.references.iter().map(|r| r.join(" ")).collect::<Vec<_>>(),
                "cider": c,
                "logprob": d.logprob,
                "boundary_signals": d.boundary_signals,
                "beta": d.beta_trace,
            })
        })
        .collect();

    if let Some(anns) = &annotations {
        let mut word = BoundaryCounts::default();
        let mut random = BoundaryCounts::default();
        let mut frame = BoundaryCounts::default();
        let mut baseline_rng = stream(opts.seed, Stream::Baseline, 0);
        for ((v, d), item) in videos.iter().zip(&decoded).zip(per_video.iter_mut()) {
            let Some(a) = anns.get(&v.video_id) else {
                continue;
            };
            let predicted = split_positions(&d.boundary_signals);
            let w = boundary_score(&predicted, &a.word_boundaries, opts.tolerance);
            word.merge(w);
            let coin = split_positions(&random_gate(d.tokens.len(), &mut baseline_rng));
            random.merge(boundary_score(&coin, &a.word_boundaries, opts.tolerance));
            let beta = beta_positions(&d.beta_trace);
            frame.merge(boundary_score(&beta, &a.frame_boundaries(), opts.tolerance));
            item["predicted_word_boundaries"] = json!(predicted);
            item["true_word_boundaries"] = json!(a.word_boundaries);
        }
        for (prefix, c) in [("boundary", word), ("random_boundary", random), ("frame_boundary", frame)] {
            scalars.push((format!("{prefix}_precision"), c.precision()));
            scalars.push((format!("{prefix}_recall"), c.recall()));
            scalars.push((format!("{prefix}_f1"), c.f1()));
        }
        scalars.push(("boundary_tolerance".into(), opts.tolerance as f64));
    }
    let aggregates: serde_json::Map<String, Value> =
        scalars.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let report = EvalReport {
        scalars,
        json: json!({ "corpus": aggregates, "videos": per_video }),
    };
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| checkpoint_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    create_dir(&dir)?;
    text::write_string(&dir.join("metrics.txt"), &report.to_text())?;
    let pretty = serde_json::to_string_pretty(&report.json).expect("json values serialize");
    text::write_string(&dir.join("metrics.json"), &format!("{pretty}\n"))?;
    Ok(report)
}

/// Per generated word: token, split signal, most-attended frame and the
/// three largest attention weights; then β per input frame.
pub fn inspect(checkpoint_path: &Path, features: &Path, beam: usize, out: &mut dyn Write) -> Result<()> {
    let run = load_run(checkpoint_path)?;
    let videos = load_feature_arg(features, run.config.frames_per_video)?;
    let mut s = String::new();
    for v in &videos {
        let d = beam_decode(&run.model, v, beam)?.best;
        s.push_str(&format!("video\t{}\n", v.video_id));
        s.push_str("step\ttoken\ts\tattn_argmax\ttop3\n");
        let n = d.steps();
        for t in 0..n {
            let token = if t < d.tokens.len() {
                run.vocab.token(d.tokens[t]).unwrap_or("<unk>").to_string()
            } else {
                "<EOS>".to_string()
            };
            let sig = d
                .boundary_signals
                .get(t)
                .map_or_else(|| "-".to_string(), |b| b.to_string());
            let (arg, top) = match d.attention_maps.get(t) {
                Some(w) => {
                    let mut idx: Vec<usize> = (0..w.len()).collect();
                    idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
                    let top: Vec<String> =
                        idx.iter().take(3).map(|&i| format!("{i}:{:.4}", w[i])).collect();
                    (idx[0].to_string(), top.join(","))
                }
                None => ("-".into(), "-".into()),
            };
            s.push_str(&format!("{t}\t{token}\t{sig}\t{arg}\t{top}\n"));
        }
        s.push_str("frame\tbeta\n");
        for (f, b) in d.beta_trace.iter().enumerate() {
            s.push_str(&format!("{f}\t{b}\n"));
        }
    }
    io(Path::new("<stdout>"), out.write_all(s.as_bytes()))
}
