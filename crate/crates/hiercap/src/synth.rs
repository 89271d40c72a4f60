//! Synthetic segmented videos with known phrase boundaries.
//!
//! Each action owns a fixed embedding and a fixed phrase. A video is `K`
//! contiguous segments (consecutive segments use different actions); every
//! frame is its segment's embedding plus Gaussian noise, and the caption
//! joins the segments' phrases in order.

use hiercap_core::features::VideoFeatures;
use hiercap_core::rng::{stream, Stream};
use hiercap_core::Tensor;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::text::{BoundaryAnnotation, RawCaption};

const SUBJECTS: &[&str] = &[
    "man", "woman", "dog", "cat", "boy", "girl", "bird", "horse", "child", "chef", "player", "monkey",
];
const VERBS: &[&str] = &[
    "runs", "jumps", "swims", "sings", "eats", "reads", "cooks", "dances", "climbs", "rides",
    "plays", "sleeps",
];
const MODIFIERS: &[&str] = &[
    "fast", "high", "away", "loudly", "slowly", "quietly", "outside", "alone", "again", "well",
    "together", "often",
];
const ROLES: &[&[&str]] = &[SUBJECTS, VERBS, MODIFIERS];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_videos: usize,
    pub segments: usize,
    pub num_actions: usize,
    pub feature_dim: usize,
    pub frames: usize,
    pub noise_std: f64,
    /// Words per action phrase.
    pub phrase_len: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_videos: 8,
            segments: 2,
            num_actions: 8,
            feature_dim: 16,
            frames: 8,
            noise_std: 0.1,
            phrase_len: 3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_videos", self.num_videos),
            ("segments", self.segments),
            ("num_actions", self.num_actions),
            ("feature_dim", self.feature_dim),
            ("frames", self.frames),
            ("phrase_len", self.phrase_len),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be at least 1")));
            }
        }
        if self.segments > self.frames {
            return Err(Error::Config(format!(
                "segments ({}) exceeds frames per video ({})",
                self.segments, self.frames
            )));
        }
        if self.segments > 1 && self.num_actions < 2 {
            return Err(Error::Config(
                "adjacent segments need distinct actions: num_actions must be at least 2".into(),
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub videos: Vec<VideoFeatures>,
    pub captions: Vec<RawCaption>,
    pub annotations: Vec<BoundaryAnnotation>,
    /// Phrase of each action.
    pub phrases: Vec<Vec<String>>,
    /// Action of each segment, per video.
    pub actions: Vec<Vec<usize>>,
}

/// Phrase word `j` of action `a`; words cycle through subject, verb and
/// modifier pools and gain a numeric suffix once a pool is exhausted.
fn phrase_word(a: usize, j: usize) -> String {
    let pool = ROLES[j % ROLES.len()];
    let lap = j / ROLES.len();
    let base = pool[a % pool.len()];
    let round = a / pool.len();
    match (lap, round) {
        (0, 0) => base.to_string(),
        (l, r) => format!("{base}{}", l * 100 + r),
    }
}

pub fn synth_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Synth, 0);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let embeddings: Vec<Vec<f64>> = (0..spec.num_actions)
        .map(|_| (0..spec.feature_dim).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let phrases: Vec<Vec<String>> = (0..spec.num_actions)
        .map(|a| (0..spec.phrase_len).map(|j| phrase_word(a, j)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.noise_std).expect("validated stddev");
    let (n, k) = (spec.frames, spec.segments);
    let starts: Vec<usize> = (0..k).map(|s| s * n / k).collect();
    let width = (spec.num_videos.saturating_sub(1)).to_string().len().max(4);

    let mut out = SyntheticCorpus {
        videos: Vec::new(),
        captions: Vec::new(),
        annotations: Vec::new(),
        phrases,
        actions: Vec::new(),
    };
    for v in 0..spec.num_videos {
        let id = format!("video{v:0width$}");
        let mut acts = Vec::with_capacity(k);
        for s in 0..k {
            let a = loop {
                let a = rng.random_range(0..spec.num_actions);
                if s == 0 || a != acts[s - 1] {
                    break a;
                }
            };
            acts.push(a);
        }
        let mut data = Vec::with_capacity(n * spec.feature_dim);
        for f in 0..n {
            let seg = starts.iter().rposition(|&st| st <= f).unwrap();
            for &e in &embeddings[acts[seg]] {
                let eps = if spec.noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                data.push(e + eps);
            }
        }
        let frames = Tensor::new(vec![n, spec.feature_dim], data)?;
        out.videos.push(VideoFeatures::new(&id, frames)?);
        let words: Vec<String> = acts.iter().flat_map(|&a| out.phrases[a].clone()).collect();
        out.captions.push(RawCaption {
            video_id: id.clone(),
            words,
        });
        out.annotations.push(BoundaryAnnotation {
            video_id: id,
            segment_starts: starts.clone(),
            word_boundaries: (1..k).map(|s| s * spec.phrase_len).collect(),
        });
        out.actions.push(acts);
    }
    Ok(out)
}
