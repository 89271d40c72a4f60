//! Adam, dropout/scheduled-sampling schedules, and the alternating
//! caption/video multi-task epoch loop with path-specific freezing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cells::GateMode;
use crate::error::{Error, Result};
use crate::features::VideoFeatures;
use crate::model::{Dropout, Model, RunOptions, Sampling};
use crate::params::{Grads, ParamId, ParamRegistry};
use crate::rng::{stream, Stream};
use crate::tape::Tape;
use crate::vocab::CaptionRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            dropout: 0.5,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    /// Probability that a batch trains the caption path.
    pub task_caption_prob: f64,
    pub ss_start: f64,
    pub ss_max: f64,
    pub ss_step: f64,
    pub ss_epoch_interval: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            task_caption_prob: 0.5,
            ss_start: 0.0,
            ss_max: 0.1,
            ss_step: 0.025,
            ss_epoch_interval: 20,
            epochs: 100,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl ScheduleConfig {
    /// `min(ss_max, ss_start + ss_step · floor(epoch / interval))`, rounded
    /// to 12 decimals so plateaus print as their nominal values.
    pub fn ss_ratio(&self, epoch: usize) -> f64 {
        let k = (epoch / self.ss_epoch_interval.max(1)) as f64;
        let raw = (self.ss_start + self.ss_step * k).min(self.ss_max);
        libm::round(raw * 1e12) / 1e12
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.task_caption_prob) {
            return Err(Error::Config("task_caption_prob must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.ss_epoch_interval == 0 {
            return Err(Error::Config("ss_epoch_interval must be at least 1".into()));
        }
        for (name, v) in [("ss_start", self.ss_start), ("ss_max", self.ss_max)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// First/second moments per parameter plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn for_registry(params: &ParamRegistry) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of the parameters flagged in `trainable`;
/// the others, and their moments, are left untouched.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ParamRegistry,
    grads: &Grads,
    trainable: &[bool],
    cfg: &OptimConfig,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(cfg.beta1, t);
    let c2 = 1.0 - libm::pow(cfg.beta2, t);
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        if !trainable[id.index()] {
            continue;
        }
        let g = grads.get(id);
        let m = &mut state.m[id.index()];
        let v = &mut state.v[id.index()];
        let theta = params.get_mut(id).data_mut();
        for k in 0..theta.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            theta[k] -= cfg.lr * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

/// One caption paired with the index of its video.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub video: usize,
    pub caption: CaptionRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub videos: Vec<VideoFeatures>,
    pub samples: Vec<Sample>,
}

impl Corpus {
    /// Pairs each caption with its video by id.
    pub fn new(videos: Vec<VideoFeatures>, captions: Vec<CaptionRecord>) -> Result<Self> {
        let index: BTreeMap<&str, usize> = videos
            .iter()
            .enumerate()
            .map(|(i, v)| (v.video_id.as_str(), i))
            .collect();
        let mut samples = Vec::with_capacity(captions.len());
        for caption in captions {
            let video = *index.get(caption.video_id.as_str()).ok_or_else(|| {
                Error::Config(format!("caption references unknown video `{}`", caption.video_id))
            })?;
            samples.push(Sample { video, caption });
        }
        Ok(Self { videos, samples })
    }

    /// Sample indices grouped by video, videos in shuffled order.
    fn bucketed_order<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut by_video: Vec<Vec<usize>> = vec![Vec::new(); self.videos.len()];
        for (i, s) in self.samples.iter().enumerate() {
            by_video[s.video].push(i);
        }
        let mut order: Vec<usize> = (0..self.videos.len()).collect();
        order.shuffle(rng);
        order.into_iter().flat_map(|v| by_video[v].clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Caption,
    Video,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean over caption batches of the batch-mean cross-entropy.
    pub mean_xe: Option<f64>,
    /// Mean over video batches of the batch-mean prediction loss.
    pub mean_mse: Option<f64>,
    pub caption_batches: usize,
    pub video_batches: usize,
    pub ss_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub optim: OptimConfig,
    pub schedule: ScheduleConfig,
    pub adam: AdamState,
    /// Gate evaluation during training; hard (straight-through) by default.
    pub gate: GateMode,
}

impl Trainer {
    pub fn new(model: &Model, optim: OptimConfig, schedule: ScheduleConfig) -> Result<Self> {
        optim.validate()?;
        schedule.validate()?;
        if !model.config.variant.has_video_prediction() && schedule.task_caption_prob < 1.0 {
            return Err(Error::Config(format!(
                "variant {} has no video-prediction path; set task_caption_prob to 1",
                model.config.variant
            )));
        }
        Ok(Self {
            adam: AdamState::for_registry(&model.params),
            optim,
            schedule,
            gate: GateMode::Hard,
        })
    }

    /// Trainable mask for a path: the caption path freezes the video decoder,
    /// the video path freezes the language decoders and embeddings.
    pub fn trainable(model: &Model, path: Path) -> Vec<bool> {
        let mut mask = vec![true; model.params.len()];
        let frozen = match path {
            Path::Caption => model.video_decoder_ids(),
            Path::Video => model.language_decoder_ids(),
        };
        for id in frozen {
            mask[id.index()] = false;
        }
        mask
    }

    pub fn train_epoch(
        &mut self,
        model: &mut Model,
        corpus: &Corpus,
        epoch: usize,
    ) -> Result<EpochMetrics> {
        if corpus.samples.is_empty() {
            return Err(Error::Empty("training corpus"));
        }
        let seed = self.schedule.seed;
        let e = epoch as u64;
        let mut shuffle_rng = stream(seed, Stream::Shuffle, e);
        let mut task_rng = stream(seed, Stream::Task, e);
        let mut dropout_rng = stream(seed, Stream::Dropout, e);
        let mut sampling_rng = stream(seed, Stream::Sampling, e);
        let ss_ratio = self.schedule.ss_ratio(epoch);

        let order = corpus.bucketed_order(&mut shuffle_rng);
        let mut grads = Grads::for_registry(&model.params);
        let (mut xe_sum, mut mse_sum) = (0.0, 0.0);
        let (mut caption_batches, mut video_batches) = (0, 0);

        for (b, batch) in order.chunks(self.schedule.batch_size).enumerate() {
            let caption_path = task_rng.random_bool(self.schedule.task_caption_prob);
            let path = if caption_path { Path::Caption } else { Path::Video };
            grads.zero();
            let mut batch_loss = 0.0;
            {
                let params = &model.params;
                let mut opts = RunOptions {
                    encoder_gate: self.gate.clone(),
                    decoder_gate: self.gate.clone(),
                    dropout: Some(Dropout {
                        rate: self.optim.dropout,
                        rng: &mut dropout_rng,
                    }),
                    sampling: Some(Sampling {
                        ratio: ss_ratio,
                        rng: &mut sampling_rng,
                    }),
                };
                match path {
                    Path::Caption => {
                        let scale = 1.0 / batch.len() as f64;
                        for &i in batch {
                            let sample = &corpus.samples[i];
                            let mut tape = Tape::new(params);
                            let fwd = model.caption_loss(
                                &mut tape,
                                &corpus.videos[sample.video],
                                &sample.caption,
                                &mut opts,
                            )?;
                            batch_loss += tape.value(fwd.loss).item() * scale;
                            let adj = tape.backward(fwd.loss)?;
                            tape.accumulate(&adj, &mut grads, scale);
                        }
                    }
                    Path::Video => {
                        let mut videos: Vec<usize> =
                            batch.iter().map(|&i| corpus.samples[i].video).collect();
                        videos.dedup();
                        let scale = 1.0 / videos.len() as f64;
                        for v in videos {
                            let mut tape = Tape::new(params);
                            let fwd = model.video_loss(&mut tape, &corpus.videos[v], &mut opts)?;
                            batch_loss += tape.value(fwd.loss).item() * scale;
                            let adj = tape.backward(fwd.loss)?;
                            tape.accumulate(&adj, &mut grads, scale);
                        }
                    }
                }
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss or gradient in epoch {epoch}, batch {b} ({path:?} path)"
                )));
            }
            let mask = Self::trainable(model, path);
            adam_step(&mut self.adam, &mut model.params, &grads, &mask, &self.optim)?;
            match path {
                Path::Caption => {
                    xe_sum += batch_loss;
                    caption_batches += 1;
                }
                Path::Video => {
                    mse_sum += batch_loss;
                    video_batches += 1;
                }
            }
        }
        let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        Ok(EpochMetrics {
            epoch,
            mean_xe: mean(xe_sum, caption_batches),
            mean_mse: mean(mse_sum, video_batches),
            caption_batches,
            video_batches,
            ss_ratio,
        })
    }
}

/// Mean video-prediction loss over the corpus in evaluation mode.
pub fn eval_video_loss(model: &Model, corpus: &Corpus) -> Result<f64> {
    let mut total = 0.0;
    for video in &corpus.videos {
        let mut tape = Tape::new(&model.params);
        let fwd = model.video_loss(&mut tape, video, &mut RunOptions::default())?;
        total += tape.value(fwd.loss).item();
    }
    Ok(total / corpus.videos.len() as f64)
}

/// Mean teacher-forced cross-entropy over the corpus in evaluation mode.
pub fn eval_caption_loss(model: &Model, corpus: &Corpus) -> Result<f64> {
    let mut total = 0.0;
    for s in &corpus.samples {
        let mut tape = Tape::new(&model.params);
        let fwd = model.caption_loss(
            &mut tape,
            &corpus.videos[s.video],
            &s.caption,
            &mut RunOptions::default(),
        )?;
        total += tape.value(fwd.loss).item();
    }
    Ok(total / corpus.samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_registry(theta: f64) -> (ParamRegistry, ParamId) {
        let mut reg = ParamRegistry::new();
        let id = reg.insert("theta", Tensor::scalar(theta)).unwrap();
        (reg, id)
    }

    #[test]
    fn zero_gradient_leaves_parameter_bitwise() {
        let (mut reg, id) = scalar_registry(-0.731);
        let before = reg.get(id).item().to_bits();
        let mut state = AdamState::for_registry(&reg);
        let grads = Grads::for_registry(&reg);
        adam_step(&mut state, &mut reg, &grads, &[true], &OptimConfig::default()).unwrap();
        assert_eq!(reg.get(id).item().to_bits(), before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut reg, id) = scalar_registry(0.0);
        let mut state = AdamState::for_registry(&reg);
        let mut grads = Grads::for_registry(&reg);
        grads.get_mut(id)[0] = 1.0;
        adam_step(&mut state, &mut reg, &grads, &[true], &OptimConfig::default()).unwrap();
        assert!((reg.get(id).item() + 1e-4).abs() < 1e-11);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn minimizes_convex_quadratic() {
        let (mut reg, id) = scalar_registry(0.0);
        let mut state = AdamState::for_registry(&reg);
        let cfg = OptimConfig {
            lr: 0.1,
            ..OptimConfig::default()
        };
        for _ in 0..100 {
            let mut grads = Grads::for_registry(&reg);
            grads.get_mut(id)[0] = 2.0 * (reg.get(id).item() - 3.0);
            adam_step(&mut state, &mut reg, &grads, &[true], &cfg).unwrap();
        }
        assert!((reg.get(id).item() - 3.0).abs() < 0.1, "{}", reg.get(id).item());
    }

    #[test]
    fn frozen_parameter_untouched() {
        let (mut reg, id) = scalar_registry(1.0);
        let mut state = AdamState::for_registry(&reg);
        let mut grads = Grads::for_registry(&reg);
        grads.get_mut(id)[0] = 5.0;
        adam_step(&mut state, &mut reg, &grads, &[false], &OptimConfig::default()).unwrap();
        assert_eq!(reg.get(id).item(), 1.0);
        assert_eq!(state.m[0][0], 0.0);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let (mut reg, id) = scalar_registry(1.0);
        let mut state = AdamState::for_registry(&reg);
        let mut grads = Grads::for_registry(&reg);
        grads.get_mut(id)[0] = f64::NAN;
        assert!(adam_step(&mut state, &mut reg, &grads, &[true], &OptimConfig::default()).is_err());
    }

    #[test]
    fn scheduled_sampling_plateaus() {
        let s = ScheduleConfig::default();
        let expect = |e: usize| match e {
            0..=19 => 0.0,
            20..=39 => 0.025,
            40..=59 => 0.05,
            60..=79 => 0.075,
            _ => 0.1,
        };
        for e in 0..=100 {
            assert_eq!(s.ss_ratio(e), expect(e), "epoch {e}");
        }
        assert_eq!(s.ss_ratio(10_000), 0.1);
    }
}
