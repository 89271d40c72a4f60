//! Flat `key: value` configuration with `key=value` overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hiercap_core::cells::GateMode;
use hiercap_core::model::{ModelConfig, Variant};
use hiercap_core::train::{OptimConfig, ScheduleConfig};

use crate::error::{Error, Result};
use crate::synth::SyntheticSpec;
use crate::text::read_to_string;

/// Ordered `key → (value, line)` pairs; duplicate keys are rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    pub file: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl FlatConfig {
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or_else(|| Error::Parse {
                file: file.into(),
                line: i + 1,
                what: format!("expected `key: value`, got `{line}`"),
            })?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), (v.trim().to_string(), i + 1)).is_some() {
                return Err(Error::Parse {
                    file: file.into(),
                    line: i + 1,
                    what: format!("duplicate key `{k}`"),
                });
            }
        }
        Ok(Self {
            file: file.into(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&path.display().to_string(), &read_to_string(path)?)
    }

    /// Applies a `key=value` override, replacing any file value.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
        self.entries.insert(k.trim().into(), (v.trim().into(), 0));
        Ok(())
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((raw, line)) = self.entries.remove(key) else {
            return Ok(None);
        };
        raw.parse().map(Some).map_err(|e| Error::Parse {
            file: if line == 0 { "--override".into() } else { self.file.clone() },
            line,
            what: format!("`{key}`: cannot parse `{raw}`: {e}"),
        })
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Errors on any key nobody consumed.
    fn finish(self) -> Result<()> {
        if let Some((k, (_, line))) = self.entries.into_iter().next() {
            return Err(Error::Parse {
                file: self.file,
                line,
                what: format!("unknown key `{k}`"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainGate {
    Hard,
    Soft,
}

impl FromStr for TrainGate {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hard" => Ok(TrainGate::Hard),
            "soft" => Ok(TrainGate::Soft),
            _ => Err("expected `hard` or `soft`".into()),
        }
    }
}

impl TrainGate {
    pub fn mode(self) -> GateMode {
        match self {
            TrainGate::Hard => GateMode::Hard,
            TrainGate::Soft => GateMode::Soft,
        }
    }

    fn name(self) -> &'static str {
        match self {
            TrainGate::Hard => "hard",
            TrainGate::Soft => "soft",
        }
    }
}

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    /// Taken from the feature files when absent.
    pub feature_dim: Option<usize>,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub max_caption_len: usize,
    pub frames_per_video: usize,
    pub optim: OptimConfig,
    pub schedule: ScheduleConfig,
    pub train_gate: TrainGate,
    pub manifest: PathBuf,
    pub captions: PathBuf,
    pub vocab: Option<PathBuf>,
    pub min_count: usize,
    pub output_dir: PathBuf,
    /// Write a numbered checkpoint every this many epochs; 0 disables.
    pub save_interval: usize,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Builds a config from flat entries; relative paths resolve against
    /// `base` (the config file's directory).
    pub fn from_flat(mut flat: FlatConfig, base: &Path) -> Result<Self> {
        let d = ModelConfig::standard(0);
        let od = OptimConfig::default();
        let sd = ScheduleConfig::default();
        let required = |flat: &mut FlatConfig, key: &str| -> Result<PathBuf> {
            flat.take::<PathBuf>(key)?
                .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
        };
        let cfg = RunConfig {
            variant: flat.take_or("variant", Variant::Full)?,
            feature_dim: flat.take("feature_dim")?,
            hidden_dim: flat.take_or("hidden_dim", d.hidden_dim)?,
            embedding_dim: flat.take_or("embedding_dim", d.embedding_dim)?,
            max_caption_len: flat.take_or("max_caption_len", d.max_caption_len)?,
            frames_per_video: flat.take_or("frames_per_video", d.frames_per_video)?,
            optim: OptimConfig {
                lr: flat.take_or("lr", od.lr)?,
                beta1: flat.take_or("beta1", od.beta1)?,
                beta2: flat.take_or("beta2", od.beta2)?,
                epsilon: flat.take_or("epsilon", od.epsilon)?,
                dropout: flat.take_or("dropout", od.dropout)?,
            },
            schedule: ScheduleConfig {
                task_caption_prob: flat.take_or("task_caption_prob", sd.task_caption_prob)?,
                ss_start: flat.take_or("ss_start", sd.ss_start)?,
                ss_max: flat.take_or("ss_max", sd.ss_max)?,
                ss_step: flat.take_or("ss_step", sd.ss_step)?,
                ss_epoch_interval: flat.take_or("ss_epoch_interval", sd.ss_epoch_interval)?,
                epochs: flat.take_or("epochs", sd.epochs)?,
                batch_size: flat.take_or("batch_size", sd.batch_size)?,
                seed: flat.take_or("seed", sd.seed)?,
            },
            train_gate: flat.take_or("train_gate", TrainGate::Hard)?,
            manifest: resolve(base, required(&mut flat, "manifest")?),
            captions: resolve(base, required(&mut flat, "captions")?),
            vocab: flat.take::<PathBuf>("vocab")?.map(|p| resolve(base, p)),
            min_count: flat.take_or("min_count", 1)?,
            output_dir: resolve(base, required(&mut flat, "output_dir")?),
            save_interval: flat.take_or("save_interval", 0)?,
        };
        flat.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut flat = FlatConfig::load(path)?;
        for o in overrides {
            flat.set_override(o)?;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_flat(flat, base)
    }

    /// Rejects conflicting settings before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        self.schedule.validate()?;
        if !self.variant.has_video_prediction() && self.schedule.task_caption_prob < 1.0 {
            return Err(Error::Config(format!(
                "variant {} has no video-prediction path but task_caption_prob is {}; set it to 1",
                self.variant, self.schedule.task_caption_prob
            )));
        }
        if self.variant.has_video_prediction() && self.frames_per_video % 2 != 0 {
            return Err(Error::Config(format!(
                "variant {} predicts the second half of the video: frames_per_video must be even, got {}",
                self.variant, self.frames_per_video
            )));
        }
        Ok(())
    }

    pub fn model_config(&self, feature_dim: usize, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            feature_dim,
            hidden_dim: self.hidden_dim,
            embedding_dim: self.embedding_dim,
            vocab_size,
            max_caption_len: self.max_caption_len,
            frames_per_video: self.frames_per_video,
            variant: self.variant,
        }
    }

    /// Every key with its resolved value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}: {v}");
        };
        kv("variant", self.variant.to_string());
        if let Some(d) = self.feature_dim {
            kv("feature_dim", d.to_string());
        }
        kv("hidden_dim", self.hidden_dim.to_string());
        kv("embedding_dim", self.embedding_dim.to_string());
        kv("max_caption_len", self.max_caption_len.to_string());
        kv("frames_per_video", self.frames_per_video.to_string());
        kv("lr", self.optim.lr.to_string());
        kv("beta1", self.optim.beta1.to_string());
        kv("beta2", self.optim.beta2.to_string());
        kv("epsilon", self.optim.epsilon.to_string());
        kv("dropout", self.optim.dropout.to_string());
        kv("task_caption_prob", self.schedule.task_caption_prob.to_string());
        kv("ss_start", self.schedule.ss_start.to_string());
        kv("ss_max", self.schedule.ss_max.to_string());
        kv("ss_step", self.schedule.ss_step.to_string());
        kv("ss_epoch_interval", self.schedule.ss_epoch_interval.to_string());
        kv("epochs", self.schedule.epochs.to_string());
        kv("batch_size", self.schedule.batch_size.to_string());
        kv("seed", self.schedule.seed.to_string());
        kv("train_gate", self.train_gate.name().into());
        kv("manifest", self.manifest.display().to_string());
        kv("captions", self.captions.display().to_string());
        if let Some(v) = &self.vocab {
            kv("vocab", v.display().to_string());
        }
        kv("min_count", self.min_count.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("save_interval", self.save_interval.to_string());
        s
    }
}

impl SyntheticSpec {
    pub fn from_flat(mut flat: FlatConfig) -> Result<Self> {
        let d = SyntheticSpec::default();
        let spec = SyntheticSpec {
            num_videos: flat.take_or("num_videos", d.num_videos)?,
            segments: flat.take_or("segments", d.segments)?,
            num_actions: flat.take_or("num_actions", d.num_actions)?,
            feature_dim: flat.take_or("feature_dim", d.feature_dim)?,
            frames: flat.take_or("frames", d.frames)?,
            noise_std: flat.take_or("noise_std", d.noise_std)?,
            phrase_len: flat.take_or("phrase_len", d.phrase_len)?,
            seed: flat.take_or("seed", d.seed)?,
        };
        flat.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        format!(
            "num_videos: {}\nsegments: {}\nnum_actions: {}\nfeature_dim: {}\nframes: {}\nnoise_std: {}\nphrase_len: {}\nseed: {}\n",
            self.num_videos,
            self.segments,
            self.num_actions,
            self.feature_dim,
            self.frames,
            self.noise_std,
            self.phrase_len,
            self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = "manifest: m.tsv\ncaptions: c.tsv\noutput_dir: out\n";

    #[test]
    fn defaults_and_overrides() {
        let mut flat = FlatConfig::parse("t", &format!("{MIN}lr: 0.001 # faster\n")).unwrap();
        flat.set_override("epochs=3").unwrap();
        flat.set_override("lr=0.5").unwrap();
        let cfg = RunConfig::from_flat(flat, Path::new("/base")).unwrap();
        assert_eq!(cfg.optim.lr, 0.5);
        assert_eq!(cfg.schedule.epochs, 3);
        assert_eq!(cfg.optim.beta2, 0.99);
        assert_eq!(cfg.manifest, PathBuf::from("/base/m.tsv"));
    }

    #[test]
    fn resolved_text_round_trips() {
        let flat = FlatConfig::parse("t", &format!("{MIN}variant: BI+BD+SA\ntask_caption_prob: 1\n"))
            .unwrap();
        let cfg = RunConfig::from_flat(flat, Path::new("/x")).unwrap();
        let again = RunConfig::from_flat(FlatConfig::parse("r", &cfg.to_text()).unwrap(), Path::new("/y"))
            .unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_and_conflicts_are_rejected() {
        let flat = FlatConfig::parse("t", &format!("{MIN}learning_rate: 1\n")).unwrap();
        let err = RunConfig::from_flat(flat, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("learning_rate"));
        let flat = FlatConfig::parse("t", &format!("{MIN}variant: BI\n")).unwrap();
        assert!(RunConfig::from_flat(flat, Path::new(".")).is_err());
        assert!(FlatConfig::parse("t", "a: 1\na: 2\n").is_err());
    }
}
