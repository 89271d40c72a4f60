//! Full captioning model: encoders, shared attention, sentence/phrase
//! decoders, output projection, and the optional video-prediction decoder.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};

use crate::attention::{AttentionParams, PreparedKeys};
use crate::cells::{BGruCell, BiEncoder, BoundaryEncoder, GateMode, GruCell, Linear};
use crate::error::{Error, Result};
use crate::features::VideoFeatures;
use crate::params::{uniform_init, ParamId, ParamRegistry};
use crate::tape::{Tape, Var};
use crate::tensor::{argmax, Tensor};
use crate::vocab::{CaptionRecord, BOS};

/// Model variants, from the flat baseline to the complete hierarchical model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Bidirectional encoder and a flat GRU decoder fed the mean encoding.
    Bi,
    /// Adds the boundary-aware encoder (decoder initializer) and attention.
    BiBdSa,
    /// Adds the video-prediction path.
    BiBdSaVp,
    /// Adds the hierarchical decoder with the binary-gated phrase GRU.
    Full,
}

impl Variant {
    pub fn has_boundary_encoder(self) -> bool {
        !matches!(self, Variant::Bi)
    }

    pub fn has_video_prediction(self) -> bool {
        matches!(self, Variant::BiBdSaVp | Variant::Full)
    }

    pub fn is_hierarchical(self) -> bool {
        matches!(self, Variant::Full)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bi => "BI",
            Variant::BiBdSa => "BI+BD+SA",
            Variant::BiBdSaVp => "BI+BD+SA+VP",
            Variant::Full => "FULL",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(' ', "").as_str() {
            "BI" => Ok(Variant::Bi),
            "BI+BD+SA" => Ok(Variant::BiBdSa),
            "BI+BD+SA+VP" => Ok(Variant::BiBdSaVp),
            "FULL" | "BI+BD+SA+VP+HLM" => Ok(Variant::Full),
            _ => Err(Error::Config(format!(
                "unknown variant `{s}` (expected BI, BI+BD+SA, BI+BD+SA+VP or FULL)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub vocab_size: usize,
    /// Maximum caption length `T`, counting the terminal `<EOS>`.
    pub max_caption_len: usize,
    pub frames_per_video: usize,
    pub variant: Variant,
}

impl ModelConfig {
    /// Default sizes: 2048-d features, 512-d hidden states, 20 frames,
    /// captions truncated at 10 tokens.
    pub fn standard(vocab_size: usize) -> Self {
        Self {
            feature_dim: 2048,
            hidden_dim: 512,
            embedding_dim: 512,
            vocab_size,
            max_caption_len: 10,
            frames_per_video: 20,
            variant: Variant::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("feature_dim", self.feature_dim),
            ("hidden_dim", self.hidden_dim),
            ("embedding_dim", self.embedding_dim),
            ("frames_per_video", self.frames_per_video),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.vocab_size < crate::vocab::RESERVED.len() {
            return Err(Error::Config("vocab_size must cover the 4 reserved tokens".into()));
        }
        if self.max_caption_len < 2 {
            return Err(Error::Config("max_caption_len must be at least 2".into()));
        }
        if self.variant.has_video_prediction() && self.frames_per_video % 2 != 0 {
            return Err(odd_frames(self.frames_per_video));
        }
        Ok(())
    }
}

fn odd_frames(n: usize) -> Error {
    Error::Config(format!(
        "video prediction needs an even frame count, got {n}; drop the last frame"
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    /// Single GRU. `init` maps the mean encoding into embedding space for
    /// the first step (BI); otherwise attention context is concatenated with
    /// the word embedding at every step.
    Flat { cell: GruCell, init: Option<Linear> },
    /// Sentence-level GRU driving the binary-gated phrase GRU.
    Hierarchical { sentence: GruCell, phrase: BGruCell },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoDecoder {
    pub cell: GruCell,
    pub out: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamRegistry,
    pub enc_bi: BiEncoder,
    pub enc_bd: Option<BoundaryEncoder>,
    pub attention: Option<AttentionParams>,
    pub embed: ParamId,
    pub decoder: Decoder,
    pub out_l: Linear,
    pub video: Option<VideoDecoder>,
}

/// Inverted dropout on cell outputs.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: &'r mut dyn RngCore,
}

/// Scheduled sampling: each step's input word is the model's own previous
/// prediction with probability `ratio`.
pub struct Sampling<'r> {
    pub ratio: f64,
    pub rng: &'r mut dyn RngCore,
}

/// Per-forward switches. The default is inference: hard gates, no dropout,
/// pure teacher forcing.
pub struct RunOptions<'r> {
    pub encoder_gate: GateMode,
    pub decoder_gate: GateMode,
    pub dropout: Option<Dropout<'r>>,
    pub sampling: Option<Sampling<'r>>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self::gates(GateMode::Hard)
    }
}

impl RunOptions<'_> {
    pub fn gates(mode: GateMode) -> Self {
        Self {
            encoder_gate: mode.clone(),
            decoder_gate: mode,
            dropout: None,
            sampling: None,
        }
    }

    fn dropout(&mut self, tape: &mut Tape<'_>, v: Var) -> Result<Var> {
        let Some(d) = self.dropout.as_mut() else {
            return Ok(v);
        };
        if d.rate <= 0.0 {
            return Ok(v);
        }
        let keep = 1.0 - d.rate;
        let n = tape.value(v).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if d.rng.random_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        let mask = tape.constant(Tensor::new(tape.shape(v).to_vec(), mask)?);
        tape.mul(v, mask)
    }
}

/// Encoder outputs for one video.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub v_bi: Vec<Var>,
    pub v_bd_last: Option<Var>,
    pub beta_trace: Vec<f64>,
}

/// Per-video decoding context.
#[derive(Debug, Clone)]
pub struct CaptionContext {
    keys: Option<PreparedKeys>,
    start: Option<Var>,
    pub beta_trace: Vec<f64>,
}

/// Decoder recurrent state. `h` is the sentence-level (or flat) hidden and
/// `h_out` its post-dropout copy used by downstream consumers.
#[derive(Debug, Clone, Copy)]
pub struct DecoderState {
    pub h: Var,
    pub h_out: Var,
    pub h_gate: Option<Var>,
    pub h_bar: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub logits: Var,
    /// Split signal of the phrase decoder; `None` for flat variants.
    pub split: Option<f64>,
    pub attention: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct CaptionForward {
    pub loss: Var,
    pub logits: Vec<Var>,
    /// Word index fed at each step.
    pub inputs: Vec<u32>,
    pub splits: Vec<f64>,
    pub attention_maps: Vec<Vec<f64>>,
    pub beta_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VideoForward {
    pub loss: Var,
    pub predictions: Vec<Var>,
}

impl Model {
    /// Builds a model with freshly initialized parameters.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let ModelConfig {
            feature_dim: d,
            hidden_dim: h,
            embedding_dim: e,
            vocab_size: v,
            variant,
            ..
        } = config;
        let mut params = ParamRegistry::new();
        let enc_bi = BiEncoder::new(&mut params, "enc_bi", d, h, rng)?;
        let key_dim = enc_bi.output_dim();
        let (enc_bd, attention) = if variant.has_boundary_encoder() {
            let bd = BoundaryEncoder::new(&mut params, "enc_bd", d, h, rng)?;
            let att = AttentionParams::new(&mut params, h, key_dim, h, rng)?;
            (Some(bd), Some(att))
        } else {
            (None, None)
        };
        let embed = params.insert("embed", uniform_init(rng, v, e))?;
        let decoder = match variant {
            Variant::Bi => Decoder::Flat {
                cell: GruCell::new(&mut params, "dec_l", e, h, rng)?,
                init: Some(Linear::new(&mut params, "bi_init", key_dim, e, rng)?),
            },
            Variant::BiBdSa | Variant::BiBdSaVp => Decoder::Flat {
                cell: GruCell::new(&mut params, "dec_l", e + key_dim, h, rng)?,
                init: None,
            },
            Variant::Full => Decoder::Hierarchical {
                sentence: GruCell::new(&mut params, "dec_l", h, h, rng)?,
                phrase: BGruCell::new(&mut params, "bgru", h, h, e, key_dim, rng)?,
            },
        };
        let out_l = Linear::new(&mut params, "out_l", h, v, rng)?;
        let video = if variant.has_video_prediction() {
            Some(VideoDecoder {
                cell: GruCell::new(&mut params, "dec_v", key_dim + d, h, rng)?,
                out: Linear::new(&mut params, "out_v", h, d, rng)?,
            })
        } else {
            None
        };
        Ok(Self {
            config,
            params,
            enc_bi,
            enc_bd,
            attention,
            embed,
            decoder,
            out_l,
            video,
        })
    }

    /// Rebuilds the structure for `config` and adopts `loaded` values by
    /// name. The name sets must match exactly.
    pub fn with_params(config: ModelConfig, loaded: &ParamRegistry) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::new(config, &mut rng)?;
        if loaded.len() != model.params.len() {
            return Err(Error::Config(format!(
                "parameter count {} does not match model structure ({})",
                loaded.len(),
                model.params.len()
            )));
        }
        for (_, name, value) in loaded.iter() {
            let id = model
                .params
                .id(name)
                .ok_or_else(|| Error::UnknownParam(name.into()))?;
            model.params.set(id, value.clone())?;
        }
        Ok(model)
    }

    /// Parameters of the sentence/phrase decoders, word embeddings and the
    /// word output layer.
    pub fn language_decoder_ids(&self) -> Vec<ParamId> {
        let mut ids = alloc::vec![self.embed];
        match &self.decoder {
            Decoder::Flat { cell, init } => {
                ids.extend(cell.param_ids());
                if let Some(l) = init {
                    ids.extend(l.param_ids());
                }
            }
            Decoder::Hierarchical { sentence, phrase } => {
                ids.extend(sentence.param_ids());
                ids.extend(phrase.param_ids());
            }
        }
        ids.extend(self.out_l.param_ids());
        ids
    }

    /// Parameters of the video-prediction decoder and its feature projection.
    pub fn video_decoder_ids(&self) -> Vec<ParamId> {
        self.video
            .as_ref()
            .map(|v| {
                let mut ids = v.cell.param_ids();
                ids.extend(v.out.param_ids());
                ids
            })
            .unwrap_or_default()
    }

    fn check_features(&self, features: &VideoFeatures, frames: usize) -> Result<()> {
        if features.dim() != self.config.feature_dim || features.num_frames() != frames {
            return Err(Error::ShapeMismatch {
                op: "video features",
                left: alloc::vec![features.num_frames(), features.dim()],
                right: alloc::vec![frames, self.config.feature_dim],
            });
        }
        Ok(())
    }

    /// Runs the bidirectional and (when present) boundary-aware encoders
    /// over frames `[0, frames)`.
    pub fn encode(
        &self,
        tape: &mut Tape<'_>,
        features: &VideoFeatures,
        frames: usize,
        opts: &mut RunOptions<'_>,
    ) -> Result<Encoded> {
        let vars: Vec<Var> = (0..frames)
            .map(|i| tape.constant(Tensor::vector(features.frame(i).to_vec())))
            .collect();
        let v_bi = self
            .enc_bi
            .encode(tape, &vars)?
            .into_iter()
            .map(|v| opts.dropout(tape, v))
            .collect::<Result<Vec<Var>>>()?;
        let (v_bd_last, beta_trace) = match &self.enc_bd {
            Some(bd) => {
                let gate = opts.encoder_gate.clone();
                let enc = bd.encode(tape, &vars, &gate)?;
                let last = opts.dropout(tape, enc.state.h_bd)?;
                (Some(last), enc.state.beta_trace)
            }
            None => (None, Vec::new()),
        };
        Ok(Encoded {
            v_bi,
            v_bd_last,
            beta_trace,
        })
    }

    /// Encodes the whole video and sets up the decoder's initial state.
    pub fn begin_caption(
        &self,
        tape: &mut Tape<'_>,
        features: &VideoFeatures,
        opts: &mut RunOptions<'_>,
    ) -> Result<(CaptionContext, DecoderState)> {
        let n = self.config.frames_per_video;
        self.check_features(features, n)?;
        let enc = self.encode(tape, features, n, opts)?;
        let h = self.config.hidden_dim;
        let keys = match &self.attention {
            Some(att) => Some(att.prepare(tape, &enc.v_bi)?),
            None => None,
        };
        let (start, h0) = match (&self.decoder, enc.v_bd_last) {
            (Decoder::Flat { init: Some(init), .. }, _) => {
                let mean = tape.mean_of(&enc.v_bi)?;
                (Some(init.forward(tape, mean)?), tape.zeros(h))
            }
            (_, Some(last)) => (None, last),
            (_, None) => (None, tape.zeros(h)),
        };
        let (h_gate, h_bar) = match self.decoder {
            Decoder::Hierarchical { .. } => (Some(tape.zeros(h)), Some(tape.zeros(h))),
            Decoder::Flat { .. } => (None, None),
        };
        let ctx = CaptionContext {
            keys,
            start,
            beta_trace: enc.beta_trace,
        };
        let state = DecoderState {
            h: h0,
            h_out: h0,
            h_gate,
            h_bar,
        };
        Ok((ctx, state))
    }

    /// One decoder step consuming the previous word `prev` (ignored at
    /// `t = 0` by the BI variant, whose first input is the mean encoding).
    pub fn caption_step(
        &self,
        tape: &mut Tape<'_>,
        ctx: &CaptionContext,
        state: &DecoderState,
        prev: u32,
        t: usize,
        opts: &mut RunOptions<'_>,
    ) -> Result<(StepOutput, DecoderState)> {
        if prev as usize >= self.config.vocab_size {
            return Err(Error::OutOfRange {
                what: "vocabulary",
                index: prev as usize,
                len: self.config.vocab_size,
            });
        }
        let embed = tape.param(self.embed);
        let y_prev = tape.row(embed, prev as usize)?;
        match &self.decoder {
            Decoder::Flat { cell, init } => {
                let mut attention = None;
                let x = match (init, ctx.start, &ctx.keys, &self.attention) {
                    (Some(_), Some(start), _, _) if t == 0 => start,
                    (Some(_), _, _, _) => y_prev,
                    (None, _, Some(keys), Some(att)) => {
                        let a = att.attend_prepared(tape, keys, state.h_out)?;
                        attention = Some(a.weights);
                        tape.concat(&[y_prev, a.context])?
                    }
                    _ => y_prev,
                };
                let h = cell.step(tape, x, state.h)?;
                let h_out = opts.dropout(tape, h)?;
                let logits = self.out_l.forward(tape, h_out)?;
                let next = DecoderState {
                    h,
                    h_out,
                    h_gate: None,
                    h_bar: None,
                };
                Ok((
                    StepOutput {
                        logits,
                        split: None,
                        attention,
                    },
                    next,
                ))
            }
            Decoder::Hierarchical { sentence, phrase } => {
                let (att, keys) = match (&self.attention, &ctx.keys) {
                    (Some(a), Some(k)) => (a, k),
                    _ => return Err(Error::Config("hierarchical decoder needs attention".into())),
                };
                let h_gate = state.h_gate.expect("hierarchical state");
                let h_bar = state.h_bar.expect("hierarchical state");
                let h_l = sentence.step(tape, h_bar, state.h)?;
                let h_out = opts.dropout(tape, h_l)?;
                let a = att.attend_prepared(tape, keys, h_out)?;
                let gate = opts.decoder_gate.clone();
                let step = phrase.step(tape, a.context, h_out, h_gate, y_prev, &gate, t)?;
                let o_out = opts.dropout(tape, step.o_gate)?;
                let logits = self.out_l.forward(tape, o_out)?;
                let split = tape.value(step.s).item();
                let next = DecoderState {
                    h: h_l,
                    h_out,
                    h_gate: Some(step.h_gate),
                    h_bar: Some(step.h_bar),
                };
                Ok((
                    StepOutput {
                        logits,
                        split: Some(split),
                        attention: Some(a.weights),
                    },
                    next,
                ))
            }
        }
    }

    /// Teacher-forced cross-entropy, averaged over the caption's steps
    /// (words plus `<EOS>`); padding never enters the loss.
    pub fn caption_loss(
        &self,
        tape: &mut Tape<'_>,
        features: &VideoFeatures,
        caption: &CaptionRecord,
        opts: &mut RunOptions<'_>,
    ) -> Result<CaptionForward> {
        let targets = caption.tokens();
        if targets.len() > self.config.max_caption_len {
            return Err(Error::Config(format!(
                "caption of {} tokens exceeds max_caption_len {}",
                targets.len(),
                self.config.max_caption_len
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::OutOfRange {
                what: "vocabulary",
                index: bad as usize,
                len: self.config.vocab_size,
            });
        }
        let (ctx, mut state) = self.begin_caption(tape, features, opts)?;
        let mut logits = Vec::with_capacity(targets.len());
        let mut losses = Vec::with_capacity(targets.len());
        let mut inputs = Vec::with_capacity(targets.len());
        let mut splits = Vec::new();
        let mut attention_maps = Vec::new();
        let mut prev = BOS;
        for (t, &target) in targets.iter().enumerate() {
            inputs.push(prev);
            let (out, next) = self.caption_step(tape, &ctx, &state, prev, t, opts)?;
            losses.push(tape.cross_entropy(out.logits, target as usize)?);
            if let Some(s) = out.split {
                splits.push(s);
            }
            if let Some(w) = out.attention {
                attention_maps.push(tape.data(w).to_vec());
            }
            let use_model = match opts.sampling.as_mut() {
                Some(s) if s.ratio > 0.0 => s.rng.random_bool(s.ratio.min(1.0)),
                _ => false,
            };
            prev = if use_model {
                argmax(tape.data(out.logits)) as u32
            } else {
                target
            };
            logits.push(out.logits);
            state = next;
        }
        let stacked = tape.concat(&losses)?;
        let loss = tape.mean(stacked);
        Ok(CaptionForward {
            loss,
            logits,
            inputs,
            splits,
            attention_maps,
            beta_trace: ctx.beta_trace,
        })
    }

    /// Cross-entropy of the flat baseline; only valid for [`Variant::Bi`].
    pub fn forward_baseline_bi(
        &self,
        tape: &mut Tape<'_>,
        features: &VideoFeatures,
        caption: &CaptionRecord,
        opts: &mut RunOptions<'_>,
    ) -> Result<Var> {
        if self.config.variant != Variant::Bi {
            return Err(Error::Config(format!(
                "baseline forward requires variant BI, model is {}",
                self.config.variant
            )));
        }
        Ok(self.caption_loss(tape, features, caption, opts)?.loss)
    }

    /// Predicts the second half of the frames from the first half and
    /// returns `(2/N) Σ ‖o_n − v_{N/2+n}‖²`.
    pub fn video_loss(
        &self,
        tape: &mut Tape<'_>,
        features: &VideoFeatures,
        opts: &mut RunOptions<'_>,
    ) -> Result<VideoForward> {
        let (video, att) = match (&self.video, &self.attention) {
            (Some(v), Some(a)) => (v, a),
            _ => {
                return Err(Error::Config(format!(
                    "variant {} has no video-prediction path",
                    self.config.variant
                )))
            }
        };
        let n = features.num_frames();
        if n % 2 != 0 {
            return Err(odd_frames(n));
        }
        self.check_features(features, self.config.frames_per_video)?;
        let half = n / 2;
        let enc = self.encode(tape, features, half, opts)?;
        let keys = att.prepare(tape, &enc.v_bi)?;
        let mut h = match enc.v_bd_last {
            Some(v) => v,
            None => tape.zeros(self.config.hidden_dim),
        };
        let mut o_prev = tape.zeros(self.config.feature_dim);
        let mut predictions = Vec::with_capacity(half);
        let mut errors = Vec::with_capacity(half);
        for i in 0..half {
            let a = att.attend_prepared(tape, &keys, h)?;
            let x = tape.concat(&[a.context, o_prev])?;
            h = video.cell.step(tape, x, h)?;
            let h_out = opts.dropout(tape, h)?;
            let o = video.out.forward(tape, h_out)?;
            let truth = tape.constant(Tensor::vector(features.frame(half + i).to_vec()));
            let diff = tape.sub(o, truth)?;
            errors.push(tape.sum_squares(diff));
            predictions.push(o);
            o_prev = o;
        }
        let stacked = tape.concat(&errors)?;
        let total = tape.sum(stacked);
        let loss = tape.scale(total, 2.0 / n as f64);
        Ok(VideoForward { loss, predictions })
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|(_, n, _)| n.into()).collect()
    }
}
