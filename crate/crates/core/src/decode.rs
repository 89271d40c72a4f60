//! Greedy and beam-search caption decoding.
//!
//! Decoding runs in inference mode (hard gates, no dropout) and never emits
//! `<pad>` or `<BOS>`.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::features::VideoFeatures;
use crate::model::{CaptionContext, DecoderState, Model, RunOptions};
use crate::tape::Tape;
use crate::tensor::log_softmax;
use crate::vocab::{BOS, EOS, PAD};

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Emitted words, excluding the terminal `<EOS>`.
    pub tokens: Vec<u32>,
    /// Split signal per emitted word; flat decoders report 1 (never split).
    pub boundary_signals: Vec<u8>,
    /// Attention weights per decoding step, including the `<EOS>` step.
    pub attention_maps: Vec<Vec<f64>>,
    /// Summed log-probability of every emitted token including `<EOS>`.
    pub logprob: f64,
    /// Whether decoding stopped at `<EOS>` rather than at the length limit.
    pub terminated: bool,
    /// Boundary-encoder gate per input frame.
    pub beta_trace: Vec<f64>,
}

impl DecodeResult {
    pub fn steps(&self) -> usize {
        self.tokens.len() + usize::from(self.terminated)
    }
}

pub fn can_emit(token: u32) -> bool {
    token != PAD && token != BOS
}

fn signal(split: Option<f64>) -> u8 {
    match split {
        Some(s) if s <= 0.5 => 0,
        _ => 1,
    }
}

pub fn greedy_decode(model: &Model, features: &VideoFeatures) -> Result<DecodeResult> {
    let mut tape = Tape::new(&model.params);
    let mut opts = RunOptions::default();
    let (ctx, mut state) = model.begin_caption(&mut tape, features, &mut opts)?;
    let mut result = DecodeResult {
        tokens: Vec::new(),
        boundary_signals: Vec::new(),
        attention_maps: Vec::new(),
        logprob: 0.0,
        terminated: false,
        beta_trace: ctx.beta_trace.clone(),
    };
    let mut prev = BOS;
    for t in 0..model.config.max_caption_len {
        let (out, next) = model.caption_step(&mut tape, &ctx, &state, prev, t, &mut opts)?;
        let lp = log_softmax(tape.data(out.logits));
        let mut best = None;
        for (j, &l) in lp.iter().enumerate() {
            if !can_emit(j as u32) {
                continue;
            }
            match best {
                Some((_, b)) if l <= b => {}
                _ => best = Some((j as u32, l)),
            }
        }
        let (tok, l) = best.ok_or(Error::Config("vocabulary has no emittable token".into()))?;
        result.logprob += l;
        if let Some(w) = out.attention {
            result.attention_maps.push(tape.data(w).to_vec());
        }
        if tok == EOS {
            result.terminated = true;
            break;
        }
        result.tokens.push(tok);
        result.boundary_signals.push(signal(out.split));
        prev = tok;
        state = next;
    }
    Ok(result)
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<u32>,
    signals: Vec<u8>,
    maps: Vec<Vec<f64>>,
    logprob: f64,
    state: DecoderState,
    finished: bool,
}

fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.logprob
        .total_cmp(&a.logprob)
        .then_with(|| a.tokens.cmp(&b.tokens))
        .then_with(|| b.finished.cmp(&a.finished))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutput {
    pub best: DecodeResult,
    /// Surviving hypotheses sorted by non-increasing log-probability.
    pub kbest: Vec<DecodeResult>,
}

/// Beam search over summed log-probabilities with no length normalization.
/// Hypotheses that emit `<EOS>` are frozen and keep competing for the `beam`
/// slots; search stops once every slot is frozen or `T` steps have run.
pub fn beam_decode(model: &Model, features: &VideoFeatures, beam: usize) -> Result<BeamOutput> {
    if beam == 0 {
        return Err(Error::Config("beam size must be at least 1".into()));
    }
    let mut tape = Tape::new(&model.params);
    let mut opts = RunOptions::default();
    let (ctx, state) = model.begin_caption(&mut tape, features, &mut opts)?;
    let mut pool = alloc::vec![Hypothesis {
        tokens: Vec::new(),
        signals: Vec::new(),
        maps: Vec::new(),
        logprob: 0.0,
        state,
        finished: false,
    }];
    for t in 0..model.config.max_caption_len {
        if pool.iter().all(|h| h.finished) {
            break;
        }
        let mut next_pool = Vec::new();
        for hyp in pool {
            if hyp.finished {
                next_pool.push(hyp);
                continue;
            }
            expand(model, &mut tape, &ctx, &mut opts, &hyp, t, &mut next_pool)?;
        }
        next_pool.sort_by(rank);
        next_pool.truncate(beam);
        pool = next_pool;
    }
    let kbest: Vec<DecodeResult> = pool
        .into_iter()
        .map(|h| DecodeResult {
            tokens: h.tokens,
            boundary_signals: h.signals,
            attention_maps: h.maps,
            logprob: h.logprob,
            terminated: h.finished,
            beta_trace: ctx.beta_trace.clone(),
        })
        .collect();
    let best = kbest.first().cloned().expect("beam keeps at least one hypothesis");
    Ok(BeamOutput { best, kbest })
}

fn expand(
    model: &Model,
    tape: &mut Tape<'_>,
    ctx: &CaptionContext,
    opts: &mut RunOptions<'_>,
    hyp: &Hypothesis,
    t: usize,
    out: &mut Vec<Hypothesis>,
) -> Result<()> {
    let prev = hyp.tokens.last().copied().unwrap_or(BOS);
    let (step, next) = model.caption_step(tape, ctx, &hyp.state, prev, t, opts)?;
    let lp = log_softmax(tape.data(step.logits));
    let map = step.attention.map(|w| tape.data(w).to_vec());
    for (j, &l) in lp.iter().enumerate() {
        let tok = j as u32;
        if !can_emit(tok) {
            continue;
        }
        let mut h = Hypothesis {
            tokens: hyp.tokens.clone(),
            signals: hyp.signals.clone(),
            maps: hyp.maps.clone(),
            logprob: hyp.logprob + l,
            state: next,
            finished: tok == EOS,
        };
        if let Some(m) = &map {
            h.maps.push(m.clone());
        }
        if tok != EOS {
            h.tokens.push(tok);
            h.signals.push(signal(step.split));
        }
        out.push(h);
    }
    Ok(())
}
