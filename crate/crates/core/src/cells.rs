//! Recurrent cells: GRU, bidirectional encoder, the boundary-aware two-layer
//! video encoder, and the binary-gated GRU used as the phrase-level decoder.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{uniform_init, ParamId, ParamRegistry};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// How binary gates are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum GateMode {
    /// Hard step in the forward pass, straight-through derivative backward.
    Hard,
    /// The step is replaced by the sigmoid itself; fully differentiable.
    Soft,
    /// Gate value at step `t` is taken from the given bits.
    Forced(Vec<bool>),
}

impl GateMode {
    /// Gate value from the pre-sigmoid activation `pre` at step `t`.
    pub fn apply(&self, tape: &mut Tape<'_>, pre: Var, t: usize) -> Result<Var> {
        match self {
            GateMode::Hard => Ok(tape.step_ste(pre)),
            GateMode::Soft => Ok(tape.sigmoid(pre)),
            GateMode::Forced(bits) => {
                let bit = *bits.get(t).ok_or(Error::OutOfRange {
                    what: "forced gate bits",
                    index: t,
                    len: bits.len(),
                })?;
                Ok(tape.constant(Tensor::scalar(if bit { 1.0 } else { 0.0 })))
            }
        }
    }
}

fn check_len(tape: &Tape<'_>, op: &'static str, v: Var, expected: usize) -> Result<()> {
    let shape = tape.shape(v);
    if shape != [expected] {
        return Err(Error::ShapeMismatch {
            op,
            left: shape.to_vec(),
            right: vec![expected],
        });
    }
    Ok(())
}

fn register<R: Rng + ?Sized>(
    params: &mut ParamRegistry,
    name: &str,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ParamId> {
    params.insert(name, uniform_init(rng, rows, cols))
}

fn register_bias(params: &mut ParamRegistry, name: &str, len: usize) -> Result<ParamId> {
    params.insert(name, Tensor::zeros(&[len]))
}

/// Affine map `W x + b` to an output of fixed width.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamRegistry,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            input_dim,
            output_dim,
            weight: register(params, &format!("{prefix}.w"), output_dim, input_dim, rng)?,
            bias: register_bias(params, &format!("{prefix}.b"), output_dim)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        check_len(tape, "linear", x, self.input_dim)?;
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let wx = tape.matmul(w, x)?;
        tape.add(wx, b)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.weight, self.bias]
    }
}

/// Standard GRU with biased update/reset gates and an unbiased candidate:
/// `h' = z ⊙ h̃ + (1 − z) ⊙ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamRegistry,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let cat = input_dim + hidden_dim;
        Ok(Self {
            input_dim,
            hidden_dim,
            w_z: register(params, &format!("{prefix}.w_z"), hidden_dim, cat, rng)?,
            b_z: register_bias(params, &format!("{prefix}.b_z"), hidden_dim)?,
            w_r: register(params, &format!("{prefix}.w_r"), hidden_dim, cat, rng)?,
            b_r: register_bias(params, &format!("{prefix}.b_r"), hidden_dim)?,
            w_h: register(params, &format!("{prefix}.w_h"), hidden_dim, cat, rng)?,
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.w_z, self.b_z, self.w_r, self.b_r, self.w_h]
    }

    pub fn step(&self, tape: &mut Tape<'_>, x: Var, h_prev: Var) -> Result<Var> {
        check_len(tape, "gru input", x, self.input_dim)?;
        check_len(tape, "gru hidden", h_prev, self.hidden_dim)?;
        let xh = tape.concat(&[x, h_prev])?;
        let z = gate(tape, self.w_z, self.b_z, xh)?;
        let r = gate(tape, self.w_r, self.b_r, xh)?;
        let rh = tape.mul(r, h_prev)?;
        let xrh = tape.concat(&[x, rh])?;
        let w_h = tape.param(self.w_h);
        let cand = tape.matmul(w_h, xrh)?;
        let cand = tape.tanh(cand);
        blend(tape, z, cand, h_prev)
    }
}

fn gate(tape: &mut Tape<'_>, w: ParamId, b: ParamId, x: Var) -> Result<Var> {
    let w = tape.param(w);
    let b = tape.param(b);
    let wx = tape.matmul(w, x)?;
    let pre = tape.add(wx, b)?;
    Ok(tape.sigmoid(pre))
}

/// `z ⊙ cand + (1 − z) ⊙ prev`.
fn blend(tape: &mut Tape<'_>, z: Var, cand: Var, prev: Var) -> Result<Var> {
    let a = tape.mul(z, cand)?;
    let keep = tape.one_minus(z);
    let b = tape.mul(keep, prev)?;
    tape.add(a, b)
}

/// Bidirectional GRU encoder; position `i` of the output is
/// `[forward hidden at i; backward hidden at i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiEncoder {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

impl BiEncoder {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamRegistry,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            fwd: GruCell::new(params, &format!("{prefix}.fwd"), input_dim, hidden_dim, rng)?,
            bwd: GruCell::new(params, &format!("{prefix}.bwd"), input_dim, hidden_dim, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden_dim + self.bwd.hidden_dim
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.fwd.param_ids();
        ids.extend(self.bwd.param_ids());
        ids
    }

    pub fn encode(&self, tape: &mut Tape<'_>, frames: &[Var]) -> Result<Vec<Var>> {
        encode_bidirectional(tape, &self.fwd, &self.bwd, frames)
    }
}

pub fn encode_bidirectional(
    tape: &mut Tape<'_>,
    cell_fwd: &GruCell,
    cell_bwd: &GruCell,
    frames: &[Var],
) -> Result<Vec<Var>> {
    if frames.is_empty() {
        return Err(Error::Empty("encode_bidirectional"));
    }
    let mut fwd = Vec::with_capacity(frames.len());
    let mut h = tape.zeros(cell_fwd.hidden_dim);
    for &f in frames {
        h = cell_fwd.step(tape, f, h)?;
        fwd.push(h);
    }
    let mut bwd = vec![h; frames.len()];
    let mut h = tape.zeros(cell_bwd.hidden_dim);
    for (i, &f) in frames.iter().enumerate().rev() {
        h = cell_bwd.step(tape, f, h)?;
        bwd[i] = h;
    }
    fwd.iter()
        .zip(&bwd)
        .map(|(&a, &b)| tape.concat(&[a, b]))
        .collect()
}

/// Two-layer encoder whose lower layer is reset whenever the learned
/// boundary gate `β` fires.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEncoder {
    pub low: GruCell,
    pub high: GruCell,
    /// `f_bd`: `[frame; previous low hidden] → scalar`.
    pub detector: Linear,
}

/// Final recurrent state plus the per-step gate trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEncoderState {
    pub h_bd0: Var,
    pub h_bd: Var,
    pub beta_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEncoding {
    /// Upper-layer outputs `v^bd_t`, one per frame.
    pub outputs: Vec<Var>,
    /// Lower-layer hidden state stored after each step (post-reset).
    pub low_hiddens: Vec<Var>,
    pub state: BoundaryEncoderState,
}

impl BoundaryEncoder {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamRegistry,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            low: GruCell::new(params, &format!("{prefix}.low"), input_dim, hidden_dim, rng)?,
            high: GruCell::new(params, &format!("{prefix}.high"), hidden_dim, hidden_dim, rng)?,
            detector: Linear::new(
                params,
                &format!("{prefix}.detect"),
                input_dim + hidden_dim,
                1,
                rng,
            )?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.high.hidden_dim
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.low.param_ids();
        ids.extend(self.high.param_ids());
        ids.extend(self.detector.param_ids());
        ids
    }

    /// Per step: the gate reads the frame and the previous low hidden; the
    /// upper layer consumes `β · h_low` before the low hidden is reset by
    /// `(1 − β)`. The upper layer steps at every frame.
    pub fn encode(
        &self,
        tape: &mut Tape<'_>,
        frames: &[Var],
        mode: &GateMode,
    ) -> Result<BoundaryEncoding> {
        if frames.is_empty() {
            return Err(Error::Empty("encode_boundary"));
        }
        let mut low = tape.zeros(self.low.hidden_dim);
        let mut high = tape.zeros(self.high.hidden_dim);
        let mut outputs = Vec::with_capacity(frames.len());
        let mut low_hiddens = Vec::with_capacity(frames.len());
        let mut beta_trace = Vec::with_capacity(frames.len());
        for (t, &f) in frames.iter().enumerate() {
            let probe = tape.concat(&[f, low])?;
            let pre = self.detector.forward(tape, probe)?;
            let beta = mode.apply(tape, pre, t)?;
            beta_trace.push(tape.value(beta).item());

            let h0 = self.low.step(tape, f, low)?;
            let up_in = tape.scale_by(beta, h0)?;
            high = self.high.step(tape, up_in, high)?;
            let keep = tape.one_minus(beta);
            low = tape.scale_by(keep, h0)?;
            outputs.push(high);
            low_hiddens.push(low);
        }
        Ok(BoundaryEncoding {
            outputs,
            low_hiddens,
            state: BoundaryEncoderState {
                h_bd0: low,
                h_bd: high,
                beta_trace,
            },
        })
    }
}

/// Binary-gated GRU. Besides the usual update/reset gates it emits a split
/// signal `s`; `s = 0` closes the current phrase, handing the output to the
/// sentence-level decoder and zeroing the state carried to the next step.
#[derive(Debug, Clone, PartialEq)]
pub struct BGruCell {
    pub hidden_dim: usize,
    pub level_dim: usize,
    pub embed_dim: usize,
    pub context_dim: usize,
    pub w_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub b_r: ParamId,
    pub w: ParamId,
    pub w_s: ParamId,
    pub w_m: ParamId,
    pub b_s: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BGruStep {
    pub o_gate: Var,
    pub h_gate: Var,
    pub h_bar: Var,
    /// Split signal, a `[1]` tensor.
    pub s: Var,
    /// Pre-sigmoid split activation.
    pub s_pre: Var,
    pub z: Var,
    pub r: Var,
    pub h_tilde: Var,
}

impl BGruCell {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamRegistry,
        prefix: &str,
        hidden_dim: usize,
        level_dim: usize,
        embed_dim: usize,
        context_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let cat = level_dim + embed_dim + context_dim + hidden_dim;
        Ok(Self {
            hidden_dim,
            level_dim,
            embed_dim,
            context_dim,
            w_z: register(params, &format!("{prefix}.w_z"), hidden_dim, cat, rng)?,
            b_z: register_bias(params, &format!("{prefix}.b_z"), hidden_dim)?,
            w_r: register(params, &format!("{prefix}.w_r"), hidden_dim, cat, rng)?,
            b_r: register_bias(params, &format!("{prefix}.b_r"), hidden_dim)?,
            w: register(params, &format!("{prefix}.w"), hidden_dim, cat, rng)?,
            w_s: register(params, &format!("{prefix}.w_s"), 1, hidden_dim, rng)?,
            w_m: register(params, &format!("{prefix}.w_m"), 1, level_dim, rng)?,
            b_s: register_bias(params, &format!("{prefix}.b_s"), 1)?,
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![
            self.w_z, self.b_z, self.w_r, self.b_r, self.w, self.w_s, self.w_m, self.b_s,
        ]
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        tape: &mut Tape<'_>,
        v_att: Var,
        h_l: Var,
        h_gate_prev: Var,
        y_prev: Var,
        mode: &GateMode,
        t: usize,
    ) -> Result<BGruStep> {
        check_len(tape, "bgru context", v_att, self.context_dim)?;
        check_len(tape, "bgru level state", h_l, self.level_dim)?;
        check_len(tape, "bgru hidden", h_gate_prev, self.hidden_dim)?;
        check_len(tape, "bgru word", y_prev, self.embed_dim)?;

        let inputs = tape.concat(&[h_l, y_prev, v_att, h_gate_prev])?;
        let z = gate(tape, self.w_z, self.b_z, inputs)?;
        let r = gate(tape, self.w_r, self.b_r, inputs)?;
        let rh = tape.mul(r, h_gate_prev)?;
        let cand_in = tape.concat(&[rh, h_l, y_prev, v_att])?;
        let w = tape.param(self.w);
        let h_tilde = tape.matmul(w, cand_in)?;
        let h_tilde = tape.tanh(h_tilde);
        let o_gate = blend(tape, z, h_tilde, h_gate_prev)?;

        let w_s = tape.param(self.w_s);
        let w_m = tape.param(self.w_m);
        let b_s = tape.param(self.b_s);
        let from_out = tape.matmul(w_s, o_gate)?;
        let from_level = tape.matmul(w_m, h_l)?;
        let s_pre = tape.add(from_out, from_level)?;
        let s_pre = tape.add(s_pre, b_s)?;
        let s = mode.apply(tape, s_pre, t)?;

        let h_gate = tape.scale_by(s, o_gate)?;
        let close = tape.one_minus(s);
        let h_bar = tape.scale_by(close, o_gate)?;
        Ok(BGruStep {
            o_gate,
            h_gate,
            h_bar,
            s,
            s_pre,
            z,
            r,
            h_tilde,
        })
    }
}
