//! Additive soft attention over encoded frames.
//!
//! One instance is shared by the caption decoder and the video predictor.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{uniform_init, ParamId, ParamRegistry};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const ATTENTION_PARAM_NAMES: [&str; 4] = ["att.w_h", "att.w_v", "att.w_a", "att.b_a"];

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub query_dim: usize,
    pub key_dim: usize,
    pub attn_dim: usize,
    pub w_h: ParamId,
    pub w_v: ParamId,
    pub w_a: ParamId,
    pub b_a: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub context: Var,
    pub weights: Var,
    /// Per-frame `tanh(W_h q + W_v k_n)`.
    pub scores: Vec<Var>,
}

/// Keys together with their `W_v k_n` projections, which do not depend on
/// the query and are computed once per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedKeys {
    pub keys: Vec<Var>,
    projected: Vec<Var>,
}

impl AttentionParams {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamRegistry,
        query_dim: usize,
        key_dim: usize,
        attn_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let [n_h, n_v, n_a, n_b] = ATTENTION_PARAM_NAMES;
        Ok(Self {
            query_dim,
            key_dim,
            attn_dim,
            w_h: params.insert(n_h, uniform_init(rng, attn_dim, query_dim))?,
            w_v: params.insert(n_v, uniform_init(rng, attn_dim, key_dim))?,
            w_a: params.insert(n_a, uniform_init(rng, 1, attn_dim))?,
            b_a: params.insert(n_b, Tensor::zeros(&[1]))?,
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        alloc::vec![self.w_h, self.w_v, self.w_a, self.b_a]
    }

    pub fn prepare(&self, tape: &mut Tape<'_>, keys: &[Var]) -> Result<PreparedKeys> {
        if keys.is_empty() {
            return Err(Error::Empty("attend"));
        }
        let w_v = tape.param(self.w_v);
        let projected = keys
            .iter()
            .map(|&k| {
                if tape.shape(k) != [self.key_dim] {
                    return Err(Error::ShapeMismatch {
                        op: "attention key",
                        left: tape.shape(k).to_vec(),
                        right: alloc::vec![self.key_dim],
                    });
                }
                tape.matmul(w_v, k)
            })
            .collect::<Result<Vec<Var>>>()?;
        Ok(PreparedKeys {
            keys: keys.to_vec(),
            projected,
        })
    }

    pub fn attend_prepared(
        &self,
        tape: &mut Tape<'_>,
        keys: &PreparedKeys,
        query: Var,
    ) -> Result<AttentionOutput> {
        if tape.shape(query) != [self.query_dim] {
            return Err(Error::ShapeMismatch {
                op: "attention query",
                left: tape.shape(query).to_vec(),
                right: alloc::vec![self.query_dim],
            });
        }
        let w_h = tape.param(self.w_h);
        let w_a = tape.param(self.w_a);
        let b_a = tape.param(self.b_a);
        let q = tape.matmul(w_h, query)?;
        let mut scores = Vec::with_capacity(keys.keys.len());
        let mut logits = Vec::with_capacity(keys.keys.len());
        for &pk in &keys.projected {
            let a = tape.add(q, pk)?;
            let a = tape.tanh(a);
            let l = tape.matmul(w_a, a)?;
            logits.push(tape.add(l, b_a)?);
            scores.push(a);
        }
        let logits = tape.concat(&logits)?;
        let weights = tape.softmax(logits)?;
        let context = tape.weighted_sum(weights, &keys.keys)?;
        Ok(AttentionOutput {
            context,
            weights,
            scores,
        })
    }

    pub fn attend(
        &self,
        tape: &mut Tape<'_>,
        keys: &[Var],
        query: Var,
    ) -> Result<AttentionOutput> {
        let prepared = self.prepare(tape, keys)?;
        self.attend_prepared(tape, &prepared, query)
    }
}
