//! Eager reverse-mode tape.
//!
//! Every operation computes its value immediately and appends a node; the
//! tape is rebuilt for each sequence. [`Tape::backward`] walks the nodes in
//! exact reverse order and accumulates adjoints additively, so a value used
//! twice receives the sum of both contributions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{Grads, ParamId, ParamRegistry};
use crate::tensor::{self, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Tanh(Var),
    Sigmoid(Var),
    StepSte(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Row(Var, usize),
    Sum(Var),
    SumSquares(Var),
    Mean(Var),
    MeanOf(Vec<Var>),
    ScaleBy(Var, Var),
    Softmax(Var),
    CrossEntropy(Var, usize),
    WeightedSum(Var, Vec<Var>),
}

#[derive(Debug, Clone)]
enum Value {
    Owned(Tensor),
    Param(ParamId),
}

#[derive(Debug, Clone)]
struct Node {
    value: Value,
    op: Op,
}

/// Operation record over a borrowed parameter registry.
#[derive(Debug)]
pub struct Tape<'p> {
    params: &'p ParamRegistry,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

/// Per-node adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Adjoints {
    grads: Vec<Option<Vec<f64>>>,
}

impl Adjoints {
    /// Gradient of the loss with respect to `v`, or `None` when `v` does not
    /// reach the loss.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamRegistry) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamRegistry {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.get(*id),
        }
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.value(v).data()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn zeros(&mut self, len: usize) -> Var {
        self.constant(Tensor::zeros(&[len]))
    }

    /// Leaf bound to a registry entry. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// `a[m×k] · b[k×n]`, or `a[m×k] · b[k]` giving `[m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() > 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(mismatch("matmul", ta, tb));
        }
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let n = if tb.rank() == 2 { tb.shape()[1] } else { 1 };
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &ad[i * k..(i + 1) * k];
            let dst = &mut out[i * n..(i + 1) * n];
            for (p, &aip) in row.iter().enumerate() {
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bpj) in dst.iter_mut().zip(brow) {
                    *o += aip * bpj;
                }
            }
        }
        let shape = if tb.rank() == 2 { vec![m, n] } else { vec![m] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    fn zip_same(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(value, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| c * x);
        self.push(value, Op::Scale(a, c))
    }

    /// `1 − a`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 - x);
        self.push(value, Op::OneMinus(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(libm::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(tensor::sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    /// Hard threshold `τ(σ(x))`, which is 1 iff `x > 0`. The backward pass
    /// uses the derivative of `σ` in place of the step's zero derivative.
    pub fn step_ste(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
        self.push(value, Op::StepSte(a))
    }

    /// Concatenation along axis 0; trailing dims must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat"))?;
        let tail = self.value(first).shape()[1..].to_vec();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape()[1..] != tail[..] {
                return Err(mismatch("concat", self.value(first), t));
            }
            rows += t.shape()[0];
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(&tail);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    /// `a[start..start+len]` of a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 1 || len == 0 || start + len > t.len() {
            return Err(Error::OutOfRange {
                what: "slice",
                index: start + len,
                len: t.len(),
            });
        }
        let value = Tensor::vector(t.data()[start..start + len].to_vec());
        Ok(self.push(value, Op::Slice(a, start)))
    }

    /// Row `i` of a matrix as a vector (embedding lookup).
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 2 || i >= t.shape()[0] {
            return Err(Error::OutOfRange {
                what: "row",
                index: i,
                len: t.shape()[0],
            });
        }
        let cols = t.shape()[1];
        let value = Tensor::vector(t.data()[i * cols..(i + 1) * cols].to_vec());
        Ok(self.push(value, Op::Row(a, i)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|x| x * x).sum();
        self.push(Tensor::scalar(s), Op::SumSquares(a))
    }

    /// Mean of all entries.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Elementwise average of same-shape tensors.
    pub fn mean_of(&mut self, items: &[Var]) -> Result<Var> {
        let first = *items.first().ok_or(Error::Empty("mean_of"))?;
        let mut acc = self.value(first).clone();
        for &v in &items[1..] {
            let t = self.value(v);
            if t.shape() != acc.shape() {
                return Err(mismatch("mean_of", &acc, t));
            }
            for (a, &x) in acc.data_mut().iter_mut().zip(t.data()) {
                *a += x;
            }
        }
        let n = items.len() as f64;
        acc.data_mut().iter_mut().for_each(|a| *a /= n);
        Ok(self.push(acc, Op::MeanOf(items.to_vec())))
    }

    /// Broadcast product of a `[1]` scalar with any tensor.
    pub fn scale_by(&mut self, s: Var, a: Var) -> Result<Var> {
        let ts = self.value(s);
        if ts.len() != 1 {
            return Err(mismatch("scale_by", ts, self.value(a)));
        }
        let c = ts.item();
        let value = self.value(a).map(|x| c * x);
        Ok(self.push(value, Op::ScaleBy(s, a)))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 1 {
            return Err(mismatch("softmax", t, t));
        }
        let value = Tensor::vector(tensor::softmax(t.data()));
        Ok(self.push(value, Op::Softmax(a)))
    }

    /// `−log softmax(logits)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let t = self.value(logits);
        if t.rank() != 1 || target >= t.len() {
            return Err(Error::OutOfRange {
                what: "vocabulary",
                index: target,
                len: t.len(),
            });
        }
        let nll = -tensor::log_softmax(t.data())[target];
        Ok(self.push(Tensor::scalar(nll), Op::CrossEntropy(logits, target)))
    }

    /// `Σ_n weights[n] · items[n]`.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let w = self.value(weights).data().to_vec();
        if w.len() != items.len() || items.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "weighted_sum",
                left: vec![w.len()],
                right: vec![items.len()],
            });
        }
        let shape = self.value(items[0]).shape().to_vec();
        let mut out = vec![0.0; self.value(items[0]).len()];
        for (&wn, &v) in w.iter().zip(items) {
            let t = self.value(v);
            if t.shape() != &shape[..] {
                return Err(mismatch("weighted_sum", self.value(items[0]), t));
            }
            for (o, &x) in out.iter_mut().zip(t.data()) {
                *o += wn * x;
            }
        }
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::WeightedSum(weights, items.to_vec())))
    }

    /// Reverse sweep from a `[1]`-shaped loss.
    pub fn backward(&self, loss: Var) -> Result<Adjoints> {
        if self.value(loss).len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                left: self.value(loss).shape().to_vec(),
                right: vec![1],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Adjoints { grads })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = match &node.value {
            Value::Owned(t) => t,
            Value::Param(_) => return,
        };
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.len() / k;
                let (ad, bd) = (ta.data(), tb.data());
                with_grad(grads, *a, ad.len(), |ga| {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let s: f64 = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                            ga[r * k + p] += s;
                        }
                    }
                });
                with_grad(grads, *b, bd.len(), |gb| {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let arp = ad[r * k + p];
                            for (dst, &x) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *dst += arp * x;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                with_grad(grads, *a, g.len(), |ga| axpy(ga, 1.0, g));
                with_grad(grads, *b, g.len(), |gb| axpy(gb, 1.0, g));
            }
            Op::Sub(a, b) => {
                with_grad(grads, *a, g.len(), |ga| axpy(ga, 1.0, g));
                with_grad(grads, *b, g.len(), |gb| axpy(gb, -1.0, g));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                with_grad(grads, *a, g.len(), |ga| {
                    for ((d, &x), &y) in ga.iter_mut().zip(g).zip(bd) {
                        *d += x * y;
                    }
                });
                with_grad(grads, *b, g.len(), |gb| {
                    for ((d, &x), &y) in gb.iter_mut().zip(g).zip(ad) {
                        *d += x * y;
                    }
                });
            }
            Op::Scale(a, c) => with_grad(grads, *a, g.len(), |ga| axpy(ga, *c, g)),
            Op::OneMinus(a) => with_grad(grads, *a, g.len(), |ga| axpy(ga, -1.0, g)),
            Op::Tanh(a) => {
                let y = out.data();
                with_grad(grads, *a, g.len(), |ga| {
                    for ((d, &x), &t) in ga.iter_mut().zip(g).zip(y) {
                        *d += x * (1.0 - t * t);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                with_grad(grads, *a, g.len(), |ga| {
                    for ((d, &x), &s) in ga.iter_mut().zip(g).zip(y) {
                        *d += x * s * (1.0 - s);
                    }
                });
            }
            Op::StepSte(a) => {
                let pre = self.data(*a);
                with_grad(grads, *a, g.len(), |ga| {
                    for ((d, &x), &p) in ga.iter_mut().zip(g).zip(pre) {
                        let s = tensor::sigmoid(p);
                        *d += x * s * (1.0 - s);
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    with_grad(grads, p, n, |gp| axpy(gp, 1.0, &g[offset..offset + n]));
                    offset += n;
                }
            }
            Op::Slice(a, start) => {
                let n = self.value(*a).len();
                let start = *start;
                with_grad(grads, *a, n, |ga| axpy(&mut ga[start..start + g.len()], 1.0, g));
            }
            Op::Row(a, r) => {
                let n = self.value(*a).len();
                let cols = g.len();
                let r = *r;
                with_grad(grads, *a, n, |ga| axpy(&mut ga[r * cols..(r + 1) * cols], 1.0, g));
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                with_grad(grads, *a, n, |ga| ga.iter_mut().for_each(|d| *d += g[0]));
            }
            Op::SumSquares(a) => {
                let x = self.data(*a);
                with_grad(grads, *a, x.len(), |ga| {
                    for (d, &xi) in ga.iter_mut().zip(x) {
                        *d += 2.0 * xi * g[0];
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let c = g[0] / n as f64;
                with_grad(grads, *a, n, |ga| ga.iter_mut().for_each(|d| *d += c));
            }
            Op::MeanOf(items) => {
                let c = 1.0 / items.len() as f64;
                for &v in items {
                    with_grad(grads, v, g.len(), |gv| axpy(gv, c, g));
                }
            }
            Op::ScaleBy(s, a) => {
                let c = self.value(*s).item();
                let x = self.data(*a);
                let ds: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
                with_grad(grads, *s, 1, |gs| gs[0] += ds);
                with_grad(grads, *a, g.len(), |ga| axpy(ga, c, g));
            }
            Op::Softmax(a) => {
                let y = out.data();
                let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                with_grad(grads, *a, g.len(), |ga| {
                    for ((d, &gi), &yi) in ga.iter_mut().zip(g).zip(y) {
                        *d += yi * (gi - dot);
                    }
                });
            }
            Op::CrossEntropy(logits, target) => {
                let p = tensor::softmax(self.data(*logits));
                let target = *target;
                with_grad(grads, *logits, p.len(), |gl| {
                    for (j, (d, &pj)) in gl.iter_mut().zip(&p).enumerate() {
                        let onehot = if j == target { 1.0 } else { 0.0 };
                        *d += g[0] * (pj - onehot);
                    }
                });
            }
            Op::WeightedSum(w, items) => {
                let wd = self.data(*w).to_vec();
                let dw: Vec<f64> = items
                    .iter()
                    .map(|&v| self.data(v).iter().zip(g).map(|(a, b)| a * b).sum())
                    .collect();
                with_grad(grads, *w, wd.len(), |gw| axpy(gw, 1.0, &dw));
                for (&v, &wn) in items.iter().zip(&wd) {
                    with_grad(grads, v, g.len(), |gv| axpy(gv, wn, g));
                }
            }
        }
    }

    /// Adds `scale ×` the parameter adjoints into `grads`.
    pub fn accumulate(&self, adjoints: &Adjoints, grads: &mut Grads, scale: f64) {
        for (pid, slot) in self.param_vars.iter().enumerate() {
            let Some(v) = slot else { continue };
            let Some(g) = adjoints.wrt(*v) else { continue };
            axpy(grads.get_mut(ParamId(pid)), scale, g);
        }
    }
}

fn with_grad(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, &xi) in dst.iter_mut().zip(x) {
        *d += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> ParamRegistry {
        ParamRegistry::new()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let r = reg();
        let mut t = Tape::new(&r);
        let i = t.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = t.constant(Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap());
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.data(y), &[3.0, 4.0]);
        assert_eq!(t.shape(y), &[2, 1]);
        let a = t.constant(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let b = t.constant(Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap());
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.data(c), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_reports_both_shapes() {
        let r = reg();
        let mut t = Tape::new(&r);
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 1]));
        match t.matmul(a, b) {
            Err(Error::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2, 1]);
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn elementary_values() {
        let r = reg();
        let mut t = Tape::new(&r);
        let z = t.constant(Tensor::scalar(0.0));
        let s = t.sigmoid(z);
        let h = t.tanh(z);
        assert_eq!(t.value(s).item(), 0.5);
        assert_eq!(t.value(h).item(), 0.0);
        let a = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = t.constant(Tensor::vector(vec![3.0]));
        let c = t.concat(&[a, b]).unwrap();
        assert_eq!(t.data(c), &[1.0, 2.0, 3.0]);
        assert!(t.add(a, b).is_err());
        assert!(t.softmax(a).is_ok());
    }

    #[test]
    fn fan_out_accumulates() {
        let mut r = reg();
        let p = r.insert("x", Tensor::vector(vec![1.5, -2.0])).unwrap();
        // f = sum(x*x) uses x twice; single-use gradient of sum(x*c) is c.
        let mut t = Tape::new(&r);
        let x = t.param(p);
        let y = t.mul(x, x).unwrap();
        let f = t.sum(y);
        let adj = t.backward(f).unwrap();
        assert_eq!(adj.wrt(x).unwrap(), &[3.0, -4.0]);
    }

    #[test]
    fn param_node_is_reused() {
        let mut r = reg();
        let p = r.insert("x", Tensor::scalar(1.0)).unwrap();
        let mut t = Tape::new(&r);
        assert_eq!(t.param(p), t.param(p));
    }

    #[test]
    fn step_forward_is_hard_backward_is_sigmoid() {
        let mut r = reg();
        let p = r.insert("x", Tensor::vector(vec![0.3, -0.2, 0.0])).unwrap();
        let mut t = Tape::new(&r);
        let x = t.param(p);
        let s = t.step_ste(x);
        assert_eq!(t.data(s), &[1.0, 0.0, 0.0]);
        let f = t.sum(s);
        let adj = t.backward(f).unwrap();
        let g = adj.wrt(x).unwrap();
        for (gi, &xi) in g.iter().zip(&[0.3, -0.2, 0.0]) {
            let sg = tensor::sigmoid(xi);
            assert!((gi - sg * (1.0 - sg)).abs() < 1e-15);
        }
    }

    #[test]
    fn unreached_nodes_have_no_adjoint() {
        let mut r = reg();
        let p = r.insert("x", Tensor::scalar(1.0)).unwrap();
        let q = r.insert("y", Tensor::scalar(1.0)).unwrap();
        let mut t = Tape::new(&r);
        let x = t.param(p);
        let y = t.param(q);
        let f = t.sum_squares(x);
        let adj = t.backward(f).unwrap();
        assert!(adj.wrt(y).is_none());
    }
}
