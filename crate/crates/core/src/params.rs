//! Named trainable parameters and their gradient accumulators.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Insertion-ordered registry. Each name owns exactly one storage slot, so a
/// parameter used by two consumers is shared by identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamRegistry {
    names: Vec<String>,
    values: Vec<Tensor>,
    index: BTreeMap<String, ParamId>,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateParam(name.to_string()));
        }
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| self.get(id))
    }

    /// Replaces a parameter's value; the shape must not change.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let slot = &mut self.values[id.0];
        if slot.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "set",
                left: slot.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> + '_ {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn total_entries(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// Gradient accumulators aligned with a registry. Accumulation is additive;
/// call [`Grads::zero`] between optimizer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    slots: Vec<Vec<f64>>,
}

impl Grads {
    pub fn for_registry(params: &ParamRegistry) -> Self {
        Self {
            slots: params
                .values
                .iter()
                .map(|t| alloc::vec![0.0; t.len()])
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for s in &mut self.slots {
            s.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.slots[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.slots[id.0]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().flatten().all(|g| g.is_finite())
    }
}

/// Uniform `[-bound, bound]` with `bound = 1/sqrt(fan_in)`, the usual
/// recurrent-layer initialization.
pub fn uniform_init<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let bound = 1.0 / libm::sqrt(cols as f64);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_ordered() {
        let mut reg = ParamRegistry::new();
        let a = reg.insert("a", Tensor::scalar(1.0)).unwrap();
        let b = reg.insert("b", Tensor::scalar(2.0)).unwrap();
        assert!(matches!(
            reg.insert("a", Tensor::scalar(3.0)),
            Err(Error::DuplicateParam(_))
        ));
        let names: Vec<&str> = reg.iter().map(|(_, n, _)| n).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(reg.id("b"), Some(b));
        assert_eq!(reg.get(a).item(), 1.0);
    }

    #[test]
    fn set_keeps_shape() {
        let mut reg = ParamRegistry::new();
        let a = reg.insert("a", Tensor::zeros(&[2])).unwrap();
        assert!(reg.set(a, Tensor::zeros(&[3])).is_err());
        reg.set(a, Tensor::vector(alloc::vec![1.0, 2.0])).unwrap();
        assert_eq!(reg.get(a).data(), &[1.0, 2.0]);
    }
}
