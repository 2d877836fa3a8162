use std::collections::HashMap;

use rand::Rng;

use crate::error::TensorError;
use crate::graph::Gradients;
use crate::tensor::{Scalar, Tensor};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named leaf tensors, each paired with a gradient slot of the same shape.
///
/// Gradients accumulate across calls to [`ParamStore::accumulate`]; callers
/// reset them with [`ParamStore::zero_grad`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<S> {
    names: Vec<String>,
    values: Vec<Tensor<S>>,
    grads: Vec<Tensor<S>>,
    lookup: HashMap<String, ParamId>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> Result<ParamId, TensorError> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(TensorError::DuplicateParam(name));
        }
        let id = ParamId(self.values.len());
        self.grads.push(Tensor::zeros(value.shape().to_vec()));
        self.values.push(value);
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<S> {
        &self.grads[id.0]
    }

    /// Mutable access to a value and its gradient at once, for optimizers.
    pub fn value_and_grad_mut(&mut self, id: ParamId) -> (&mut Tensor<S>, &Tensor<S>) {
        (&mut self.values[id.0], &self.grads[id.0])
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x = S::zero());
        }
    }

    pub fn accumulate(&mut self, grads: &Gradients<S>) {
        for (id, g) in grads.iter() {
            if let Some(slot) = self.grads.get_mut(id.0) {
                slot.add_assign(g);
            }
        }
    }

    pub fn grad_sq_norm(&self) -> S {
        self.grads.iter().map(|g| g.sq_norm()).sum()
    }

    pub fn scale_grads(&mut self, factor: S) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x = *x * factor);
        }
    }

    pub fn grads_finite(&self) -> bool {
        self.grads.iter().all(|g| g.all_finite())
    }

    /// Copies every value from `other`; both stores must share a layout.
    pub fn copy_values_from(&mut self, other: &ParamStore<S>) {
        debug_assert_eq!(self.names, other.names);
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            dst.data_mut().copy_from_slice(src.data());
        }
    }

    /// Same layout with values converted to another precision.
    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(|v| v.cast()).collect(),
            grads: self.grads.iter().map(|v| v.cast()).collect(),
            lookup: self.lookup.clone(),
        }
    }
}

/// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_init<S: Scalar, R: Rng + ?Sized>(
    shape: impl Into<Vec<usize>>,
    fan_in: usize,
    rng: &mut R,
) -> Tensor<S> {
    let shape = shape.into();
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| S::of(rng.gen_range(-bound..=bound)))
        .collect();
    Tensor::new(shape, data).expect("length matches shape")
}
