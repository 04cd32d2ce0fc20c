use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// One named weight matrix. Vectors are stored as `1 x n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub value: Array2<f64>,
    /// Running statistics (batch norm) are stored but not optimized.
    pub trainable: bool,
}

/// All weights of one classifier, in a fixed insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>, trainable: bool) {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter tensor {name}");
        self.index.insert(name.clone(), self.tensors.len());
        self.tensors.push(Tensor { name, value, trainable });
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Result<&Array2<f64>> {
        self.position(name)
            .map(|i| &self.tensors[i].value)
            .ok_or_else(|| Error::UnknownTensor(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array2<f64>> {
        match self.position(name) {
            Some(i) => Ok(&mut self.tensors[i].value),
            None => Err(Error::UnknownTensor(name.to_string())),
        }
    }

    pub fn value(&self, i: usize) -> &Array2<f64> {
        &self.tensors[i].value
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|t| t.name.as_str())
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.iter().all(|v| v.is_finite()))
    }

    /// Round every value to the nearest `f32`, the checkpoint storage type.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            t.value.mapv_inplace(|v| v as f32 as f64);
        }
    }

    /// Zero every trainable tensor whose name starts with `prefix`.
    pub fn zero_prefix(&mut self, prefix: &str) {
        for t in &mut self.tensors {
            if t.trainable && t.name.starts_with(prefix) {
                t.value.fill(0.0);
            }
        }
    }
}

/// `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))` matrix.
pub(crate) fn uniform_init(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}
