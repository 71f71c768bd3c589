use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A named, shaped, row-major real tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Frozen tensors are registered (and checkpointed) but never updated.
    #[serde(default = "yes")]
    pub trainable: bool,
}

fn yes() -> bool {
    true
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            name: name.into(),
            shape,
            data,
            trainable: true,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Flat registry of every model tensor, in registration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelParams {
    tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor and returns its index. Names must be unique.
    pub fn register(&mut self, t: Tensor) -> Result<usize> {
        if self.index_of(&t.name).is_some() {
            return Err(Error::Config(format!("duplicate parameter name `{}`", t.name)));
        }
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::DimensionMismatch {
                expected: t.shape.iter().product(),
                found: t.data.len(),
            });
        }
        self.tensors.push(t);
        Ok(self.tensors.len() - 1)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn data(&self, idx: usize) -> &[f64] {
        &self.tensors[idx].data
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count, trainable or not.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.tensors.iter().filter(|t| t.trainable).map(Tensor::len).sum()
    }

    /// All scalars concatenated in registration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.count() {
            return Err(Error::DimensionMismatch {
                expected: self.count(),
                found: flat.len(),
            });
        }
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.data.len();
            t.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name.as_str())
    }

    /// Zero-filled tensors with the same layout, for gradients.
    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            names: self.tensors.iter().map(|t| t.name.clone()).collect(),
            data: self.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }
}

/// Gradients laid out exactly like a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.data.iter().flatten().copied().collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        for x in self.data.iter_mut().flatten() {
            *x *= f;
        }
    }

    pub fn first_non_finite(&self) -> Option<&str> {
        self.names
            .iter()
            .zip(&self.data)
            .find(|(_, d)| d.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n.as_str())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }
}
