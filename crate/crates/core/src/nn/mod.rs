//! Dense ReLU regression network trained with MSE and Adam.
//!
//! The network is generic over the float type: `f64` for gradient checks,
//! `f32` for the large first layer at training scale. Inputs are consumed
//! through [`FeatureInput`] so the sparse edge maps produced by the radial
//! scan never need to be densified.

mod adam;
mod checkpoint;
mod model;
mod train;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{DenseLayer, Gradients, MlpModel};
pub use train::{evaluate, mse_loss, train, train_with, write_loss_csv, Example, Metrics, TrainConfig};

pub trait Real: Float + FromPrimitive + Default + Sum + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A network input vector that can enumerate its nonzero entries.
pub trait FeatureInput<T: Real> {
    fn dim(&self) -> usize;

    /// Nonzero `(index, value)` pairs in increasing index order.
    fn nonzeros(&self) -> Vec<(usize, T)>;
}

impl<T: Real> FeatureInput<T> for [T] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn nonzeros(&self) -> Vec<(usize, T)> {
        self.iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| (i, v))
            .collect()
    }
}

impl<T: Real> FeatureInput<T> for Vec<T> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn nonzeros(&self) -> Vec<(usize, T)> {
        self.as_slice().nonzeros()
    }
}

/// Sparse feature vector with `f32` storage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f32>,
}

impl SparseVec {
    pub fn from_dense(v: &[f32]) -> Self {
        let mut out = SparseVec {
            dim: v.len(),
            ..Default::default()
        };
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                out.indices.push(i as u32);
                out.values.push(x);
            }
        }
        out
    }

    pub fn to_dense<T: Real>(&self) -> Vec<T> {
        let mut v = vec![T::zero(); self.dim];
        for (&i, &x) in self.indices.iter().zip(&self.values) {
            v[i as usize] = T::of(x as f64);
        }
        v
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl<T: Real> FeatureInput<T> for SparseVec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn nonzeros(&self) -> Vec<(usize, T)> {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, T::of(v as f64)))
            .collect()
    }
}
