use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FeatureInput, Real};
use crate::error::{Error, Result};

/// Fully connected layer, `weights` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[T] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }

    fn affine_dense(&self, a: &[T]) -> Vec<T> {
        (0..self.outputs)
            .map(|j| {
                self.row(j)
                    .iter()
                    .zip(a)
                    .fold(self.bias[j], |acc, (&w, &x)| acc + w * x)
            })
            .collect()
    }

    fn affine_sparse(&self, nz: &[(usize, T)]) -> Vec<T> {
        (0..self.outputs)
            .map(|j| {
                let row = self.row(j);
                nz.iter().fold(self.bias[j], |acc, &(i, x)| acc + row[i] * x)
            })
            .collect()
    }
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<DenseLayer<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &MlpModel<T>) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(T::zero());
            l.bias.fill(T::zero());
        }
    }
}

/// Feedforward network: ReLU on every hidden layer, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T = f32> {
    pub layers: Vec<DenseLayer<T>>,
}

/// Per-layer activations of one forward pass. `pre[k]` is layer `k`'s affine
/// output; `post[k]` its activation (ReLU for hidden layers).
struct Trace<T> {
    input_nz: Vec<(usize, T)>,
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

impl<T: Real> MlpModel<T> {
    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InputShape(format!(
                "layer dims need at least two positive entries, got {dims:?}"
            )));
        }
        Ok(())
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(MlpModel {
            layers: dims
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        })
    }

    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn he_uniform(dims: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            let bound = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = T::of(rng.gen_range(-bound..bound));
            }
        }
        Ok(model)
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InputShape("a model needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::InputShape(format!("layer {k} buffers do not match its shape")));
            }
            if k > 0 && layers[k - 1].outputs != l.inputs {
                return Err(Error::InputShape(format!(
                    "layer {k} expects {} inputs but the previous layer emits {}",
                    l.inputs,
                    layers[k - 1].outputs
                )));
            }
        }
        Ok(MlpModel { layers })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Multiplies every weight and bias of the output layer by `alpha`.
    pub fn scale_output(&mut self, alpha: T) {
        let last = self.layers.last_mut().expect("nonempty");
        for v in last.weights.iter_mut().chain(last.bias.iter_mut()) {
            *v = *v * alpha;
        }
    }

    fn trace<X: FeatureInput<T> + ?Sized>(&self, x: &X) -> Result<Trace<T>> {
        if x.dim() != self.input_dim() {
            return Err(Error::InputShape(format!(
                "model expects {} inputs, got {}",
                self.input_dim(),
                x.dim()
            )));
        }
        let input_nz = x.nonzeros();
        let n = self.layers.len();
        let mut pre = Vec::with_capacity(n);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(n);
        for (k, layer) in self.layers.iter().enumerate() {
            let z = if k == 0 {
                layer.affine_sparse(&input_nz)
            } else {
                layer.affine_dense(&post[k - 1])
            };
            let a = if k + 1 < n {
                z.iter().map(|&v| v.max(T::zero())).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(a);
        }
        if post[n - 1].iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network output is not finite".into()));
        }
        Ok(Trace {
            input_nz,
            pre,
            post,
        })
    }

    pub fn forward<X: FeatureInput<T> + ?Sized>(&self, x: &X) -> Result<Vec<T>> {
        Ok(self.trace(x)?.post.pop().expect("nonempty"))
    }

    /// Backpropagates `out_grad` (dLoss/dOutput) through a recorded pass.
    ///
    /// Parameter gradients accumulate into `grads`; when `input_grad` is
    /// given, dLoss/dInput is written there for the requested indices.
    fn backprop(
        &self,
        trace: &Trace<T>,
        out_grad: Vec<T>,
        grads: Option<&mut Gradients<T>>,
        input_grad: Option<(&[usize], &mut [T])>,
    ) -> Result<()> {
        let n = self.layers.len();
        let mut delta = out_grad;
        let mut grads = grads;
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            if k + 1 < n {
                // ReLU subgradient is 0 at 0
                for (d, &z) in delta.iter_mut().zip(&trace.pre[k]) {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            if delta.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("gradient at layer {k} is not finite")));
            }
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g.layers[k];
                for (j, &dj) in delta.iter().enumerate() {
                    gl.bias[j] = gl.bias[j] + dj;
                    if dj.is_zero() {
                        continue;
                    }
                    let row = &mut gl.weights[j * layer.inputs..(j + 1) * layer.inputs];
                    if k == 0 {
                        for &(i, x) in &trace.input_nz {
                            row[i] = row[i] + dj * x;
                        }
                    } else {
                        for (w, &a) in row.iter_mut().zip(&trace.post[k - 1]) {
                            *w = *w + dj * a;
                        }
                    }
                }
            }
            if k > 0 {
                let mut prev = vec![T::zero(); layer.inputs];
                for (j, &dj) in delta.iter().enumerate() {
                    if dj.is_zero() {
                        continue;
                    }
                    for (p, &w) in prev.iter_mut().zip(layer.row(j)) {
                        *p = *p + w * dj;
                    }
                }
                delta = prev;
            } else if let Some((indices, out)) = input_grad {
                for (o, &i) in out.iter_mut().zip(indices) {
                    *o = delta
                        .iter()
                        .enumerate()
                        .fold(T::zero(), |acc, (j, &dj)| acc + layer.weights[j * layer.inputs + i] * dj);
                }
                return Ok(());
            }
        }
        Ok(())
    }

    /// Adds the MSE gradient of one batch to `grads` and returns the batch loss.
    pub fn accumulate_gradients<X: FeatureInput<T> + ?Sized>(
        &self,
        inputs: &[&X],
        targets: &[&[T]],
        grads: &mut Gradients<T>,
    ) -> Result<T> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::InputShape(format!(
                "batch has {} inputs and {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let out_dim = self.output_dim();
        let count = T::of((inputs.len() * out_dim) as f64);
        let two = T::of(2.0);
        let mut loss = T::zero();
        for (x, t) in inputs.iter().zip(targets) {
            if t.len() != out_dim {
                return Err(Error::InputShape(format!(
                    "target has {} entries, model outputs {out_dim}",
                    t.len()
                )));
            }
            let trace = self.trace(*x)?;
            let pred = &trace.post[self.layers.len() - 1];
            let mut out_grad = Vec::with_capacity(out_dim);
            for (&p, &y) in pred.iter().zip(t.iter()) {
                let diff = p - y;
                loss = loss + diff * diff;
                out_grad.push(two * diff / count);
            }
            self.backprop(&trace, out_grad, Some(grads), None)?;
        }
        let loss = loss / count;
        if !loss.is_finite() {
            return Err(Error::Numeric("loss is not finite".into()));
        }
        Ok(loss)
    }

    /// Exact MSE gradients of one batch with respect to every parameter.
    pub fn backward<X: FeatureInput<T> + ?Sized>(
        &self,
        inputs: &[&X],
        targets: &[&[T]],
    ) -> Result<(Gradients<T>, T)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate_gradients(inputs, targets, &mut grads)?;
        Ok((grads, loss))
    }

    /// Output `output_index` and its partial derivatives with respect to the
    /// inputs listed in `indices` (in that order).
    pub fn output_and_input_gradient<X: FeatureInput<T> + ?Sized>(
        &self,
        x: &X,
        output_index: usize,
        indices: &[usize],
    ) -> Result<(T, Vec<T>)> {
        let out_dim = self.output_dim();
        if output_index >= out_dim {
            return Err(Error::InputShape(format!(
                "output index {output_index} out of range for {out_dim} outputs"
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.input_dim()) {
            return Err(Error::InputShape(format!("input index {bad} out of range")));
        }
        let trace = self.trace(x)?;
        let value = trace.post[self.layers.len() - 1][output_index];
        let mut seed = vec![T::zero(); out_dim];
        seed[output_index] = T::one();
        let mut out = vec![T::zero(); indices.len()];
        self.backprop(&trace, seed, None, Some((indices, &mut out)))?;
        Ok((value, out))
    }

    /// Converts to another float precision.
    pub fn cast<U: Real>(&self) -> MlpModel<U> {
        MlpModel {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|&v| U::of(v.as_f64())).collect(),
                    bias: l.bias.iter().map(|&v| U::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}
