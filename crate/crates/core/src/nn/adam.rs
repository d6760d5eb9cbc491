use rayon::prelude::*;

use super::{Gradients, MlpModel, Real};
use crate::error::{Error, Result};

/// Chunk size for the parallel elementwise update.
const PAR_CHUNK: usize = 1 << 16;

/// Adam optimizer state: first and second moments per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    /// Zero moments for `model`, default betas/epsilon and the given learning rate.
    pub fn new(model: &MlpModel<T>, learning_rate: f64) -> Self {
        let buffers = || {
            model
                .layers
                .iter()
                .flat_map(|l| [vec![T::zero(); l.weights.len()], vec![T::zero(); l.bias.len()]])
                .collect::<Vec<_>>()
        };
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: buffers(),
            v: buffers(),
        }
    }

    pub fn second_moments(&self) -> impl Iterator<Item = &T> {
        self.v.iter().flatten()
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn step(&mut self, model: &mut MlpModel<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != model.layers.len()
            || self.m.len() != 2 * model.layers.len()
            || grads
                .layers
                .iter()
                .zip(&model.layers)
                .any(|(g, l)| g.weights.len() != l.weights.len() || g.bias.len() != l.bias.len())
        {
            return Err(Error::InputShape(
                "gradients or optimizer state do not match the model".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let corr1 = T::of(1.0 - self.beta1.powi(t));
        let corr2 = T::of(1.0 - self.beta2.powi(t));
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.epsilon);

        let update = |theta: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for (((th, &g), m), v) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *th = *th - lr * m_hat / (v_hat.sqrt() + eps);
            }
        };

        for (k, (layer, g)) in model.layers.iter_mut().zip(&grads.layers).enumerate() {
            let (ms, vs) = (&mut self.m[2 * k..2 * k + 2], &mut self.v[2 * k..2 * k + 2]);
            let (mw, mb) = ms.split_at_mut(1);
            let (vw, vb) = vs.split_at_mut(1);
            layer
                .weights
                .par_chunks_mut(PAR_CHUNK)
                .zip(g.weights.par_chunks(PAR_CHUNK))
                .zip(mw[0].par_chunks_mut(PAR_CHUNK))
                .zip(vw[0].par_chunks_mut(PAR_CHUNK))
                .for_each(|(((th, g), m), v)| update(th, g, m, v));
            update(&mut layer.bias, &g.bias, &mut mb[0], &mut vb[0]);
        }
        Ok(())
    }
}
