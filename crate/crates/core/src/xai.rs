//! Integrated Gradients attribution for the localization network.
//!
//! For input `x`, baseline `x'` and `m` steps, feature `i` receives
//! `(x_i - x'_i) / m * sum_{k=1..m} dF(x' + k/m (x - x'))/dx_i`, a
//! right-endpoint Riemann sum of the straight-line path integral. Features
//! where `x_i == x'_i` get exactly zero and their gradients are never
//! evaluated, which keeps attribution cheap on sparse edge maps.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::nn::{FeatureInput, MlpModel, Real};

pub const DEFAULT_STEPS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    pub values: Vec<f64>,
    /// 0 explains the predicted x, 1 the predicted y.
    pub output_index: usize,
    pub baseline: String,
    pub steps: usize,
}

impl AttributionMap {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `index,value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

fn check_lengths<T: Real>(model: &MlpModel<T>, x: &[f64], baseline: &[f64]) -> Result<()> {
    if x.len() != model.input_dim() || baseline.len() != model.input_dim() {
        return Err(Error::InputShape(format!(
            "input ({}) and baseline ({}) must both have {} entries",
            x.len(),
            baseline.len(),
            model.input_dim()
        )));
    }
    Ok(())
}

fn output_at<T: Real>(model: &MlpModel<T>, x: &[f64], output_index: usize) -> Result<f64> {
    let v: Vec<T> = x.iter().map(|&a| T::of(a)).collect();
    let out = model.forward(&v)?;
    out.get(output_index)
        .map(|o| o.as_f64())
        .ok_or_else(|| Error::InputShape(format!("output index {output_index} out of range")))
}

pub fn integrated_gradients<T: Real>(
    model: &MlpModel<T>,
    x: &[f64],
    baseline: &[f64],
    steps: usize,
    output_index: usize,
) -> Result<AttributionMap> {
    check_lengths(model, x, baseline)?;
    if steps == 0 {
        return Err(Error::Domain("integrated gradients needs at least one step".into()));
    }
    if output_index >= model.output_dim() {
        return Err(Error::InputShape(format!(
            "output index {output_index} out of range for {} outputs",
            model.output_dim()
        )));
    }
    let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] != baseline[i]).collect();
    let mut grad_sums = vec![0.0f64; active.len()];
    if !active.is_empty() {
        let mut point: Vec<T> = baseline.iter().map(|&b| T::of(b)).collect();
        for k in 1..=steps {
            let alpha = k as f64 / steps as f64;
            for &i in &active {
                point[i] = T::of(baseline[i] + alpha * (x[i] - baseline[i]));
            }
            let (_, grads) = model.output_and_input_gradient(&point, output_index, &active)?;
            for (s, g) in grad_sums.iter_mut().zip(grads) {
                *s += g.as_f64();
            }
        }
    }
    let mut values = vec![0.0; x.len()];
    for (&i, s) in active.iter().zip(&grad_sums) {
        values[i] = (x[i] - baseline[i]) * s / steps as f64;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("attribution is not finite".into()));
    }
    let baseline_desc = if baseline.iter().all(|&b| b == 0.0) {
        "zeros".to_string()
    } else {
        "custom".to_string()
    };
    Ok(AttributionMap {
        values,
        output_index,
        baseline: baseline_desc,
        steps,
    })
}

/// `|sum(attributions) - (F(x) - F(x'))|`.
pub fn completeness_gap<T: Real>(
    model: &MlpModel<T>,
    x: &[f64],
    baseline: &[f64],
    attributions: &AttributionMap,
) -> Result<f64> {
    check_lengths(model, x, baseline)?;
    if attributions.values.len() != x.len() {
        return Err(Error::InputShape("attribution length does not match input".into()));
    }
    let fx = output_at(model, x, attributions.output_index)?;
    let fb = output_at(model, baseline, attributions.output_index)?;
    Ok((attributions.sum() - (fx - fb)).abs())
}

/// Min-max normalized `|attribution|` as a gray image.
pub fn saliency_image(att: &AttributionMap, width: usize, height: usize) -> Result<ImageBuffer> {
    if width * height != att.values.len() {
        return Err(Error::InputShape(format!(
            "{width}x{height} does not hold {} attributions",
            att.values.len()
        )));
    }
    let mags: Vec<f64> = att.values.iter().map(|v| v.abs()).collect();
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data = if mags.is_empty() || hi <= lo {
        vec![0u8; mags.len()]
    } else {
        mags.iter()
            .map(|m| ((m - lo) / (hi - lo) * 255.0).round() as u8)
            .collect()
    };
    ImageBuffer::from_raw(width, height, 1, data)
}

/// Writes the saliency map as a binary PGM.
pub fn export_saliency(att: &AttributionMap, width: usize, height: usize, path: &Path) -> Result<()> {
    saliency_image(att, width, height)?.save(path)
}

/// Integrated gradients on a sparse feature vector, zero baseline.
pub fn integrated_gradients_zero_baseline<T: Real, X: FeatureInput<T> + ?Sized>(
    model: &MlpModel<T>,
    x: &X,
    steps: usize,
    output_index: usize,
) -> Result<AttributionMap> {
    let mut dense = vec![0.0; x.dim()];
    for (i, v) in x.nonzeros() {
        dense[i] = v.as_f64();
    }
    let zeros = vec![0.0; x.dim()];
    integrated_gradients(model, &dense, &zeros, steps, output_index)
}
