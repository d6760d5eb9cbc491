use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AdamState, FeatureInput, Gradients, MlpModel, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Example<X> {
    pub input: X,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 8,
            learning_rate: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Domain("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Domain(format!("invalid learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Mean over all elements of the squared differences.
pub fn mse_loss(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != target.len() || pred.iter().zip(target).any(|(p, t)| p.len() != t.len()) {
        return Err(Error::InputShape("prediction and target batches differ in shape".into()));
    }
    let count: usize = pred.iter().map(|p| p.len()).sum();
    if count == 0 {
        return Err(Error::InputShape("empty batch".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok(sum / count as f64)
}

/// Mini-batch training with a fresh Adam state; returns the mean training loss per epoch.
pub fn train<T: Real, X: FeatureInput<T>>(
    model: &mut MlpModel<T>,
    data: &[Example<X>],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    train_with(model, data, cfg, |_, _| {})
}

/// Like [`train`], calling `on_epoch(epoch, loss)` after every epoch.
pub fn train_with<T: Real, X: FeatureInput<T>>(
    model: &mut MlpModel<T>,
    data: &[Example<X>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let targets: Vec<Vec<T>> = data
        .iter()
        .map(|e| e.target.iter().map(|&v| T::of(v)).collect())
        .collect();
    let mut adam = AdamState::new(model, cfg.learning_rate);
    let mut grads = Gradients::zeros_like(model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<&X> = batch.iter().map(|&i| &data[i].input).collect();
            let tgts: Vec<&[T]> = batch.iter().map(|&i| targets[i].as_slice()).collect();
            grads.zero();
            let loss = model.accumulate_gradients(&inputs, &tgts, &mut grads)?;
            adam.step(model, &grads)?;
            total += loss.as_f64() * batch.len() as f64;
        }
        let mean = total / data.len() as f64;
        on_epoch(epoch, mean);
        curve.push(mean);
    }
    Ok(curve)
}

/// Held-out error in meters: per-axis mean absolute error plus overall MSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub x_loss: f64,
    pub y_loss: f64,
    pub mse: f64,
    pub count: usize,
}

pub fn evaluate<T: Real, X: FeatureInput<T>>(model: &MlpModel<T>, data: &[Example<X>]) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if model.output_dim() != 2 {
        return Err(Error::InputShape(format!(
            "evaluation needs a 2-output model, got {}",
            model.output_dim()
        )));
    }
    let (mut ax, mut ay, mut sq) = (0.0, 0.0, 0.0);
    for e in data {
        if e.target.len() != 2 {
            return Err(Error::InputShape("evaluation targets must be (x, y)".into()));
        }
        let p = model.forward(&e.input)?;
        let dx = p[0].as_f64() - e.target[0];
        let dy = p[1].as_f64() - e.target[1];
        ax += dx.abs();
        ay += dy.abs();
        sq += dx * dx + dy * dy;
    }
    let n = data.len() as f64;
    Ok(Metrics {
        x_loss: ax / n,
        y_loss: ay / n,
        mse: sq / (2.0 * n),
        count: data.len(),
    })
}

/// Writes `epoch,loss` rows (epochs numbered from 1).
pub fn write_loss_csv(curve: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mse_cases() {
        assert_eq!(mse_loss(&[vec![1.0, 2.0]], &[vec![1.0, 2.0]]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[vec![1.0, 2.0]], &[vec![0.0, 0.0]]).unwrap(), 2.5);
        assert!(mse_loss(&[vec![1.0]], &[vec![1.0, 2.0]]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p: Vec<Vec<f64>> = (0..7).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let t: Vec<Vec<f64>> = (0..7).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let mut sum = 0.0;
        let mut count = 0;
        for b in 0..7 {
            for k in 0..2 {
                sum += (p[b][k] - t[b][k]).powi(2);
                count += 1;
            }
        }
        assert!((mse_loss(&p, &t).unwrap() - sum / count as f64).abs() < 1e-12);
    }

    #[test]
    fn evaluate_cases() {
        let zero = MlpModel::<f64>::zeros(&[1, 2]).unwrap();
        let data = vec![
            Example { input: vec![1.0], target: vec![1.0, 0.0] },
            Example { input: vec![2.0], target: vec![-1.0, 0.0] },
        ];
        let m = evaluate(&zero, &data).unwrap();
        assert_eq!((m.x_loss, m.y_loss, m.mse), (1.0, 0.0, 0.5));

        let perfect = vec![Example { input: vec![1.0], target: vec![0.0, 0.0] }];
        let m = evaluate(&zero, &perfect).unwrap();
        assert_eq!((m.x_loss, m.y_loss, m.mse), (0.0, 0.0, 0.0));

        let empty: Vec<Example<Vec<f64>>> = vec![];
        assert!(matches!(evaluate(&zero, &empty), Err(Error::EmptyDataset)));
    }

    #[test]
    fn evaluation_is_order_invariant() {
        let model = MlpModel::<f64>::he_uniform(&[3, 4, 2], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut data: Vec<Example<Vec<f64>>> = (0..9)
            .map(|_| Example {
                input: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                target: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            })
            .collect();
        let a = evaluate(&model, &data).unwrap();
        data.reverse();
        let b = evaluate(&model, &data).unwrap();
        assert!((a.x_loss - b.x_loss).abs() < 1e-12);
        assert!((a.y_loss - b.y_loss).abs() < 1e-12);
        assert!((a.mse - b.mse).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_training_leaves_weights() {
        let mut model = MlpModel::<f64>::zeros(&[3, 4, 2]).unwrap();
        let data = vec![Example { input: vec![0.5, 1.0, -1.0], target: vec![0.0, 0.0] }];
        let curve = train(&mut model, &data, &TrainConfig { epochs: 3, ..Default::default() }).unwrap();
        assert_eq!(curve, vec![0.0; 3]);
        assert_eq!(model, MlpModel::zeros(&[3, 4, 2]).unwrap());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let mut model = MlpModel::<f64>::zeros(&[1, 2]).unwrap();
        let data: Vec<Example<Vec<f64>>> = vec![];
        assert!(matches!(train(&mut model, &data, &TrainConfig::default()), Err(Error::EmptyDataset)));
    }
}
