//! Minibatch SGD training and parallel evaluation.

use std::path::Path;

use anyhow::{bail, Result};
use eqvit::models::ImageModel;
use eqvit::nn::{Ctx, Module, Sgd};
use eqvit::tensor::{checkpoint, NdArray, Scalar, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::OptimizerConfig;
use crate::synthetic::{LabeledSet, PairSet};

/// Mean training loss of every epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub epoch_loss: Vec<f64>,
}

fn fit<T, M>(
    model: &mut M,
    n: usize,
    opt: &OptimizerConfig,
    mut loss_of: impl FnMut(&M, &Ctx<T>, &[usize]) -> eqvit::Result<Tensor<T>>,
) -> Result<TrainLog>
where
    T: Scalar,
    M: ImageModel<T>,
{
    let mut sgd = Sgd::new(opt.lr, opt.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainLog { epoch_loss: Vec::with_capacity(opt.epochs) };
    for epoch in 0..opt.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opt.batch_size) {
            let ctx = Ctx::training();
            let loss = loss_of(model, &ctx, batch)?;
            let value = loss.value().data()[0].as_f64();
            if !value.is_finite() {
                bail!("loss diverged at epoch {epoch}: {value}");
            }
            loss.backward()?;
            sgd.step(model, &ctx.grads());
            total += value * batch.len() as f64;
        }
        log.epoch_loss.push(if n == 0 { 0.0 } else { total / n as f64 });
    }
    Ok(log)
}

/// Cross-entropy training on labelled images.
pub fn train_classifier<T: Scalar, M: ImageModel<T>>(
    model: &mut M,
    data: &LabeledSet,
    opt: &OptimizerConfig,
) -> Result<TrainLog> {
    let images: Vec<NdArray<T>> = data.images.iter().map(|x| x.cast()).collect();
    fit(model, data.len(), opt, |m, ctx, batch| {
        let xs: Vec<NdArray<T>> = batch.iter().map(|&i| images[i].clone()).collect();
        let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
        m.forward_batch(ctx, &xs)?.cross_entropy(&labels)?.reshape(&[1])
    })
}

/// Mean-squared-error training on image pairs.
pub fn train_regressor<T: Scalar, M: ImageModel<T>>(
    model: &mut M,
    data: &PairSet,
    opt: &OptimizerConfig,
) -> Result<TrainLog> {
    let inputs: Vec<NdArray<T>> = data.inputs.iter().map(|x| x.cast()).collect();
    let targets: Vec<NdArray<T>> = data.targets.iter().map(|x| x.cast()).collect();
    fit(model, data.len(), opt, |m, ctx, batch| {
        let xs: Vec<NdArray<T>> = batch.iter().map(|&i| inputs[i].clone()).collect();
        let ys = Tensor::concat(&batch.iter().map(|&i| Tensor::constant(targets[i].clone())).collect::<Vec<_>>(), 0)?;
        let pred = m.forward_batch(ctx, &xs)?;
        pred.reshape(ys.shape())?.mse(ys.value())?.reshape(&[1])
    })
}

/// Forward passes over `inputs` on the rayon pool; output order matches
/// input order, so results do not depend on the worker count.
pub fn predict<T: Scalar, M: ImageModel<T> + Sync>(model: &M, inputs: &[NdArray<f64>]) -> Result<Vec<NdArray<f64>>> {
    inputs
        .par_iter()
        .map(|x| {
            let y = model.forward(&Ctx::inference(), &Tensor::constant(x.cast::<T>()))?;
            Ok(y.value().cast::<f64>())
        })
        .collect()
}

pub fn argmax(logits: &NdArray<f64>) -> usize {
    logits
        .data()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Fraction of correctly classified images.
pub fn accuracy<T: Scalar, M: ImageModel<T> + Sync>(model: &M, data: &LabeledSet) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let preds = predict(model, &data.images)?;
    let correct = preds.iter().zip(&data.labels).filter(|(p, &y)| argmax(p) == y).count();
    Ok(correct as f64 / data.len() as f64)
}

/// PSNR in dB of predictions against targets, peak 1.0, pooled over the set.
pub fn psnr<T: Scalar, M: ImageModel<T> + Sync>(model: &M, data: &PairSet) -> Result<f64> {
    let preds = predict(model, &data.inputs)?;
    let mut se = 0.0;
    let mut count = 0usize;
    for (p, t) in preds.iter().zip(&data.targets) {
        se += p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += t.len();
    }
    Ok(psnr_from_mse(se / count.max(1) as f64))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    10.0 * (1.0 / mse).log10()
}

pub fn save_checkpoint<T: Scalar>(model: &dyn Module<T>, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    checkpoint::write_checkpoint(file, &model.named_params())?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(model: &mut dyn Module<T>, path: &Path) -> Result<()> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    model.load_named(&checkpoint::read_checkpoint(file)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_psnr() {
        assert_eq!(argmax(&NdArray::from_f64(vec![3], &[0.1, 2.0, -1.0]).unwrap()), 1);
        assert!((psnr_from_mse(1e-4) - 40.0).abs() < 1e-9);
    }
}
