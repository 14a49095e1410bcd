use super::{kl_loss_grad, Adam, TrainConfig};
use crate::augment::{self, AugmentPolicy, Phase, SoftLabels};
use crate::engine::{self, Mode, Weights, BN_MOMENTUM};
use crate::error::{invalid_input, Error, Result};
use crate::fusion::ProbabilityMatrix;
use crate::netspec::NetworkSpec;
use crate::tensor::{Shape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Feature tensors with labels and device tags.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub clip_ids: Vec<String>,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub devices: Vec<String>,
    pub classes: Vec<String>,
}

impl LabeledSet {
    pub fn new(clip_ids: Vec<String>, features: Tensor, labels: Vec<usize>, devices: Vec<String>, classes: Vec<String>) -> Result<Self> {
        let n = features.n;
        if clip_ids.len() != n || labels.len() != n || devices.len() != n {
            return invalid_input("clip ids, features, labels and devices must have one entry per clip");
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return invalid_input(format!("label {bad} out of range for {} classes", classes.len()));
        }
        if !features.all_finite() {
            return invalid_input("features contain non-finite values");
        }
        Ok(LabeledSet { clip_ids, features, labels, devices, classes })
    }

    /// Zero mean, unit variance per (sample, channel). Spectrogram sets go
    /// through this before training and inference alike.
    pub fn standardized(mut self) -> Self {
        let shape = self.features.shape;
        for i in 0..self.features.n {
            augment::standardize(self.features.sample_mut(i), shape);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn gather(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        let samples: Vec<&[f32]> = idx.iter().map(|&i| self.features.sample(i)).collect();
        let x = Tensor::stack(&samples, self.features.shape).expect("uniform sample shape");
        (x, idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Rebuild `spec` for a different input shape. Global pooling in every
/// head makes the parameter set independent of the frame count.
pub fn spec_for_input(spec: &NetworkSpec, input: Shape) -> Result<NetworkSpec> {
    if spec.input_shape() == input {
        return Ok(spec.clone());
    }
    let out = spec.recipe.clone().with_input(input).build()?;
    if out.param_count() != spec.param_count() {
        return invalid_input(format!("network '{}' cannot take input {input}", spec.name));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub lr: f64,
    /// Mean KL per clip plus the L2 term at the end of the epoch.
    pub loss: f64,
    pub l2: f64,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: Weights,
    pub log: Vec<EpochRecord>,
}

pub fn train(spec: &NetworkSpec, set: &LabeledSet, config: &TrainConfig, policy: &AugmentPolicy) -> Result<TrainOutcome> {
    train_with(spec, set, config, policy, |_, _| Ok(None))
}

/// As [`train`], calling `after_epoch` with each finished epoch's weights;
/// a returned accuracy is stored in the log.
pub fn train_with(
    spec: &NetworkSpec,
    set: &LabeledSet,
    config: &TrainConfig,
    policy: &AugmentPolicy,
    mut after_epoch: impl FnMut(usize, &Weights) -> Result<Option<f64>>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let fs = set.features.shape;
    policy.validate(Some(fs.w))?;
    if set.len() < 2 {
        return invalid_input("training needs at least two clips");
    }
    if spec.classes != set.classes.len() {
        return invalid_input(format!("network has {} classes, data has {}", spec.classes, set.classes.len()));
    }
    let crop = policy.crop_frames;
    let net = spec_for_input(spec, Shape::new(fs.h, crop, fs.c))?;
    let mut w = Weights::init(&net, config.seed);
    let mut opt = Adam::new(&w);
    let mut log = Vec::with_capacity(config.epochs_total);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut step: u64 = 0;
    for epoch in 0..config.epochs_total {
        let t0 = Instant::now();
        let (lr, phase) = config.lr_schedule(epoch)?;
        let pol = policy.for_phase(phase);
        order.shuffle(&mut rng);
        let mut kl_sum = 0.0;
        let mut seen = 0usize;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            if idx.len() < 2 {
                continue;
            }
            step += 1;
            let seed = config.seed.wrapping_mul(0x9E37_79B9).wrapping_add(step);
            let (x, labels) = set.gather(idx);
            let (mut x, _) = augment::random_time_crop(&x, crop, seed)?;
            let mut y = SoftLabels::one_hot(&labels, set.classes.len())?;
            if pol.mask_count > 0 {
                x = augment::spec_mask(&x, pol.mask_count, pol.time_mask_width, pol.freq_mask_width, pol.mask_value, seed ^ 1).0;
            }
            if pol.mixup_enabled {
                let (mx, my, _) = augment::mixup(&x, &y, pol.mixup_beta_alpha, pol.mixup_uniform_prob, seed ^ 2)?;
                x = mx;
                y = my;
            }
            let trace = engine::forward(&net, &w, &x, Mode::Train { seed: seed ^ 3 })?;
            let kl = super::kl_loss(&y, trace.output(), 0.0, 0.0)?;
            if !kl.is_finite() {
                return Err(Error::Divergence(format!("epoch {epoch}, batch {b}: loss is {kl}")));
            }
            kl_sum += kl;
            seen += idx.len();
            let g = kl_loss_grad(&y, trace.output())?;
            let mut grads = engine::backward(&net, &w, &trace, g)?;
            if config.l2_lambda > 0.0 {
                let lam = config.l2_lambda as f32;
                for (gr, t) in grads.iter_mut().zip(w.tensors()) {
                    if t.trainable {
                        gr.iter_mut().zip(&t.data).for_each(|(g, p)| *g += lam * p);
                    }
                }
            }
            if grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Divergence(format!("epoch {epoch}, batch {b}: non-finite gradient")));
            }
            opt.step(&mut w, &grads, lr);
            engine::update_bn_moving(&net, &mut w, &trace, BN_MOMENTUM);
        }
        let l2 = 0.5 * config.l2_lambda * w.sq_norm();
        let loss = kl_sum / seen.max(1) as f64 + l2;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("epoch {epoch}: loss is {loss}")));
        }
        let eval_accuracy = after_epoch(epoch, &w)?;
        let rec = EpochRecord { epoch, phase, lr, loss, l2, seconds: t0.elapsed().as_secs_f64(), eval_accuracy };
        log::info!("{} epoch {epoch}: loss {loss:.4} lr {lr:e}", spec.name);
        log.push(rec);
    }
    recalibrate_bn(spec, &mut w, set, config.batch_size)?;
    Ok(TrainOutcome { weights: w, log })
}

/// Replace BN moving statistics with averages of full-length batch
/// statistics over `set`, so inference matches the input length used at
/// evaluation.
pub fn recalibrate_bn(spec: &NetworkSpec, w: &mut Weights, set: &LabeledSet, batch: usize) -> Result<()> {
    let net = spec_for_input(spec, set.features.shape)?;
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut sums: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut batches = 0usize;
    for chunk in idx.chunks(batch.max(2)) {
        if chunk.len() < 2 && batches > 0 {
            continue;
        }
        let (x, _) = set.gather(chunk);
        let trace = engine::forward(&net, w, &x, Mode::Calibrate)?;
        let stats = trace.bn_stats();
        if sums.is_empty() {
            sums = stats.iter().map(|(i, m, _)| (*i, vec![0.0; m.len()], vec![0.0; m.len()])).collect();
        }
        for ((_, sm, sv), (_, m, v)) in sums.iter_mut().zip(&stats) {
            sm.iter_mut().zip(m.iter()).for_each(|(a, &b)| *a += b as f64);
            sv.iter_mut().zip(v.iter()).for_each(|(a, &b)| *a += b as f64);
        }
        batches += 1;
    }
    for (i, sm, sv) in sums {
        let name = &net.graph.nodes[i].name;
        if let Some(t) = w.get_mut(&format!("{name}/moving_mean")) {
            t.data = sm.iter().map(|v| (v / batches as f64) as f32).collect();
        }
        if let Some(t) = w.get_mut(&format!("{name}/moving_var")) {
            t.data = sv.iter().map(|v| (v / batches as f64) as f32).collect();
        }
    }
    Ok(())
}

/// Inference over full-length inputs in batches.
pub fn predict_set(spec: &NetworkSpec, w: &Weights, set: &LabeledSet, model_id: &str, batch: usize) -> Result<ProbabilityMatrix> {
    let net = spec_for_input(spec, set.features.shape)?;
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut data = Vec::with_capacity(set.len() * spec.classes);
    for chunk in idx.chunks(batch.max(1)) {
        let (x, _) = set.gather(chunk);
        data.extend(engine::predict(&net, w, &x)?.data);
    }
    ProbabilityMatrix::from_f32_rows(model_id, set.classes.clone(), set.clip_ids.clone(), &data)
}

/// One JSON object per line.
pub fn write_run_log(path: &Path, records: &[impl Serialize]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::Format(e.to_string()))?;
        buf.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    crate::codec::write_atomic(path, &buf)
}
