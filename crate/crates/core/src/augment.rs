//! Training-time augmentation on batches of `bands × frames × channels`
//! tensors: random temporal crop, time/frequency stripe masking, mixup.
//! Every operation takes an explicit seed.

use crate::error::{invalid_config, invalid_input, Result};
use crate::tensor::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Phase1,
    Phase2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub crop_frames: usize,
    pub mask_count: usize,
    pub time_mask_width: (usize, usize),
    pub freq_mask_width: (usize, usize),
    pub mask_value: f32,
    pub mixup_enabled: bool,
    pub mixup_beta_alpha: f64,
    /// Probability per batch of drawing λ from Uniform(0,1) instead of Beta.
    pub mixup_uniform_prob: f64,
    pub phase: Phase,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            crop_frames: 256,
            mask_count: 10,
            time_mask_width: (1, 10),
            freq_mask_width: (1, 10),
            mask_value: 0.0,
            mixup_enabled: true,
            mixup_beta_alpha: 0.4,
            mixup_uniform_prob: 0.5,
            phase: Phase::Phase1,
        }
    }
}

impl AugmentPolicy {
    /// Policy for the given phase derived from `self`. Phase 2 keeps only
    /// the crop.
    pub fn for_phase(&self, phase: Phase) -> Self {
        match phase {
            Phase::Phase1 => AugmentPolicy { phase, ..self.clone() },
            Phase::Phase2 => AugmentPolicy {
                phase,
                mask_count: 0,
                mixup_enabled: false,
                ..self.clone()
            },
        }
    }

    pub fn is_crop_only(&self) -> bool {
        self.mask_count == 0 && !self.mixup_enabled
    }

    pub fn validate(&self, frame_count: Option<usize>) -> Result<()> {
        if self.crop_frames == 0 {
            return invalid_config("crop_frames must be positive");
        }
        if let Some(f) = frame_count {
            if self.crop_frames > f {
                return invalid_config(format!("crop_frames {} exceeds {} input frames", self.crop_frames, f));
            }
        }
        for (lo, hi) in [self.time_mask_width, self.freq_mask_width] {
            if lo == 0 || lo > hi {
                return invalid_config("mask width range must satisfy 1 <= lo <= hi");
            }
        }
        if !(self.mixup_beta_alpha > 0.0) {
            return invalid_config("mixup beta alpha must be positive");
        }
        if !(0.0..=1.0).contains(&self.mixup_uniform_prob) {
            return invalid_config("mixup_uniform_prob must lie in [0, 1]");
        }
        if self.phase == Phase::Phase2 && !self.is_crop_only() {
            return invalid_config("phase 2 policy must be crop-only");
        }
        Ok(())
    }
}

/// Row-stochastic label matrix, `rows × classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabels {
    pub rows: usize,
    pub classes: usize,
    pub data: Vec<f32>,
}

impl SoftLabels {
    pub fn new(rows: usize, classes: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * classes {
            return invalid_input("label matrix size mismatch");
        }
        let l = SoftLabels { rows, classes, data };
        for (i, r) in l.iter_rows().enumerate() {
            let s: f64 = r.iter().map(|&v| v as f64).sum();
            if r.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-6 {
                return invalid_input(format!("label row {i} is not a distribution (sum {s})"));
            }
        }
        Ok(l)
    }

    pub fn one_hot(labels: &[usize], classes: usize) -> Result<Self> {
        let mut data = vec![0.0; labels.len() * classes];
        for (i, &l) in labels.iter().enumerate() {
            if l >= classes {
                return invalid_input(format!("label {l} out of range for {classes} classes"));
            }
            data[i * classes + l] = 1.0;
        }
        Ok(SoftLabels { rows: labels.len(), classes, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks(self.classes.max(1))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zero mean, unit variance per (sample, channel).
pub fn standardize(sample: &mut [f32], shape: Shape) {
    let c = shape.c;
    let cells = (shape.h * shape.w) as f64;
    for ch in 0..c {
        let (mut s, mut s2) = (0.0f64, 0.0f64);
        for v in sample.iter().skip(ch).step_by(c) {
            s += *v as f64;
            s2 += (*v as f64) * (*v as f64);
        }
        let mean = s / cells;
        let var = (s2 / cells - mean * mean).max(0.0);
        let inv = 1.0 / (var.sqrt() + 1e-6);
        for v in sample.iter_mut().skip(ch).step_by(c) {
            *v = ((*v as f64 - mean) * inv) as f32;
        }
    }
}

/// Crop `frames` contiguous frames starting at `offset` from one sample.
pub fn crop_sample(sample: &[f32], shape: Shape, offset: usize, frames: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(shape.h * frames * shape.c);
    for b in 0..shape.h {
        let row = (b * shape.w + offset) * shape.c;
        out.extend_from_slice(&sample[row..row + frames * shape.c]);
    }
    out
}

/// Independent random crop offset per sample. Returns the cropped batch and
/// the offsets used.
pub fn random_time_crop(batch: &Tensor, crop_frames: usize, seed: u64) -> Result<(Tensor, Vec<usize>)> {
    let s = batch.shape;
    if crop_frames == 0 || crop_frames > s.w {
        return invalid_input(format!("cannot crop {} frames from {}", crop_frames, s.w));
    }
    let mut r = rng(seed);
    let shape = Shape::new(s.h, crop_frames, s.c);
    let mut data = Vec::with_capacity(batch.n * shape.len());
    let mut offsets = Vec::with_capacity(batch.n);
    for i in 0..batch.n {
        let off = r.random_range(0..=s.w - crop_frames);
        offsets.push(off);
        data.extend(crop_sample(batch.sample(i), s, off, crop_frames));
    }
    Ok((Tensor::from_vec(batch.n, shape, data)?, offsets))
}

/// Center crop, used at evaluation when a fixed width is required.
pub fn center_crop(batch: &Tensor, crop_frames: usize) -> Result<Tensor> {
    let s = batch.shape;
    if crop_frames > s.w {
        return invalid_input(format!("cannot crop {} frames from {}", crop_frames, s.w));
    }
    let off = (s.w - crop_frames) / 2;
    let shape = Shape::new(s.h, crop_frames, s.c);
    let mut data = Vec::with_capacity(batch.n * shape.len());
    for i in 0..batch.n {
        data.extend(crop_sample(batch.sample(i), s, off, crop_frames));
    }
    Tensor::from_vec(batch.n, shape, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskAxis {
    Time,
    Freq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stripe {
    pub sample: usize,
    pub axis: MaskAxis,
    pub start: usize,
    pub width: usize,
}

/// Set recorded stripes to `value`. Re-applying the same stripes is a no-op.
pub fn apply_stripes(batch: &mut Tensor, stripes: &[Stripe], value: f32) {
    let s = batch.shape;
    for st in stripes {
        let sample = batch.sample_mut(st.sample);
        match st.axis {
            MaskAxis::Time => {
                for b in 0..s.h {
                    for t in st.start..st.start + st.width {
                        let i = (b * s.w + t) * s.c;
                        sample[i..i + s.c].fill(value);
                    }
                }
            }
            MaskAxis::Freq => {
                for b in st.start..st.start + st.width {
                    let i = b * s.w * s.c;
                    sample[i..i + s.w * s.c].fill(value);
                }
            }
        }
    }
}

/// Draw `mask_count` time stripes and `mask_count` frequency stripes per
/// sample, widths uniform in the given inclusive ranges (clamped to the axis
/// length), and mask them.
pub fn spec_mask(
    batch: &Tensor,
    mask_count: usize,
    time_width: (usize, usize),
    freq_width: (usize, usize),
    value: f32,
    seed: u64,
) -> (Tensor, Vec<Stripe>) {
    let s = batch.shape;
    let mut out = batch.clone();
    if mask_count == 0 {
        return (out, Vec::new());
    }
    let mut r = rng(seed);
    let mut stripes = Vec::with_capacity(batch.n * mask_count * 2);
    for i in 0..batch.n {
        for (axis, len, (lo, hi)) in [(MaskAxis::Time, s.w, time_width), (MaskAxis::Freq, s.h, freq_width)] {
            for _ in 0..mask_count {
                let hi = hi.min(len).max(1);
                let lo = lo.min(hi).max(1);
                let width = r.random_range(lo..=hi);
                let start = r.random_range(0..=len - width);
                stripes.push(Stripe { sample: i, axis, start, width });
            }
        }
    }
    apply_stripes(&mut out, &stripes, value);
    (out, stripes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixupDraw {
    pub lambda: f32,
    pub permutation: Vec<usize>,
}

/// `x_i ← λ x_i + (1-λ) x_{π(i)}`, labels mixed with the same λ.
pub fn mixup_with(batch: &Tensor, labels: &SoftLabels, draw: &MixupDraw) -> Result<(Tensor, SoftLabels)> {
    if labels.rows != batch.n || draw.permutation.len() != batch.n {
        return invalid_input("mixup: batch, labels and permutation disagree in size");
    }
    let lam = draw.lambda;
    let mut x = batch.clone();
    let mut y = labels.clone();
    for i in 0..batch.n {
        let j = draw.permutation[i];
        let (a, b) = (batch.sample(i), batch.sample(j));
        for (o, (u, v)) in x.sample_mut(i).iter_mut().zip(a.iter().zip(b)) {
            *o = lam * u + (1.0 - lam) * v;
        }
        for c in 0..labels.classes {
            y.data[i * labels.classes + c] = lam * labels.row(i)[c] + (1.0 - lam) * labels.row(j)[c];
        }
    }
    Ok((x, y))
}

/// Sample λ (Beta(α, α), or Uniform(0,1) with probability `uniform_prob`)
/// and a partner permutation, then mix. Batches smaller than two are
/// returned unchanged.
pub fn mixup(
    batch: &Tensor,
    labels: &SoftLabels,
    beta_alpha: f64,
    uniform_prob: f64,
    seed: u64,
) -> Result<(Tensor, SoftLabels, Option<MixupDraw>)> {
    if labels.rows != batch.n {
        return invalid_input("mixup: batch and labels are not aligned");
    }
    if batch.n < 2 {
        log::warn!("mixup skipped: batch of {} sample(s)", batch.n);
        return Ok((batch.clone(), labels.clone(), None));
    }
    let draw = draw_mixup(batch.n, beta_alpha, uniform_prob, seed)?;
    let (x, y) = mixup_with(batch, labels, &draw)?;
    Ok((x, y, Some(draw)))
}

pub fn draw_mixup(n: usize, beta_alpha: f64, uniform_prob: f64, seed: u64) -> Result<MixupDraw> {
    use rand::seq::SliceRandom;
    let mut r = rng(seed);
    let lambda = if r.random_bool(uniform_prob.clamp(0.0, 1.0)) {
        r.random::<f64>()
    } else {
        Beta::new(beta_alpha, beta_alpha)
            .map_err(|e| crate::Error::InvalidConfig(format!("beta distribution: {e}")))?
            .sample(&mut r)
    };
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.shuffle(&mut r);
    Ok(MixupDraw { lambda: lambda.clamp(0.0, 1.0) as f32, permutation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn batch(n: usize, shape: Shape) -> Tensor {
        let data = (0..n * shape.len()).map(|i| ((i * 37) % 101) as f32 + 1.0).collect();
        Tensor::from_vec(n, shape, data).unwrap()
    }

    #[test]
    fn crop_to_256() {
        let b = batch(2, Shape::new(128, 305, 3));
        let (c, offs) = random_time_crop(&b, 256, 7).unwrap();
        assert_eq!(c.shape, Shape::new(128, 256, 3));
        for (i, &o) in offs.iter().enumerate() {
            assert!(o <= 305 - 256);
            for band in [0, 64, 127] {
                for t in [0, 100, 255] {
                    for ch in 0..3 {
                        assert_eq!(c.at(i, band, t, ch), b.at(i, band, t + o, ch));
                    }
                }
            }
        }
    }

    #[test]
    fn full_width_crop_is_identity() {
        let b = batch(3, Shape::new(4, 9, 3));
        assert_eq!(random_time_crop(&b, 9, 1).unwrap().0, b);
        assert!(random_time_crop(&b, 10, 1).is_err());
    }

    #[test]
    fn crop_is_seed_deterministic() {
        let b = batch(4, Shape::new(8, 50, 3));
        assert_eq!(random_time_crop(&b, 20, 99).unwrap(), random_time_crop(&b, 20, 99).unwrap());
    }

    #[test]
    fn zero_masks_is_identity() {
        let b = batch(2, Shape::new(16, 40, 3));
        let (m, st) = spec_mask(&b, 0, (1, 10), (1, 10), 0.0, 3);
        assert_eq!(m, b);
        assert!(st.is_empty());
    }

    #[test]
    fn masked_cells_match_recorded_stripes() {
        let shape = Shape::new(64, 100, 3);
        let b = batch(3, shape);
        let (m, stripes) = spec_mask(&b, 10, (1, 10), (1, 10), 0.0, 11);
        assert_eq!(stripes.len(), 3 * 20);
        for i in 0..3 {
            let mine: Vec<_> = stripes.iter().filter(|s| s.sample == i).collect();
            assert_eq!(mine.iter().filter(|s| s.axis == MaskAxis::Time).count(), 10);
            assert_eq!(mine.iter().filter(|s| s.axis == MaskAxis::Freq).count(), 10);
            let mut expect = vec![false; shape.h * shape.w];
            for s in &mine {
                assert!((1..=10).contains(&s.width));
                for k in s.start..s.start + s.width {
                    match s.axis {
                        MaskAxis::Time => (0..shape.h).for_each(|h| expect[h * shape.w + k] = true),
                        MaskAxis::Freq => (0..shape.w).for_each(|w| expect[k * shape.w + w] = true),
                    }
                }
            }
            for h in 0..shape.h {
                for w in 0..shape.w {
                    for c in 0..3 {
                        if expect[h * shape.w + w] {
                            assert_eq!(m.at(i, h, w, c), 0.0);
                        } else {
                            assert_eq!(m.at(i, h, w, c).to_bits(), b.at(i, h, w, c).to_bits());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn masking_is_idempotent() {
        let b = batch(2, Shape::new(20, 30, 3));
        let (m, st) = spec_mask(&b, 4, (1, 10), (1, 10), 0.0, 5);
        let mut again = m.clone();
        apply_stripes(&mut again, &st, 0.0);
        assert_eq!(again, m);
    }

    #[test]
    fn mixup_lambda_one_is_identity() {
        let b = batch(3, Shape::new(2, 3, 1));
        let y = SoftLabels::one_hot(&[0, 1, 2], 3).unwrap();
        let d = MixupDraw { lambda: 1.0, permutation: vec![2, 0, 1] };
        let (x2, y2) = mixup_with(&b, &y, &d).unwrap();
        assert_eq!(x2, b);
        assert_eq!(y2, y);
    }

    #[test]
    fn mixup_half_of_two_classes() {
        let b = batch(2, Shape::new(1, 2, 1));
        let y = SoftLabels::one_hot(&[0, 1], 4).unwrap();
        let d = MixupDraw { lambda: 0.5, permutation: vec![1, 0] };
        let (_, y2) = mixup_with(&b, &y, &d).unwrap();
        assert_eq!(y2.row(0), &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(y2.row(1), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn mixup_single_sample_is_noop() {
        let b = batch(1, Shape::new(2, 2, 1));
        let y = SoftLabels::one_hot(&[1], 2).unwrap();
        let (x2, y2, d) = mixup(&b, &y, 0.4, 0.5, 1).unwrap();
        assert!(d.is_none());
        assert_eq!((x2, y2), (b, y));
    }

    #[test]
    fn phase_two_is_crop_only() {
        let p = AugmentPolicy::default().for_phase(Phase::Phase2);
        assert!(p.is_crop_only());
        assert!(p.validate(Some(313)).is_ok());
        let bad = AugmentPolicy { phase: Phase::Phase2, ..Default::default() };
        assert!(bad.validate(None).is_err());
    }

    #[test]
    fn standardize_moments() {
        let shape = Shape::new(5, 7, 3);
        let mut s: Vec<f32> = (0..shape.len()).map(|i| (i as f32 * 0.37).sin() * 4.0 + 2.0).collect();
        standardize(&mut s, shape);
        for c in 0..3 {
            let v: Vec<f32> = s.iter().skip(c).step_by(3).copied().collect();
            let m = v.iter().sum::<f32>() / v.len() as f32;
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f32>() / v.len() as f32;
            assert!(m.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    proptest! {
        #[test]
        fn mixup_rows_sum_to_one(seed in 0u64..10_000, n in 2usize..8) {
            let b = batch(n, Shape::new(2, 2, 1));
            let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 5).collect();
            let y = SoftLabels::one_hot(&labels, 5).unwrap();
            let (_, y2, d) = mixup(&b, &y, 0.4, 0.5, seed).unwrap();
            let d = d.unwrap();
            prop_assert!((0.0..=1.0).contains(&d.lambda));
            for r in y2.iter_rows() {
                let s: f64 = r.iter().map(|&v| v as f64).sum();
                prop_assert!((s - 1.0).abs() <= 1e-6);
            }
        }

        #[test]
        fn augment_keeps_band_and_channel_dims(seed in 0u64..1000, w in 12usize..40) {
            let b = batch(2, Shape::new(9, w, 3));
            let (c, _) = random_time_crop(&b, 10, seed).unwrap();
            prop_assert_eq!((c.shape.h, c.shape.c), (9, 3));
            let (m, _) = spec_mask(&c, 3, (1, 10), (1, 10), 0.0, seed);
            prop_assert_eq!(m.shape, c.shape);
        }
    }
}
