//! Desk-scale synthetic scenes: three sound classes rendered through
//! simulated recording devices.
//!
//! Devices: `a` clean; `b` one-pole low-pass at 2 kHz; `c` gain 0.5 and
//! one-pole high-pass at 300 Hz; `s4` (eval only) low-pass at 3 kHz,
//! high-pass at 150 Hz, gain 0.7 and white noise at 0.01 rms.

use super::{DatasetManifest, ManifestEntry, Split};
use crate::audio::{write_wav, AudioClip};
use crate::error::{invalid_config, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

pub const SYNTH_CLASSES: [&str; 3] = ["tonal", "chirp", "noise"];
pub const SEEN_DEVICES: [&str; 3] = ["a", "b", "c"];
pub const UNSEEN_DEVICE: &str = "s4";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub train_per_class: usize,
    pub eval_per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { train_per_class: 60, eval_per_class: 24, duration_s: 2.0, sample_rate: 32_000, seed: 0 }
    }
}

fn one_pole_lowpass(x: &mut [f64], fc: f64, sr: f64) {
    let a = (-2.0 * PI * fc / sr).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = (1.0 - a) * *v + a * y;
        *v = y;
    }
}

fn one_pole_highpass(x: &mut [f64], fc: f64, sr: f64) {
    let mut low = x.to_vec();
    one_pole_lowpass(&mut low, fc, sr);
    for (v, l) in x.iter_mut().zip(low) {
        *v -= l;
    }
}

/// Apply a device's fixed perturbation in place. Unknown tags are left
/// untouched.
pub fn apply_device(x: &mut [f64], device: &str, sr: f64, rng: &mut ChaCha8Rng) {
    match device {
        "b" => one_pole_lowpass(x, 2000.0, sr),
        "c" => {
            one_pole_highpass(x, 300.0, sr);
            x.iter_mut().for_each(|v| *v *= 0.5);
        }
        "s4" => {
            one_pole_lowpass(x, 3000.0, sr);
            one_pole_highpass(x, 150.0, sr);
            for v in x.iter_mut() {
                let n: f64 = StandardNormal.sample(rng);
                *v = 0.7 * *v + 0.01 * n;
            }
        }
        _ => {}
    }
}

fn render(class: usize, n: usize, sr: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; n];
    match class {
        0 => {
            let f0 = rng.random_range(220.0..660.0);
            let vib_rate = rng.random_range(3.0..6.0);
            let mut phase = 0.0;
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / sr;
                phase += 2.0 * PI * f0 * (1.0 + 0.01 * (2.0 * PI * vib_rate * t).sin()) / sr;
                *v = (1..=5).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>() * 0.2;
            }
        }
        1 => {
            let period = rng.random_range(0.3..0.6);
            let (lo, hi): (f64, f64) = (rng.random_range(300.0..800.0), rng.random_range(3000.0..8000.0));
            let mut phase = 0.0;
            for (i, v) in x.iter_mut().enumerate() {
                let t = (i as f64 / sr) % period;
                let f = lo * (hi / lo).powf(t / period);
                phase += 2.0 * PI * f / sr;
                *v = 0.3 * phase.sin();
            }
        }
        _ => {
            let burst = rng.random_range(0.05..0.2);
            let mut env = 0.0;
            for (i, v) in x.iter_mut().enumerate() {
                if i % ((burst * sr) as usize).max(1) == 0 {
                    env = rng.random_range(0.05..0.4);
                }
                let w: f64 = StandardNormal.sample(rng);
                *v = env * w;
            }
            one_pole_lowpass(&mut x, rng.random_range(1500.0..6000.0), sr);
        }
    }
    let noise = 0.003;
    for v in x.iter_mut() {
        let w: f64 = StandardNormal.sample(rng);
        *v += noise * w;
    }
    x
}

/// One clip of `class` recorded on `device`; deterministic in `seed`.
pub fn synth_clip(class: usize, device: &str, seed: u64, cfg: &SynthConfig, id: &str) -> Result<AudioClip> {
    if class >= SYNTH_CLASSES.len() {
        return invalid_config(format!("synthetic class {class} does not exist"));
    }
    let sr = cfg.sample_rate as f64;
    let n = (cfg.duration_s * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = render(class, n, sr, &mut rng);
    apply_device(&mut x, device, sr, &mut rng);
    AudioClip::new(x.into_iter().map(|v| v as f32).collect(), cfg.sample_rate, id)
}

/// Manifest entries and clips without touching disk. Train devices cycle
/// through a/b/c; eval devices through a/b/c/s4.
pub fn synth_clips(cfg: &SynthConfig) -> Result<(DatasetManifest, Vec<AudioClip>)> {
    if cfg.train_per_class == 0 || cfg.eval_per_class == 0 {
        return invalid_config("both splits need at least one clip per class");
    }
    if cfg.duration_s * (cfg.sample_rate as f64) < 4096.0 {
        return invalid_config("clips must be at least 4096 samples long");
    }
    let mut entries = Vec::new();
    let mut clips = Vec::new();
    let mut k = 0u64;
    for (split, per_class, devices) in [
        (Split::Train, cfg.train_per_class, &SEEN_DEVICES[..]),
        (Split::Eval, cfg.eval_per_class, &["a", "b", "c", UNSEEN_DEVICE][..]),
    ] {
        for (ci, class) in SYNTH_CLASSES.iter().enumerate() {
            for j in 0..per_class {
                let device = devices[j % devices.len()];
                let id = format!("{class}-{device}-{}-{j:04}", split.as_str());
                let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(k);
                k += 1;
                clips.push(synth_clip(ci, device, seed, cfg, &id)?);
                entries.push(ManifestEntry {
                    filename: format!("{}/{id}.wav", split.as_str()),
                    scene_label: class.to_string(),
                    device: device.to_string(),
                    split,
                });
            }
        }
    }
    let m = DatasetManifest::new(
        entries,
        SYNTH_CLASSES.iter().map(|s| s.to_string()).collect(),
        [UNSEEN_DEVICE.to_string()].into(),
    )?;
    Ok((m, clips))
}

/// Write the corpus under `root` as `<split>/<clip>.wav` plus
/// `manifest.tsv`.
pub fn synth_corpus(cfg: &SynthConfig, root: &Path) -> Result<DatasetManifest> {
    let (m, clips) = synth_clips(cfg)?;
    for (e, c) in m.entries.iter().zip(&clips) {
        write_wav(&root.join(&e.filename), c)?;
    }
    m.save(&root.join("manifest.tsv"))?;
    Ok(m)
}
