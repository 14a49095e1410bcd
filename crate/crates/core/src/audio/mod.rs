//! Spectrogram front-end: resampling, framed FFT, mel / gammatone / CQT
//! filterbanks, log compression and delta stacking.

mod archive;
mod cqt;
mod delta;
mod gammatone;
mod mel;
mod stft;
mod wav;

pub use archive::{read_feature_archive, write_feature_archive, FeatureTensor};
pub use cqt::CqtKernel;
pub use delta::{regression_delta, stack_deltas};
pub use gammatone::{erb_space, gammatone_filterbank};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz};
pub use stft::{frame_count, Stft};
pub use wav::{read_wav, write_wav};

use crate::error::{invalid_config, invalid_input, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

pub const TARGET_RATE: u32 = 32_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return invalid_input("audio clip has no samples");
        }
        if sample_rate == 0 {
            return invalid_input("sample rate must be positive");
        }
        Ok(AudioClip {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sub-clip by sample range, keeping the rate.
    pub fn slice(&self, start: usize, end: usize, id: impl Into<String>) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return invalid_input(format!("slice {start}..{end} out of range"));
        }
        AudioClip::new(self.samples[start..end].to_vec(), self.sample_rate, id)
    }
}

const SINC_ZEROS: usize = 32;

/// Band-limited resampling with a Hann-windowed sinc kernel. The cutoff is
/// placed at the lower of the two Nyquist frequencies.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if clip.samples.is_empty() {
        return invalid_input("cannot resample an empty clip");
    }
    if target_rate == 0 {
        return invalid_input("target rate must be positive");
    }
    if clip.sample_rate == target_rate {
        return Ok(clip.clone());
    }
    let src = clip.sample_rate as f64;
    let dst = target_rate as f64;
    let ratio = dst / src;
    let out_len = ((clip.samples.len() as f64) * ratio).round().max(1.0) as usize;
    let cutoff = ratio.min(1.0);
    let half = (SINC_ZEROS as f64 / cutoff).ceil() as i64;
    let x = &clip.samples;
    let n = x.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let t = i as f64 / ratio;
        let center = t.floor() as i64;
        let mut acc = 0.0f64;
        for k in (center - half + 1)..=(center + half) {
            if k < 0 || k >= n {
                continue;
            }
            let d = t - k as f64;
            let arg = d * cutoff;
            let sinc = if arg.abs() < 1e-12 {
                1.0
            } else {
                (PI * arg).sin() / (PI * arg)
            };
            let win = 0.5 + 0.5 * (PI * d / half as f64).cos();
            if d.abs() >= half as f64 {
                continue;
            }
            acc += x[k as usize] as f64 * sinc * cutoff * win;
        }
        out.push(acc as f32);
    }
    AudioClip::new(out, target_rate, clip.source_id.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrogramKind {
    Mel,
    #[serde(alias = "gammatone")]
    Gam,
    Cqt,
}

impl SpectrogramKind {
    pub const ALL: [SpectrogramKind; 3] = [SpectrogramKind::Mel, SpectrogramKind::Gam, SpectrogramKind::Cqt];

    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrogramKind::Mel => "mel",
            SpectrogramKind::Gam => "gam",
            SpectrogramKind::Cqt => "cqt",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            SpectrogramKind::Mel => 0,
            SpectrogramKind::Gam => 1,
            SpectrogramKind::Cqt => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SpectrogramKind::Mel),
            1 => Some(SpectrogramKind::Gam),
            2 => Some(SpectrogramKind::Cqt),
            _ => None,
        }
    }
}

impl std::str::FromStr for SpectrogramKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mel" => Ok(SpectrogramKind::Mel),
            "gam" | "gammatone" => Ok(SpectrogramKind::Gam),
            "cqt" => Ok(SpectrogramKind::Cqt),
            other => invalid_config(format!("unknown spectrogram kind '{other}'")),
        }
    }
}

impl std::fmt::Display for SpectrogramKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Framing convention baked into every digest: frames centered on
/// multiples of the hop with reflection padding, `floor(L / hop) + 1`
/// frames for L samples.
pub const FRAMING: &str = "center-reflect:floor(L/hop)+1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrogramConfig {
    pub kind: SpectrogramKind,
    pub sample_rate: u32,
    pub fft_size: usize,
    pub window_size: usize,
    pub hop_size: usize,
    pub band_count: usize,
    pub log_compression: bool,
    pub log_floor: f64,
    pub delta_width: usize,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            kind: SpectrogramKind::Mel,
            sample_rate: TARGET_RATE,
            fft_size: 4096,
            window_size: 2048,
            hop_size: 1024,
            band_count: 128,
            log_compression: true,
            log_floor: 1e-10,
            delta_width: 9,
        }
    }
}

impl SpectrogramConfig {
    pub fn for_kind(kind: SpectrogramKind) -> Self {
        SpectrogramConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 || self.window_size == 0 || self.hop_size == 0 || self.band_count == 0 {
            return invalid_config("fft, window, hop and band sizes must be positive");
        }
        if self.window_size > self.fft_size {
            return invalid_config("window_size must not exceed fft_size");
        }
        if self.hop_size > self.window_size {
            return invalid_config("hop_size must not exceed window_size");
        }
        if self.delta_width < 3 || self.delta_width % 2 == 0 {
            return invalid_config("delta_width must be an odd integer >= 3");
        }
        if self.sample_rate == 0 {
            return invalid_config("sample_rate must be positive");
        }
        if !(self.log_floor > 0.0) {
            return invalid_config("log floor must be positive");
        }
        Ok(())
    }

    fn canonical(&self) -> String {
        format!(
            "lowasc-spectrogram/1;kind={};sr={};fft={};win={};hop={};bands={};log={};eps={:e};delta={};framing={}",
            self.kind,
            self.sample_rate,
            self.fft_size,
            self.window_size,
            self.hop_size,
            self.band_count,
            self.log_compression,
            self.log_floor,
            self.delta_width,
            FRAMING
        )
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }
}

/// Filterbank weights applied to one spectral frame.
enum Bank {
    Dense(Vec<Vec<f32>>),
    Cqt(CqtKernel),
}

/// Reusable extractor: the filterbank for a config is built once.
pub struct Extractor {
    config: SpectrogramConfig,
    stft: Stft,
    bank: Bank,
}

impl Extractor {
    pub fn new(config: SpectrogramConfig) -> Result<Self> {
        config.validate()?;
        let stft = Stft::new(config.fft_size, config.window_size, config.hop_size);
        let bank = match config.kind {
            SpectrogramKind::Mel => Bank::Dense(mel_filterbank(
                config.sample_rate as f64,
                config.fft_size,
                config.band_count,
                0.0,
                config.sample_rate as f64 / 2.0,
            )),
            SpectrogramKind::Gam => Bank::Dense(gammatone_filterbank(
                config.sample_rate as f64,
                config.fft_size,
                config.band_count,
                50.0,
                config.sample_rate as f64 / 2.0,
            )),
            SpectrogramKind::Cqt => Bank::Cqt(CqtKernel::new(
                config.sample_rate as f64,
                config.fft_size,
                config.band_count,
                cqt::CQT_FMIN,
                cqt::CQT_BINS_PER_OCTAVE,
            )),
        };
        Ok(Extractor { config, stft, bank })
    }

    pub fn config(&self) -> &SpectrogramConfig {
        &self.config
    }

    /// Single-channel spectrogram, `band_count × frame_count × 1`.
    pub fn spectrogram(&self, clip: &AudioClip) -> Result<FeatureTensor> {
        let cfg = &self.config;
        if clip.sample_rate != cfg.sample_rate {
            return invalid_input(format!(
                "clip at {} Hz, extractor expects {} Hz",
                clip.sample_rate, cfg.sample_rate
            ));
        }
        if clip.samples.len() < cfg.window_size {
            return invalid_input(format!(
                "clip of {} samples is shorter than one window ({})",
                clip.samples.len(),
                cfg.window_size
            ));
        }
        let frames = frame_count(clip.samples.len(), cfg.hop_size);
        let bands = cfg.band_count;
        let mut values = vec![0.0f32; bands * frames];
        match &self.bank {
            Bank::Dense(w) => {
                let power = self.stft.power(&clip.samples);
                for (t, p) in power.iter().enumerate() {
                    for (b, row) in w.iter().enumerate() {
                        let mut acc = 0.0f32;
                        for (wv, pv) in row.iter().zip(p) {
                            acc += wv * pv;
                        }
                        values[b * frames + t] = acc;
                    }
                }
            }
            Bank::Cqt(k) => {
                let spectra = self.stft.raw_spectra(&clip.samples);
                for (t, s) in spectra.iter().enumerate() {
                    for (b, v) in k.apply(s).into_iter().enumerate() {
                        values[b * frames + t] = v;
                    }
                }
            }
        }
        if cfg.log_compression {
            let eps = cfg.log_floor;
            for v in values.iter_mut() {
                *v = ((*v as f64).max(0.0) + eps).ln() as f32;
            }
        }
        Ok(FeatureTensor {
            values,
            bands,
            frames,
            channels: 1,
            kind: cfg.kind,
            config_digest: cfg.digest(),
        })
    }

    /// Resample if needed, then spectrogram plus delta and delta-delta.
    pub fn features(&self, clip: &AudioClip) -> Result<FeatureTensor> {
        let clip = if clip.sample_rate != self.config.sample_rate {
            resample(clip, self.config.sample_rate)?
        } else {
            clip.clone()
        };
        let s = self.spectrogram(&clip)?;
        stack_deltas(&s, self.config.delta_width)
    }
}

pub fn extract_spectrogram(clip: &AudioClip, config: &SpectrogramConfig) -> Result<FeatureTensor> {
    Extractor::new(config.clone())?.spectrogram(clip)
}
