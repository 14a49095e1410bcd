//! Constant-Q transform by the spectral-kernel method. Kernels are computed
//! once per configuration in the frequency domain and applied to the FFT of
//! each (unwindowed) analysis frame, so CQT frames land on exactly the same
//! hop grid as the other spectrogram kinds. Kernels whose natural length
//! exceeds the FFT length are truncated to it, which caps the time support
//! (and so the resolution) of the lowest bins.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const CQT_FMIN: f64 = 32.703_195_662_574_83;
pub const CQT_BINS_PER_OCTAVE: usize = 15;

const SPARSITY: f32 = 0.0054;

pub struct CqtKernel {
    /// per bin: (fft index, conj(kernel) / n_fft)
    rows: Vec<Vec<(usize, Complex<f32>)>>,
    pub freqs: Vec<f64>,
    pub q: f64,
}

impl CqtKernel {
    pub fn new(sr: f64, n_fft: usize, bins: usize, fmin: f64, bins_per_octave: usize) -> Self {
        let q = 1.0 / (2f64.powf(1.0 / bins_per_octave as f64) - 1.0);
        let freqs: Vec<f64> = (0..bins)
            .map(|k| fmin * 2f64.powf(k as f64 / bins_per_octave as f64))
            .collect();
        let fft = FftPlanner::<f32>::new().plan_fft_forward(n_fft);
        let mut rows = Vec::with_capacity(bins);
        for &fk in &freqs {
            let len = ((q * sr / fk).ceil() as usize).clamp(1, n_fft);
            let start = (n_fft - len) / 2;
            let mut buf = vec![Complex::new(0.0f32, 0.0); n_fft];
            for n in 0..len {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos();
                let phase = 2.0 * std::f64::consts::PI * fk * (n as f64 - len as f64 / 2.0) / sr;
                let v = Complex::from_polar(w / len as f64, phase);
                buf[start + n] = Complex::new(v.re as f32, v.im as f32);
            }
            fft.process(&mut buf);
            let peak = buf.iter().map(|c| c.norm()).fold(0.0f32, f32::max);
            let row = buf
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm() > SPARSITY * peak)
                .map(|(i, c)| (i, c.conj()))
                .collect();
            rows.push(row);
        }
        CqtKernel { rows, freqs, q }
    }

    /// Power `|X · K_k^*|^2` per bin for one frame spectrum.
    pub fn apply(&self, spectrum: &[Complex<f32>]) -> Vec<f32> {
        self.rows
            .iter()
            .map(|row| {
                let mut acc = Complex::new(0.0f32, 0.0);
                for &(i, k) in row {
                    acc += spectrum[i] * k;
                }
                acc.norm_sqr()
            })
            .collect()
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{extract_spectrogram, AudioClip, SpectrogramConfig, SpectrogramKind};

    #[test]
    fn q_for_fifteen_bins_per_octave() {
        let k = CqtKernel::new(32_000.0, 4096, 128, CQT_FMIN, CQT_BINS_PER_OCTAVE);
        assert!((k.q - 21.15).abs() < 0.01);
        assert!(*k.freqs.last().unwrap() < 16_000.0);
        assert!(k.nonzeros() < 128 * 4096 / 4, "kernel should be sparse");
    }

    #[test]
    fn tone_peaks_near_its_bin() {
        let f = 880.0;
        let n = 32_000;
        let s: Vec<f32> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / 32_000.0).sin() as f32)
            .collect();
        let clip = AudioClip::new(s, 32_000, "a5").unwrap();
        let spec = extract_spectrogram(&clip, &SpectrogramConfig::for_kind(SpectrogramKind::Cqt)).unwrap();
        let t = spec.frames / 2;
        let best = (0..spec.bands)
            .max_by(|&a, &b| spec.values[a * spec.frames + t].partial_cmp(&spec.values[b * spec.frames + t]).unwrap())
            .unwrap();
        let expect = (15.0 * (f / CQT_FMIN).log2()).round() as usize;
        assert!((best as i64 - expect as i64).abs() <= 1, "best {best} expect {expect}");
    }
}
