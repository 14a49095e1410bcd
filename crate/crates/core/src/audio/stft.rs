use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub fn frame_count(len: usize, hop: usize) -> usize {
    len / hop + 1
}

fn reflect(i: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as i64 {
        j = period - j;
    }
    j as usize
}

/// Centered short-time Fourier transform. Frame `t` is centered on sample
/// `t * hop`; the signal is reflection-padded by `fft_size / 2` at both ends.
pub struct Stft {
    fft_size: usize,
    hop: usize,
    window: Vec<f32>,
    fft: Arc<dyn Fft<f32>>,
}

impl Stft {
    pub fn new(fft_size: usize, window_size: usize, hop: usize) -> Self {
        // periodic Hann, zero-padded to the FFT length and centered
        let mut window = vec![0.0f32; fft_size];
        let off = (fft_size - window_size) / 2;
        for n in 0..window_size {
            let v = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / window_size as f64).cos();
            window[off + n] = v as f32;
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Stft {
            fft_size,
            hop,
            window,
            fft,
        }
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    fn frames(&self, x: &[f32], windowed: bool) -> Vec<Vec<Complex<f32>>> {
        let n = frame_count(x.len(), self.hop);
        let pad = (self.fft_size / 2) as i64;
        let mut out = Vec::with_capacity(n);
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..n {
            let start = (t * self.hop) as i64 - pad;
            let mut buf: Vec<Complex<f32>> = (0..self.fft_size)
                .map(|k| {
                    let v = x[reflect(start + k as i64, x.len())];
                    let w = if windowed { self.window[k] } else { 1.0 };
                    Complex::new(v * w, 0.0)
                })
                .collect();
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            out.push(buf);
        }
        out
    }

    /// Power spectra `|X|^2` of Hann-windowed frames, one-sided.
    pub fn power(&self, x: &[f32]) -> Vec<Vec<f32>> {
        let bins = self.bins();
        self.frames(x, true)
            .into_iter()
            .map(|f| f[..bins].iter().map(|c| c.norm_sqr()).collect())
            .collect()
    }

    /// Full complex spectra of unwindowed frames (for kernels that carry
    /// their own window).
    pub fn raw_spectra(&self, x: &[f32]) -> Vec<Vec<Complex<f32>>> {
        self.frames(x, false)
    }
}
