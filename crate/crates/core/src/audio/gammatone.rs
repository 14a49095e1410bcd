//! Gammatone filterbank evaluated on the power spectrum. Each band is the
//! squared magnitude response of a 4th-order gammatone filter, with centre
//! frequencies spaced uniformly on the ERB-rate scale.

const ORDER: i32 = 4;
const EAR_Q: f64 = 9.264_49;
const MIN_BW: f64 = 24.7;

fn erb(fc: f64) -> f64 {
    fc / EAR_Q + MIN_BW
}

fn erb_rate(f: f64) -> f64 {
    EAR_Q * (1.0 + f / (EAR_Q * MIN_BW)).ln()
}

fn erb_rate_inv(e: f64) -> f64 {
    ((e / EAR_Q).exp() - 1.0) * EAR_Q * MIN_BW
}

/// Ascending ERB-spaced centre frequencies from `fmin` to `fmax` inclusive.
pub fn erb_space(fmin: f64, fmax: f64, n: usize) -> Vec<f64> {
    let lo = erb_rate(fmin);
    let hi = erb_rate(fmax);
    if n == 1 {
        return vec![fmin];
    }
    (0..n)
        .map(|i| erb_rate_inv(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

pub fn gammatone_filterbank(sr: f64, n_fft: usize, bands: usize, fmin: f64, fmax: f64) -> Vec<Vec<f32>> {
    let bins = n_fft / 2 + 1;
    // keep the top centre a little under Nyquist so the last filter is whole
    let centers = erb_space(fmin, fmax * 0.9, bands);
    centers
        .iter()
        .map(|&fc| {
            let b = 1.019 * erb(fc);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sr / n_fft as f64;
                    let x = (f - fc) / b;
                    // |H|^2 of an order-4 gammatone, unit gain at fc
                    let w = (1.0 + x * x).powi(-ORDER);
                    if w < 1e-8 {
                        0.0
                    } else {
                        w as f32
                    }
                })
                .collect()
        })
        .collect()
}
