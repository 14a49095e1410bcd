/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(f: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if f >= min_log_hz {
        min_log_mel + (f / min_log_hz).ln() / logstep
    } else {
        f / f_sp
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if m >= min_log_mel {
        min_log_hz * (logstep * (m - min_log_mel)).exp()
    } else {
        f_sp * m
    }
}

/// Triangular mel filters with area normalisation, `bands × (fft/2 + 1)`.
pub fn mel_filterbank(sr: f64, n_fft: usize, bands: usize, fmin: f64, fmax: f64) -> Vec<Vec<f32>> {
    let bins = n_fft / 2 + 1;
    let lo = hz_to_mel(fmin);
    let hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
        .collect();
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * sr / n_fft as f64).collect();
    (0..bands)
        .map(|b| {
            let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
            let norm = 2.0 / (r - l);
            freqs
                .iter()
                .map(|&f| {
                    let up = (f - l) / (c - l);
                    let down = (r - f) / (r - c);
                    (up.min(down).max(0.0) * norm) as f32
                })
                .collect()
        })
        .collect()
}
