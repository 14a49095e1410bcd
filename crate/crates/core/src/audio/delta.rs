use super::FeatureTensor;
use crate::error::{invalid_input, Result};

/// Regression delta along the frame axis of a `bands × frames` plane:
/// `d_t = Σ_{n=1..N} n (c_{t+n} - c_{t-n}) / (2 Σ n²)`, N = (width-1)/2,
/// with frames outside the range replaced by the nearest edge frame.
pub fn regression_delta(plane: &[f32], bands: usize, frames: usize, width: usize) -> Result<Vec<f32>> {
    if width < 3 || width % 2 == 0 {
        return invalid_input(format!("delta width {width} must be odd and >= 3"));
    }
    if frames < width {
        return invalid_input(format!("{frames} frames is fewer than the delta width {width}"));
    }
    let n = (width / 2) as i64;
    let denom: f32 = 2.0 * (1..=n).map(|k| (k * k) as f32).sum::<f32>();
    let last = frames as i64 - 1;
    let mut out = vec![0.0f32; bands * frames];
    for b in 0..bands {
        let row = &plane[b * frames..(b + 1) * frames];
        for t in 0..frames as i64 {
            let mut acc = 0.0f32;
            for k in 1..=n {
                let fwd = row[(t + k).min(last) as usize];
                let back = row[(t - k).max(0) as usize];
                acc += k as f32 * (fwd - back);
            }
            out[b * frames + t as usize] = acc / denom;
        }
    }
    Ok(out)
}

/// Static, delta and delta-delta channels. The output keeps band-major
/// `bands × frames × 3` layout.
pub fn stack_deltas(spec: &FeatureTensor, width: usize) -> Result<FeatureTensor> {
    if spec.channels != 1 {
        return invalid_input(format!("delta stacking needs 1 channel, got {}", spec.channels));
    }
    let (bands, frames) = (spec.bands, spec.frames);
    let d1 = regression_delta(&spec.values, bands, frames, width)?;
    let d2 = regression_delta(&d1, bands, frames, width)?;
    let mut values = Vec::with_capacity(bands * frames * 3);
    for i in 0..bands * frames {
        values.push(spec.values[i]);
        values.push(d1[i]);
        values.push(d2[i]);
    }
    Ok(FeatureTensor {
        values,
        bands,
        frames,
        channels: 3,
        kind: spec.kind,
        config_digest: spec.config_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::SpectrogramKind;
    use proptest::prelude::*;

    fn single(bands: usize, frames: usize, f: impl Fn(usize, usize) -> f32) -> FeatureTensor {
        let mut values = vec![0.0; bands * frames];
        for b in 0..bands {
            for t in 0..frames {
                values[b * frames + t] = f(b, t);
            }
        }
        FeatureTensor { values, bands, frames, channels: 1, kind: SpectrogramKind::Mel, config_digest: [0; 32] }
    }

    #[test]
    fn constant_input_gives_zero_deltas() {
        let s = single(4, 20, |b, _| b as f32 * 3.0 - 1.0);
        let d = stack_deltas(&s, 9).unwrap();
        assert_eq!(d.channels, 3);
        for i in 0..4 * 20 {
            assert_eq!(d.values[3 * i], s.values[i]);
            assert_eq!(d.values[3 * i + 1], 0.0);
            assert_eq!(d.values[3 * i + 2], 0.0);
        }
    }

    #[test]
    fn ramp_interior_delta_equals_slope() {
        let slope = 0.75f32;
        let s = single(2, 30, |_, t| slope * t as f32 + 2.0);
        let d = regression_delta(&s.values, 2, 30, 9).unwrap();
        for t in 4..26 {
            assert!((d[t] - slope).abs() < 1e-5);
            assert!((d[30 + t] - slope).abs() < 1e-5);
        }
    }

    #[test]
    fn too_few_frames() {
        let s = single(2, 8, |_, t| t as f32);
        assert!(stack_deltas(&s, 9).is_err());
    }

    #[test]
    fn shape_preserved_128x312() {
        let s = single(128, 312, |b, t| ((b * 31 + t * 7) % 11) as f32);
        let d = stack_deltas(&s, 9).unwrap();
        assert_eq!((d.bands, d.frames, d.channels), (128, 312, 3));
    }

    proptest! {
        #[test]
        fn delta_is_linear(a in -3.0f32..3.0, seed in 0u64..1000) {
            let s = single(3, 15, |b, t| (((b as u64 * 7 + t as u64 * 13 + seed) % 17) as f32) - 8.0);
            let d = regression_delta(&s.values, 3, 15, 9).unwrap();
            let scaled: Vec<f32> = s.values.iter().map(|v| v * a).collect();
            let ds = regression_delta(&scaled, 3, 15, 9).unwrap();
            for (x, y) in d.iter().zip(&ds) {
                prop_assert!((x * a - y).abs() < 1e-4);
            }
        }
    }
}
