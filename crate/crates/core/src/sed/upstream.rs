//! Up-stream sound-event models behind a small client trait, and a local
//! weight-file client.
//!
//! The local client has a fixed log-mel front-end (32 kHz, 1024-point FFT,
//! hop 320, 64 bands over 50 Hz to 14 kHz), a per-frame ReLU projection,
//! mean and max pooling over time (the embedding), and a sigmoid event
//! head. Weight file layout, little-endian:
//!
//! ```text
//! magic b"LASCUPS1" | id str | in_dim u32 | hidden u32 | events u32
//! w1 f32[hidden*in_dim] | b1 f32[hidden] | v f32[events*2*hidden] | c f32[events]
//! ```

use crate::audio::{mel_filterbank, resample, AudioClip, Stft, TARGET_RATE};
use crate::codec::*;
use crate::error::{invalid_input, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::io::Cursor;
use std::path::Path;

pub const EVENT_COUNT: usize = 527;
const MAGIC: &[u8; 8] = b"LASCUPS1";
const N_FFT: usize = 1024;
const HOP: usize = 320;
const BANDS: usize = 64;

pub trait UpstreamModel: Send + Sync {
    /// Stable identifier; cache entries are keyed by it.
    fn model_id(&self) -> &str;
    fn embedding_len(&self) -> usize;
    /// Global-pooling feature vector for one clip.
    fn embed(&self, clip: &AudioClip) -> Result<Vec<f32>>;
    /// Multi-label scores in [0, 1] over the event vocabulary.
    fn event_scores(&self, clip: &AudioClip) -> Result<Vec<f32>>;
}

pub struct LocalUpstream {
    id: String,
    hidden: usize,
    events: usize,
    w1: Vec<f32>,
    b1: Vec<f32>,
    v: Vec<f32>,
    c: Vec<f32>,
    stft: Stft,
    bank: Vec<Vec<f32>>,
}

impl std::fmt::Debug for LocalUpstream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalUpstream").field("id", &self.id).field("hidden", &self.hidden).field("events", &self.events).finish()
    }
}

impl LocalUpstream {
    fn assemble(id: String, hidden: usize, events: usize, w1: Vec<f32>, b1: Vec<f32>, v: Vec<f32>, c: Vec<f32>) -> Result<Self> {
        if hidden == 0 || events == 0 {
            return invalid_input("upstream dimensions must be positive");
        }
        if w1.len() != hidden * BANDS || b1.len() != hidden || v.len() != events * 2 * hidden || c.len() != events {
            return Err(Error::Format("upstream tensor sizes do not match header".into()));
        }
        let bank = mel_filterbank(TARGET_RATE as f64, N_FFT, BANDS, 50.0, 14_000.0);
        Ok(LocalUpstream { id, hidden, events, w1, b1, v, c, stft: Stft::new(N_FFT, N_FFT, HOP), bank })
    }

    /// Random weights for tests and desk runs; the id embeds the seed.
    pub fn generate(seed: u64, hidden: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |n: usize, lim: f32| -> Vec<f32> { (0..n).map(|_| rng.random_range(-lim..lim)).collect() };
        let w1 = u(hidden * BANDS, (3.0 / BANDS as f32).sqrt());
        let b1 = u(hidden, 0.1);
        let v = u(EVENT_COUNT * 2 * hidden, (3.0 / (2 * hidden) as f32).sqrt());
        let c = vec![-2.0; EVENT_COUNT];
        Self::assemble(format!("local-proj-{seed}-{hidden}"), hidden, EVENT_COUNT, w1, b1, v, c)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        let _ = put_str(&mut b, &self.id);
        for d in [BANDS, self.hidden, self.events] {
            let _ = put_u32(&mut b, d as u32);
        }
        for t in [&self.w1, &self.b1, &self.v, &self.c] {
            let _ = put_f32s(&mut b, t);
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        expect_magic(&mut r, MAGIC)?;
        let id = get_str(&mut r)?;
        let (inp, hidden, events) = (get_u32(&mut r)? as usize, get_u32(&mut r)? as usize, get_u32(&mut r)? as usize);
        if inp != BANDS {
            return Err(Error::Format(format!("upstream expects {inp} input bands, this build supports {BANDS}")));
        }
        if hidden > 1 << 16 || events > 1 << 16 {
            return Err(Error::Format("upstream dimensions are implausible".into()));
        }
        let w1 = get_f32s(&mut r, hidden * BANDS)?;
        let b1 = get_f32s(&mut r, hidden)?;
        let v = get_f32s(&mut r, events * 2 * hidden)?;
        let c = get_f32s(&mut r, events)?;
        Self::assemble(id, hidden, events, w1, b1, v, c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    /// Missing or unreadable files are retryable: the model may still be
    /// syncing to this host.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Retryable(format!("upstream weights {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the serialised weights.
    pub fn digest_hex(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    fn pooled(&self, clip: &AudioClip) -> Result<Vec<f32>> {
        let clip = if clip.sample_rate != TARGET_RATE { resample(clip, TARGET_RATE)? } else { clip.clone() };
        if clip.samples.len() < N_FFT {
            return invalid_input(format!("clip '{}' is shorter than {N_FFT} samples", clip.source_id));
        }
        let frames = self.stft.power(&clip.samples);
        let h = self.hidden;
        let mut mean = vec![0.0f32; h];
        let mut max = vec![f32::NEG_INFINITY; h];
        let mut mel = vec![0.0f32; BANDS];
        for p in &frames {
            for (m, row) in mel.iter_mut().zip(&self.bank) {
                let e: f32 = row.iter().zip(p).map(|(a, b)| a * b).sum();
                *m = (e + 1e-10).ln() / 10.0;
            }
            for j in 0..h {
                let w = &self.w1[j * BANDS..(j + 1) * BANDS];
                let a = (w.iter().zip(&mel).map(|(a, b)| a * b).sum::<f32>() + self.b1[j]).max(0.0);
                mean[j] += a;
                max[j] = max[j].max(a);
            }
        }
        let n = frames.len() as f32;
        mean.iter_mut().for_each(|v| *v /= n);
        mean.extend(max);
        Ok(mean)
    }
}

impl UpstreamModel for LocalUpstream {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn embedding_len(&self) -> usize {
        2 * self.hidden
    }

    fn embed(&self, clip: &AudioClip) -> Result<Vec<f32>> {
        self.pooled(clip)
    }

    fn event_scores(&self, clip: &AudioClip) -> Result<Vec<f32>> {
        let e = self.pooled(clip)?;
        let d = e.len();
        Ok((0..self.events)
            .map(|k| {
                let z: f32 = self.v[k * d..(k + 1) * d].iter().zip(&e).map(|(a, b)| a * b).sum::<f32>() + self.c[k];
                1.0 / (1.0 + (-z).exp())
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(seed: u64) -> AudioClip {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        AudioClip::new((0..32_000).map(|_| r.random_range(-0.5..0.5)).collect(), 32_000, "n").unwrap()
    }

    #[test]
    fn embeddings_are_deterministic_with_fixed_length() {
        let u = LocalUpstream::generate(1, 32).unwrap();
        let a = u.embed(&noise(1)).unwrap();
        assert_eq!(a.len(), u.embedding_len());
        assert_eq!(a, u.embed(&noise(1)).unwrap());
        let s = u.event_scores(&noise(2)).unwrap();
        assert_eq!(s.len(), EVENT_COUNT);
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn silence_and_noise_differ() {
        let u = LocalUpstream::generate(1, 32).unwrap();
        let a = u.embed(&AudioClip::new(vec![0.0; 32_000], 32_000, "s").unwrap()).unwrap();
        let b = u.embed(&noise(3)).unwrap();
        let dot: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!(1.0 - dot / (na * nb) > 1e-3);
    }

    #[test]
    fn weight_file_round_trip_and_missing_is_retryable() {
        let u = LocalUpstream::generate(5, 16).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("up.bin");
        u.save(&p).unwrap();
        let back = LocalUpstream::load(&p).unwrap();
        assert_eq!(back.digest_hex(), u.digest_hex());
        assert_eq!(back.model_id(), u.model_id());
        assert!(LocalUpstream::load(&dir.path().join("nope.bin")).unwrap_err().is_retryable());
    }
}
