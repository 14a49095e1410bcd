//! On-disk embedding cache keyed by (clip content digest, upstream id).
//! Reads share a lock; writes are serialised and land by atomic rename.

use super::UpstreamModel;
use crate::audio::AudioClip;
use crate::codec::*;
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::io::Cursor;
use std::path::PathBuf;
use std::sync::RwLock;

const MAGIC: &[u8; 8] = b"LASCEMBC";

pub struct EmbeddingCache {
    dir: PathBuf,
    lock: RwLock<()>,
}

/// SHA-256 over the sample rate and raw f32 samples.
pub fn clip_digest(clip: &AudioClip) -> String {
    let mut h = Sha256::new();
    h.update(clip.sample_rate.to_le_bytes());
    for s in &clip.samples {
        h.update(s.to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl EmbeddingCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(EmbeddingCache { dir, lock: RwLock::new(()) })
    }

    fn path(&self, model_id: &str, digest: &str) -> PathBuf {
        let m = hex::encode(&Sha256::digest(model_id.as_bytes())[..8]);
        self.dir.join(m).join(format!("{digest}.emb"))
    }

    pub fn get(&self, model_id: &str, digest: &str) -> Result<Option<Vec<f32>>> {
        let _g = self.lock.read().map_err(|_| Error::Runtime("embedding cache lock poisoned".into()))?;
        let p = self.path(model_id, digest);
        let bytes = match std::fs::read(&p) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&p, e)),
        };
        let mut r = Cursor::new(bytes.as_slice());
        expect_magic(&mut r, MAGIC)?;
        if get_str(&mut r)? != model_id {
            return Ok(None);
        }
        let n = get_u32(&mut r)? as usize;
        Ok(Some(get_f32s(&mut r, n)?))
    }

    /// Existing entries are never overwritten.
    pub fn put(&self, model_id: &str, digest: &str, v: &[f32]) -> Result<()> {
        let _g = self.lock.write().map_err(|_| Error::Runtime("embedding cache lock poisoned".into()))?;
        let p = self.path(model_id, digest);
        if p.exists() {
            return Ok(());
        }
        if let Some(d) = p.parent() {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        let io = |e| Error::io(&p, e);
        put_str(&mut b, model_id).map_err(io)?;
        put_u32(&mut b, v.len() as u32).map_err(io)?;
        put_f32s(&mut b, v).map_err(io)?;
        write_atomic(&p, &b)
    }

    /// Cached embedding if present, otherwise compute and store. An
    /// unavailable upstream is only an error on a cache miss.
    pub fn get_or_embed(&self, upstream: &dyn UpstreamModel, clip: &AudioClip) -> Result<Vec<f32>> {
        let d = clip_digest(clip);
        if let Some(v) = self.get(upstream.model_id(), &d)? {
            return Ok(v);
        }
        let v = upstream.embed(clip)?;
        self.put(upstream.model_id(), &d, &v)?;
        Ok(v)
    }
}
