//! Feature archive, little-endian throughout:
//!
//! ```text
//! magic   b"LASCFEAT"
//! version u32 (1)
//! count   u32
//! repeated count times:
//!   id      u32 length + utf-8 bytes
//!   kind    u8 (0 mel, 1 gam, 2 cqt)
//!   bands, frames, channels  u32 each
//!   digest  [u8; 32] spectrogram config digest
//!   values  f32 × bands·frames·channels, row-major (band, frame, channel)
//! ```

use super::SpectrogramKind;
use crate::codec::*;
use crate::error::{Error, Result};
use std::io::{BufReader, Cursor};
use std::path::Path;

const MAGIC: &[u8; 8] = b"LASCFEAT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub values: Vec<f32>,
    pub bands: usize,
    pub frames: usize,
    pub channels: usize,
    pub kind: SpectrogramKind,
    pub config_digest: [u8; 32],
}

impl FeatureTensor {
    pub fn shape(&self) -> crate::tensor::Shape {
        crate::tensor::Shape::new(self.bands, self.frames, self.channels)
    }

    pub fn at(&self, band: usize, frame: usize, channel: usize) -> f32 {
        self.values[(band * self.frames + frame) * self.channels + channel]
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.config_digest)
    }
}

pub fn write_feature_archive(path: &Path, entries: &[(String, FeatureTensor)]) -> Result<()> {
    let mut buf = Vec::new();
    let io = |e| Error::io(path, e);
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION).map_err(io)?;
    put_u32(&mut buf, entries.len() as u32).map_err(io)?;
    for (id, t) in entries {
        put_str(&mut buf, id).map_err(io)?;
        put_u8(&mut buf, t.kind.code()).map_err(io)?;
        for d in [t.bands, t.frames, t.channels] {
            put_u32(&mut buf, d as u32).map_err(io)?;
        }
        buf.extend_from_slice(&t.config_digest);
        put_f32s(&mut buf, &t.values).map_err(io)?;
    }
    write_atomic(path, &buf)
}

pub fn read_feature_archive(path: &Path) -> Result<Vec<(String, FeatureTensor)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(Cursor::new(bytes));
    expect_magic(&mut r, MAGIC)?;
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("feature archive version {version} unsupported")));
    }
    let count = get_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = get_str(&mut r)?;
        let code = get_u8(&mut r)?;
        let kind = SpectrogramKind::from_code(code)
            .ok_or_else(|| Error::Format(format!("unknown spectrogram kind code {code}")))?;
        let bands = get_u32(&mut r)? as usize;
        let frames = get_u32(&mut r)? as usize;
        let channels = get_u32(&mut r)? as usize;
        let config_digest: [u8; 32] = get_bytes(&mut r)?;
        let values = get_f32s(&mut r, bands * frames * channels)?;
        out.push((id, FeatureTensor { values, bands, frames, channels, kind, config_digest }));
    }
    Ok(out)
}
