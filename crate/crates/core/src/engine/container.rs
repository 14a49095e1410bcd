//! Model file: magic `LASCWGT1`, version, JSON metadata, then either float
//! tensors or an int8 payload.

use super::{ParamTensor, Weights};
use crate::audio::SpectrogramConfig;
use crate::codec::*;
use crate::compress::QuantizedWeights;
use crate::error::{Error, Result};
use crate::netspec::{ArchRecipe, NetworkSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

const MAGIC: &[u8; 8] = b"LASCWGT1";
const VERSION: u32 = 1;
const PAYLOAD_F32: u8 = 0;
const PAYLOAD_INT8: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub recipe: ArchRecipe,
    pub class_names: Vec<String>,
    /// Front-end the model was trained on. `None` for embedding models.
    #[serde(default)]
    pub spectrogram: Option<SpectrogramConfig>,
    #[serde(default)]
    pub crop_frames: usize,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl ModelMeta {
    pub fn spec(&self) -> Result<NetworkSpec> {
        self.recipe.build()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Float(Weights),
    Int8(QuantizedWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub meta: ModelMeta,
    pub payload: Payload,
}

impl ModelFile {
    pub fn float(meta: ModelMeta, weights: Weights) -> Self {
        ModelFile { meta, payload: Payload::Float(weights) }
    }

    pub fn is_quantized(&self) -> bool {
        matches!(self.payload, Payload::Int8(_))
    }

    /// Float weights, dequantizing if needed.
    pub fn weights(&self) -> Weights {
        match &self.payload {
            Payload::Float(w) => w.clone(),
            Payload::Int8(q) => q.dequantize(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::Format(format!("model metadata: {e}")))?;
        let io = |e: std::io::Error| Error::Format(e.to_string());
        put_u32(&mut b, VERSION).map_err(io)?;
        put_u32(&mut b, meta.len() as u32).map_err(io)?;
        b.extend_from_slice(&meta);
        match &self.payload {
            Payload::Float(w) => {
                put_u8(&mut b, PAYLOAD_F32).map_err(io)?;
                put_u32(&mut b, w.tensors().len() as u32).map_err(io)?;
                for t in w.tensors() {
                    put_str(&mut b, &t.name).map_err(io)?;
                    put_u8(&mut b, t.trainable as u8).map_err(io)?;
                    put_u32(&mut b, t.dims.len() as u32).map_err(io)?;
                    for &d in &t.dims {
                        put_u32(&mut b, d as u32).map_err(io)?;
                    }
                    put_f32s(&mut b, &t.data).map_err(io)?;
                }
            }
            Payload::Int8(q) => {
                put_u8(&mut b, PAYLOAD_INT8).map_err(io)?;
                b.extend_from_slice(&q.to_bytes());
            }
        }
        Ok(b)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        expect_magic(&mut r, MAGIC)?;
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model file version {version}")));
        }
        let len = get_u32(&mut r)? as usize;
        if len > bytes.len() {
            return Err(Error::Format("metadata length exceeds file size".into()));
        }
        let mut meta = vec![0u8; len];
        r.read_exact(&mut meta).map_err(|e| Error::Format(format!("truncated metadata: {e}")))?;
        let meta: ModelMeta = serde_json::from_slice(&meta).map_err(|e| Error::Format(format!("model metadata: {e}")))?;
        let payload = match get_u8(&mut r)? {
            PAYLOAD_F32 => {
                let n = get_u32(&mut r)? as usize;
                let mut tensors = Vec::with_capacity(n.min(4096));
                for _ in 0..n {
                    let name = get_str(&mut r)?;
                    let trainable = get_u8(&mut r)? != 0;
                    let rank = get_u32(&mut r)? as usize;
                    if rank > 8 {
                        return Err(Error::Format(format!("tensor rank {rank} is implausible")));
                    }
                    let dims: Vec<usize> = (0..rank).map(|_| get_u32(&mut r).map(|d| d as usize)).collect::<Result<_>>()?;
                    let data = get_f32s(&mut r, dims.iter().product())?;
                    tensors.push(ParamTensor { name, dims, data, trainable });
                }
                Payload::Float(Weights::from_tensors(tensors))
            }
            PAYLOAD_INT8 => Payload::Int8(QuantizedWeights::from_bytes(&bytes[r.position() as usize..])?),
            t => return Err(Error::Format(format!("unknown payload type {t}"))),
        };
        Ok(ModelFile { meta, payload })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let m = Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            e => e,
        })?;
        let spec = m.meta.spec()?;
        m.weights().check(&spec)?;
        Ok(m)
    }
}
