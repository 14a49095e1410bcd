//! Per-tensor symmetric int8 weight quantization.
//!
//! Quantized weights file, little-endian:
//!
//! ```text
//! magic  b"LASCQNT1"
//! count  u32                      quantized (trainable) tensors
//!   name   u32 length + utf-8
//!   rank   u32, dims u32 × rank
//!   scale  f32, zero_point i32 (always 0)
//!   values i8 × Π dims
//! count  u32                      float state tensors (batch-norm moving stats)
//!   name, rank, dims as above
//!   values f32 × Π dims
//! ```

use crate::codec::*;
use crate::engine::{ParamTensor, Weights};
use crate::error::{Error, Result};
use std::io::{Cursor, Read};
use std::path::Path;

const MAGIC: &[u8; 8] = b"LASCQNT1";

#[derive(Debug, Clone, PartialEq)]
pub struct QuantTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub scale: f32,
    pub zero_point: i32,
    pub values: Vec<i8>,
}

/// `scale = max|w| / 127`, zero point 0. An all-zero tensor gets scale 1.
pub fn quantize_tensor(name: &str, dims: &[usize], data: &[f32]) -> QuantTensor {
    let max = data.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let scale = if max > 0.0 { max / 127.0 } else { 1.0 };
    let values = data
        .iter()
        .map(|&v| (v / scale).round().clamp(-127.0, 127.0) as i8)
        .collect();
    QuantTensor {
        name: name.to_string(),
        dims: dims.to_vec(),
        scale,
        zero_point: 0,
        values,
    }
}

pub fn dequantize_tensor(q: &QuantTensor) -> Vec<f32> {
    q.values.iter().map(|&v| (v as i32 - q.zero_point) as f32 * q.scale).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedWeights {
    pub tensors: Vec<QuantTensor>,
    /// Non-trainable state kept in float.
    pub state: Vec<ParamTensor>,
}

impl QuantizedWeights {
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.values.len()).sum()
    }

    /// One byte per trainable parameter.
    pub fn param_storage_bytes(&self) -> usize {
        self.param_count()
    }

    pub fn dequantize(&self) -> Weights {
        let mut tensors: Vec<ParamTensor> = self
            .tensors
            .iter()
            .map(|q| ParamTensor {
                name: q.name.clone(),
                dims: q.dims.clone(),
                data: dequantize_tensor(q),
                trainable: true,
            })
            .collect();
        tensors.extend(self.state.iter().cloned());
        Weights::from_tensors(tensors)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        let _ = put_u32(&mut b, self.tensors.len() as u32);
        for t in &self.tensors {
            let _ = put_str(&mut b, &t.name);
            let _ = put_u32(&mut b, t.dims.len() as u32);
            for &d in &t.dims {
                let _ = put_u32(&mut b, d as u32);
            }
            let _ = put_f32(&mut b, t.scale);
            let _ = put_i32(&mut b, t.zero_point);
            b.extend(t.values.iter().map(|&v| v as u8));
        }
        let _ = put_u32(&mut b, self.state.len() as u32);
        for t in &self.state {
            let _ = put_str(&mut b, &t.name);
            let _ = put_u32(&mut b, t.dims.len() as u32);
            for &d in &t.dims {
                let _ = put_u32(&mut b, d as u32);
            }
            let _ = put_f32s(&mut b, &t.data);
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        expect_magic(&mut r, MAGIC)?;
        let dims = |r: &mut Cursor<&[u8]>| -> Result<Vec<usize>> {
            let rank = get_u32(r)? as usize;
            if rank > 8 {
                return Err(Error::Format(format!("tensor rank {rank} is implausible")));
            }
            (0..rank).map(|_| get_u32(r).map(|d| d as usize)).collect()
        };
        let n = get_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            let name = get_str(&mut r)?;
            let dims = dims(&mut r)?;
            let scale = get_f32(&mut r)?;
            let zero_point = get_i32(&mut r)?;
            let len: usize = dims.iter().product();
            let mut raw = vec![0u8; len];
            r.read_exact(&mut raw).map_err(|e| Error::Format(format!("truncated int8 payload: {e}")))?;
            tensors.push(QuantTensor { name, dims, scale, zero_point, values: raw.into_iter().map(|v| v as i8).collect() });
        }
        let n = get_u32(&mut r)? as usize;
        let mut state = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            let name = get_str(&mut r)?;
            let dims = dims(&mut r)?;
            let data = get_f32s(&mut r, dims.iter().product())?;
            state.push(ParamTensor { name, dims, data, trainable: false });
        }
        Ok(QuantizedWeights { tensors, state })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Quantize every trainable tensor; moving statistics stay in float.
pub fn quantize(weights: &Weights) -> QuantizedWeights {
    let mut tensors = Vec::new();
    let mut state = Vec::new();
    for t in weights.tensors() {
        if t.trainable {
            tensors.push(quantize_tensor(&t.name, &t.dims, &t.data));
        } else {
            state.push(t.clone());
        }
    }
    QuantizedWeights { tensors, state }
}
