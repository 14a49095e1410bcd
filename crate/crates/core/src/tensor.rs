//! Dense 4-D activations in NHWC order. For spectrogram inputs H is the
//! band axis, W the frame axis and C the channel (static/delta/delta-delta)
//! axis.

use crate::error::{invalid_input, Result};
use serde::{Deserialize, Serialize};

/// Per-sample shape (height, width, channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Shape { h, w, c }
    }

    pub const fn vector(c: usize) -> Self {
        Shape { h: 1, w: 1, c }
    }

    pub const fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub shape: Shape,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(n: usize, shape: Shape) -> Self {
        Tensor {
            n,
            shape,
            data: vec![0.0; n * shape.len()],
        }
    }

    pub fn from_vec(n: usize, shape: Shape, data: Vec<f32>) -> Result<Self> {
        if data.len() != n * shape.len() {
            return invalid_input(format!(
                "tensor data length {} does not match {}x{}",
                data.len(),
                n,
                shape
            ));
        }
        Ok(Tensor { n, shape, data })
    }

    /// Stack per-sample blocks that all share one shape.
    pub fn stack(samples: &[&[f32]], shape: Shape) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * shape.len());
        for s in samples {
            if s.len() != shape.len() {
                return invalid_input(format!(
                    "sample of length {} does not fit shape {}",
                    s.len(),
                    shape
                ));
            }
            data.extend_from_slice(s);
        }
        Ok(Tensor {
            n: samples.len(),
            shape,
            data,
        })
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let l = self.shape.len();
        &self.data[i * l..(i + 1) * l]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f32] {
        let l = self.shape.len();
        &mut self.data[i * l..(i + 1) * l]
    }

    #[inline]
    pub fn idx(&self, n: usize, h: usize, w: usize, c: usize) -> usize {
        ((n * self.shape.h + h) * self.shape.w + w) * self.shape.c + c
    }

    #[inline]
    pub fn at(&self, n: usize, h: usize, w: usize, c: usize) -> f32 {
        self.data[self.idx(n, h, w, c)]
    }

    /// Rows of a (n, 1, 1, c) tensor.
    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks(self.shape.len().max(1))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
