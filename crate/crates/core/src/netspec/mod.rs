//! Backend-independent network description: a topologically ordered DAG of
//! typed nodes, each tagged with the block it belongs to. Shapes are
//! inferred and merges checked when nodes are added, so a built spec is
//! always shape-consistent.

mod arch;

pub use arch::*;

use crate::error::{invalid_config, Result};
use crate::tensor::Shape;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    Input,
    /// Stride 1, same padding, with bias.
    Conv2d { kh: usize, kw: usize, cin: usize, cout: usize },
    BatchNorm { c: usize },
    Relu,
    /// Same padding; padded cells never win a max.
    MaxPool { kh: usize, kw: usize, sh: usize, sw: usize },
    /// Same padding; averages only over cells inside the input.
    AvgPool { kh: usize, kw: usize, sh: usize, sw: usize },
    GlobalMaxPool,
    GlobalAvgPool,
    /// Mean over the band axis: (h, w, c) -> (1, w, c).
    GlobalAvgPoolFreq,
    /// Max over the frame axis: (h, w, c) -> (h, 1, c).
    GlobalMaxPoolTime,
    /// Mean over channels: (h, w, c) -> (h, w, 1).
    ChannelAvgPool,
    Flatten,
    Dropout { rate: f32 },
    Dense { inp: usize, out: usize },
    Softmax,
    ResidualNorm { lambda: f32 },
    Concat,
    Add,
    ChannelSlice { start: usize, len: usize },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Conv2d { .. } => "conv2d",
            Op::BatchNorm { .. } => "batchnorm",
            Op::Relu => "relu",
            Op::MaxPool { .. } => "maxpool",
            Op::AvgPool { .. } => "avgpool",
            Op::GlobalMaxPool => "global_maxpool",
            Op::GlobalAvgPool => "global_avgpool",
            Op::GlobalAvgPoolFreq => "global_avgpool_freq",
            Op::GlobalMaxPoolTime => "global_maxpool_time",
            Op::ChannelAvgPool => "channel_avgpool",
            Op::Flatten => "flatten",
            Op::Dropout { .. } => "dropout",
            Op::Dense { .. } => "dense",
            Op::Softmax => "softmax",
            Op::ResidualNorm { .. } => "residual_norm",
            Op::Concat => "concat",
            Op::Add => "add",
            Op::ChannelSlice { .. } => "channel_slice",
        }
    }

    /// Trainable parameters: conv `kh·kw·cin·cout + cout`, batch norm
    /// `2c` (scale and shift), dense `in·out + out`.
    pub fn param_count(&self) -> usize {
        match *self {
            Op::Conv2d { kh, kw, cin, cout } => kh * kw * cin * cout + cout,
            Op::BatchNorm { c } => 2 * c,
            Op::Dense { inp, out } => inp * out + out,
            _ => 0,
        }
    }

    /// Non-trainable state (batch-norm moving statistics).
    pub fn state_count(&self) -> usize {
        match *self {
            Op::BatchNorm { c } => 2 * c,
            _ => 0,
        }
    }

    pub fn infer(&self, inputs: &[Shape]) -> Result<Shape> {
        let one = || -> Result<Shape> {
            match inputs {
                [s] => Ok(*s),
                _ => invalid_config(format!("{} takes exactly one input, got {}", self.name(), inputs.len())),
            }
        };
        match *self {
            Op::Input => invalid_config("input nodes are created by the builder"),
            Op::Conv2d { kh, kw, cin, cout } => {
                let s = one()?;
                if kh == 0 || kw == 0 || cin == 0 || cout == 0 {
                    return invalid_config("conv kernel and channel sizes must be >= 1");
                }
                if s.c != cin {
                    return invalid_config(format!("conv expects {cin} input channels, got {}", s.c));
                }
                Ok(Shape::new(s.h, s.w, cout))
            }
            Op::BatchNorm { c } => {
                let s = one()?;
                if s.c != c {
                    return invalid_config(format!("batch norm over {c} channels given {}", s.c));
                }
                Ok(s)
            }
            Op::Relu | Op::Softmax => {
                let s = one()?;
                if matches!(self, Op::Softmax) && (s.h, s.w) != (1, 1) {
                    return invalid_config(format!("softmax needs a vector input, got {s}"));
                }
                Ok(s)
            }
            Op::Dropout { rate } => {
                if !(rate > 0.0 && rate < 1.0) {
                    return invalid_config(format!("dropout rate {rate} outside (0, 1)"));
                }
                one()
            }
            Op::ResidualNorm { .. } => one(),
            Op::MaxPool { kh, kw, sh, sw } | Op::AvgPool { kh, kw, sh, sw } => {
                let s = one()?;
                if kh == 0 || kw == 0 || sh == 0 || sw == 0 {
                    return invalid_config("pool kernel and stride must be >= 1");
                }
                Ok(Shape::new(s.h.div_ceil(sh), s.w.div_ceil(sw), s.c))
            }
            Op::GlobalMaxPool | Op::GlobalAvgPool => Ok(Shape::vector(one()?.c)),
            Op::GlobalAvgPoolFreq => {
                let s = one()?;
                Ok(Shape::new(1, s.w, s.c))
            }
            Op::GlobalMaxPoolTime => {
                let s = one()?;
                Ok(Shape::new(s.h, 1, s.c))
            }
            Op::ChannelAvgPool => {
                let s = one()?;
                Ok(Shape::new(s.h, s.w, 1))
            }
            Op::Flatten => Ok(Shape::vector(one()?.len())),
            Op::Dense { inp, out } => {
                let s = one()?;
                if s != Shape::vector(inp) {
                    return invalid_config(format!("dense expects a {inp}-vector, got {s}"));
                }
                if out == 0 {
                    return invalid_config("dense output width must be >= 1");
                }
                Ok(Shape::vector(out))
            }
            Op::Concat => {
                if inputs.is_empty() {
                    return invalid_config("concat needs inputs");
                }
                let (h, w) = (inputs[0].h, inputs[0].w);
                if inputs.iter().any(|s| s.h != h || s.w != w) {
                    return invalid_config(format!("concat inputs disagree spatially: {inputs:?}"));
                }
                Ok(Shape::new(h, w, inputs.iter().map(|s| s.c).sum()))
            }
            Op::Add => {
                if inputs.len() < 2 {
                    return invalid_config("add needs at least two inputs");
                }
                if inputs.iter().any(|s| *s != inputs[0]) {
                    return invalid_config(format!("add inputs have different shapes: {inputs:?}"));
                }
                Ok(inputs[0])
            }
            Op::ChannelSlice { start, len } => {
                let s = one()?;
                if len == 0 || start + len > s.c {
                    return invalid_config(format!("channel slice {start}+{len} out of {}", s.c));
                }
                Ok(Shape::new(s.h, s.w, len))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<usize>,
    pub shape: Shape,
    pub block: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

/// Node list in topological order; node 0 is the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub nodes: Vec<Node>,
}

impl Graph {
    pub fn input_shape(&self) -> Shape {
        self.nodes[0].shape
    }

    pub fn output(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn output_shape(&self) -> Shape {
        self.nodes[self.output()].shape
    }

    pub fn param_count(&self) -> usize {
        self.nodes.iter().map(|n| n.op.param_count()).sum()
    }

    /// Re-derive every shape and check ordering; used after rewrites and on
    /// deserialized specs.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.nodes[0].op != Op::Input {
            return invalid_config("graph must start with an input node");
        }
        let mut names = std::collections::HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !names.insert(n.name.as_str()) {
                return invalid_config(format!("duplicate node name '{}'", n.name));
            }
            if i == 0 {
                if !n.inputs.is_empty() {
                    return invalid_config("input node cannot have inputs");
                }
                continue;
            }
            if n.op == Op::Input {
                return invalid_config("only node 0 may be an input");
            }
            if n.inputs.iter().any(|&j| j >= i) {
                return invalid_config(format!("node '{}' is not in topological order", n.name));
            }
            let shapes: Vec<Shape> = n.inputs.iter().map(|&j| self.nodes[j].shape).collect();
            let s = n.op.infer(&shapes)?;
            if s != n.shape {
                return invalid_config(format!("node '{}' records shape {} but infers {}", n.name, n.shape, s));
            }
        }
        Ok(())
    }

    /// Block names in first-appearance order.
    pub fn blocks(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for n in &self.nodes {
            if out.last() != Some(&n.block) && !out.contains(&n.block) {
                out.push(n.block.clone());
            }
        }
        out
    }

    pub fn block_param_count(&self, block: &str) -> usize {
        self.nodes.iter().filter(|n| n.block == block).map(|n| n.op.param_count()).sum()
    }
}

/// Incremental graph construction with eager shape checks.
pub struct GraphBuilder {
    nodes: Vec<Node>,
    block: String,
}

impl GraphBuilder {
    pub fn new(input: Shape) -> Self {
        GraphBuilder {
            nodes: vec![Node {
                name: "input".into(),
                op: Op::Input,
                inputs: vec![],
                shape: input,
                block: "input".into(),
                tag: None,
            }],
            block: "input".into(),
        }
    }

    pub fn block(&mut self, name: &str) -> &mut Self {
        self.block = name.to_string();
        self
    }

    pub fn shape(&self, id: usize) -> Shape {
        self.nodes[id].shape
    }

    pub fn add(&mut self, op: Op, inputs: &[usize]) -> Result<usize> {
        self.add_tagged(op, inputs, None)
    }

    pub fn add_tagged(&mut self, op: Op, inputs: &[usize], tag: Option<&str>) -> Result<usize> {
        if inputs.iter().any(|&i| i >= self.nodes.len()) {
            return invalid_config("edge to a node that does not exist yet");
        }
        let shapes: Vec<Shape> = inputs.iter().map(|&i| self.nodes[i].shape).collect();
        let shape = op.infer(&shapes).map_err(|e| {
            crate::Error::InvalidConfig(format!("block '{}', {} #{}: {e}", self.block, op.name(), self.nodes.len()))
        })?;
        let id = self.nodes.len();
        self.nodes.push(Node {
            name: format!("{}/{}_{}", self.block, op.name(), id),
            op,
            inputs: inputs.to_vec(),
            shape,
            block: self.block.clone(),
            tag: tag.map(str::to_string),
        });
        Ok(id)
    }

    /// Convenience for unary chains.
    pub fn chain(&mut self, mut x: usize, ops: impl IntoIterator<Item = Op>) -> Result<usize> {
        for op in ops {
            x = self.add(op, &[x])?;
        }
        Ok(x)
    }

    pub fn conv(&mut self, x: usize, kh: usize, kw: usize, cout: usize) -> Result<usize> {
        self.conv_tagged(x, kh, kw, cout, None)
    }

    pub fn conv_tagged(&mut self, x: usize, kh: usize, kw: usize, cout: usize, tag: Option<&str>) -> Result<usize> {
        let cin = self.shape(x).c;
        self.add_tagged(Op::Conv2d { kh, kw, cin, cout }, &[x], tag)
    }

    pub fn bn(&mut self, x: usize) -> Result<usize> {
        let c = self.shape(x).c;
        self.add(Op::BatchNorm { c }, &[x])
    }

    pub fn dense(&mut self, x: usize, out: usize) -> Result<usize> {
        let inp = self.shape(x).c;
        self.add(Op::Dense { inp, out }, &[x])
    }

    pub fn finish(self) -> Graph {
        Graph { nodes: self.nodes }
    }
}
