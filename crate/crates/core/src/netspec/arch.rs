use super::{Graph, GraphBuilder, Op};
use crate::error::{invalid_config, Result};
use crate::tensor::Shape;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TAG_INC_RES_KXK: &str = "inc_res_kxk";
pub const TAG_INC_3X3: &str = "inc_3x3";
pub const TAG_CD: &str = "cd";

pub const RN_LAMBDA: f32 = 0.4;
/// Stride shared by every average pool inside a residual-inception block.
pub const INC_RES_POOL_STRIDE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Baseline,
    Nri,
    Downstream,
}

/// Which square convolutions the channel-deconvolution rewrite touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdScope {
    /// Only the `[K×K]` branch convolutions of residual-inception blocks.
    IncResKernels,
    /// Every square convolution with K > 1, inception `[3×3]`s included.
    AllSquare,
}

/// Everything needed to rebuild a spec. Channel widths are keyed by block
/// name; `fc1 = 0` removes the hidden dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchRecipe {
    pub family: Family,
    pub name: String,
    pub classes: usize,
    pub input: Shape,
    pub channels: BTreeMap<String, usize>,
    /// Per residual-inception block kernel size K.
    #[serde(default)]
    pub kernels: Vec<usize>,
    #[serde(default)]
    pub cd: Option<CdScope>,
}

pub const BASELINE_BLOCKS: [&str; 4] = ["inc1", "inc2", "inc3", "inc4"];
pub const NRI_BLOCKS: [&str; 4] = ["dob_inc", "inc_res1", "inc_res2", "inc_res3"];
pub const FC_HIDDEN: &str = "fc1";

pub const DEFAULT_INPUT: Shape = Shape::new(128, 256, 3);

impl ArchRecipe {
    pub fn baseline(classes: usize) -> Self {
        let channels = BASELINE_BLOCKS
            .iter()
            .zip([128, 128, 256, 256])
            .map(|(k, v)| (k.to_string(), v))
            .chain([(FC_HIDDEN.to_string(), 1024)])
            .collect();
        ArchRecipe {
            family: Family::Baseline,
            name: "baseline".into(),
            classes,
            input: DEFAULT_INPUT,
            channels,
            kernels: vec![],
            cd: None,
        }
    }

    pub fn nri(classes: usize) -> Self {
        let channels = NRI_BLOCKS
            .iter()
            .zip([128, 128, 256, 256])
            .map(|(k, v)| (k.to_string(), v))
            .chain([(FC_HIDDEN.to_string(), 1024)])
            .collect();
        ArchRecipe {
            family: Family::Nri,
            name: "nri".into(),
            classes,
            input: DEFAULT_INPUT,
            channels,
            kernels: vec![3, 3, 3],
            cd: None,
        }
    }

    pub fn downstream(embedding_len: usize, classes: usize) -> Self {
        ArchRecipe {
            family: Family::Downstream,
            name: "downstream_mlp".into(),
            classes,
            input: Shape::vector(embedding_len),
            channels: [(FC_HIDDEN.to_string(), 1024)].into_iter().collect(),
            kernels: vec![],
            cd: None,
        }
    }

    pub fn trunk_blocks(&self) -> &'static [&'static str] {
        match self.family {
            Family::Baseline => &BASELINE_BLOCKS,
            Family::Nri => &NRI_BLOCKS,
            Family::Downstream => &[],
        }
    }

    pub fn width(&self, block: &str) -> Result<usize> {
        self.channels
            .get(block)
            .copied()
            .ok_or_else(|| crate::Error::InvalidConfig(format!("no channel width for block '{block}'")))
    }

    pub fn fc_hidden(&self) -> Option<usize> {
        self.channels.get(FC_HIDDEN).copied().filter(|&v| v > 0)
    }

    pub fn with_input(mut self, input: Shape) -> Self {
        self.input = input;
        self
    }

    pub fn build(&self) -> Result<NetworkSpec> {
        if self.classes < 2 {
            return invalid_config("class count must be at least 2");
        }
        let graph = match self.family {
            Family::Baseline => build_baseline(self)?,
            Family::Nri => build_nri(self)?,
            Family::Downstream => build_downstream(self)?,
        };
        let mut spec = NetworkSpec {
            name: self.name.clone(),
            classes: self.classes,
            recipe: self.clone(),
            graph,
        };
        if let Some(scope) = self.cd {
            spec = crate::compress::apply_channel_deconvolution_scoped(&spec, scope)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub classes: usize,
    pub recipe: ArchRecipe,
    pub graph: Graph,
}

impl NetworkSpec {
    pub fn param_count(&self) -> usize {
        self.graph.param_count()
    }

    pub fn input_shape(&self) -> Shape {
        self.graph.input_shape()
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        let out = &self.graph.nodes[self.graph.output()];
        if out.op != Op::Softmax || out.shape != Shape::vector(self.classes) {
            return invalid_config(format!("final layer must be a softmax over {} classes", self.classes));
        }
        Ok(())
    }

    /// Human-readable manifest: one entry per block with its nodes and
    /// explicit input edges.
    pub fn manifest(&self) -> serde_json::Value {
        let blocks: Vec<serde_json::Value> = self
            .graph
            .blocks()
            .into_iter()
            .map(|b| {
                let nodes: Vec<serde_json::Value> = self
                    .graph
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, n)| n.block == b)
                    .map(|(i, n)| {
                        let mut v = serde_json::to_value(&n.op).unwrap_or_default();
                        v["id"] = i.into();
                        v["name"] = n.name.clone().into();
                        v["inputs"] = serde_json::to_value(&n.inputs).unwrap_or_default();
                        v["shape"] = format!("{}", n.shape).into();
                        v["params"] = n.op.param_count().into();
                        if let Some(t) = &n.tag {
                            v["tag"] = t.clone().into();
                        }
                        v
                    })
                    .collect();
                serde_json::json!({
                    "block": b,
                    "params": self.graph.block_param_count(&b),
                    "nodes": nodes,
                })
            })
            .collect();
        serde_json::json!({
            "name": self.name,
            "classes": self.classes,
            "input": format!("{}", self.input_shape()),
            "params": self.param_count(),
            "recipe": self.recipe,
            "blocks": blocks,
        })
    }
}

/// Four parallel branches, each emitting `ch` channels:
/// `[1×1]`, `[1×1 → 3×3]`, `[1×1 → 1×4]`, `maxpool[3×3] → [1×1]`.
/// The 1×1 reductions in front of the larger kernels are `ch/4` wide.
/// The concatenated output has `4·ch` channels.
pub fn inception_layer(b: &mut GraphBuilder, x: usize, ch: usize) -> Result<usize> {
    if ch == 0 || ch % 4 != 0 {
        return invalid_config(format!("inception width {ch} must be a positive multiple of 4"));
    }
    let r = ch / 4;
    let b1 = b.conv(x, 1, 1, ch)?;
    let r2 = b.conv(x, 1, 1, r)?;
    let b2 = b.conv_tagged(r2, 3, 3, ch, Some(TAG_INC_3X3))?;
    let r3 = b.conv(x, 1, 1, r)?;
    let b3 = b.conv(r3, 1, 4, ch)?;
    let p4 = b.add(Op::MaxPool { kh: 3, kw: 3, sh: 1, sw: 1 }, &[x])?;
    let b4 = b.conv(p4, 1, 1, ch)?;
    b.add(Op::Concat, &[b1, b2, b3, b4])
}

pub fn inception_layer_spec(input: Shape, ch: usize) -> Result<Graph> {
    let mut b = GraphBuilder::new(input);
    b.block("inception");
    inception_layer(&mut b, 0, ch)?;
    Ok(b.finish())
}

fn pool2() -> Op {
    Op::MaxPool { kh: 2, kw: 2, sh: 2, sw: 2 }
}

/// Inc - BN - Inc - BN - ReLU - MP[2×2] - Dropout.
pub fn dob_inc_block(b: &mut GraphBuilder, x: usize, ch: usize, dropout: f32) -> Result<usize> {
    let x = inception_layer(b, x, ch)?;
    let x = b.bn(x)?;
    let x = inception_layer(b, x, ch)?;
    let x = b.bn(x)?;
    b.chain(x, [Op::Relu, pool2(), Op::Dropout { rate: dropout }])
}

pub fn dob_inc_block_spec(input: Shape, ch: usize) -> Result<Graph> {
    let mut b = GraphBuilder::new(input);
    b.block("dob_inc");
    dob_inc_block(&mut b, 0, ch, 0.1)?;
    Ok(b.finish())
}

/// Residual-inception block. Shortcut: `[1×1](ch)`-BN-ReLU-AvgPool[3×3]-RN.
/// Main: `[1×1](ch/2)`-BN-ReLU feeding `[K×1]`, `[K×K]`, `[1×K]` convs to
/// `ch`, each followed by AvgPool[K×K]. All four are summed, then
/// ReLU-MP[2×2]-Dropout-RN. Every average pool uses the same stride so the
/// four summands align.
pub fn inc_res_block(b: &mut GraphBuilder, x: usize, ch: usize, k: usize) -> Result<usize> {
    if ch < 2 || ch % 2 != 0 {
        return invalid_config(format!("residual-inception width {ch} must be even"));
    }
    if k < 3 || k % 2 == 0 {
        return invalid_config(format!("kernel size K={k} must be odd and >= 3"));
    }
    let s = INC_RES_POOL_STRIDE;
    let rn = Op::ResidualNorm { lambda: RN_LAMBDA };
    let sc = b.conv(x, 1, 1, ch)?;
    let sc = b.bn(sc)?;
    let sc = b.chain(sc, [Op::Relu, Op::AvgPool { kh: 3, kw: 3, sh: s, sw: s }, rn.clone()])?;

    let stem = b.conv(x, 1, 1, ch / 2)?;
    let stem = b.bn(stem)?;
    let stem = b.add(Op::Relu, &[stem])?;
    let pool = Op::AvgPool { kh: k, kw: k, sh: s, sw: s };
    let a = b.conv(stem, k, 1, ch)?;
    let a = b.add(pool.clone(), &[a])?;
    let m = b.conv_tagged(stem, k, k, ch, Some(TAG_INC_RES_KXK))?;
    let m = b.add(pool.clone(), &[m])?;
    let c = b.conv(stem, 1, k, ch)?;
    let c = b.add(pool, &[c])?;

    let sum = b.add(Op::Add, &[sc, a, m, c])?;
    b.chain(sum, [Op::Relu, pool2(), Op::Dropout { rate: 0.1 }, rn])
}

pub fn inc_res_block_spec(input: Shape, ch: usize, k: usize) -> Result<Graph> {
    let mut b = GraphBuilder::new(input);
    b.block("inc_res");
    inc_res_block(&mut b, 0, ch, k)?;
    Ok(b.finish())
}

/// Three pooled views concatenated: mean over channels, max over frames,
/// mean over bands, each flattened. Then `FC(hidden)-ReLU-Dr(0.2)` when a
/// hidden width is given, and `FC(C)-Softmax`.
pub fn multi_pooling_head(b: &mut GraphBuilder, x: usize, hidden: Option<usize>, classes: usize) -> Result<usize> {
    let a = b.chain(x, [Op::ChannelAvgPool, Op::Flatten])?;
    let t = b.chain(x, [Op::GlobalMaxPoolTime, Op::Flatten])?;
    let f = b.chain(x, [Op::GlobalAvgPoolFreq, Op::Flatten])?;
    let mut h = b.add(Op::Concat, &[a, t, f])?;
    if let Some(w) = hidden {
        h = b.dense(h, w)?;
        h = b.chain(h, [Op::Relu, Op::Dropout { rate: 0.2 }])?;
    }
    let o = b.dense(h, classes)?;
    b.add(Op::Softmax, &[o])
}

pub fn multi_pooling_head_spec(trunk: Shape, hidden: Option<usize>, classes: usize) -> Result<Graph> {
    let mut b = GraphBuilder::new(trunk);
    b.block("head");
    multi_pooling_head(&mut b, 0, hidden, classes)?;
    Ok(b.finish())
}

fn build_baseline(r: &ArchRecipe) -> Result<Graph> {
    let mut b = GraphBuilder::new(r.input);
    let rates = [0.1, 0.15, 0.2, 0.25];
    let mut x = 0;
    for (i, (name, rate)) in BASELINE_BLOCKS.iter().zip(rates).enumerate() {
        b.block(name);
        x = inception_layer(&mut b, x, r.width(name)?)?;
        x = b.bn(x)?;
        x = b.add(Op::Relu, &[x])?;
        x = if i < 3 { b.add(pool2(), &[x])? } else { b.add(Op::GlobalMaxPool, &[x])? };
        x = b.add(Op::Dropout { rate }, &[x])?;
    }
    b.block("head");
    if let Some(w) = r.fc_hidden() {
        x = b.dense(x, w)?;
        x = b.bn(x)?;
        x = b.chain(x, [Op::Relu, Op::Dropout { rate: 0.25 }])?;
    }
    let o = b.dense(x, r.classes)?;
    b.add(Op::Softmax, &[o])?;
    Ok(b.finish())
}

fn build_nri(r: &ArchRecipe) -> Result<Graph> {
    if r.kernels.len() != 3 {
        return invalid_config("NRI recipe needs one kernel size per residual-inception block");
    }
    let mut b = GraphBuilder::new(r.input);
    b.block(NRI_BLOCKS[0]);
    let mut x = dob_inc_block(&mut b, 0, r.width(NRI_BLOCKS[0])?, 0.1)?;
    for (name, &k) in NRI_BLOCKS[1..].iter().zip(&r.kernels) {
        b.block(name);
        x = inc_res_block(&mut b, x, r.width(name)?, k)?;
    }
    b.block("head");
    multi_pooling_head(&mut b, x, r.fc_hidden(), r.classes)?;
    Ok(b.finish())
}

/// `FC(1024)-BN-ReLU-Dr(0.25) → FC(C)-Softmax` over an embedding vector.
fn build_downstream(r: &ArchRecipe) -> Result<Graph> {
    let mut b = GraphBuilder::new(r.input);
    b.block("head");
    let mut x = 0;
    if let Some(w) = r.fc_hidden() {
        x = b.dense(x, w)?;
        x = b.bn(x)?;
        x = b.chain(x, [Op::Relu, Op::Dropout { rate: 0.25 }])?;
    }
    let o = b.dense(x, r.classes)?;
    b.add(Op::Softmax, &[o])?;
    Ok(b.finish())
}

pub fn baseline_network_spec(classes: usize) -> Result<NetworkSpec> {
    ArchRecipe::baseline(classes).build()
}

pub fn nri_network_spec(classes: usize) -> Result<NetworkSpec> {
    ArchRecipe::nri(classes).build()
}

pub fn downstream_mlp_spec(embedding_len: usize, classes: usize) -> Result<NetworkSpec> {
    if embedding_len == 0 {
        return invalid_config("embedding length must be positive");
    }
    ArchRecipe::downstream(embedding_len, classes).build()
}

#[cfg(test)]
mod tests {
    use super::*;

    // closed-form counts written out independently of the builders
    fn conv(kh: usize, kw: usize, ci: usize, co: usize) -> usize {
        kh * kw * ci * co + co
    }

    fn inc(ci: usize, ch: usize) -> usize {
        let r = ch / 4;
        conv(1, 1, ci, ch) + conv(1, 1, ci, r) + conv(3, 3, r, ch) + conv(1, 1, ci, r) + conv(1, 4, r, ch) + conv(1, 1, ci, ch)
    }

    #[test]
    fn inception_channel_bookkeeping() {
        let g = inception_layer_spec(Shape::new(16, 16, 3), 128).unwrap();
        assert_eq!(g.output_shape(), Shape::new(16, 16, 512));
        let convs: Vec<_> = g.nodes.iter().filter(|n| matches!(n.op, Op::Conv2d { .. })).collect();
        assert_eq!(convs.len(), 6);
        assert_eq!(g.param_count(), inc(3, 128));
        assert!(inception_layer_spec(Shape::new(4, 4, 3), 30).is_err());
    }

    #[test]
    fn inception_branch_widths() {
        let g = inception_layer_spec(Shape::new(8, 8, 3), 32).unwrap();
        let concat = &g.nodes[g.output()];
        let widths: Vec<usize> = concat.inputs.iter().map(|&i| g.nodes[i].shape.c).collect();
        assert_eq!(widths, vec![32, 32, 32, 32]);
    }

    #[test]
    fn baseline_count_closed_form() {
        let s = baseline_network_spec(10).unwrap();
        let mut expect = 0;
        let mut ci = 3;
        for ch in [128, 128, 256, 256] {
            expect += inc(ci, ch) + 2 * 4 * ch;
            ci = 4 * ch;
        }
        expect += conv(1, 1, ci, 1024) + 2 * 1024 + conv(1, 1, 1024, 10);
        assert_eq!(s.param_count(), expect);
        assert_eq!(expect, 2_751_818);
    }

    #[test]
    fn baseline_gmp_is_frame_independent() {
        for w in [100, 256, 313] {
            let s = ArchRecipe::baseline(10).with_input(Shape::new(128, w, 3)).build().unwrap();
            let gmp = s.graph.nodes.iter().find(|n| n.op == Op::GlobalMaxPool).unwrap();
            assert_eq!(gmp.shape, Shape::vector(1024));
        }
    }

    #[test]
    fn inc_res_merge_shapes_and_count() {
        let g = inc_res_block_spec(Shape::new(64, 128, 512), 128, 3).unwrap();
        let add = g.nodes.iter().find(|n| n.op == Op::Add).unwrap();
        assert_eq!(add.inputs.len(), 4);
        assert!(add.inputs.iter().all(|&i| g.nodes[i].shape == Shape::new(22, 43, 128)));
        let expect = conv(1, 1, 512, 128) + 256 + conv(1, 1, 512, 64) + 128 + conv(3, 1, 64, 128) + conv(3, 3, 64, 128) + conv(1, 3, 64, 128);
        assert_eq!(g.param_count(), expect);
        assert!(inc_res_block_spec(Shape::new(8, 8, 4), 7, 3).is_err());
        assert!(inc_res_block_spec(Shape::new(8, 8, 4), 8, 4).is_err());
    }

    #[test]
    fn nri_trunk_collapses_to_one_cell() {
        for w in [256, 313] {
            let s = ArchRecipe::nri(10).with_input(Shape::new(128, w, 3)).build().unwrap();
            let head_in = s.graph.nodes.iter().find(|n| n.op == Op::ChannelAvgPool).unwrap().inputs[0];
            assert_eq!(s.graph.nodes[head_in].shape, Shape::new(1, 1, 256));
        }
    }

    #[test]
    fn head_concat_length_and_count() {
        let g = multi_pooling_head_spec(Shape::new(2, 3, 8), Some(1024), 10).unwrap();
        let concat = g.nodes.iter().find(|n| n.op == Op::Concat).unwrap();
        // 2*3 channel means + 2*8 time maxima + 3*8 band means
        assert_eq!(concat.shape.c, 6 + 16 + 24);
        assert_eq!(g.param_count(), 46 * 1024 + 1024 + 1024 * 10 + 10);
    }

    #[test]
    fn downstream_count_closed_form() {
        let s = downstream_mlp_spec(1280, 10).unwrap();
        assert_eq!(s.param_count(), 1024 * (1280 + 1) + 10 * (1024 + 1) + 2 * 1024);
    }

    #[test]
    fn manifest_lists_blocks_in_order() {
        let s = nri_network_spec(10).unwrap();
        let m = s.manifest();
        let names: Vec<&str> = m["blocks"].as_array().unwrap().iter().map(|b| b["block"].as_str().unwrap()).collect();
        assert_eq!(names, vec!["input", "dob_inc", "inc_res1", "inc_res2", "inc_res3", "head"]);
        let total: u64 = m["blocks"].as_array().unwrap().iter().map(|b| b["params"].as_u64().unwrap()).sum();
        assert_eq!(total as usize, s.param_count());
    }

    #[test]
    fn too_few_classes() {
        assert!(baseline_network_spec(1).is_err());
    }
}
