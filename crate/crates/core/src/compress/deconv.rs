use crate::error::{invalid_config, Result};
use crate::netspec::{CdScope, Graph, NetworkSpec, Node, Op, TAG_CD, TAG_INC_RES_KXK};
use crate::tensor::Shape;

/// Replace every in-scope `[K×K]` conv (K > 1) by four group convs over
/// channel quarters with kernels `[1×1]`, `[1×K]`, `[K×1]`, `[K×K]`,
/// concatenated. Rewritten convs are tagged so a second pass leaves them
/// alone.
pub fn apply_channel_deconvolution(spec: &NetworkSpec) -> Result<NetworkSpec> {
    apply_channel_deconvolution_scoped(spec, spec.recipe.cd.unwrap_or(CdScope::IncResKernels))
}

fn in_scope(node: &Node, scope: CdScope) -> Option<usize> {
    match node.op {
        Op::Conv2d { kh, kw, .. } if kh == kw && kh > 1 && node.tag.as_deref() != Some(TAG_CD) => match scope {
            CdScope::AllSquare => Some(kh),
            CdScope::IncResKernels if node.tag.as_deref() == Some(TAG_INC_RES_KXK) => Some(kh),
            CdScope::IncResKernels => None,
        },
        _ => None,
    }
}

pub fn apply_channel_deconvolution_scoped(spec: &NetworkSpec, scope: CdScope) -> Result<NetworkSpec> {
    let old = &spec.graph.nodes;
    let mut nodes: Vec<Node> = Vec::with_capacity(old.len());
    let mut map = vec![0usize; old.len()];
    for (i, n) in old.iter().enumerate() {
        let inputs: Vec<usize> = n.inputs.iter().map(|&j| map[j]).collect();
        let Some(k) = in_scope(n, scope) else {
            nodes.push(Node { inputs, ..n.clone() });
            map[i] = nodes.len() - 1;
            continue;
        };
        let Op::Conv2d { cin, cout, .. } = n.op else { unreachable!() };
        if cin % 4 != 0 || cout % 4 != 0 {
            return invalid_config(format!(
                "channel deconvolution of '{}' needs channels divisible by 4 (in {cin}, out {cout})",
                n.name
            ));
        }
        let (qi, qo) = (cin / 4, cout / 4);
        let src = inputs[0];
        let s = n.shape;
        let mut parts = Vec::with_capacity(4);
        for (q, (kh, kw)) in [(1, 1), (1, k), (k, 1), (k, k)].into_iter().enumerate() {
            nodes.push(Node {
                name: format!("{}/cd{q}_slice", n.name),
                op: Op::ChannelSlice { start: q * qi, len: qi },
                inputs: vec![src],
                shape: Shape::new(s.h, s.w, qi),
                block: n.block.clone(),
                tag: Some(TAG_CD.into()),
            });
            let slice = nodes.len() - 1;
            nodes.push(Node {
                name: format!("{}/cd{q}_conv{kh}x{kw}", n.name),
                op: Op::Conv2d { kh, kw, cin: qi, cout: qo },
                inputs: vec![slice],
                shape: Shape::new(s.h, s.w, qo),
                block: n.block.clone(),
                tag: Some(TAG_CD.into()),
            });
            parts.push(nodes.len() - 1);
        }
        nodes.push(Node {
            name: format!("{}/cd_concat", n.name),
            op: Op::Concat,
            inputs: parts,
            shape: s,
            block: n.block.clone(),
            tag: Some(TAG_CD.into()),
        });
        map[i] = nodes.len() - 1;
    }
    let graph = Graph { nodes };
    graph.validate()?;
    let mut recipe = spec.recipe.clone();
    recipe.cd = Some(scope);
    Ok(NetworkSpec {
        name: spec.name.clone(),
        classes: spec.classes,
        recipe,
        graph,
    })
}

/// Closed-form parameter ratio of the rewrite for one `[K×K]` conv with
/// `cin = cout` and biases ignored: `(1 + K + K + K²) / (16 K²)`.
pub fn cd_weight_ratio(k: usize) -> f64 {
    let k = k as f64;
    (k + 1.0) * (k + 1.0) / (16.0 * k * k)
}
