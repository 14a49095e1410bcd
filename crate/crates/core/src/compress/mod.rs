//! Compression transforms over [`NetworkSpec`]s: channel reduction,
//! channel deconvolution, weight quantization, and complexity accounting.

mod complexity;
mod deconv;
mod quant;

pub use complexity::*;
pub use deconv::*;
pub use quant::*;

use crate::error::{invalid_config, Result};
use crate::netspec::{ArchRecipe, CdScope, NetworkSpec, FC_HIDDEN, NRI_BLOCKS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Named model variants. `Rd*` and `Kb120` are NRI rewrites with reduced
/// channels and channel deconvolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Nri,
    Rd128,
    Rd64,
    Rd32,
    Kb120,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::Baseline, Variant::Nri, Variant::Rd128, Variant::Rd64, Variant::Rd32, Variant::Kb120];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Nri => "nri",
            Variant::Rd128 => "rd128",
            Variant::Rd64 => "rd64",
            Variant::Rd32 => "rd32",
            Variant::Kb120 => "kb120",
        }
    }

    /// Per-block widths `[dob_inc, inc_res1, inc_res2, inc_res3]` and the
    /// hidden dense width (0 = removed) for the reduced variants.
    pub fn overrides(&self) -> Option<BTreeMap<String, usize>> {
        let (trunk, fc) = match self {
            Variant::Rd128 => ([128, 128, 128, 128], 1024),
            Variant::Rd64 => ([64, 64, 64, 64], 1024),
            Variant::Rd32 => ([32, 32, 32, 32], 1024),
            Variant::Kb120 => ([16, 32, 32, 32], 0),
            Variant::Baseline | Variant::Nri => return None,
        };
        Some(
            NRI_BLOCKS
                .iter()
                .zip(trunk)
                .map(|(k, v)| (k.to_string(), v))
                .chain([(FC_HIDDEN.to_string(), fc)])
                .collect(),
        )
    }

    pub fn recipe(&self, classes: usize) -> Result<ArchRecipe> {
        let base = match self {
            Variant::Baseline => return Ok(ArchRecipe::baseline(classes)),
            _ => ArchRecipe::nri(classes),
        };
        match self.overrides() {
            None => Ok(base),
            Some(o) => {
                let mut r = reduced_recipe(&base, &o)?;
                r.cd = Some(CdScope::IncResKernels);
                r.name = self.as_str().into();
                Ok(r)
            }
        }
    }

    pub fn build(&self, classes: usize) -> Result<NetworkSpec> {
        self.recipe(classes)?.build()
    }
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::InvalidConfig(format!("unknown variant '{s}'")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionConfig {
    pub variant: Variant,
    pub channel_overrides: BTreeMap<String, usize>,
    pub cd_enabled: bool,
    pub quantize: bool,
    pub bits: u32,
}

impl CompressionConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let quantize = variant == Variant::Kb120;
        CompressionConfig {
            variant,
            channel_overrides: variant.overrides().unwrap_or_default(),
            cd_enabled: variant.overrides().is_some(),
            quantize,
            bits: if quantize { 8 } else { 32 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits != 32 && self.bits != 8 {
            return invalid_config(format!("unsupported bit width {}", self.bits));
        }
        if self.quantize != (self.bits == 8) {
            return invalid_config("quantize and bits=8 must agree");
        }
        if self.variant == Variant::Kb120 {
            if !self.quantize {
                return invalid_config("the kb120 variant is only defined with quantization");
            }
            if self.channel_overrides.get(FC_HIDDEN).copied().unwrap_or(0) != 0 {
                return invalid_config("the kb120 variant has no hidden dense layer");
            }
        }
        Ok(())
    }

    pub fn build(&self, classes: usize) -> Result<NetworkSpec> {
        self.validate()?;
        let base = self.variant.recipe(classes)?;
        let mut r = if self.channel_overrides.is_empty() {
            base
        } else {
            reduced_recipe(&base, &self.channel_overrides)?
        };
        r.cd = if self.cd_enabled { Some(r.cd.unwrap_or(CdScope::IncResKernels)) } else { None };
        r.build()
    }
}

fn reduced_recipe(base: &ArchRecipe, overrides: &BTreeMap<String, usize>) -> Result<ArchRecipe> {
    let trunk = base.trunk_blocks();
    for b in trunk {
        if !overrides.contains_key(*b) {
            return invalid_config(format!("channel overrides do not cover block '{b}'"));
        }
    }
    for k in overrides.keys() {
        if !trunk.contains(&k.as_str()) && k != FC_HIDDEN {
            return invalid_config(format!("override for unknown block '{k}'"));
        }
    }
    let mut r = base.clone();
    for (k, &v) in overrides {
        if v == 0 && k != FC_HIDDEN {
            return invalid_config(format!("block '{k}' cannot have zero channels"));
        }
        r.channels.insert(k.clone(), v);
    }
    Ok(r)
}

/// Rebuild `spec` with new per-block widths. If the spec had channel
/// deconvolution applied, it is applied again to the rebuilt graph.
pub fn apply_channel_reduction(spec: &NetworkSpec, overrides: &BTreeMap<String, usize>) -> Result<NetworkSpec> {
    let r = reduced_recipe(&spec.recipe, overrides)?;
    let out = r.build()?;
    if out.classes != spec.classes || out.input_shape() != spec.input_shape() {
        return invalid_config("channel reduction changed the network interface");
    }
    Ok(out)
}
