use crate::error::{invalid_config, Result};
use crate::netspec::NetworkSpec;
use serde::Serialize;
use std::collections::BTreeMap;

/// Memory budgets, binary units.
pub const BUDGET_20MB: u64 = 20 * 1024 * 1024;
pub const BUDGET_128KB: u64 = 128 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityReport {
    pub trainable_params: u64,
    pub bytes_per_param: u32,
    pub memory_bytes: u64,
}

impl ComplexityReport {
    pub fn from_params(trainable_params: u64, bits: u32) -> Result<Self> {
        if bits != 32 && bits != 8 {
            return invalid_config(format!("bits must be 32 or 8, got {bits}"));
        }
        let bytes_per_param = bits / 8;
        Ok(ComplexityReport {
            trainable_params,
            bytes_per_param,
            memory_bytes: trainable_params * bytes_per_param as u64,
        })
    }

    pub fn params_m(&self) -> f64 {
        self.trainable_params as f64 / 1e6
    }

    pub fn memory_mib(&self) -> f64 {
        self.memory_bytes as f64 / (1024.0 * 1024.0)
    }

    pub fn memory_kib(&self) -> f64 {
        self.memory_bytes as f64 / 1024.0
    }

    /// Always derived from `memory_bytes`.
    pub fn verdicts(&self) -> BTreeMap<&'static str, bool> {
        [("20MB", self.memory_bytes <= BUDGET_20MB), ("128KB", self.memory_bytes <= BUDGET_128KB)]
            .into_iter()
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out<'a> {
            trainable_params: u64,
            bytes_per_param: u32,
            memory_bytes: u64,
            memory_mib: f64,
            budget_verdicts: BTreeMap<&'a str, &'static str>,
        }
        let verdicts = self
            .verdicts()
            .into_iter()
            .map(|(k, v)| (k, if v { "pass" } else { "fail" }))
            .collect();
        serde_json::to_value(Out {
            trainable_params: self.trainable_params,
            bytes_per_param: self.bytes_per_param,
            memory_bytes: self.memory_bytes,
            memory_mib: self.memory_mib(),
            budget_verdicts: verdicts,
        })
        .unwrap_or_default()
    }
}

pub fn complexity_report(spec: &NetworkSpec, bits: u32) -> Result<ComplexityReport> {
    ComplexityReport::from_params(spec.param_count() as u64, bits)
}

/// Sum over ensemble members plus any externally counted parameters (an
/// up-stream model, say).
pub fn ensemble_report(specs: &[&NetworkSpec], extra_params: u64, bits: u32) -> Result<ComplexityReport> {
    let p: u64 = specs.iter().map(|s| s.param_count() as u64).sum::<u64>() + extra_params;
    ComplexityReport::from_params(p, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_passes_both_gates() {
        let r = ensemble_report(&[], 0, 32).unwrap();
        assert_eq!(r.trainable_params, 0);
        assert!(r.verdicts().values().all(|&v| v));
    }

    #[test]
    fn memory_is_params_times_width() {
        let r = ComplexityReport::from_params(1000, 32).unwrap();
        assert_eq!(r.memory_bytes, 4000);
        let q = ComplexityReport::from_params(1000, 8).unwrap();
        assert_eq!(q.memory_bytes * 4, r.memory_bytes);
        assert!(ComplexityReport::from_params(1, 16).is_err());
    }

    #[test]
    fn gate_edges() {
        let at = ComplexityReport::from_params(BUDGET_128KB, 8).unwrap();
        assert!(at.verdicts()["128KB"]);
        let over = ComplexityReport::from_params(BUDGET_128KB + 1, 8).unwrap();
        assert!(!over.verdicts()["128KB"]);
        assert_eq!(over.to_json()["budget_verdicts"]["128KB"], "fail");
    }
}
