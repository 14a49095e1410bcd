use super::{predict_set, train, LabeledSet, TrainConfig};
use crate::augment::AugmentPolicy;
use crate::error::{invalid_input, Result};
use crate::netspec::NetworkSpec;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

/// Device tags outside both sets are reported under this key.
pub const OTHER_DEVICE: &str = "other";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceRoles {
    pub seen: BTreeSet<String>,
    pub unseen: BTreeSet<String>,
}

impl DeviceRoles {
    fn tag(&self, d: &str) -> (String, bool) {
        if self.seen.contains(d) {
            (d.to_string(), true)
        } else if self.unseen.contains(d) {
            (d.to_string(), false)
        } else {
            (OTHER_DEVICE.to_string(), false)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceAccuracy {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub seen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBreakdown {
    pub per_device: BTreeMap<String, DeviceAccuracy>,
    /// Unweighted mean over the device tags present.
    pub average: f64,
    /// Fraction of all clips classified correctly.
    pub overall: f64,
}

impl EvalBreakdown {
    pub fn from_predictions(predicted: &[usize], truth: &[usize], devices: &[String], roles: &DeviceRoles) -> Result<Self> {
        if predicted.len() != truth.len() || truth.len() != devices.len() {
            return invalid_input("predictions, labels and devices differ in length");
        }
        if truth.is_empty() {
            return invalid_input("cannot evaluate an empty split");
        }
        let mut per_device: BTreeMap<String, DeviceAccuracy> = BTreeMap::new();
        for ((p, t), d) in predicted.iter().zip(truth).zip(devices) {
            let (tag, seen) = roles.tag(d);
            let e = per_device.entry(tag).or_insert(DeviceAccuracy { accuracy: 0.0, correct: 0, total: 0, seen });
            e.total += 1;
            e.correct += (p == t) as usize;
        }
        for e in per_device.values_mut() {
            e.accuracy = e.correct as f64 / e.total as f64;
        }
        let average = per_device.values().map(|e| e.accuracy).sum::<f64>() / per_device.len() as f64;
        let overall = predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
        Ok(EvalBreakdown { per_device, average, overall })
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("device\tseen\tclips\taccuracy(%)\n");
        for (d, e) in &self.per_device {
            let _ = writeln!(s, "{d}\t{}\t{}\t{:.2}", if e.seen { "seen" } else { "unseen" }, e.total, 100.0 * e.accuracy);
        }
        let _ = writeln!(s, "average\t-\t-\t{:.2}", 100.0 * self.average);
        let _ = writeln!(s, "overall\t-\t{}\t{:.2}", self.per_device.values().map(|e| e.total).sum::<usize>(), 100.0 * self.overall);
        s
    }
}

pub fn evaluate_per_device(spec: &NetworkSpec, w: &crate::engine::Weights, set: &LabeledSet, roles: &DeviceRoles) -> Result<EvalBreakdown> {
    let probs = predict_set(spec, w, set, &spec.name, 32)?;
    EvalBreakdown::from_predictions(&probs.labels(), &set.labels, &set.devices, roles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub runs: Vec<EvalBreakdown>,
    pub mean: BTreeMap<String, f64>,
    /// Sample standard deviation; zero for a single run.
    pub std: BTreeMap<String, f64>,
    pub mean_overall: f64,
    pub std_overall: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn summarize(runs: Vec<EvalBreakdown>) -> Result<RepeatSummary> {
    if runs.is_empty() {
        return invalid_input("no runs to summarize");
    }
    let tags: BTreeSet<String> = runs.iter().flat_map(|r| r.per_device.keys().cloned()).collect();
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    for t in tags.iter().map(String::as_str).chain(["average"]) {
        let v: Vec<f64> = runs
            .iter()
            .filter_map(|r| if t == "average" { Some(r.average) } else { r.per_device.get(t).map(|e| e.accuracy) })
            .collect();
        let (m, s) = mean_std(&v);
        mean.insert(t.to_string(), m);
        std.insert(t.to_string(), s);
    }
    let (mean_overall, std_overall) = mean_std(&runs.iter().map(|r| r.overall).collect::<Vec<_>>());
    Ok(RepeatSummary { runs, mean, std, mean_overall, std_overall })
}

/// Train and evaluate `config.repeats` times with seeds `seed, seed+1, ...`
/// on fixed splits.
pub fn run_repeats(
    spec: &NetworkSpec,
    train_set: &LabeledSet,
    eval_set: &LabeledSet,
    config: &TrainConfig,
    policy: &AugmentPolicy,
    roles: &DeviceRoles,
) -> Result<RepeatSummary> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.repeats);
    for r in 0..config.repeats {
        let cfg = TrainConfig { seed: config.seed + r as u64, ..config.clone() };
        let out = train(spec, train_set, &cfg, policy)?;
        runs.push(evaluate_per_device(spec, &out.weights, eval_set, roles)?);
    }
    summarize(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> DeviceRoles {
        DeviceRoles { seen: ["a", "b"].iter().map(|s| s.to_string()).collect(), unseen: ["s4".to_string()].into() }
    }

    fn devs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_classifier() {
        let t = vec![0, 1, 2, 0];
        let b = EvalBreakdown::from_predictions(&t, &t, &devs(&["a", "b", "s4", "a"]), &roles()).unwrap();
        assert!(b.per_device.values().all(|e| e.accuracy == 1.0));
        assert_eq!(b.average, 1.0);
        assert!(!b.per_device["s4"].seen);
        assert!(b.per_device["a"].seen);
    }

    #[test]
    fn unknown_tags_go_to_other() {
        let b = EvalBreakdown::from_predictions(&[0, 1], &[0, 0], &devs(&["a", "zz"]), &roles()).unwrap();
        assert_eq!(b.per_device[OTHER_DEVICE].total, 1);
        assert_eq!(b.per_device.values().map(|e| e.total).sum::<usize>(), 2);
    }

    #[test]
    fn average_is_unweighted_mean() {
        let b = EvalBreakdown::from_predictions(&[0, 0, 0, 1], &[0, 0, 0, 0], &devs(&["a", "a", "a", "b"]), &roles()).unwrap();
        assert!((b.average - 0.5).abs() < 1e-12);
        assert!((b.overall - 0.75).abs() < 1e-12);
    }

    #[test]
    fn chance_level_single_class_predictor() {
        let truth: Vec<usize> = (0..1000).map(|i| i % 10).collect();
        let d: Vec<String> = (0..1000).map(|i| if i < 500 { "a".into() } else { "b".into() }).collect();
        let b = EvalBreakdown::from_predictions(&vec![3; 1000], &truth, &d, &roles()).unwrap();
        for e in b.per_device.values() {
            assert!((e.accuracy - 0.1).abs() < 0.03);
        }
    }

    #[test]
    fn summary_statistics() {
        let mk = |acc_a: usize| EvalBreakdown::from_predictions(&[0, 0, 0, 0], &[0, 0, if acc_a > 0 { 0 } else { 1 }, 1], &devs(&["a", "a", "b", "b"]), &roles()).unwrap();
        let s1 = summarize(vec![mk(1)]).unwrap();
        assert_eq!(s1.mean["average"], mk(1).average);
        assert_eq!(s1.std["a"], 0.0);
        let s = summarize(vec![mk(1), mk(0)]).unwrap();
        let r = summarize(vec![mk(0), mk(1)]).unwrap();
        assert_eq!(s.mean, r.mean);
        assert!((s.mean["b"] - 0.25).abs() < 1e-12);
        assert!((s.std["b"] - (0.125f64).sqrt()).abs() < 1e-12);
    }
}
