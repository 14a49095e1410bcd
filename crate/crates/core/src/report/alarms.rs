use super::taxonomy::{AlarmLevel, EventTaxonomy, OntologyGroup, YellowGroup};
use crate::error::{invalid_input, Result};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Histogram key for detected events missing from the taxonomy.
pub const UNMAPPED_GROUP: &str = "Unmapped";

/// Multi-label event scores, one row per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProbabilities {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f32>>,
}

impl EventProbabilities {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f32>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return invalid_input(format!("segment {i} has {} scores for {} events", r.len(), names.len()));
            }
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return invalid_input(format!("segment {i} has scores outside [0, 1]"));
            }
        }
        Ok(EventProbabilities { names, rows })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let (names, rows) = crate::sed::read_event_scores_csv(path)?;
        Self::new(names, rows.into_iter().map(|(_, r)| r).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<(String, Vec<f32>)> = self.rows.iter().enumerate().map(|(i, r)| (format!("seg{i:03}"), r.clone())).collect();
        crate::sed::write_event_scores_csv(path, &self.names, &rows)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AlarmCounts {
    pub red: usize,
    pub yellow: usize,
    pub green: usize,
    pub yellow_groups: BTreeMap<String, usize>,
}

impl AlarmCounts {
    pub fn total(&self) -> usize {
        self.red + self.yellow + self.green
    }
}

/// Percentages of detected events per level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlarmRatios {
    pub red: f64,
    pub yellow: f64,
    pub green: f64,
}

struct Resolved {
    level: AlarmLevel,
    yellow: Option<YellowGroup>,
    group: Option<OntologyGroup>,
}

fn resolve(names: &[String], tax: &EventTaxonomy) -> Vec<Resolved> {
    let mut missing = BTreeSet::new();
    let out = names
        .iter()
        .map(|n| match tax.get(n) {
            Some(e) => Resolved { level: e.level, yellow: e.yellow_group, group: Some(e.group) },
            None => {
                missing.insert(n.as_str());
                Resolved { level: AlarmLevel::Green, yellow: None, group: None }
            }
        })
        .collect();
    if !missing.is_empty() {
        log::warn!("{} event names are not in the taxonomy and count as GREEN: {:?}", missing.len(), missing);
    }
    out
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return invalid_input(format!("threshold {threshold} must lie in (0, 1)"));
    }
    Ok(())
}

/// An event counts in a segment when its score reaches the threshold.
pub fn alarm_counts(ev: &EventProbabilities, tax: &EventTaxonomy, threshold: f64) -> Result<Vec<AlarmCounts>> {
    check_threshold(threshold)?;
    let res = resolve(&ev.names, tax);
    Ok(ev
        .rows
        .iter()
        .map(|row| {
            let mut c = AlarmCounts::default();
            for g in YellowGroup::ALL {
                c.yellow_groups.insert(g.as_str().to_string(), 0);
            }
            for (r, &s) in res.iter().zip(row) {
                if (s as f64) < threshold {
                    continue;
                }
                match r.level {
                    AlarmLevel::Red => c.red += 1,
                    AlarmLevel::Green => c.green += 1,
                    AlarmLevel::Yellow => {
                        c.yellow += 1;
                        if let Some(g) = r.yellow {
                            *c.yellow_groups.entry(g.as_str().to_string()).or_default() += 1;
                        }
                    }
                }
            }
            c
        })
        .collect())
}

/// A segment with no detections reads as 100% GREEN.
pub fn alarm_ratios(counts: &[AlarmCounts]) -> Vec<AlarmRatios> {
    counts
        .iter()
        .map(|c| {
            let t = c.total();
            if t == 0 {
                return AlarmRatios { red: 0.0, yellow: 0.0, green: 100.0 };
            }
            let p = |n: usize| 100.0 * n as f64 / t as f64;
            AlarmRatios { red: p(c.red), yellow: p(c.yellow), green: p(c.green) }
        })
        .collect()
}

/// Detected-event counts per ontology group; groups with no detections are
/// omitted.
pub fn ontology_distribution(ev: &EventProbabilities, tax: &EventTaxonomy, threshold: f64) -> Result<Vec<BTreeMap<String, usize>>> {
    check_threshold(threshold)?;
    let res = resolve(&ev.names, tax);
    Ok(ev
        .rows
        .iter()
        .map(|row| {
            let mut h = BTreeMap::new();
            for (r, &s) in res.iter().zip(row) {
                if (s as f64) >= threshold {
                    let key = r.group.map(|g| g.as_str()).unwrap_or(UNMAPPED_GROUP);
                    *h.entry(key.to_string()).or_default() += 1;
                }
            }
            h
        })
        .collect())
}
