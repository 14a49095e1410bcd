//! Tab-separated manifest:
//!
//! ```text
//! #version	1
//! #classes	tonal,chirp,noise      (optional; otherwise sorted labels)
//! #unseen	s4                     (optional; devices that may only be in eval)
//! filename	scene_label	device	split
//! train/clip_0000.wav	tonal	a	train
//! ```

use crate::error::{Error, Result};
use crate::train::DeviceRoles;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const MANIFEST_VERSION: u32 = 1;
const HEADER: [&str; 4] = ["filename", "scene_label", "device", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "eval" | "evaluate" | "test" => Ok(Split::Eval),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the dataset root.
    pub filename: String,
    pub scene_label: String,
    pub device: String,
    pub split: Split,
}

impl ManifestEntry {
    /// File stem, unique within a manifest.
    pub fn clip_id(&self) -> String {
        Path::new(&self.filename)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.filename.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub classes: Vec<String>,
    pub unseen: BTreeSet<String>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, classes: Vec<String>, unseen: BTreeSet<String>) -> Result<Self> {
        let m = DatasetManifest { entries, classes, unseen };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let classes: HashSet<&str> = self.classes.iter().map(String::as_str).collect();
        if classes.len() != self.classes.len() {
            return Err(Error::Validation("class list has duplicates".into()));
        }
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !classes.contains(e.scene_label.as_str()) {
                return Err(Error::Validation(format!("'{}' has unknown label '{}'", e.filename, e.scene_label)));
            }
            if !ids.insert(e.clip_id()) {
                return Err(Error::Validation(format!("duplicate clip id '{}'", e.clip_id())));
            }
            if e.split == Split::Train && self.unseen.contains(&e.device) {
                return Err(Error::Validation(format!(
                    "'{}' uses unseen device '{}' in the train split",
                    e.filename, e.device
                )));
            }
        }
        for s in [Split::Train, Split::Eval] {
            if !self.entries.iter().any(|e| e.split == s) {
                return Err(Error::Validation(format!("{} split is empty", s.as_str())));
            }
        }
        Ok(())
    }

    pub fn split(&self, s: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == s)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Seen devices are those present in the train split.
    pub fn roles(&self) -> DeviceRoles {
        let seen: BTreeSet<String> = self.split(Split::Train).map(|e| e.device.clone()).collect();
        let unseen = self
            .entries
            .iter()
            .map(|e| e.device.clone())
            .filter(|d| !seen.contains(d))
            .chain(self.unseen.iter().cloned())
            .collect();
        DeviceRoles { seen, unseen }
    }

    pub fn device_histogram(&self, s: Split) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for e in self.split(s) {
            *h.entry(e.device.clone()).or_insert(0) += 1;
        }
        h
    }

    pub fn path_of(&self, root: &Path, e: &ManifestEntry) -> PathBuf {
        root.join(&e.filename)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("#version\t{MANIFEST_VERSION}\n#classes\t{}\n", self.classes.join(","));
        if !self.unseen.is_empty() {
            let _ = writeln!(s, "#unseen\t{}", self.unseen.iter().cloned().collect::<Vec<_>>().join(","));
        }
        let _ = writeln!(s, "{}", HEADER.join("\t"));
        for e in &self.entries {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", e.filename, e.scene_label, e.device, e.split.as_str());
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::codec::write_atomic(path, self.to_tsv().as_bytes())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut version = None;
        let mut classes: Option<Vec<String>> = None;
        let mut unseen = BTreeSet::new();
        let mut header_seen = false;
        let mut entries = Vec::new();
        let mut lines_of = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim_end_matches('\r');
            if l.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = l.split('\t').collect();
            if let Some(key) = fields[0].strip_prefix('#') {
                let val = fields.get(1).map(|v| v.trim()).unwrap_or("");
                match key {
                    "version" => {
                        let v: u32 = val.parse().map_err(|_| perr(line, format!("bad version '{val}'")))?;
                        if v != MANIFEST_VERSION {
                            return Err(perr(line, format!("unsupported manifest version {v}")));
                        }
                        version = Some(v);
                    }
                    "classes" => classes = Some(val.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
                    "unseen" => unseen = val.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                    _ => {}
                }
                continue;
            }
            if version.is_none() {
                return Err(perr(line, "missing '#version' header before data".into()));
            }
            if !header_seen {
                if fields != HEADER {
                    return Err(perr(line, format!("expected header '{}'", HEADER.join("\\t"))));
                }
                header_seen = true;
                continue;
            }
            if fields.len() != 4 {
                return Err(perr(line, format!("expected 4 tab-separated fields, found {}", fields.len())));
            }
            if fields.iter().any(|f| f.trim().is_empty()) {
                return Err(perr(line, "empty field".into()));
            }
            let split = fields[3].trim().parse::<Split>().map_err(|m| perr(line, m))?;
            entries.push(ManifestEntry {
                filename: fields[0].trim().to_string(),
                scene_label: fields[1].trim().to_string(),
                device: fields[2].trim().to_string(),
                split,
            });
            lines_of.push(line);
        }
        if version.is_none() {
            return Err(perr(1, "missing '#version' header".into()));
        }
        let classes = match classes {
            Some(c) => c,
            None => entries.iter().map(|e| e.scene_label.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        let mut ids = HashSet::new();
        for (e, &line) in entries.iter().zip(&lines_of) {
            if !classes.contains(&e.scene_label) {
                return Err(perr(line, format!("unknown label '{}'", e.scene_label)));
            }
            if !ids.insert(e.clip_id()) {
                return Err(perr(line, format!("duplicate clip id '{}'", e.clip_id())));
            }
        }
        DatasetManifest::new(entries, classes, unseen)
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetManifest::parse(&text).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        e => e,
    })
}
