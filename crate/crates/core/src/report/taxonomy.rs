//! Alarm-level and ontology-group taxonomy over the 527-event vocabulary.
//!
//! Tab-separated file: `# version\t1`, then a header
//! `index event level yellow_group ontology_group alias`; `-` marks an
//! empty field. Other `#` lines are comments.

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const TAXONOMY_VERSION: u32 = 1;
pub const TAXONOMY_EVENTS: usize = 527;
const BUILTIN: &str = include_str!("../../data/event_taxonomy.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AlarmLevel {
    Red,
    Yellow,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum YellowGroup {
    IndividualPerson,
    Crowd,
    Nature,
    ThingsMachines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum OntologyGroup {
    Human,
    Music,
    Things,
    Acoustic,
    Nature,
    #[serde(rename = "Machine-or-Vehicle")]
    MachineOrVehicle,
    Animal,
}

impl YellowGroup {
    pub const ALL: [YellowGroup; 4] = [YellowGroup::IndividualPerson, YellowGroup::Crowd, YellowGroup::Nature, YellowGroup::ThingsMachines];

    pub fn as_str(&self) -> &'static str {
        match self {
            YellowGroup::IndividualPerson => "individual-person",
            YellowGroup::Crowd => "crowd",
            YellowGroup::Nature => "nature",
            YellowGroup::ThingsMachines => "things-machines",
        }
    }
}

impl OntologyGroup {
    pub const ALL: [OntologyGroup; 7] = [
        OntologyGroup::Human,
        OntologyGroup::Music,
        OntologyGroup::Things,
        OntologyGroup::Acoustic,
        OntologyGroup::Nature,
        OntologyGroup::MachineOrVehicle,
        OntologyGroup::Animal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OntologyGroup::Human => "Human",
            OntologyGroup::Music => "Music",
            OntologyGroup::Things => "Things",
            OntologyGroup::Acoustic => "Acoustic",
            OntologyGroup::Nature => "Nature",
            OntologyGroup::MachineOrVehicle => "Machine-or-Vehicle",
            OntologyGroup::Animal => "Animal",
        }
    }
}

impl AlarmLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlarmLevel::Red => "RED",
            AlarmLevel::Yellow => "YELLOW",
            AlarmLevel::Green => "GREEN",
        }
    }
}

impl fmt::Display for OntologyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlarmLevel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "RED" => Ok(AlarmLevel::Red),
            "YELLOW" => Ok(AlarmLevel::Yellow),
            "GREEN" => Ok(AlarmLevel::Green),
            _ => Err(format!("unknown alarm level '{s}'")),
        }
    }
}

impl FromStr for YellowGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        YellowGroup::ALL.into_iter().find(|g| g.as_str() == s).ok_or_else(|| format!("unknown yellow sub-group '{s}'"))
    }
}

impl FromStr for OntologyGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        OntologyGroup::ALL.into_iter().find(|g| g.as_str() == s).ok_or_else(|| format!("unknown ontology group '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyEntry {
    pub index: usize,
    pub event: String,
    pub level: AlarmLevel,
    pub yellow_group: Option<YellowGroup>,
    pub group: OntologyGroup,
    pub alias: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EventTaxonomy {
    pub version: u32,
    entries: Vec<TaxonomyEntry>,
    by_name: HashMap<String, usize>,
}

impl EventTaxonomy {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled taxonomy parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut header = false;
        let mut entries = Vec::new();
        let mut by_name = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let perr = |msg: String| Error::Parse { line, msg };
            let l = raw.trim_end_matches('\r');
            if l.trim().is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('#') {
                if let Some(v) = rest.trim_start().strip_prefix("version") {
                    version = Some(v.trim().parse::<u32>().map_err(|e| perr(format!("version: {e}")))?);
                }
                continue;
            }
            let f: Vec<&str> = l.split('\t').collect();
            if !header {
                if f != ["index", "event", "level", "yellow_group", "ontology_group", "alias"] {
                    return Err(perr(format!("unexpected header '{l}'")));
                }
                header = true;
                continue;
            }
            if f.len() != 6 {
                return Err(perr(format!("expected 6 fields, found {}", f.len())));
            }
            let opt = |s: &str| (s != "-" && !s.is_empty()).then(|| s.to_string());
            let level: AlarmLevel = f[2].parse().map_err(perr)?;
            let yellow_group = match opt(f[3]) {
                Some(g) => Some(g.parse::<YellowGroup>().map_err(perr)?),
                None => None,
            };
            if (level == AlarmLevel::Yellow) != yellow_group.is_some() {
                return Err(perr(format!("'{}': a sub-group is required for YELLOW events and only for them", f[1])));
            }
            let e = TaxonomyEntry {
                index: f[0].parse().map_err(|e| perr(format!("index: {e}")))?,
                event: f[1].to_string(),
                level,
                yellow_group,
                group: f[4].parse().map_err(perr)?,
                alias: opt(f[5]),
            };
            if e.index != entries.len() {
                return Err(perr(format!("index {} out of sequence", e.index)));
            }
            for key in std::iter::once(&e.event).chain(e.alias.as_ref()) {
                if by_name.insert(key.clone(), e.index).is_some() {
                    return Err(perr(format!("duplicate event name '{key}'")));
                }
            }
            entries.push(e);
        }
        match version {
            Some(TAXONOMY_VERSION) => {}
            Some(v) => return Err(Error::Format(format!("taxonomy version {v} unsupported"))),
            None => return Err(Error::Format("taxonomy has no version line".into())),
        }
        if entries.len() != TAXONOMY_EVENTS {
            return Err(Error::Validation(format!("taxonomy maps {} events, expected {TAXONOMY_EVENTS}", entries.len())));
        }
        Ok(EventTaxonomy { version: TAXONOMY_VERSION, entries, by_name })
    }

    pub fn entries(&self) -> &[TaxonomyEntry] {
        &self.entries
    }

    /// Match on the event name or its alias.
    pub fn get(&self, name: &str) -> Option<&TaxonomyEntry> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.event.clone()).collect()
    }

    pub fn with_level(&self, level: AlarmLevel) -> Vec<&str> {
        self.entries.iter().filter(|e| e.level == level).map(|e| e.event.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_vocabulary() {
        let t = EventTaxonomy::builtin();
        assert_eq!(t.entries().len(), 527);
        let red = t.with_level(AlarmLevel::Red);
        for name in ["Explosion", "Gunshot, gunfire", "Machine gun", "Fusillade", "Artillery fire", "Fireworks", "Fire"] {
            assert!(red.contains(&name), "{name}");
        }
        let shout = t.get("Shout").unwrap();
        assert_eq!((shout.level, shout.yellow_group), (AlarmLevel::Yellow, Some(YellowGroup::IndividualPerson)));
        assert_eq!(t.get("Speech").unwrap().group, OntologyGroup::Human);
        assert!(t.get("Not an event").is_none());
    }

    #[test]
    fn parse_errors_carry_lines() {
        let bad = "# version\t1\nindex\tevent\tlevel\tyellow_group\tontology_group\talias\n0\tSpeech\tORANGE\t-\tHuman\t-\n";
        match EventTaxonomy::parse(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "# version\t1\nindex\tevent\tlevel\tyellow_group\tontology_group\talias\n0\tSpeech\tGREEN\t-\tHuman\t-\n";
        assert!(matches!(EventTaxonomy::parse(short), Err(Error::Validation(_))));
    }
}
