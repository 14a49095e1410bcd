//! Scripted 80 s street recording: five calm scenes of 10 s each, then
//! 30 s of riot. Scenes are pure tones so a dominant-frequency classifier
//! stands in for trained models, and event scores are scripted per scene.

use super::alarms::EventProbabilities;
use super::taxonomy::EventTaxonomy;
use super::timeline::{SceneClassifier, SEGMENT_S};
use crate::audio::{AudioClip, Stft};
use crate::error::{invalid_input, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SCENARIO_SCENES: [(&str, f64, f64); 6] = [
    ("park", 0.0, 10.0),
    ("street_traffic", 10.0, 20.0),
    ("public_square", 20.0, 30.0),
    ("shopping_mall", 30.0, 40.0),
    ("metro_station", 40.0, 50.0),
    ("riot", 50.0, 80.0),
];
const TONES: [f64; 6] = [250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];
const SR: u32 = 32_000;

fn scene_events(scene: &str) -> &'static [(&'static str, f32)] {
    match scene {
        "park" => &[("Bird", 0.8), ("Wind", 0.5), ("Speech", 0.4), ("Children shouting", 0.35)],
        "street_traffic" => &[("Car", 0.85), ("Traffic noise, roadway noise", 0.7), ("Vehicle horn, car horn, honking", 0.4)],
        "public_square" => &[("Speech", 0.7), ("Chatter", 0.5), ("Walk, footsteps", 0.4)],
        "shopping_mall" => &[("Music", 0.75), ("Speech", 0.6), ("Chatter", 0.5)],
        "metro_station" => &[("Subway, metro, underground", 0.8), ("Train", 0.6), ("Speech", 0.4)],
        "riot" => &[
            ("Shout", 0.85),
            ("Crowd", 0.8),
            ("Screaming", 0.6),
            ("Yell", 0.55),
            ("Hubbub, speech noise, speech babble", 0.5),
            ("Speech", 0.45),
            ("Run", 0.35),
            ("Gunshot, gunfire", 0.9),
            ("Explosion", 0.7),
            ("Police car (siren)", 0.75),
            ("Car", 0.5),
            ("Engine starting", 0.4),
            ("Tire squeal", 0.35),
            ("Breaking", 0.45),
        ],
        _ => &[],
    }
}

/// Assigns the scene whose reference tone is closest, on a log-frequency
/// scale, to the strongest spectral peak.
pub struct ToneSceneClassifier {
    classes: Vec<String>,
    tones: Vec<f64>,
    stft: Stft,
}

impl ToneSceneClassifier {
    pub fn new(classes: Vec<String>, tones: Vec<f64>) -> Result<Self> {
        if classes.len() != tones.len() || classes.is_empty() {
            return invalid_input("one tone per scene class is required");
        }
        Ok(ToneSceneClassifier { classes, tones, stft: Stft::new(4096, 4096, 2048) })
    }
}

impl SceneClassifier for ToneSceneClassifier {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn classify(&self, segment: &AudioClip) -> Result<Vec<f64>> {
        let frames = self.stft.power(&segment.samples);
        let mut acc = vec![0.0f64; self.stft.bins()];
        for f in &frames {
            acc.iter_mut().zip(f).for_each(|(a, &p)| *a += p as f64);
        }
        let peak = crate::fusion::argmax(&acc).max(1);
        let hz = peak as f64 * segment.sample_rate as f64 / 4096.0;
        let logits: Vec<f64> = self.tones.iter().map(|t| -4.0 * (hz / t).log2().abs()).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        Ok(e.into_iter().map(|v| v / s).collect())
    }
}

pub struct Scenario {
    pub clip: AudioClip,
    pub classifier: ToneSceneClassifier,
    pub events: EventProbabilities,
}

pub fn scene_at(t: f64) -> &'static str {
    SCENARIO_SCENES.iter().find(|(_, a, b)| t >= *a && t < *b).map(|s| s.0).unwrap_or("riot")
}

pub fn riot_scenario(tax: &EventTaxonomy, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = SCENARIO_SCENES.last().map(|s| s.2).unwrap_or(0.0);
    let n = (total * SR as f64) as usize;
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / SR as f64;
        let k = SCENARIO_SCENES.iter().position(|s| s.0 == scene_at(t)).unwrap_or(0);
        let tone = (2.0 * std::f64::consts::PI * TONES[k] * t).sin() * 0.3;
        x.push((tone + rng.random_range(-0.02..0.02)) as f32);
    }
    let clip = AudioClip::new(x, SR, "scenario-80s")?;
    let classes: Vec<String> = SCENARIO_SCENES.iter().map(|s| s.0.to_string()).collect();
    let classifier = ToneSceneClassifier::new(classes, TONES.to_vec())?;

    let names = tax.names();
    let segments = (total / SEGMENT_S) as usize;
    let mut rows = Vec::with_capacity(segments);
    for i in 0..segments {
        let mut row: Vec<f32> = (0..names.len()).map(|_| rng.random_range(0.0..0.12)).collect();
        for &(ev, score) in scene_events(scene_at(i as f64 * SEGMENT_S)) {
            let e = tax.get(ev).ok_or_else(|| crate::Error::Validation(format!("scenario event '{ev}' missing from taxonomy")))?;
            row[e.index] = (score + rng.random_range(-0.04..0.04)).clamp(0.0, 1.0);
        }
        rows.push(row);
    }
    Ok(Scenario { clip, classifier, events: EventProbabilities::new(names, rows)? })
}
