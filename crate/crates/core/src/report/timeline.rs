use crate::audio::{AudioClip, Extractor};
use crate::augment::standardize;
use crate::dataset::par_map;
use crate::engine::{self, ModelFile, Weights};
use crate::error::{invalid_input, Error, Result};
use crate::fusion::{predict_label, prod_fuse, ProbabilityMatrix};
use crate::netspec::NetworkSpec;
use crate::tensor::Tensor;
use crate::train::spec_for_input;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

pub const SEGMENT_S: f64 = 5.0;

/// Anything that maps a stretch of audio to a scene distribution.
pub trait SceneClassifier: Sync {
    fn classes(&self) -> &[String];
    fn classify(&self, segment: &AudioClip) -> Result<Vec<f64>>;
}

struct Member {
    id: String,
    spec: NetworkSpec,
    weights: Weights,
    extractor: Extractor,
}

/// Trained models, each with the front-end it was trained on; outputs are
/// PROD-fused.
pub struct ModelBundle {
    classes: Vec<String>,
    members: Vec<Member>,
}

impl ModelBundle {
    pub fn from_files(files: Vec<(String, ModelFile)>) -> Result<Self> {
        let mut members = Vec::new();
        let mut classes: Option<Vec<String>> = None;
        for (id, f) in files {
            let Some(sc) = f.meta.spectrogram.clone() else {
                return Err(Error::Validation(format!("model '{id}' records no spectrogram config")));
            };
            match &classes {
                Some(c) if *c != f.meta.class_names => return Err(Error::Validation(format!("model '{id}' has a different class list"))),
                None => classes = Some(f.meta.class_names.clone()),
                _ => {}
            }
            members.push(Member { spec: f.meta.spec()?, weights: f.weights(), extractor: Extractor::new(sc)?, id });
        }
        let Some(classes) = classes else {
            return invalid_input("a model bundle needs at least one model");
        };
        Ok(ModelBundle { classes, members })
    }

    pub fn load(paths: &[impl AsRef<Path>]) -> Result<Self> {
        let files = paths
            .iter()
            .map(|p| {
                let p = p.as_ref();
                Ok((p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), ModelFile::load(p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_files(files)
    }
}

impl SceneClassifier for ModelBundle {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn classify(&self, segment: &AudioClip) -> Result<Vec<f64>> {
        let mut probs = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let f = m.extractor.features(segment)?;
            let shape = f.shape();
            let mut v = f.values;
            standardize(&mut v, shape);
            let net = spec_for_input(&m.spec, shape)?;
            let y = engine::predict(&net, &m.weights, &Tensor::from_vec(1, shape, v)?)?;
            probs.push(ProbabilityMatrix::from_f32_rows(&m.id, self.classes.clone(), vec![segment.source_id.clone()], &y.data)?);
        }
        let refs: Vec<&ProbabilityMatrix> = probs.iter().collect();
        Ok(prod_fuse(&refs)?.normalized("bundle")?.row(0).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
    pub probs: Vec<f64>,
}

/// A label change at a segment boundary; both sides are kept for display.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub time_s: f64,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneTimeline {
    pub segment_s: f64,
    pub classes: Vec<String>,
    pub segments: Vec<Segment>,
    pub transitions: Vec<Transition>,
    /// scene label → colour name
    pub highlights: BTreeMap<String, String>,
}

pub fn default_highlights() -> BTreeMap<String, String> {
    BTreeMap::from([("riot".to_string(), "red".to_string())])
}

impl SceneTimeline {
    pub fn highlight_of(&self, segment: usize) -> Option<&str> {
        self.segments.get(segment).and_then(|s| self.highlights.get(&s.label)).map(String::as_str)
    }

    /// Maximal runs of consecutive segments with the given highlight.
    pub fn highlighted_spans(&self, colour: &str) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            if self.highlight_of(i) != Some(colour) {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.1 == s.start_s => last.1 = s.end_s,
                _ => out.push((s.start_s, s.end_s)),
            }
        }
        out
    }

    pub fn labels(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.label.as_str()).collect()
    }
}

/// Classify consecutive `segment_s` windows. A trailing partial window is
/// dropped with a warning.
pub fn segment_and_classify(clip: &AudioClip, classifier: &dyn SceneClassifier, segment_s: f64) -> Result<SceneTimeline> {
    if !(segment_s > 0.0) {
        return invalid_input("segment length must be positive");
    }
    let seg = (segment_s * clip.sample_rate as f64).round() as usize;
    let n = clip.samples.len() / seg;
    if n == 0 {
        return invalid_input(format!("clip '{}' lasts {:.2} s, shorter than one {segment_s} s segment", clip.source_id, clip.duration_s()));
    }
    let rest = clip.samples.len() - n * seg;
    if rest > 0 {
        log::warn!("dropping trailing {:.2} s of '{}'", rest as f64 / clip.sample_rate as f64, clip.source_id);
    }
    let classes = classifier.classes().to_vec();
    let idx: Vec<usize> = (0..n).collect();
    let segments = par_map(&idx, |&i| {
        let part = clip.slice(i * seg, (i + 1) * seg, format!("{}#{i}", clip.source_id))?;
        let probs = classifier.classify(&part)?;
        let sum: f64 = probs.iter().sum();
        if probs.len() != classes.len() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-5 {
            return Err(Error::Runtime(format!("segment {i}: classifier returned an invalid distribution")));
        }
        let k = predict_label(&probs)?;
        Ok(Segment { index: i, start_s: i as f64 * segment_s, end_s: (i + 1) as f64 * segment_s, label: classes[k].clone(), probs })
    })?;
    let transitions = segments
        .windows(2)
        .filter(|w| w[0].label != w[1].label)
        .map(|w| Transition { time_s: w[1].start_s, before: w[0].label.clone(), after: w[1].label.clone() })
        .collect();
    Ok(SceneTimeline { segment_s, classes, segments, transitions, highlights: default_highlights() })
}
