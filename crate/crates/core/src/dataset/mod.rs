//! Dataset manifests, synthetic corpora and feature loading.

mod manifest;
mod synth;

pub use manifest::*;
pub use synth::*;

use crate::audio::{read_wav, AudioClip, Extractor, FeatureTensor};
use crate::error::{invalid_input, Result};
use crate::tensor::Tensor;
use crate::train::LabeledSet;
use std::collections::HashMap;
use std::path::Path;

/// Run `f` over `items` on all available cores, preserving order.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads).max(1);
    let parts: Vec<Result<Vec<U>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<U>>>())).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Stack per-clip features of one split into a standardised
/// [`LabeledSet`]. Every clip must have the same feature shape.
pub fn labeled_set(manifest: &DatasetManifest, split: Split, features: &[(String, FeatureTensor)]) -> Result<LabeledSet> {
    let by_id: HashMap<&str, &FeatureTensor> = features.iter().map(|(k, v)| (k.as_str(), v)).collect();
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    let mut samples = Vec::with_capacity(entries.len());
    for e in &entries {
        let id = e.clip_id();
        match by_id.get(id.as_str()) {
            Some(f) => samples.push(*f),
            None => return invalid_input(format!("no features for clip '{id}'")),
        }
    }
    let shape = samples[0].shape();
    if let Some(bad) = samples.iter().find(|f| f.shape() != shape) {
        return invalid_input(format!("feature shape {} differs from {}; clips must share a length", bad.shape(), shape));
    }
    let slices: Vec<&[f32]> = samples.iter().map(|f| f.values.as_slice()).collect();
    let x = Tensor::stack(&slices, shape)?;
    LabeledSet::new(
        entries.iter().map(|e| e.clip_id()).collect(),
        x,
        entries.iter().map(|e| manifest.class_index(&e.scene_label).expect("validated label")).collect(),
        entries.iter().map(|e| e.device.clone()).collect(),
        manifest.classes.clone(),
    )
    .map(LabeledSet::standardized)
}

/// Read and extract every clip of the given splits under `root`.
pub fn extract_manifest(manifest: &DatasetManifest, root: &Path, splits: &[Split], ex: &Extractor) -> Result<Vec<(String, FeatureTensor)>> {
    let entries: Vec<&ManifestEntry> = manifest.entries.iter().filter(|e| splits.contains(&e.split)).collect();
    par_map(&entries, |e| {
        let clip = read_wav(&manifest.path_of(root, e))?;
        Ok((e.clip_id(), ex.features(&clip)?))
    })
}

/// Extract features for in-memory clips aligned with `manifest.entries`.
pub fn extract_clips(manifest: &DatasetManifest, clips: &[AudioClip], ex: &Extractor) -> Result<Vec<(String, FeatureTensor)>> {
    if clips.len() != manifest.entries.len() {
        return invalid_input("clips and manifest entries differ in count");
    }
    let pairs: Vec<(&ManifestEntry, &AudioClip)> = manifest.entries.iter().zip(clips).collect();
    par_map(&pairs, |(e, c)| Ok((e.clip_id(), ex.features(c)?)))
}
