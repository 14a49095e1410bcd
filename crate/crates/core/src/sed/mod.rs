//! Down-stream scene classification over sound-event embeddings from an
//! up-stream model, and fusion with the spectrogram ensemble.

mod cache;
mod upstream;

pub use cache::*;
pub use upstream::*;

use crate::audio::AudioClip;
use crate::codec::*;
use crate::compress::{ensemble_report, ComplexityReport};
use crate::dataset::par_map;
use crate::error::{invalid_input, Error, Result};
use crate::fusion::{prod_fuse, ProbabilityMatrix};
use crate::netspec::NetworkSpec;
use crate::tensor::{Shape, Tensor};
use crate::train::LabeledSet;
use std::io::Cursor;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct EventEmbedding {
    pub clip_id: String,
    pub upstream_model_id: String,
    pub vector: Vec<f32>,
}

/// One embedding per clip, in order. With a cache, hits never call the
/// up-stream model.
pub fn extract_event_embeddings(clips: &[AudioClip], upstream: &dyn UpstreamModel, cache: Option<&EmbeddingCache>) -> Result<Vec<EventEmbedding>> {
    let len = upstream.embedding_len();
    par_map(clips, |c| {
        let vector = match cache {
            Some(cache) => cache.get_or_embed(upstream, c)?,
            None => upstream.embed(c)?,
        };
        if vector.len() != len || vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Runtime(format!("upstream returned a malformed embedding for '{}'", c.source_id)));
        }
        Ok(EventEmbedding { clip_id: c.source_id.clone(), upstream_model_id: upstream.model_id().to_string(), vector })
    })
}

const ARCHIVE_MAGIC: &[u8; 8] = b"LASCEMB1";

/// Header (upstream id, length) followed by (clip id, vector) records.
pub fn write_embedding_archive(path: &Path, embs: &[EventEmbedding]) -> Result<()> {
    let Some(first) = embs.first() else {
        return invalid_input("no embeddings to write");
    };
    if embs.iter().any(|e| e.upstream_model_id != first.upstream_model_id || e.vector.len() != first.vector.len()) {
        return invalid_input("embeddings in one archive must share up-stream model and length");
    }
    let io = |e| Error::io(path, e);
    let mut b = Vec::new();
    b.extend_from_slice(ARCHIVE_MAGIC);
    put_str(&mut b, &first.upstream_model_id).map_err(io)?;
    put_u32(&mut b, first.vector.len() as u32).map_err(io)?;
    put_u32(&mut b, embs.len() as u32).map_err(io)?;
    for e in embs {
        put_str(&mut b, &e.clip_id).map_err(io)?;
        put_f32s(&mut b, &e.vector).map_err(io)?;
    }
    write_atomic(path, &b)
}

pub fn read_embedding_archive(path: &Path) -> Result<Vec<EventEmbedding>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Cursor::new(bytes.as_slice());
    expect_magic(&mut r, ARCHIVE_MAGIC)?;
    let id = get_str(&mut r)?;
    let len = get_u32(&mut r)? as usize;
    let n = get_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let clip_id = get_str(&mut r)?;
        out.push(EventEmbedding { clip_id, upstream_model_id: id.clone(), vector: get_f32s(&mut r, len)? });
    }
    Ok(out)
}

/// Embeddings as a `1 × 1 × len` labelled set for the down-stream MLP.
pub fn embedding_set(embs: &[EventEmbedding], labels: Vec<usize>, devices: Vec<String>, classes: Vec<String>) -> Result<LabeledSet> {
    let Some(first) = embs.first() else {
        return invalid_input("no embeddings");
    };
    let len = first.vector.len();
    if embs.iter().any(|e| e.vector.len() != len) {
        return invalid_input("embedding lengths differ");
    }
    let data: Vec<f32> = embs.iter().flat_map(|e| e.vector.iter().copied()).collect();
    LabeledSet::new(
        embs.iter().map(|e| e.clip_id.clone()).collect(),
        Tensor::from_vec(embs.len(), Shape::vector(len), data)?,
        labels,
        devices,
        classes,
    )
}

/// PROD fusion of the spectrogram-ensemble stream with the down-stream
/// stream, then argmax.
pub fn combined_predict(nri_probs: &ProbabilityMatrix, ds_probs: &ProbabilityMatrix) -> Result<Vec<usize>> {
    Ok(prod_fuse(&[nri_probs, ds_probs])?.labels())
}

/// Spectrogram ensemble members plus the up-stream model's trainable
/// parameter count.
pub fn combined_complexity(members: &[&NetworkSpec], upstream_params: u64, bits: u32) -> Result<ComplexityReport> {
    ensemble_report(members, upstream_params, bits)
}

/// Event-score CSV: `clip_id` then one column per event name.
pub fn write_event_scores_csv(path: &Path, names: &[String], rows: &[(String, Vec<f32>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["clip_id".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(fmt)?;
    for (id, s) in rows {
        if s.len() != names.len() {
            return invalid_input(format!("'{id}' has {} scores for {} events", s.len(), names.len()));
        }
        let mut rec = vec![id.clone()];
        rec.extend(s.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(fmt)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
}

pub fn read_event_scores_csv(path: &Path) -> Result<(Vec<String>, Vec<(String, Vec<f32>)>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let header = r.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let scores = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f32>().map_err(|e| Error::Parse { line, msg: format!("'{v}': {e}") }))
            .collect::<Result<Vec<f32>>>()?;
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Parse { line, msg: "event scores must lie in [0, 1]".into() });
        }
        rows.push((rec[0].to_string(), scores));
    }
    Ok((names, rows))
}
