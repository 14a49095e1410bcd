//! PROD late fusion: per clip and class, the product of the member models'
//! probabilities scaled by 1/S, followed by an argmax decision.

use crate::error::{invalid_input, Error, Result};
use std::path::Path;

const ROW_SUM_TOL: f64 = 1e-5;

/// Class-probability rows of one model over a list of clips.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    pub model_id: String,
    pub classes: Vec<String>,
    pub clip_ids: Vec<String>,
    data: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn new(model_id: impl Into<String>, classes: Vec<String>, clip_ids: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let c = classes.len();
        if c == 0 {
            return invalid_input("probability matrix needs at least one class");
        }
        if data.len() != c * clip_ids.len() {
            return invalid_input(format!("{} values for {} clips x {c} classes", data.len(), clip_ids.len()));
        }
        for (i, row) in data.chunks(c).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return invalid_input(format!("row {} ('{}') has a negative or non-finite value", i, clip_ids[i]));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return invalid_input(format!("row {} ('{}') sums to {s}", i, clip_ids[i]));
            }
        }
        Ok(ProbabilityMatrix { model_id: model_id.into(), classes, clip_ids, data })
    }

    /// Builds from f32 rows, renormalising each row in f64 to absorb
    /// single-precision rounding.
    pub fn from_f32_rows(model_id: impl Into<String>, classes: Vec<String>, clip_ids: Vec<String>, data: &[f32]) -> Result<Self> {
        let c = classes.len().max(1);
        let mut out: Vec<f64> = data.iter().map(|&v| v as f64).collect();
        for row in out.chunks_mut(c) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Self::new(model_id, classes, clip_ids, out)
    }

    pub fn rows(&self) -> usize {
        self.clip_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.classes.len();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.rows()).map(|i| argmax(self.row(i))).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.classes, &self.clip_ids, &self.data, None)
    }

    /// Header `clip_id,<class>...`; the model id is the caller's choice.
    pub fn read_csv(path: &Path, model_id: impl Into<String>) -> Result<Self> {
        let (classes, clip_ids, data) = read_rows(path)?;
        Self::new(model_id, classes, clip_ids, data).map_err(|e| match e {
            Error::InvalidInput(m) => Error::Validation(format!("{}: {m}", path.display())),
            e => e,
        })
    }
}

/// Unnormalised fused scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedScores {
    pub classes: Vec<String>,
    pub clip_ids: Vec<String>,
    pub data: Vec<f64>,
}

impl FusedScores {
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.classes.len();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.clip_ids.len()).map(|i| argmax(self.row(i))).collect()
    }

    /// Rows rescaled to sum to one. A row of all zeros (every class vetoed)
    /// becomes uniform.
    pub fn normalized(&self, model_id: &str) -> Result<ProbabilityMatrix> {
        let c = self.classes.len();
        let mut data = self.data.clone();
        for row in data.chunks_mut(c) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / c as f64);
            }
        }
        ProbabilityMatrix::new(model_id, self.classes.clone(), self.clip_ids.clone(), data)
    }

    /// Same layout as a probability CSV plus a trailing `label` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let labels: Vec<String> = self.labels().into_iter().map(|l| self.classes[l].clone()).collect();
        write_rows(path, &self.classes, &self.clip_ids, &self.data, Some(&labels))
    }
}

fn check_aligned(inputs: &[&ProbabilityMatrix]) -> Result<()> {
    let Some(first) = inputs.first() else {
        return invalid_input("fusion needs at least one model");
    };
    for m in &inputs[1..] {
        if m.classes != first.classes {
            return invalid_input(format!("model '{}' has classes {:?}, expected {:?}", m.model_id, m.classes, first.classes));
        }
        if m.clip_ids != first.clip_ids {
            return invalid_input(format!("model '{}' is not aligned on clips with '{}'", m.model_id, first.model_id));
        }
    }
    Ok(())
}

/// `(1/S) Π_s p_sc`, no renormalisation and no flooring: a zero in any
/// model vetoes the class.
pub fn prod_fuse(inputs: &[&ProbabilityMatrix]) -> Result<FusedScores> {
    prod_fuse_inner(inputs, 0.0)
}

/// As [`prod_fuse`] with each probability raised to at least `floor`
/// first, so a single zero no longer vetoes.
pub fn prod_fuse_floored(inputs: &[&ProbabilityMatrix], floor: f64) -> Result<FusedScores> {
    if !(floor > 0.0 && floor < 1.0) {
        return invalid_input(format!("floor {floor} must lie in (0, 1)"));
    }
    prod_fuse_inner(inputs, floor)
}

fn prod_fuse_inner(inputs: &[&ProbabilityMatrix], floor: f64) -> Result<FusedScores> {
    check_aligned(inputs)?;
    let s = inputs.len() as f64;
    let mut data = vec![1.0 / s; inputs[0].data.len()];
    for m in inputs {
        for (d, &p) in data.iter_mut().zip(&m.data) {
            *d *= p.max(floor);
        }
    }
    Ok(FusedScores { classes: inputs[0].classes.clone(), clip_ids: inputs[0].clip_ids.clone(), data })
}

/// Index of the largest score; ties go to the lowest index.
pub fn predict_label(row: &[f64]) -> Result<usize> {
    if row.is_empty() {
        return invalid_input("cannot take the label of an empty row");
    }
    Ok(argmax(row))
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn write_rows(path: &Path, classes: &[String], clips: &[String], data: &[f64], labels: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let c = classes.len();
    let mut header = vec!["clip_id".to_string()];
    header.extend(classes.iter().cloned());
    if labels.is_some() {
        header.push("label".into());
    }
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(fmt)?;
    for (i, clip) in clips.iter().enumerate() {
        let mut rec = vec![clip.clone()];
        rec.extend(data[i * c..(i + 1) * c].iter().map(|v| format!("{v:e}")));
        if let Some(l) = labels {
            rec.push(l[i].clone());
        }
        w.write_record(&rec).map_err(fmt)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    crate::codec::write_atomic(path, &bytes)
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    if header.get(0) != Some("clip_id") {
        return Err(Error::Parse { line: 1, msg: "first column must be 'clip_id'".into() });
    }
    let mut classes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let has_label = classes.last().map(String::as_str) == Some("label");
    if has_label {
        classes.pop();
    }
    let mut clips = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Parse { line, msg: format!("{} fields, header has {}", rec.len(), header.len()) });
        }
        clips.push(rec[0].to_string());
        for f in rec.iter().skip(1).take(classes.len()) {
            data.push(f.trim().parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("'{f}': {e}") })?);
        }
    }
    Ok((classes, clips, data))
}
