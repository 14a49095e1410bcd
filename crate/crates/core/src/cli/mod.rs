//! Command-line front end: `synth`, `extract`, `train`, `eval`,
//! `compress`, `fuse` and `report`.

mod config;

pub use config::*;

use crate::audio::{read_feature_archive, read_wav, write_feature_archive, Extractor, FeatureTensor, SpectrogramConfig, SpectrogramKind};
use crate::codec::write_atomic;
use crate::compress::{complexity_report, quantize, CompressionConfig, Variant};
use crate::dataset::{extract_manifest, labeled_set, load_manifest, synth_corpus, DatasetManifest, Split, SynthConfig};
use crate::engine::{ModelFile, ModelMeta, Payload};
use crate::error::{invalid_config, Error, Result};
use crate::fusion::{prod_fuse, prod_fuse_floored, ProbabilityMatrix};
use crate::report::{analyse, render_report, scenario::riot_scenario, EventProbabilities, EventTaxonomy, ModelBundle, SEGMENT_S};
use crate::sed::{LocalUpstream, UpstreamModel};
use crate::tensor::Shape;
use crate::train::{evaluate_per_device, predict_set, train, write_run_log};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "lowasc", version, about = "Low-complexity acoustic scene classification toolkit")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic three-class corpus and its manifest.
    Synth(SynthArgs),
    /// Extract feature tensors for every clip in a manifest.
    Extract(ExtractArgs),
    /// Train one model on the train split.
    Train(TrainArgs),
    /// Per-device accuracy on the eval split.
    Eval(EvalArgs),
    /// Complexity report for a variant, optionally quantizing weights.
    Compress(CompressArgs),
    /// PROD-fuse probability CSVs.
    Fuse(FuseArgs),
    /// Scene timeline, alarm tallies and figures for a recording.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub eval_per_class: Option<usize>,
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<SpectrogramKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Directory for breakdown.json, breakdown.tsv and probs.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub quantize: bool,
    /// Trained model to quantize.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Floor probabilities before the product instead of keeping zeros.
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run the built-in scripted 80 s street scenario.
    #[arg(long)]
    pub scenario: bool,
    #[arg(long)]
    pub clip: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub models: Vec<PathBuf>,
    /// Per-segment event scores as CSV.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Up-stream weights file used to score events per segment.
    #[arg(long)]
    pub upstream: Option<PathBuf>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse, run, and map the outcome to a process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn need<T: Clone>(v: &Option<T>, what: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::InvalidConfig(format!("{what} is required (flag or config file)")))
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.train.seed = cfg.seed;
    match cli.command {
        Command::Synth(a) => cmd_synth(&cfg, a, stdout),
        Command::Extract(a) => {
            override_opt(&mut cfg.manifest, a.manifest);
            override_opt(&mut cfg.audio_root, a.root);
            override_opt(&mut cfg.out, a.out);
            if let Some(k) = a.kind {
                cfg.kind = k;
            }
            cmd_extract(&cfg, stdout)
        }
        Command::Train(a) => {
            override_opt(&mut cfg.manifest, a.manifest);
            override_opt(&mut cfg.features, a.features);
            override_opt(&mut cfg.out, a.out);
            if let Some(v) = a.variant {
                cfg.variant = v;
            }
            if let Some(e) = a.epochs {
                let p2 = cfg.train.epochs_total - cfg.train.epochs_phase1;
                cfg.train.epochs_total = e;
                cfg.train.epochs_phase1 = e.saturating_sub(p2.min(e.saturating_sub(1)));
            }
            cmd_train(&cfg, stdout)
        }
        Command::Eval(a) => {
            override_opt(&mut cfg.weights, a.weights);
            override_opt(&mut cfg.manifest, a.manifest);
            override_opt(&mut cfg.features, a.features);
            override_opt(&mut cfg.out, a.out);
            cmd_eval(&cfg, stdout)
        }
        Command::Compress(a) => {
            if let Some(v) = a.variant {
                cfg.variant = v;
                cfg.compression = None;
            }
            override_opt(&mut cfg.weights, a.weights);
            override_opt(&mut cfg.out, a.out);
            let mut cc = cfg.compression.clone().unwrap_or_else(|| CompressionConfig::for_variant(cfg.variant));
            if a.quantize {
                cc.quantize = true;
                cc.bits = 8;
            }
            cfg.compression = Some(cc);
            cmd_compress(&cfg, a.classes, stdout)
        }
        Command::Fuse(a) => {
            override_opt(&mut cfg.out, a.out);
            cmd_fuse(&cfg, &a.inputs, a.floor, stdout)
        }
        Command::Report(a) => {
            override_opt(&mut cfg.out, a.out.clone());
            if let Some(t) = a.threshold {
                cfg.threshold = t;
            }
            cmd_report(&cfg, &a, stdout)
        }
    }
}

fn override_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn cmd_synth(cfg: &RunConfig, a: SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut sc = SynthConfig { seed: cfg.seed, ..Default::default() };
    if let Some(v) = a.train_per_class {
        sc.train_per_class = v;
    }
    if let Some(v) = a.eval_per_class {
        sc.eval_per_class = v;
    }
    if let Some(v) = a.duration {
        sc.duration_s = v;
    }
    let m = synth_corpus(&sc, &a.out)?;
    write_provenance(&a.out.join("manifest.tsv"), &cfg.provenance("synth"))?;
    writeln!(stdout, "wrote {} clips and manifest.tsv to {}", m.entries.len(), a.out.display()).map_err(out_err)
}

fn audio_root(cfg: &RunConfig, manifest: &Path) -> PathBuf {
    cfg.audio_root
        .clone()
        .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default())
}

fn cmd_extract(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let mpath = need(&cfg.manifest, "--manifest")?;
    let out = need(&cfg.out, "--out")?;
    let m = load_manifest(&mpath)?;
    let ex = Extractor::new(SpectrogramConfig::for_kind(cfg.kind))?;
    let feats = extract_manifest(&m, &audio_root(cfg, &mpath), &[Split::Train, Split::Eval], &ex)?;
    write_feature_archive(&out, &feats)?;
    write_provenance(&out, &cfg.provenance("extract"))?;
    let shape = feats.first().map(|f| f.1.shape().to_string()).unwrap_or_default();
    writeln!(stdout, "{} {} tensors of shape {shape} -> {}", feats.len(), cfg.kind, out.display()).map_err(out_err)
}

/// Features, checked to come from one front-end configuration.
fn load_features(path: &Path) -> Result<(SpectrogramConfig, Vec<(String, FeatureTensor)>)> {
    let feats = read_feature_archive(path)?;
    let Some(first) = feats.first() else {
        return Err(Error::Validation(format!("{}: no feature tensors", path.display())));
    };
    let sc = SpectrogramConfig::for_kind(first.1.kind);
    let digest = sc.digest();
    if let Some((id, _)) = feats.iter().find(|(_, f)| f.config_digest != digest) {
        return Err(Error::Validation(format!("'{id}' was extracted with a non-default front-end configuration")));
    }
    Ok((sc, feats))
}

fn cmd_train(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let m = load_manifest(&need(&cfg.manifest, "--manifest")?)?;
    let (sc, feats) = load_features(&need(&cfg.features, "--features")?)?;
    let out = need(&cfg.out, "--out")?;
    let set = labeled_set(&m, Split::Train, &feats)?;
    let full = set.features.shape;
    let crop = cfg.augment.crop_frames;
    let mut recipe = cfg.variant.recipe(m.classes.len())?.with_input(Shape::new(full.h, crop.min(full.w), full.c));
    for (k, &v) in &cfg.channels {
        if !recipe.channels.contains_key(k) {
            return invalid_config(format!("variant {} has no block '{k}'", cfg.variant));
        }
        recipe.channels.insert(k.clone(), v);
    }
    let spec = recipe.build()?;
    writeln!(stdout, "training {} ({} parameters) on {} clips", cfg.variant, spec.param_count(), set.len()).map_err(out_err)?;
    let outcome = train(&spec, &set, &cfg.train, &cfg.augment)?;
    for r in &outcome.log {
        writeln!(stdout, "epoch {:>3} {:?} lr {:.1e} loss {:.5}", r.epoch, r.phase, r.lr, r.loss).map_err(out_err)?;
    }
    let meta = ModelMeta {
        recipe,
        class_names: m.classes.clone(),
        spectrogram: Some(sc),
        crop_frames: crop,
        provenance: cfg.provenance("train"),
    };
    ModelFile::float(meta, outcome.weights.clone()).save(&out)?;
    let mut log_name = out.file_name().unwrap_or_default().to_os_string();
    log_name.push(".log.jsonl");
    write_run_log(&out.with_file_name(log_name), &outcome.log)?;
    if m.split(Split::Eval).next().is_some() {
        let ev = labeled_set(&m, Split::Eval, &feats)?;
        let b = evaluate_per_device(&spec, &outcome.weights, &ev, &m.roles())?;
        write!(stdout, "{}", b.to_table()).map_err(out_err)?;
    }
    writeln!(stdout, "saved {}", out.display()).map_err(out_err)
}

fn cmd_eval(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&need(&cfg.weights, "--weights")?)?;
    let m: DatasetManifest = load_manifest(&need(&cfg.manifest, "--manifest")?)?;
    let (sc, feats) = load_features(&need(&cfg.features, "--features")?)?;
    if model.meta.spectrogram.as_ref().map(|s| s.digest()) != Some(sc.digest()) {
        return Err(Error::Validation("features do not match the model's front-end".into()));
    }
    if model.meta.class_names != m.classes {
        return Err(Error::Validation("model classes differ from the manifest".into()));
    }
    let spec = model.meta.spec()?;
    let w = model.weights();
    let set = labeled_set(&m, Split::Eval, &feats)?;
    let b = evaluate_per_device(&spec, &w, &set, &m.roles())?;
    write!(stdout, "{}", b.to_table()).map_err(out_err)?;
    if let Some(dir) = &cfg.out {
        let prov = cfg.provenance("eval");
        let json = serde_json::to_string_pretty(&b).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(&dir.join("breakdown.json"), (json + "\n").as_bytes())?;
        write_atomic(&dir.join("breakdown.tsv"), b.to_table().as_bytes())?;
        let id = cfg.weights.as_ref().and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        predict_set(&spec, &w, &set, &id, 32)?.write_csv(&dir.join("probs.csv"))?;
        write_provenance(&dir.join("eval"), &prov)?;
    }
    Ok(())
}

fn cmd_compress(cfg: &RunConfig, classes: usize, stdout: &mut dyn Write) -> Result<()> {
    let cc = cfg.compression.clone().unwrap_or_else(|| CompressionConfig::for_variant(cfg.variant));
    let bits = if cc.quantize { 8 } else { 32 };
    let (spec, written) = match &cfg.weights {
        Some(wp) => {
            let mut f = ModelFile::load(wp)?;
            let spec = f.meta.spec()?;
            let written = if cc.quantize {
                let out = need(&cfg.out, "--out")?;
                f.payload = Payload::Int8(quantize(&f.weights()));
                f.meta.provenance = cfg.provenance("compress");
                f.save(&out)?;
                Some(out)
            } else {
                None
            };
            (spec, written)
        }
        None => {
            let spec = cc.build(classes)?;
            let written = match &cfg.out {
                Some(out) => {
                    let mut j = spec.manifest();
                    j["provenance"] = serde_json::to_value(cfg.provenance("compress")).unwrap_or_default();
                    let body = serde_json::to_string_pretty(&j).map_err(|e| Error::Format(e.to_string()))?;
                    write_atomic(out, (body + "\n").as_bytes())?;
                    Some(out.clone())
                }
                None => None,
            };
            (spec, written)
        }
    };
    let r = complexity_report(&spec, bits)?;
    let mut j = r.to_json();
    j["variant"] = serde_json::Value::from(spec.recipe.name.clone());
    writeln!(stdout, "{}", serde_json::to_string_pretty(&j).map_err(|e| Error::Format(e.to_string()))?).map_err(out_err)?;
    for (gate, ok) in r.verdicts() {
        writeln!(stdout, "{gate} budget: {}", if ok { "PASS" } else { "FAIL" }).map_err(out_err)?;
    }
    if let Some(p) = written {
        writeln!(stdout, "wrote {}", p.display()).map_err(out_err)?;
    }
    Ok(())
}

fn cmd_fuse(cfg: &RunConfig, inputs: &[PathBuf], floor: Option<f64>, stdout: &mut dyn Write) -> Result<()> {
    let mats = inputs
        .iter()
        .map(|p| ProbabilityMatrix::read_csv(p, p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ProbabilityMatrix> = mats.iter().collect();
    let fused = match floor {
        Some(f) => prod_fuse_floored(&refs, f)?,
        None => prod_fuse(&refs)?,
    };
    let labels = fused.labels();
    writeln!(stdout, "clip_id,label").map_err(out_err)?;
    for (id, &k) in fused.clip_ids.iter().zip(&labels) {
        writeln!(stdout, "{id},{}", fused.classes[k]).map_err(out_err)?;
    }
    if let Some(out) = &cfg.out {
        fused.write_csv(out)?;
        write_provenance(out, &cfg.provenance("fuse"))?;
    }
    Ok(())
}

fn cmd_report(cfg: &RunConfig, a: &ReportArgs, stdout: &mut dyn Write) -> Result<()> {
    let out = need(&cfg.out, "--out")?;
    let tax = match &a.taxonomy {
        Some(p) => EventTaxonomy::load(p)?,
        None => EventTaxonomy::builtin(),
    };
    let mut report = if a.scenario {
        let sc = riot_scenario(&tax, cfg.seed)?;
        analyse(&sc.clip, &sc.classifier, &sc.events, &tax, cfg.threshold)?
    } else {
        let clip = read_wav(&need(&a.clip, "--clip")?)?;
        if a.models.is_empty() {
            return invalid_config("--models is required unless --scenario is given");
        }
        let bundle = ModelBundle::load(&a.models)?;
        let events = match (&a.events, &a.upstream) {
            (Some(p), _) => EventProbabilities::read_csv(p)?,
            (None, Some(u)) => {
                let up = LocalUpstream::load(u)?;
                let seg = (SEGMENT_S * clip.sample_rate as f64) as usize;
                let rows = (0..clip.samples.len() / seg)
                    .map(|i| up.event_scores(&clip.slice(i * seg, (i + 1) * seg, format!("seg{i}"))?))
                    .collect::<Result<Vec<_>>>()?;
                EventProbabilities::new(tax.names(), rows)?
            }
            (None, None) => return invalid_config("either --events or --upstream is required"),
        };
        analyse(&clip, &bundle, &events, &tax, cfg.threshold)?
    };
    report.provenance = cfg.provenance("report");
    let written = render_report(&report, &out)?;
    for s in &report.segments {
        writeln!(
            stdout,
            "{:>5.1}-{:>5.1} s  {:<16} red {:>2} yellow {:>2} green {:>3}{}",
            s.start_s,
            s.end_s,
            s.label,
            s.counts.red,
            s.counts.yellow,
            s.counts.green,
            if s.highlight.is_some() { "  *" } else { "" }
        )
        .map_err(out_err)?;
    }
    for t in &report.transitions {
        writeln!(stdout, "transition at {} s: {} -> {}", t.time_s, t.before, t.after).map_err(out_err)?;
    }
    writeln!(stdout, "wrote {} files to {}", written.len(), out.display()).map_err(out_err)
}
