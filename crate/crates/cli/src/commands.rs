//! Subcommand implementations. Each one resolves the effective config,
//! runs the pipeline and writes its artifact plus a `<out>.config.json`
//! sidecar holding the config that produced it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use crydetect::audio_io::{load_manifest_with, DatasetManifest, ManifestEntry, Split};
use crydetect::eval::{bayes_signed_rank, classification_report, per_group_auc, roc_auc, GroupAuc, GroupAucTable};
use crydetect::features::{load_embeddings, parse_block_list, write_feature_csv, BlockKind, EmbeddingTable};
use crydetect::pipeline::{
    ablate, extract_features, load_model, predict_pipeline, save_model, train_pipeline, write_ablation_csv,
    write_predictions_csv, Prediction, Predictor,
};
use thiserror::Error;

use crate::config::RunConfig;

/// Problems with the command line or input files; these exit with code 2.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("group keys differ between {a} and {b}: {}", .only.join(", "))]
    GroupMismatch { a: String, b: String, only: Vec<String> },
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    InputError::Usage(msg.into()).into()
}

fn file_error(path: &Path, message: impl Into<String>) -> anyhow::Error {
    InputError::File {
        path: path.display().to_string(),
        message: message.into(),
    }
    .into()
}

/// Flags every subcommand understands.
#[derive(Args)]
pub struct Common {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Segment-level worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output path; stdout when omitted (required by `train`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("failed to write {}", path.display()))
}

/// Writes `bytes` to `out` (with the config sidecar) or to stdout.
fn emit(out: Option<&Path>, cfg: &RunConfig, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            write_file(p, bytes)?;
            write_file(&sidecar(p, ".config.json"), cfg.to_json().as_bytes())
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_manifest(path: &Path, cfg: &RunConfig) -> Result<DatasetManifest> {
    let m = load_manifest_with(path, cfg.allow_participant_overlap)?;
    if m.entries.is_empty() {
        return Err(file_error(path, "manifest has no entries"));
    }
    Ok(m)
}

fn load_table(path: Option<&Path>) -> Result<Option<EmbeddingTable>> {
    path.map(load_embeddings).transpose().map_err(Into::into)
}

fn parse_split(s: &str) -> Result<Option<Split>> {
    match s {
        "train" => Ok(Some(Split::Train)),
        "test" => Ok(Some(Split::Test)),
        "all" => Ok(None),
        other => Err(usage(format!("unknown split `{other}` (expected train, test or all)"))),
    }
}

fn block_names(blocks: &[BlockKind]) -> Vec<String> {
    blocks.iter().map(|b| b.name().to_owned()).collect()
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Comma-separated blocks, e.g. `mfcc,chroma`.
    #[arg(long)]
    pub blocks: Option<String>,
}

pub fn features(common: &Common, args: &FeaturesArgs) -> Result<()> {
    let mut cfg = common.run_config()?;
    if let Some(b) = &args.blocks {
        cfg.blocks = block_names(&parse_block_list(b).map_err(|e| usage(e.to_string()))?);
    }
    // Export does not need a split, so overlap is irrelevant here.
    let pipe = cfg.pipeline()?;
    let manifest = load_manifest_with(&args.manifest, true)?;
    let table = load_table(args.embeddings.as_deref())?;
    let (schema, vectors) = extract_features(&manifest, table.as_ref(), &pipe)?;
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &schema, &vectors)?;
    emit(common.out.as_deref(), &cfg, &buf)
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub blocks: Option<String>,
    /// gbm, svm-linear or svm-rbf.
    #[arg(long)]
    pub classifier: Option<String>,
    /// Accept participants that appear in both splits.
    #[arg(long)]
    pub allow_overlap: bool,
}

pub fn train(common: &Common, args: &TrainArgs) -> Result<()> {
    let mut cfg = common.run_config()?;
    if let Some(b) = &args.blocks {
        cfg.blocks = block_names(&parse_block_list(b).map_err(|e| usage(e.to_string()))?);
    }
    if let Some(c) = &args.classifier {
        cfg.classifier = c.clone();
    }
    cfg.allow_participant_overlap |= args.allow_overlap;
    let pipe = cfg.pipeline()?;
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| usage("train needs --out <model file>"))?;
    let manifest = load_manifest(&args.manifest, &cfg)?;
    let table = load_table(args.embeddings.as_deref())?;
    let outcome = train_pipeline(&manifest, table.as_ref(), &pipe)?;
    save_model(&outcome.model, out)?;
    write_file(&sidecar(out, ".config.json"), cfg.to_json().as_bytes())?;

    let r = &outcome.report;
    // Same layout as `predict` output, so the two can be diffed directly.
    let clf = &outcome.model.classifier;
    let scores: Vec<Prediction> = r
        .training_scores
        .iter()
        .map(|(id, score)| Prediction {
            segment_id: id.clone(),
            score: *score,
            label: clf.label_for(*score),
            silenced: false,
        })
        .collect();
    let mut buf = Vec::new();
    write_predictions_csv(&mut buf, &scores)?;
    write_file(&sidecar(out, ".train_scores.csv"), &buf)?;
    for id in &r.silent_ids {
        log::warn!("segment `{id}` is silent and was left out of training");
    }
    println!("n_train={}", r.n_train);
    println!("n_used={}", r.n_used);
    println!("n_silent={}", r.silent_ids.len());
    println!("training_accuracy={:?}", r.training_accuracy);
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, conflicts_with = "inputs")]
    pub manifest: Option<PathBuf>,
    /// WAV file to score; repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// train, test or all.
    #[arg(long, default_value = "all")]
    pub split: String,
}

pub fn predict(common: &Common, args: &PredictArgs) -> Result<()> {
    let cfg = common.run_config()?;
    cfg.validate()?;
    let model = load_model(&args.model)?;
    let table = load_table(args.embeddings.as_deref())?;
    let preds = match (&args.manifest, args.inputs.is_empty()) {
        (Some(m), true) => {
            let manifest = load_manifest_with(m, true)?;
            predict_pipeline(
                &model,
                &manifest,
                parse_split(&args.split)?,
                table.as_ref(),
                cfg.workers,
            )?
        }
        (None, false) => {
            let predictor = Predictor::new(&model)?;
            args.inputs
                .iter()
                .map(|p| predictor.predict_file(p, table.as_ref()))
                .collect::<Result<Vec<_>, _>>()?
        }
        _ => return Err(usage("predict needs either --manifest or one or more --input files")),
    };
    let mut buf = Vec::new();
    write_predictions_csv(&mut buf, &preds)?;
    emit(common.out.as_deref(), &cfg, &buf)
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    /// Predictions CSV as written by `predict`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// train, test or all.
    #[arg(long, default_value = "test")]
    pub split: String,
}

fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| file_error(path, e.to_string()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| file_error(path, format!("missing column `{name}`")))
    };
    let (id_c, score_c, label_c) = (col("segment_id")?, col("score")?, col("label")?);
    let silenced_c = headers.iter().position(|h| h == "silenced");
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| file_error(path, e.to_string()))?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let score: f64 = field(score_c)
            .parse()
            .map_err(|_| file_error(path, format!("line {line}: bad score `{}`", field(score_c))))?;
        let label = match field(label_c) {
            "0" => 0,
            "1" => 1,
            other => return Err(file_error(path, format!("line {line}: bad label `{other}`"))),
        };
        out.push(Prediction {
            segment_id: field(id_c).to_owned(),
            score,
            label,
            silenced: silenced_c.is_some_and(|c| field(c) == "1"),
        });
    }
    Ok(out)
}

/// Key-value report: pooled AUC, per-group AUCs and the classification report.
fn render_report(table: &GroupAucTable, report: &crydetect::eval::ClassReport, n: usize) -> String {
    let mut s = format!("n={n}\nauc={:?}\n", table.overall);
    for (g, (auc, count)) in &table.groups {
        match auc {
            GroupAuc::Defined(v) => s.push_str(&format!("group_{g}_auc={v:?}\n")),
            GroupAuc::Undefined => s.push_str(&format!("group_{g}_auc=undefined\n")),
        }
        s.push_str(&format!("group_{g}_n={count}\n"));
    }
    s.push_str(&report.to_string());
    s.push('\n');
    s
}

pub fn evaluate(common: &Common, args: &EvaluateArgs) -> Result<()> {
    let cfg = common.run_config()?;
    cfg.validate()?;
    let manifest = load_manifest_with(&args.manifest, true)?;
    let split = parse_split(&args.split)?;
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .collect();
    if entries.is_empty() {
        return Err(file_error(
            &args.manifest,
            format!("no entries in split `{}`", args.split),
        ));
    }
    let preds = match (&args.model, &args.predictions) {
        (Some(m), None) => {
            let model = load_model(m)?;
            let table = load_table(args.embeddings.as_deref())?;
            predict_pipeline(&model, &manifest, split, table.as_ref(), cfg.workers)?
        }
        (None, Some(p)) => {
            let all = read_predictions(p)?;
            let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(all.len());
            for pr in &all {
                if by_id.insert(pr.segment_id.as_str(), pr).is_some() {
                    return Err(file_error(p, format!("duplicate segment `{}`", pr.segment_id)));
                }
            }
            entries
                .iter()
                .map(|e| {
                    by_id
                        .get(e.id.as_str())
                        .map(|&pr| pr.clone())
                        .ok_or_else(|| file_error(p, format!("no prediction for segment `{}`", e.id)))
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => return Err(usage("evaluate needs exactly one of --model or --predictions")),
    };

    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let predicted: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let labels: Vec<u8> = entries.iter().map(|e| e.label).collect();
    let groups: Vec<&str> = entries.iter().map(|e| e.participant.as_str()).collect();
    let table = per_group_auc(&scores, &labels, &groups)?;
    let report = classification_report(&predicted, &labels)?;
    let text = render_report(&table, &report, entries.len());
    emit(common.out.as_deref(), &cfg, text.as_bytes())?;

    if let Some(out) = common.out.as_deref() {
        let mut g = Vec::new();
        table.write_csv(&mut g)?;
        write_file(&sidecar(out, ".groups.csv"), &g)?;
        let mut r = Vec::new();
        roc_auc(&scores, &labels)?.write_csv(&mut r)?;
        write_file(&sidecar(out, ".roc.csv"), &r)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Semicolon-separated subsets, e.g. `mfcc;mfcc,chroma`. Defaults to
    /// every non-empty subset of the configured blocks.
    #[arg(long)]
    pub subsets: Option<String>,
    #[arg(long)]
    pub classifier: Option<String>,
    #[arg(long)]
    pub allow_overlap: bool,
}

/// Every non-empty subset of `blocks`, smallest first.
fn all_subsets(blocks: &[BlockKind]) -> Vec<Vec<BlockKind>> {
    let mut b = blocks.to_vec();
    b.sort();
    b.dedup();
    let mut out: Vec<Vec<BlockKind>> = (1u32..(1 << b.len()))
        .map(|mask| {
            b.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, k)| *k)
                .collect()
        })
        .collect();
    out.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    out
}

pub fn ablation(common: &Common, args: &AblateArgs) -> Result<()> {
    let mut cfg = common.run_config()?;
    if let Some(c) = &args.classifier {
        cfg.classifier = c.clone();
    }
    cfg.allow_participant_overlap |= args.allow_overlap;
    let pipe = cfg.pipeline()?;
    let subsets = match &args.subsets {
        Some(s) => s
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| parse_block_list(p).map_err(|e| usage(e.to_string())))
            .collect::<Result<Vec<_>>>()?,
        None => all_subsets(&pipe.blocks),
    };
    if subsets.is_empty() || subsets.iter().any(Vec::is_empty) {
        return Err(usage(
            "--subsets needs non-empty block lists such as `mfcc;mfcc,chroma`",
        ));
    }
    let manifest = load_manifest(&args.manifest, &cfg)?;
    let table = load_table(args.embeddings.as_deref())?;
    let rows = ablate(&manifest, table.as_ref(), &pipe, &subsets)?;
    let mut buf = Vec::new();
    write_ablation_csv(&mut buf, &rows)?;
    emit(common.out.as_deref(), &cfg, &buf)
}

#[derive(Args)]
pub struct CompareArgs {
    /// Two or more `group,auc,n` CSV files.
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated model names; defaults to the file stems.
    #[arg(long)]
    pub names: Option<String>,
    #[arg(long)]
    pub rope: Option<f64>,
    #[arg(long)]
    pub n_mc: Option<usize>,
}

/// Group name to AUC (`None` when undefined) from a `group,auc,n` CSV.
fn read_group_csv(path: &Path) -> Result<BTreeMap<String, Option<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| file_error(path, e.to_string()))?;
    let headers = r.headers().map_err(|e| file_error(path, e.to_string()))?.clone();
    let (g, a) = match (
        headers.iter().position(|h| h == "group"),
        headers.iter().position(|h| h == "auc"),
    ) {
        (Some(g), Some(a)) => (g, a),
        _ => return Err(file_error(path, "expected columns `group` and `auc`")),
    };
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| file_error(path, e.to_string()))?;
        let name = rec.get(g).unwrap_or("").to_owned();
        let raw = rec.get(a).unwrap_or("");
        let auc = if raw == "undefined" {
            None
        } else {
            let v: f64 = raw
                .parse()
                .map_err(|_| file_error(path, format!("line {}: bad auc `{raw}`", i + 2)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(file_error(path, format!("line {}: auc {v} outside [0, 1]", i + 2)));
            }
            Some(v)
        };
        if out.insert(name.clone(), auc).is_some() {
            return Err(file_error(path, format!("duplicate group `{name}`")));
        }
    }
    Ok(out)
}

pub fn compare(common: &Common, args: &CompareArgs) -> Result<()> {
    let mut cfg = common.run_config()?;
    if let Some(r) = args.rope {
        cfg.rope = r;
    }
    if let Some(n) = args.n_mc {
        cfg.n_mc = n;
    }
    cfg.validate()?;
    if args.inputs.len() < 2 {
        return Err(usage("compare needs at least two group AUC files"));
    }
    let names: Vec<String> = match &args.names {
        Some(n) => n.split(',').map(|s| s.trim().to_owned()).collect(),
        None => args
            .inputs
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect(),
    };
    if names.len() != args.inputs.len() {
        return Err(usage(format!(
            "--names lists {} names for {} files",
            names.len(),
            args.inputs.len()
        )));
    }
    let tables: Vec<_> = args.inputs.iter().map(|p| read_group_csv(p)).collect::<Result<_>>()?;
    let first: BTreeSet<&String> = tables[0].keys().collect();
    for (i, t) in tables.iter().enumerate().skip(1) {
        let keys: BTreeSet<&String> = t.keys().collect();
        let only: Vec<String> = first.symmetric_difference(&keys).map(|s| s.to_string()).collect();
        if !only.is_empty() {
            return Err(InputError::GroupMismatch {
                a: args.inputs[0].display().to_string(),
                b: args.inputs[i].display().to_string(),
                only,
            }
            .into());
        }
    }

    let mut buf = String::from("a,b,p_left,p_rope,p_right,n_groups,rope,n_mc,seed\n");
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            let mut z = Vec::new();
            for (g, a) in &tables[i] {
                match (a, tables[j][g]) {
                    (Some(a), Some(b)) => z.push(a - b),
                    _ => log::warn!(
                        "group `{g}` has an undefined AUC; left out of {} vs {}",
                        names[i],
                        names[j]
                    ),
                }
            }
            let s = bayes_signed_rank(&z, cfg.rope, cfg.n_mc, cfg.seed)?;
            buf.push_str(&format!(
                "{},{},{:?},{:?},{:?},{},{:?},{},{}\n",
                names[i],
                names[j],
                s.p_left,
                s.p_rope,
                s.p_right,
                z.len(),
                s.rope,
                s.n_mc,
                s.seed
            ));
        }
    }
    emit(common.out.as_deref(), &cfg, buf.as_bytes())
}
