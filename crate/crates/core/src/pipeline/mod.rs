//! End-to-end training, prediction and feature-subset ablation.
//!
//! Every segment goes through the same chain: decode, resample to the
//! pipeline rate, bandpass, silence gate, STFT, per-block frame features,
//! aggregation and assembly in schema order. Segments are processed in
//! parallel; results always follow manifest order.

mod container;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::audio_io::{
    read_wav, AudioSegment, DatasetManifest, ManifestEntry, ManifestError, Resampler, Split, WavError,
    NOMINAL_SEGMENT_SECONDS, PIPELINE_RATE,
};
use crate::dsp::{self, ContrastBands, DspError, FilterSpec, MfccExtractor, Stft};
use crate::eval::{classification_report, EvalError};
use crate::features::{
    aggregate, assemble, fit_scaler, BlockKind, EmbeddingTable, FeatureError, FeatureSchema, FeatureVector,
    ScalerParams,
};
use crate::models::{Classifier, ClassifierKind, ModelError, TrainConfig};

pub use container::{
    load_model, model_from_bytes, model_to_bytes, save_model, ModelFileError, FORMAT_VERSION, MODEL_MAGIC,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("segment `{id}`: {source}")]
    Audio { id: String, source: WavError },
    #[error("segment `{id}`: {source}")]
    Dsp { id: String, source: DspError },
    #[error("segment `{id}`: {source}")]
    Feature { id: String, source: FeatureError },
    #[error("invalid preprocessing parameters: {0}")]
    Preprocess(#[from] DspError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("scaling failed: {0}")]
    Scaling(FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error("schema includes an embedding block but no embedding table was supplied")]
    EmbeddingsRequired,
    #[error("no embedding for segment `{0}`")]
    MissingEmbedding(String),
    #[error("no usable training segments ({silent} of {total} were silent)")]
    NoUsableSegments { silent: usize, total: usize },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("input has feature layout {got}, model expects {expected}")]
    SchemaMismatch { expected: String, got: String },
    #[error("could not build worker pool: {0}")]
    Workers(String),
}

/// Signal conditioning and framing parameters. Stored with every model so
/// prediction repeats the training-time chain exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub sample_rate: u32,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub filter_order: usize,
    pub silence_dbfs: f64,
    pub frame_length: usize,
    pub hop: usize,
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub contrast_bands: usize,
    pub contrast_alpha: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            sample_rate: PIPELINE_RATE,
            band_low_hz: 300.0,
            band_high_hz: 3000.0,
            filter_order: 4,
            silence_dbfs: dsp::DEFAULT_SILENCE_DBFS,
            frame_length: 400,
            hop: 160,
            n_mfcc: 20,
            n_mels: 40,
            contrast_bands: 6,
            contrast_alpha: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    /// Feature blocks, in any order; schemas always use canonical order.
    pub blocks: Vec<BlockKind>,
    pub classifier: ClassifierKind,
    pub train: TrainConfig,
    /// Drop silent segments from the training matrix.
    pub exclude_silent_train: bool,
    /// Label silent segments 0 at prediction time without scoring them.
    pub silence_short_circuit: bool,
    pub allow_participant_overlap: bool,
    /// Segment-level parallelism; 0 uses all cores.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            blocks: vec![BlockKind::Mfcc, BlockKind::Chroma, BlockKind::Contrast],
            classifier: ClassifierKind::Gbm,
            train: TrainConfig::default(),
            exclude_silent_train: true,
            silence_short_circuit: true,
            allow_participant_overlap: false,
            workers: 0,
        }
    }
}

/// Precomputed DSP plans for one preprocessing configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: PreprocessConfig,
    filter: FilterSpec,
    stft: Stft,
    mfcc: MfccExtractor,
    contrast: ContrastBands,
}

/// Aggregated block vectors for one segment, or the silence verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentFeatures {
    Silent { rms_dbfs: f64 },
    Blocks(BTreeMap<BlockKind, Vec<f64>>),
}

impl FeatureExtractor {
    pub fn new(config: &PreprocessConfig) -> Result<Self, DspError> {
        let rate = config.sample_rate;
        Ok(Self {
            filter: FilterSpec::butterworth_bandpass(
                config.filter_order,
                config.band_low_hz,
                config.band_high_hz,
                rate,
            )?,
            stft: Stft::new(config.frame_length, config.hop)?,
            mfcc: MfccExtractor::new(config.n_mfcc, config.n_mels, config.frame_length, rate)?,
            contrast: ContrastBands::new(config.contrast_bands, config.contrast_alpha, config.frame_length, rate)?,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    /// Aggregated dimension of a classical block.
    pub fn block_dim(&self, kind: BlockKind) -> Option<usize> {
        match kind {
            BlockKind::Mfcc => Some(2 * self.config.n_mfcc),
            BlockKind::Chroma => Some(2 * dsp::PITCH_CLASSES.len()),
            BlockKind::Contrast => Some(2 * self.contrast.n_outputs()),
            BlockKind::Embedding => None,
        }
    }

    /// Resampling, bandpass and the silence gate. Returns the conditioned
    /// signal and whether it is silent.
    pub fn condition(&self, seg: &AudioSegment) -> (AudioSegment, dsp::SilenceCheck) {
        let at_rate = if seg.sample_rate == self.config.sample_rate {
            seg.clone()
        } else {
            Resampler::new(seg.sample_rate, self.config.sample_rate).apply(seg)
        };
        let filtered = AudioSegment {
            samples: self.filter.filtfilt(&at_rate.samples),
            sample_rate: at_rate.sample_rate,
            id: at_rate.id,
        };
        let check = dsp::is_silent(&filtered, self.config.silence_dbfs);
        (filtered, check)
    }

    /// Classical blocks requested in `blocks` (embedding entries are ignored).
    /// With `gate` set, silent segments stop before feature extraction.
    pub fn extract(&self, seg: &AudioSegment, blocks: &[BlockKind], gate: bool) -> Result<SegmentFeatures, DspError> {
        let (filtered, check) = self.condition(seg);
        if gate && check.silent {
            return Ok(SegmentFeatures::Silent {
                rms_dbfs: check.rms_dbfs,
            });
        }
        let spec = self.stft.process(&filtered)?;
        let mut out = BTreeMap::new();
        for &kind in blocks {
            let frames = match kind {
                BlockKind::Mfcc => self.mfcc.process(&spec)?,
                BlockKind::Chroma => dsp::chroma(&spec),
                BlockKind::Contrast => self.contrast.process(&spec),
                BlockKind::Embedding => continue,
            };
            // Frames exist: the STFT always yields at least one.
            let v = aggregate(frames.view()).expect("non-empty frame matrix");
            out.insert(kind, v);
        }
        Ok(SegmentFeatures::Blocks(out))
    }
}

/// Schema for `blocks` in canonical order with dimensions filled in.
pub fn build_schema(
    extractor: &FeatureExtractor,
    blocks: &[BlockKind],
    embeddings: Option<&EmbeddingTable>,
) -> Result<FeatureSchema, PipelineError> {
    if blocks.is_empty() {
        return Err(PipelineError::Config("at least one feature block is required".into()));
    }
    let mut spec = Vec::new();
    for kind in BlockKind::ALL {
        if !blocks.contains(&kind) {
            continue;
        }
        let dim = match extractor.block_dim(kind) {
            Some(d) => d,
            None => embeddings.ok_or(PipelineError::EmbeddingsRequired)?.dim(),
        };
        spec.push((kind, dim));
    }
    FeatureSchema::new(spec).map_err(|e| PipelineError::Config(e.to_string()))
}

fn schema_label(schema: &FeatureSchema) -> String {
    schema
        .blocks()
        .iter()
        .map(|(k, d)| format!("{k}:{d}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Workers(e.to_string()))?;
    Ok(pool.install(f))
}

/// One manifest entry after feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub enum Extracted {
    Silent { id: String, rms_dbfs: f64 },
    Features(FeatureVector),
}

impl Extracted {
    pub fn id(&self) -> &str {
        match self {
            Extracted::Silent { id, .. } => id,
            Extracted::Features(v) => &v.segment_id,
        }
    }
}

fn load_segment(path: &Path, entry_id: &str) -> Result<AudioSegment, PipelineError> {
    let mut seg = read_wav(path).map_err(|source| PipelineError::Audio {
        id: entry_id.to_owned(),
        source,
    })?;
    seg.id = entry_id.to_owned();
    if seg.duration_secs() > NOMINAL_SEGMENT_SECONDS + 0.5 {
        log::warn!(
            "segment `{}` lasts {:.2} s; it is treated as one segment",
            entry_id,
            seg.duration_secs()
        );
    }
    Ok(seg)
}

/// Features for one decoded segment under `schema`.
pub fn extract_segment(
    extractor: &FeatureExtractor,
    seg: &AudioSegment,
    schema: &Arc<FeatureSchema>,
    embeddings: Option<&EmbeddingTable>,
    gate: bool,
) -> Result<Extracted, PipelineError> {
    let kinds: Vec<BlockKind> = schema.blocks().iter().map(|(k, _)| *k).collect();
    let feats = extractor
        .extract(seg, &kinds, gate)
        .map_err(|source| PipelineError::Dsp {
            id: seg.id.clone(),
            source,
        })?;
    let blocks = match feats {
        SegmentFeatures::Silent { rms_dbfs } => {
            return Ok(Extracted::Silent {
                id: seg.id.clone(),
                rms_dbfs,
            })
        }
        SegmentFeatures::Blocks(b) => b,
    };
    let embedding: Option<Vec<f64>> = if schema.contains(BlockKind::Embedding) {
        let table = embeddings.ok_or(PipelineError::EmbeddingsRequired)?;
        let v = table
            .get(&seg.id)
            .ok_or_else(|| PipelineError::MissingEmbedding(seg.id.clone()))?;
        Some(v.iter().map(|&x| x as f64).collect())
    } else {
        None
    };
    let parts: Vec<(BlockKind, &[f64])> = blocks.iter().map(|(k, v)| (*k, v.as_slice())).collect();
    assemble(&parts, embedding.as_deref(), schema, seg.id.clone())
        .map(Extracted::Features)
        .map_err(|source| PipelineError::Feature {
            id: seg.id.clone(),
            source,
        })
}

/// Extracts every entry in parallel, keeping manifest order.
pub fn extract_entries(
    extractor: &FeatureExtractor,
    manifest: &DatasetManifest,
    entries: &[&ManifestEntry],
    schema: &Arc<FeatureSchema>,
    embeddings: Option<&EmbeddingTable>,
    gate: bool,
    workers: usize,
) -> Result<Vec<Extracted>, PipelineError> {
    if schema.contains(BlockKind::Embedding) {
        let table = embeddings.ok_or(PipelineError::EmbeddingsRequired)?;
        // Fail before any audio work.
        if let Some(e) = entries.iter().find(|e| table.get(&e.id).is_none()) {
            return Err(PipelineError::MissingEmbedding(e.id.clone()));
        }
    }
    with_workers(workers, || {
        entries
            .par_iter()
            .map(|e| {
                let seg = load_segment(&manifest.resolve(e), &e.id)?;
                extract_segment(extractor, &seg, schema, embeddings, gate)
            })
            .collect::<Result<Vec<_>, _>>()
    })?
}

/// Everything needed to score new audio.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub preprocess: PreprocessConfig,
    pub schema: FeatureSchema,
    pub scaler: ScalerParams,
    pub classifier: Classifier,
    pub silence_short_circuit: bool,
}

impl PipelineModel {
    pub fn check_invariants(&self) -> Result<(), ModelFileError> {
        let d = self.schema.total_dim();
        if self.scaler.dim() != d || self.scaler.stds.len() != d || self.classifier.n_features() != d {
            return Err(ModelFileError::Inconsistent(format!(
                "schema dim {d}, scaler dim {}, classifier dim {}",
                self.scaler.dim(),
                self.classifier.n_features()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub n_train: usize,
    pub n_used: usize,
    pub silent_ids: Vec<String>,
    /// Classifier score of each used training segment, in manifest order.
    pub training_scores: Vec<(String, f64)>,
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: PipelineModel,
    pub report: TrainReport,
}

fn stack(vectors: &[&FeatureVector], dim: usize) -> Array2<f64> {
    let mut x = Array2::zeros((vectors.len(), dim));
    for (mut row, v) in x.rows_mut().into_iter().zip(vectors) {
        row.assign(&ndarray::ArrayView1::from(&v.values[..]));
    }
    x
}

/// Fits the scaler and classifier on the train split of `manifest`.
pub fn train_pipeline(
    manifest: &DatasetManifest,
    embeddings: Option<&EmbeddingTable>,
    config: &PipelineConfig,
) -> Result<TrainOutcome, PipelineError> {
    if !config.allow_participant_overlap {
        manifest.check_disjoint()?;
    }
    let extractor = FeatureExtractor::new(&config.preprocess)?;
    let schema = Arc::new(build_schema(&extractor, &config.blocks, embeddings)?);
    let entries: Vec<&ManifestEntry> = manifest.split(Split::Train).collect();
    if entries.is_empty() {
        return Err(PipelineError::EmptySplit("train"));
    }
    let extracted = extract_entries(
        &extractor,
        manifest,
        &entries,
        &schema,
        embeddings,
        config.exclude_silent_train,
        config.workers,
    )?;
    train_from_features(&extractor, schema, &entries, &extracted, config)
}

/// Training on already extracted features; `entries` and `extracted` are
/// parallel slices.
pub fn train_from_features(
    extractor: &FeatureExtractor,
    schema: Arc<FeatureSchema>,
    entries: &[&ManifestEntry],
    extracted: &[Extracted],
    config: &PipelineConfig,
) -> Result<TrainOutcome, PipelineError> {
    let mut used = Vec::new();
    let mut labels = Vec::new();
    let mut silent_ids = Vec::new();
    for (e, x) in entries.iter().zip(extracted) {
        match x {
            Extracted::Silent { id, .. } => silent_ids.push(id.clone()),
            Extracted::Features(v) => {
                used.push(v);
                labels.push(e.label);
            }
        }
    }
    if !silent_ids.is_empty() {
        log::info!("{} silent training segments excluded", silent_ids.len());
    }
    if used.is_empty() {
        return Err(PipelineError::NoUsableSegments {
            silent: silent_ids.len(),
            total: entries.len(),
        });
    }
    let x = stack(&used, schema.total_dim());
    // Identity feature selection: every assembled column is kept.
    let scaler = fit_scaler(x.view()).map_err(PipelineError::Scaling)?;
    let xs = scaler.transform_matrix(x.view()).map_err(PipelineError::Scaling)?;
    let classifier = Classifier::train(config.classifier, xs.view(), &labels, &config.train)?;

    let mut training_scores = Vec::with_capacity(used.len());
    let mut preds = Vec::with_capacity(used.len());
    for (v, row) in used.iter().zip(xs.rows()) {
        let s = classifier.score(row.as_slice().expect("standard layout"))?;
        preds.push(classifier.label_for(s));
        training_scores.push((v.segment_id.clone(), s));
    }
    let training_accuracy = classification_report(&preds, &labels)?.accuracy;

    Ok(TrainOutcome {
        model: PipelineModel {
            preprocess: extractor.config().clone(),
            schema: (*schema).clone(),
            scaler,
            classifier,
            silence_short_circuit: config.silence_short_circuit,
        },
        report: TrainReport {
            n_train: entries.len(),
            n_used: used.len(),
            silent_ids,
            training_scores,
            training_accuracy,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub segment_id: String,
    pub score: f64,
    pub label: u8,
    pub silenced: bool,
}

/// Scores segments with a trained model, counting classifier invocations.
pub struct Predictor<'a> {
    model: &'a PipelineModel,
    extractor: FeatureExtractor,
    schema: Arc<FeatureSchema>,
    calls: AtomicUsize,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a PipelineModel) -> Result<Self, PipelineError> {
        let extractor = FeatureExtractor::new(&model.preprocess)?;
        Ok(Self {
            model,
            extractor,
            schema: Arc::new(model.schema.clone()),
            calls: AtomicUsize::new(0),
        })
    }

    pub fn classifier_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn check_embeddings(&self, embeddings: Option<&EmbeddingTable>) -> Result<(), PipelineError> {
        if let Some((_, dim)) = self.schema.blocks().iter().find(|(k, _)| *k == BlockKind::Embedding) {
            let table = embeddings.ok_or(PipelineError::EmbeddingsRequired)?;
            if table.dim() != *dim {
                return Err(PipelineError::SchemaMismatch {
                    expected: schema_label(&self.schema),
                    got: format!("embedding:{}", table.dim()),
                });
            }
        }
        Ok(())
    }

    fn score_extracted(&self, x: Extracted) -> Result<Prediction, PipelineError> {
        match x {
            Extracted::Silent { id, .. } => Ok(Prediction {
                segment_id: id,
                score: 0.0,
                label: 0,
                silenced: true,
            }),
            Extracted::Features(v) => {
                let xs = self
                    .model
                    .scaler
                    .transform(&v.values)
                    .map_err(|source| PipelineError::Feature {
                        id: v.segment_id.clone(),
                        source,
                    })?;
                self.calls.fetch_add(1, Ordering::Relaxed);
                let score = self.model.classifier.score(&xs)?;
                Ok(Prediction {
                    label: self.model.classifier.label_for(score),
                    segment_id: v.segment_id,
                    score,
                    silenced: false,
                })
            }
        }
    }

    pub fn predict_segment(
        &self,
        seg: &AudioSegment,
        embeddings: Option<&EmbeddingTable>,
    ) -> Result<Prediction, PipelineError> {
        self.check_embeddings(embeddings)?;
        let x = extract_segment(
            &self.extractor,
            seg,
            &self.schema,
            embeddings,
            self.model.silence_short_circuit,
        )?;
        self.score_extracted(x)
    }

    pub fn predict_file(&self, path: &Path, embeddings: Option<&EmbeddingTable>) -> Result<Prediction, PipelineError> {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let seg = load_segment(path, &id)?;
        self.predict_segment(&seg, embeddings)
    }

    /// Predictions for `entries`, in the given order.
    pub fn predict_entries(
        &self,
        manifest: &DatasetManifest,
        entries: &[&ManifestEntry],
        embeddings: Option<&EmbeddingTable>,
        workers: usize,
    ) -> Result<Vec<Prediction>, PipelineError> {
        self.check_embeddings(embeddings)?;
        let extracted = extract_entries(
            &self.extractor,
            manifest,
            entries,
            &self.schema,
            embeddings,
            self.model.silence_short_circuit,
            workers,
        )?;
        extracted.into_iter().map(|x| self.score_extracted(x)).collect()
    }
}

/// Predictions for every entry of `manifest` (optionally one split).
pub fn predict_pipeline(
    model: &PipelineModel,
    manifest: &DatasetManifest,
    split: Option<Split>,
    embeddings: Option<&EmbeddingTable>,
    workers: usize,
) -> Result<Vec<Prediction>, PipelineError> {
    let predictor = Predictor::new(model)?;
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .collect();
    predictor.predict_entries(manifest, &entries, embeddings, workers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub subset: Vec<BlockKind>,
    pub accuracy: f64,
    pub f1: f64,
}

impl AblationRow {
    /// Block names joined with `+`, in canonical order.
    pub fn name(&self) -> String {
        let mut kinds = self.subset.clone();
        kinds.sort();
        kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")
    }
}

/// Trains on the train split and scores the test split once per subset.
/// Reported f1 is the support-weighted f1.
pub fn ablate(
    manifest: &DatasetManifest,
    embeddings: Option<&EmbeddingTable>,
    config: &PipelineConfig,
    subsets: &[Vec<BlockKind>],
) -> Result<Vec<AblationRow>, PipelineError> {
    if subsets.iter().any(|s| s.is_empty()) {
        return Err(PipelineError::Config("ablation subsets must be non-empty".into()));
    }
    if !config.allow_participant_overlap {
        manifest.check_disjoint()?;
    }
    let extractor = FeatureExtractor::new(&config.preprocess)?;
    // Extract the union once and slice per subset.
    let mut union: Vec<BlockKind> = subsets.iter().flatten().copied().collect();
    union.sort();
    union.dedup();
    let full = Arc::new(build_schema(&extractor, &union, embeddings)?);

    let train: Vec<&ManifestEntry> = manifest.split(Split::Train).collect();
    let test: Vec<&ManifestEntry> = manifest.split(Split::Test).collect();
    if train.is_empty() {
        return Err(PipelineError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(PipelineError::EmptySplit("test"));
    }
    let workers = config.workers;
    let train_x = extract_entries(
        &extractor,
        manifest,
        &train,
        &full,
        embeddings,
        config.exclude_silent_train,
        workers,
    )?;
    let test_x = extract_entries(
        &extractor,
        manifest,
        &test,
        &full,
        embeddings,
        config.silence_short_circuit,
        workers,
    )?;

    let mut rows = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let schema = Arc::new(build_schema(&extractor, subset, embeddings)?);
        let project = |x: &Extracted| project_features(x, &full, &schema);
        let tr: Vec<Extracted> = train_x.iter().map(project).collect();
        let outcome = train_from_features(&extractor, Arc::clone(&schema), &train, &tr, config)?;
        let predictor = Predictor::new(&outcome.model)?;
        let preds: Vec<u8> = test_x
            .iter()
            .map(|x| predictor.score_extracted(project(x)).map(|p| p.label))
            .collect::<Result<_, _>>()?;
        let labels: Vec<u8> = test.iter().map(|e| e.label).collect();
        let report = classification_report(&preds, &labels)?;
        rows.push(AblationRow {
            subset: subset.clone(),
            accuracy: report.accuracy,
            f1: report.weighted_f1,
        });
    }
    Ok(rows)
}

fn project_features(x: &Extracted, full: &FeatureSchema, target: &Arc<FeatureSchema>) -> Extracted {
    match x {
        Extracted::Silent { .. } => x.clone(),
        Extracted::Features(v) => {
            let mut values = Vec::with_capacity(target.total_dim());
            for (kind, _) in target.blocks() {
                let r = full.range(*kind).expect("subset of the union schema");
                values.extend_from_slice(&v.values[r]);
            }
            Extracted::Features(FeatureVector {
                values,
                schema: Arc::clone(target),
                segment_id: v.segment_id.clone(),
            })
        }
    }
}

/// `subset,accuracy,f1`.
pub fn write_ablation_csv<W: std::io::Write>(w: W, rows: &[AblationRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["subset", "accuracy", "f1"])?;
    for r in rows {
        out.write_record([r.name(), format!("{:?}", r.accuracy), format!("{:?}", r.f1)])?;
    }
    out.flush()?;
    Ok(())
}

/// `segment_id,score,label,silenced`.
pub fn write_predictions_csv<W: std::io::Write>(w: W, preds: &[Prediction]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["segment_id", "score", "label", "silenced"])?;
    for p in preds {
        out.write_record([
            p.segment_id.clone(),
            format!("{:?}", p.score),
            p.label.to_string(),
            (p.silenced as u8).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Feature vectors of every entry (silent segments included) for export.
pub fn extract_features(
    manifest: &DatasetManifest,
    embeddings: Option<&EmbeddingTable>,
    config: &PipelineConfig,
) -> Result<(FeatureSchema, Vec<FeatureVector>), PipelineError> {
    let extractor = FeatureExtractor::new(&config.preprocess)?;
    let schema = Arc::new(build_schema(&extractor, &config.blocks, embeddings)?);
    let entries: Vec<&ManifestEntry> = manifest.entries.iter().collect();
    let extracted = extract_entries(
        &extractor,
        manifest,
        &entries,
        &schema,
        embeddings,
        false,
        config.workers,
    )?;
    let vectors = extracted
        .into_iter()
        .map(|x| match x {
            Extracted::Features(v) => v,
            Extracted::Silent { .. } => unreachable!("gate disabled"),
        })
        .collect();
    Ok(((*schema).clone(), vectors))
}
