//! Stage wiring: ingest → generate → group → export, each stage reading and
//! writing files under one output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{GroupingError, IngestError, StoreError};
use crate::generators::{generate_all, Discard};
use crate::grouping::{assign_group, collect_original_candidates, generated_candidate, relabel_likelihoods};
use crate::java::{build_project_model, CorpusConfig};
use crate::metrics::{HeuristicAdvisor, Thresholds};
use crate::model::{ProjectModel, Split};
use crate::review::{Annotation, Rejection, ReviewQueue, DEFAULT_LEASE_MINUTES};
use crate::sample::{CandidateSample, PIPELINE_VERSION};
use crate::store::{self, DatasetMeta, DatasetStats, SampleRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub balance: bool,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub corpus: Vec<CorpusConfig>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.corpus.is_empty() {
            return Err("at least one [[corpus]] entry is required".into());
        }
        if self.balance && self.seed.is_none() {
            return Err("balance = true needs a seed".into());
        }
        let mut seen = BTreeMap::new();
        for c in &self.corpus {
            if c.root_dirs.is_empty() {
                return Err(format!("corpus {} has no root_dirs", c.project_id));
            }
            if seen.insert(c.project_id.as_str(), ()).is_some() {
                return Err(format!("corpus {} listed twice", c.project_id));
            }
        }
        self.thresholds.validate()
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts::new(&self.output.dir)
    }

    /// Project id → split, as configured.
    pub fn splits(&self) -> BTreeMap<String, Split> {
        self.corpus.iter().map(|c| (c.project_id.clone(), c.role)).collect()
    }
}

/// File layout of one output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Artifacts { dir: dir.to_path_buf() }
    }
    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }
    pub fn candidates(&self) -> PathBuf {
        self.dir.join("candidates.jsonl")
    }
    pub fn discards(&self) -> PathBuf {
        self.dir.join("discards.jsonl")
    }
    pub fn samples(&self) -> PathBuf {
        self.dir.join("samples.jsonl")
    }
    pub fn annotations(&self) -> PathBuf {
        self.dir.join("annotations.jsonl")
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.jsonl")
    }
    pub fn meta(&self) -> PathBuf {
        self.dir.join("dataset.meta.json")
    }
    pub fn stats_txt(&self) -> PathBuf {
        self.dir.join("stats.txt")
    }
    pub fn stats_json(&self) -> PathBuf {
        self.dir.join("stats.json")
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input {0}; run the earlier stage first")]
    MissingInput(PathBuf),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("grouping failed for {entity}: {source}")]
    Grouping {
        entity: String,
        #[source]
        source: GroupingError,
    },
    #[error("annotation log rejected: {0}")]
    Annotations(Rejection),
    #[error("dataset validation failed with {} violation(s)", .0.len())]
    Validation(Vec<String>),
}

pub fn require(path: &Path) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput(path.to_path_buf()))
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(StoreError::from)?;
    bytes.push(b'\n');
    store::write_atomic(path, &bytes)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), source: e })?;
    serde_json::from_str(&text).map_err(|e| {
        PipelineError::Store(StoreError::Malformed { path: path.to_path_buf(), line: e.line(), message: e.to_string() })
    })
}

fn read_records_required<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    require(path)?;
    Ok(store::read_jsonl(path)?)
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

pub fn ingest(cfg: &PipelineConfig) -> Result<Vec<ProjectModel>, PipelineError> {
    for r in cfg.corpus.iter().flat_map(|c| &c.root_dirs) {
        require(r)?;
    }
    cfg.corpus.iter().map(|c| Ok(build_project_model(c)?)).collect()
}

pub fn write_models(cfg: &PipelineConfig, models: &[ProjectModel]) -> Result<(), PipelineError> {
    write_json(&cfg.artifacts().model(), &models)
}

pub fn read_models(cfg: &PipelineConfig) -> Result<Vec<ProjectModel>, PipelineError> {
    read_json(&cfg.artifacts().model())
}

/// Original candidates followed by generated ones, per project in
/// configuration order.
pub fn generate(models: &[ProjectModel], thresholds: &Thresholds) -> (Vec<CandidateSample>, Vec<Discard>) {
    let advisor = HeuristicAdvisor;
    let mut candidates = Vec::new();
    let mut discards = Vec::new();
    for m in models {
        candidates.extend(collect_original_candidates(m, thresholds, &advisor));
        let report = generate_all(m);
        candidates.extend(report.samples.iter().map(|s| generated_candidate(s, thresholds)));
        discards.extend(report.discards);
    }
    (candidates, discards)
}

pub fn write_candidates(cfg: &PipelineConfig, c: &[CandidateSample], d: &[Discard]) -> Result<(), PipelineError> {
    let a = cfg.artifacts();
    store::write_jsonl(&a.candidates(), c)?;
    store::write_jsonl(&a.discards(), d)?;
    Ok(())
}

pub fn read_candidates(cfg: &PipelineConfig) -> Result<Vec<CandidateSample>, PipelineError> {
    read_records_required(&cfg.artifacts().candidates())
}

/// Routes every candidate under the configured thresholds. Likelihoods are
/// re-derived first, so regrouping a stored pool with new bounds works.
pub fn group(cfg: &PipelineConfig, mut candidates: Vec<CandidateSample>) -> Result<Vec<SampleRecord>, PipelineError> {
    relabel_likelihoods(&mut candidates, &cfg.thresholds);
    let splits = cfg.splits();
    candidates
        .iter()
        .map(|c| {
            let g = assign_group(c).map_err(|source| PipelineError::Grouping { entity: c.provenance.entity.clone(), source })?;
            let split = *splits.get(&c.provenance.project).ok_or_else(|| {
                PipelineError::Config(format!("candidate from unconfigured project {}", c.provenance.project))
            })?;
            Ok(store::make_record(c, &g, split))
        })
        .collect()
}

pub fn write_samples(cfg: &PipelineConfig, records: &[SampleRecord]) -> Result<(), PipelineError> {
    Ok(store::write_records(&cfg.artifacts().samples(), records)?)
}

pub fn read_samples(cfg: &PipelineConfig) -> Result<Vec<SampleRecord>, PipelineError> {
    read_records_required(&cfg.artifacts().samples())
}

/// The annotation log; absent means nothing reviewed yet.
pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, PipelineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(store::read_jsonl(path)?)
}

pub struct Export {
    pub records: Vec<SampleRecord>,
    pub meta: DatasetMeta,
    pub stats: DatasetStats,
}

/// Auto-labeled plus reviewed records, optionally balanced.
pub fn export(cfg: &PipelineConfig, samples: Vec<SampleRecord>, log: Vec<Annotation>) -> Result<Export, PipelineError> {
    let queue = ReviewQueue::new(samples, log, chrono::Duration::minutes(DEFAULT_LEASE_MINUTES))
        .map_err(PipelineError::Annotations)?;
    Ok(finish_export(cfg, queue.export_final()))
}

/// Balancing, stats and metadata for a set of exportable records.
pub fn finish_export(cfg: &PipelineConfig, mut records: Vec<SampleRecord>) -> Export {
    let seed = cfg.seed.unwrap_or(0);
    if cfg.balance {
        records = store::balance_all(records, seed);
    }
    let stats = store::compute_stats(&records);
    let meta = DatasetMeta {
        pipeline_version: PIPELINE_VERSION.to_string(),
        seed,
        balanced: cfg.balance,
        thresholds: cfg.thresholds,
        loc_definition: crate::metrics::LOC_DEFINITION.to_string(),
        projects: cfg.splits(),
        records: records.len(),
    };
    Export { records, meta, stats }
}

pub fn write_export(cfg: &PipelineConfig, e: &Export) -> Result<(), PipelineError> {
    let a = cfg.artifacts();
    store::write_records(&a.dataset(), &e.records)?;
    write_json(&a.meta(), &e.meta)?;
    write_stats(&a, &e.stats)
}

pub fn write_stats(a: &Artifacts, st: &DatasetStats) -> Result<(), PipelineError> {
    store::write_atomic(&a.stats_txt(), st.render().as_bytes())?;
    write_json(&a.stats_json(), st)
}

pub fn read_dataset(path: &Path) -> Result<Vec<SampleRecord>, PipelineError> {
    read_records_required(path)
}

/// Re-checks the exported dataset; the stats are the validator's own recount.
pub fn validate(cfg: &PipelineConfig, records: &[SampleRecord]) -> Result<DatasetStats, PipelineError> {
    let mut errs = store::validate_records(records, &cfg.thresholds);
    let splits = cfg.splits();
    for r in records {
        match splits.get(&r.provenance.project) {
            Some(s) if *s != r.split => errs.push(format!("{}: split differs from the configured role", r.id)),
            None => errs.push(format!("{}: project {} is not configured", r.id, r.provenance.project)),
            _ => {}
        }
    }
    if errs.is_empty() {
        Ok(store::compute_stats(records))
    } else {
        Err(PipelineError::Validation(errs))
    }
}

pub struct RunSummary {
    pub candidates: usize,
    pub discards: usize,
    pub samples: usize,
    /// Counts over all grouped samples, including pending manual review.
    pub grouped: DatasetStats,
    /// Counts over the exported dataset.
    pub stats: DatasetStats,
}

/// Every stage in order, persisting each artifact, then validation.
pub fn run(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let models = ingest(cfg)?;
    write_models(cfg, &models)?;
    let (candidates, discards) = generate(&models, &cfg.thresholds);
    write_candidates(cfg, &candidates, &discards)?;
    let n_candidates = candidates.len();
    let samples = group(cfg, candidates)?;
    write_samples(cfg, &samples)?;
    let n_samples = samples.len();
    let grouped = store::compute_stats(&samples);
    let log = read_annotations(&cfg.artifacts().annotations())?;
    let e = export(cfg, samples, log)?;
    write_export(cfg, &e)?;
    let stats = validate(cfg, &e.records)?;
    Ok(RunSummary { candidates: n_candidates, discards: discards.len(), samples: n_samples, grouped, stats })
}
