//! End-to-end orchestration behind the CLI subcommands: config parsing,
//! on-disk dataset layout, and the full fuse -> balance -> select ->
//! compare-models run.

use crate::audio;
use crate::classical::{ForestHyper, LogRegHyper};
use crate::conv1d::{history_csv, TrainHyper};
use crate::error::{Error, Result};
use crate::eval::{
    classification_report, compare_models, confusion, fold_table, report_table, train_inductive,
    FoldReport, ModelSpec,
};
use crate::explain::{lime_explain, modality_rollup, LimeOptions, LocalExplanation};
use crate::gcn::{build_graph, GcnHyper};
use crate::ingest::{
    balance_classes, load_manifest, load_samples, read_feature_csv, split_dataset,
    write_feature_csv, FeatureVector, FusionConfig, ModalitySpans, Sample,
};
use crate::math::{mix, RngStream};
use crate::model::{load_model, save_model, Predictor, SavedModel};
use crate::select::{select_features, apply_mask, SelectionMask, DEFAULT_OVERLAP_THRESH, DEFAULT_R_THRESH};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_seed() -> u64 {
    0
}
fn default_len() -> usize {
    60
}
fn default_k() -> usize {
    5
}
fn default_models() -> Vec<String> {
    vec![
        "logreg".to_string(),
        "random_forest".to_string(),
        "conv1d".to_string(),
    ]
}
fn default_true() -> bool {
    true
}
fn default_r_thresh() -> f64 {
    DEFAULT_R_THRESH
}
fn default_overlap_thresh() -> f64 {
    DEFAULT_OVERLAP_THRESH
}
fn default_threads() -> usize {
    1
}

/// Flat JSON pipeline configuration. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_len")]
    pub audio_len: usize,
    #[serde(default = "default_len")]
    pub visual_len: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default = "default_true")]
    pub select: bool,
    #[serde(default = "default_r_thresh")]
    pub r_threshold: f64,
    #[serde(default = "default_overlap_thresh")]
    pub overlap_threshold: f64,
    #[serde(default)]
    pub no_annotations: bool,
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// raw inputs: manifest JSON, or a prebuilt dataset directory
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub logreg: Option<LogRegHyper>,
    #[serde(default)]
    pub random_forest: Option<ForestHyper>,
    #[serde(default)]
    pub conv1d: Option<TrainHyper>,
    #[serde(default)]
    pub gcn: Option<GcnHyper>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults always parse")
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.k < 2 {
            return Err(Error::config("k must be at least 2"));
        }
        if self.threads == 0 {
            return Err(Error::config("threads must be positive"));
        }
        if self.audio_len == 0 || self.visual_len == 0 {
            return Err(Error::config("fusion lengths must be positive"));
        }
        if !(0.0..=1.0).contains(&self.r_threshold) {
            return Err(Error::config("r_threshold must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.overlap_threshold) {
            return Err(Error::config("overlap_threshold must lie in [0, 1]"));
        }
        if self.models.is_empty() {
            return Err(Error::config("no models configured"));
        }
        for m in &self.models {
            ModelSpec::from_name(m)?;
        }
        Ok(())
    }

    pub fn fusion(&self) -> FusionConfig {
        FusionConfig {
            audio_len: self.audio_len,
            visual_len: self.visual_len,
        }
    }

    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        self.models
            .iter()
            .map(|name| {
                Ok(match (ModelSpec::from_name(name)?, self) {
                    (ModelSpec::Logreg { .. }, cfg) if cfg.logreg.is_some() => ModelSpec::Logreg {
                        hyper: cfg.logreg.clone().unwrap(),
                    },
                    (ModelSpec::RandomForest { .. }, cfg) if cfg.random_forest.is_some() => {
                        ModelSpec::RandomForest {
                            hyper: cfg.random_forest.clone().unwrap(),
                        }
                    }
                    (ModelSpec::Conv1d { .. }, cfg) if cfg.conv1d.is_some() => ModelSpec::Conv1d {
                        hyper: cfg.conv1d.unwrap(),
                    },
                    (ModelSpec::Gcn { .. }, cfg) if cfg.gcn.is_some() => ModelSpec::Gcn {
                        hyper: cfg.gcn.unwrap(),
                    },
                    (spec, _) => spec,
                })
            })
            .collect()
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let config: PipelineConfig = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

// ---- on-disk dataset layout ------------------------------------------------

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Persist samples as features.csv + labels.csv + spans.json in `dir`.
pub fn write_dataset(dir: &Path, samples: &[Sample]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let rows: Vec<(String, Vec<f64>)> = samples
        .iter()
        .map(|s| (s.id.clone(), s.features.values.clone()))
        .collect();
    write_feature_csv(&dir.join("features.csv"), &rows)?;
    let mut labels = String::from("id,label\n");
    for s in samples {
        labels.push_str(&format!("{},{}\n", s.id, s.label));
    }
    write_text(&dir.join("labels.csv"), &labels)?;
    let spans = samples
        .first()
        .map(|s| s.features.spans.clone())
        .ok_or_else(|| Error::precondition("write_dataset: no samples"))?;
    write_text(&dir.join("spans.json"), &serde_json::to_string_pretty(&spans)?)
}

/// Load a dataset directory written by `write_dataset`.
pub fn read_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let rows = read_feature_csv(&dir.join("features.csv"))?;
    let labels_path = dir.join("labels.csv");
    let labels_text = std::fs::read_to_string(&labels_path)
        .map_err(|e| Error::io(labels_path.display().to_string(), e))?;
    let mut labels = BTreeMap::new();
    for (lineno, line) in labels_text.lines().enumerate().skip(1) {
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| Error::format(lineno + 1, "labels.csv: missing comma"))?;
        let label: u8 = label
            .trim()
            .parse()
            .map_err(|_| Error::format(lineno + 1, format!("labels.csv: bad label '{label}'")))?;
        if label > 1 {
            return Err(Error::format(lineno + 1, format!("labels.csv: label {label} outside {{0,1}}")));
        }
        labels.insert(id.to_string(), label);
    }
    let spans_path = dir.join("spans.json");
    let spans_text = std::fs::read_to_string(&spans_path)
        .map_err(|e| Error::io(spans_path.display().to_string(), e))?;
    let spans: ModalitySpans = serde_json::from_str(&spans_text)?;

    rows.into_iter()
        .map(|(id, values)| {
            let label = *labels
                .get(&id)
                .ok_or_else(|| Error::precondition(format!("labels.csv: no label for '{id}'")))?;
            Ok(Sample {
                id,
                label,
                features: FeatureVector {
                    values,
                    spans: spans.clone(),
                },
            })
        })
        .collect()
}

// ---- commands ----------------------------------------------------------------

/// `extract`: audio feature CSV per manifest entry + an index file.
/// Per-file failures are collected; any failure writes errors.txt and
/// reports the batch as a data error.
pub fn cmd_extract(manifest_path: &Path, out_dir: &Path) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut index = String::from("id,label,file\n");
    let mut errors = Vec::new();
    for entry in &manifest.entries {
        let Some(path) = &entry.audio_path else {
            continue;
        };
        let result = std::fs::read(path)
            .map_err(|e| Error::io(path.display().to_string(), e))
            .and_then(|bytes| audio::read_wav(&bytes))
            .and_then(|signal| audio::extract_audio_features(&signal));
        match result {
            Ok(vector) => {
                let file = format!("{}.csv", entry.id);
                write_feature_csv(&out_dir.join(&file), &[(entry.id.clone(), vector)])?;
                index.push_str(&format!("{},{},{file}\n", entry.id, entry.label));
            }
            Err(e) => errors.push(format!("{}: {e}", entry.id)),
        }
    }
    write_text(&out_dir.join("index.csv"), &index)?;
    if errors.is_empty() {
        Ok(())
    } else {
        write_text(&out_dir.join("errors.txt"), &(errors.join("\n") + "\n"))?;
        Err(Error::Validation(errors))
    }
}

/// `build`: fuse all manifest modalities into a dataset directory.
pub fn cmd_build(manifest_path: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let samples = load_samples(&manifest, &config.fusion())?;
    write_dataset(out_dir, &samples)
}

/// `select`: fit the correlation/KDE mask on a dataset, write selection.csv.
pub fn cmd_select(dataset_dir: &Path, out_path: &Path, config: &PipelineConfig) -> Result<SelectionMask> {
    let samples = read_dataset(dataset_dir)?;
    let mask = select_features(&samples, config.r_threshold, config.overlap_threshold)?;
    write_text(out_path, &mask.to_csv())?;
    Ok(mask)
}

/// `train`: fit one inductive model on a 70/10/20 split, save model JSON
/// (+ curve.csv when the family records a training curve).
pub fn cmd_train(
    dataset_dir: &Path,
    model_name: &str,
    out_dir: &Path,
    config: &PipelineConfig,
) -> Result<PathBuf> {
    let base = ModelSpec::from_name(model_name)?;
    let spec = config
        .model_specs()?
        .into_iter()
        .find(|s| s.name() == base.name())
        .unwrap_or(base);
    let samples = read_dataset(dataset_dir)?;
    let (train, val, _test) =
        split_dataset(&samples, (0.7, 0.1, 0.2), &mut RngStream::new(mix(config.seed, 0)))?;
    let outcome = train_inductive(&spec, &samples, &train, &val, mix(config.seed, 1))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let model_path = out_dir.join(format!("{}.model.json", spec.name()));
    save_model(&outcome.model, &model_path)?;
    if let Some(history) = &outcome.history {
        write_text(&out_dir.join(format!("{}.curve.csv", spec.name())), &history_csv(history))?;
    }
    Ok(model_path)
}

/// `evaluate`: score a saved model over a whole dataset.
pub fn cmd_evaluate(dataset_dir: &Path, model_path: &Path) -> Result<String> {
    let samples = read_dataset(dataset_dir)?;
    let model = load_model(model_path)?;
    let y_true: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let y_pred: Vec<u8> = samples
        .iter()
        .map(|s| model.predict(&s.features.values))
        .collect();
    let report = classification_report(&confusion(&y_true, &y_pred)?)?;
    Ok(report_table(&report))
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub k: usize,
    pub n_samples: usize,
    pub selected_features: Option<usize>,
    pub models: Vec<FoldReport>,
}

fn load_run_samples(config: &PipelineConfig, input: Option<&Path>) -> Result<Vec<Sample>> {
    let source = input
        .map(Path::to_path_buf)
        .or_else(|| config.dataset.clone())
        .or_else(|| config.manifest.clone())
        .ok_or_else(|| Error::config("no dataset or manifest configured"))?;
    if source.is_dir() {
        read_dataset(&source)
    } else {
        let manifest = load_manifest(&source)?;
        load_samples(&manifest, &config.fusion())
    }
}

fn zero_annotations(samples: &mut [Sample]) {
    for s in samples.iter_mut() {
        let (start, end) = s.features.spans.annotation;
        for v in &mut s.features.values[start..end] {
            *v = 0.0;
        }
    }
}

/// `run`: fuse -> balance -> (optional select) -> compare models ->
/// report + explanation artifacts in `out_dir`.
pub fn cmd_run(
    config: &PipelineConfig,
    input: Option<&Path>,
    out_dir: &Path,
) -> Result<RunReport> {
    config.validate()?;
    let mut samples = load_run_samples(config, input)?;
    samples = balance_classes(samples, &mut RngStream::new(mix(config.seed, 100)))?;
    if config.no_annotations {
        zero_annotations(&mut samples);
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let mut selected = None;
    if config.select {
        let mask = select_features(&samples, config.r_threshold, config.overlap_threshold)?;
        apply_mask(&mut samples, &mask);
        write_text(&out_dir.join("selection.csv"), &mask.to_csv())?;
        selected = Some(mask.kept_indices().len());
    }

    // reference split, exported for downstream scripting
    let (train, val, test) =
        split_dataset(&samples, (0.7, 0.1, 0.2), &mut RngStream::new(mix(config.seed, 200)))?;
    for (name, idx) in [("train.txt", &train), ("val.txt", &val), ("test.txt", &test)] {
        let body: String = idx.iter().map(|&i| format!("{}\n", samples[i].id)).collect();
        write_text(&out_dir.join(name), &body)?;
    }

    let specs = config.model_specs()?;
    let reports = compare_models(&specs, &samples, config.k, config.seed, config.threads)?;

    if specs.iter().any(|s| matches!(s, ModelSpec::Gcn { .. })) {
        let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.values.clone()).collect();
        let graph = build_graph(&rows, crate::gcn::DEFAULT_K.min(samples.len() - 1))?;
        write_text(&out_dir.join("graph.csv"), &graph.edge_list_csv())?;
    }

    let run = RunReport {
        seed: config.seed,
        k: config.k,
        n_samples: samples.len(),
        selected_features: selected,
        models: reports,
    };
    write_text(&out_dir.join("report.json"), &serde_json::to_string_pretty(&run)?)?;

    let mut text = fold_table(&run.models);
    for report in &run.models {
        if let Some(first) = report.folds.first() {
            text.push_str(&format!("\n{} (fold 1)\n", report.model));
            text.push_str(&report_table(&first.report));
        }
    }
    write_text(&out_dir.join("report.txt"), &text)?;

    // explanation sample: first inductive spec, first test instance
    if let Some(spec) = specs
        .iter()
        .find(|s| !matches!(s, ModelSpec::Gcn { .. }))
    {
        if let Some(&probe) = test.first() {
            let mut train_all = train.clone();
            train_all.extend(val.iter().copied());
            train_all.sort_unstable();
            let outcome =
                train_inductive(spec, &samples, &train_all, &val, mix(config.seed, 300))?;
            let explanation = explain_sample(
                &outcome.model,
                &samples,
                &samples[probe].id,
                mix(config.seed, 301),
            )?;
            write_text(
                &out_dir.join("explanation.json"),
                &serde_json::to_string_pretty(&explanation)?,
            )?;
        }
    }
    Ok(run)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplanationOutput {
    #[serde(flatten)]
    pub local: LocalExplanation,
    pub rollup: BTreeMap<String, f64>,
}

fn feature_stds(samples: &[Sample]) -> Vec<f64> {
    let d = samples[0].features.values.len();
    let n = samples.len() as f64;
    let mut means = vec![0.0; d];
    for s in samples {
        for (m, &v) in means.iter_mut().zip(&s.features.values) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; d];
    for s in samples {
        for (j, &v) in s.features.values.iter().enumerate() {
            stds[j] += (v - means[j]) * (v - means[j]);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0; // constant features perturb at unit scale
        }
    }
    stds
}

/// LIME explanation with a modality rollup computed over the full
/// coefficient vector (so rollup sums match the attribution total exactly),
/// truncated to the top 10 attributions for display.
pub fn explain_sample(
    model: &SavedModel,
    samples: &[Sample],
    id: &str,
    seed: u64,
) -> Result<ExplanationOutput> {
    let sample = samples
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::config(format!("unknown sample id '{id}'")))?;
    let stds = feature_stds(samples);
    let d = sample.features.values.len();
    let full = lime_explain(
        model,
        id,
        &sample.features.values,
        &stds,
        &sample.features.spans,
        &LimeOptions {
            k_top: d,
            ..LimeOptions::default()
        },
        &mut RngStream::new(seed),
    )?;
    let mut dense = vec![0.0; d];
    for a in &full.attributions {
        dense[a.feature] = a.value;
    }
    let rollup = modality_rollup(&dense, &sample.features.spans);
    let mut local = full;
    local.attributions.truncate(10);
    Ok(ExplanationOutput { local, rollup })
}

/// `explain`: load model + dataset, emit explanation JSON for one id.
pub fn cmd_explain(
    model_path: &Path,
    dataset_dir: &Path,
    id: &str,
    seed: u64,
    out_path: Option<&Path>,
) -> Result<String> {
    let model = load_model(model_path)?;
    let samples = read_dataset(dataset_dir)?;
    let explanation = explain_sample(&model, &samples, id, seed)?;
    let json = serde_json::to_string_pretty(&explanation)?;
    if let Some(path) = out_path {
        write_text(path, &json)?;
    }
    Ok(json)
}
