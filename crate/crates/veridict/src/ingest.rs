//! Manifest-driven loading, modality fusion, class balancing, and
//! deterministic splitting.

use crate::audio;
use crate::error::{Error, Result};
use crate::math::RngStream;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Number of gesture annotation flags per sample.
pub const N_ANNOTATIONS: usize = 39;

pub const LABEL_TRUTHFUL: u8 = 0;
pub const LABEL_DECEPTIVE: u8 = 1;

#[derive(Debug, Clone, Deserialize)]
struct RawEntry {
    id: String,
    label: String,
    #[serde(default)]
    audio: Option<String>,
    #[serde(default)]
    visual: Option<String>,
    #[serde(default)]
    annotations: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub id: String,
    /// 0 = truthful, 1 = deceptive
    pub label: u8,
    pub audio_path: Option<PathBuf>,
    pub visual_path: Option<PathBuf>,
    pub annotations: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn label_counts(&self) -> (usize, usize) {
        let deceptive = self.entries.iter().filter(|e| e.label == 1).count();
        (self.entries.len() - deceptive, deceptive)
    }
}

/// Half-open index ranges of each modality inside a fused vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalitySpans {
    pub audio: (usize, usize),
    pub visual: (usize, usize),
    pub annotation: (usize, usize),
}

impl ModalitySpans {
    pub fn total_len(&self) -> usize {
        self.annotation.1
    }

    pub fn span_of(&self, index: usize) -> &'static str {
        if index < self.audio.1 {
            "audio"
        } else if index < self.visual.1 {
            "visual"
        } else {
            "annotation"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub spans: ModalitySpans,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// 0 = truthful, 1 = deceptive
    pub label: u8,
    pub features: FeatureVector,
}

/// Target lengths each present modality is resampled to before concatenation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FusionConfig {
    pub audio_len: usize,
    pub visual_len: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            audio_len: 60,
            visual_len: 60,
        }
    }
}

impl FusionConfig {
    pub fn spans(&self) -> ModalitySpans {
        let audio_end = self.audio_len + 1; // +1 presence flag
        let visual_end = audio_end + self.visual_len + 1;
        ModalitySpans {
            audio: (0, audio_end),
            visual: (audio_end, visual_end),
            annotation: (visual_end, visual_end + N_ANNOTATIONS),
        }
    }
}

/// Parse and validate a manifest file. Paths are resolved relative to the
/// manifest's directory; all problems are reported together.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let raw: Vec<RawEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(raw.len());
    for e in raw {
        if !seen.insert(e.id.clone()) {
            errors.push(format!("duplicate id: {}", e.id));
        }
        let label = match e.label.as_str() {
            "truthful" => LABEL_TRUTHFUL,
            "deceptive" => LABEL_DECEPTIVE,
            other => {
                errors.push(format!("{}: unknown label '{other}'", e.id));
                continue;
            }
        };
        if e.audio.is_none() && e.visual.is_none() && e.annotations.is_none() {
            errors.push(format!("{}: no modalities present", e.id));
            continue;
        }
        if let Some(ann) = &e.annotations {
            if ann.len() != N_ANNOTATIONS {
                errors.push(format!(
                    "{}: {} annotation flags, expected {N_ANNOTATIONS}",
                    e.id,
                    ann.len()
                ));
            }
            if ann.iter().any(|&f| f > 1) {
                errors.push(format!("{}: annotation flags must be 0/1", e.id));
            }
        }
        let resolve = |p: &str| -> Option<PathBuf> {
            let full = base.join(p);
            if full.exists() {
                Some(full)
            } else {
                None
            }
        };
        let audio_path = match &e.audio {
            Some(p) => match resolve(p) {
                Some(full) => Some(full),
                None => {
                    errors.push(format!("{}: missing file {p}", e.id));
                    None
                }
            },
            None => None,
        };
        let visual_path = match &e.visual {
            Some(p) => match resolve(p) {
                Some(full) => Some(full),
                None => {
                    errors.push(format!("{}: missing file {p}", e.id));
                    None
                }
            },
            None => None,
        };
        entries.push(ManifestEntry {
            id: e.id,
            label,
            audio_path,
            visual_path,
            annotations: e.annotations,
        });
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(Manifest { entries })
}

/// Linear interpolation of `v` onto `target_len` points over normalized
/// index [0, 1]; endpoints preserved.
pub fn resample_vector(v: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::precondition("resample_vector: empty input"));
    }
    if target_len == 0 {
        return Err(Error::config("resample_vector: target_len must be >= 1"));
    }
    if v.len() == target_len {
        return Ok(v.to_vec());
    }
    if v.len() == 1 {
        return Ok(vec![v[0]; target_len]);
    }
    if target_len == 1 {
        return Ok(vec![v[0]]);
    }
    let scale = (v.len() - 1) as f64 / (target_len - 1) as f64;
    Ok((0..target_len)
        .map(|i| {
            let pos = i as f64 * scale;
            let lo = pos.floor() as usize;
            if lo + 1 >= v.len() {
                v[v.len() - 1]
            } else {
                let frac = pos - lo as f64;
                v[lo] * (1.0 - frac) + v[lo + 1] * frac
            }
        })
        .collect())
}

/// Resample-and-concatenate fusion. Absent modalities become zero-filled
/// spans; audio and visual spans carry a trailing presence flag.
pub fn fuse_modalities(
    audio: Option<&[f64]>,
    visual: Option<&[f64]>,
    annotations: Option<&[u8]>,
    config: &FusionConfig,
) -> Result<FeatureVector> {
    if config.audio_len < 1 || config.visual_len < 1 {
        return Err(Error::config("fusion lengths must be >= 1"));
    }
    let spans = config.spans();
    let mut values = Vec::with_capacity(spans.total_len());

    match audio {
        Some(v) => {
            values.extend(resample_vector(v, config.audio_len)?);
            values.push(1.0);
        }
        None => {
            values.extend(std::iter::repeat(0.0).take(config.audio_len));
            values.push(0.0);
        }
    }
    match visual {
        Some(v) => {
            values.extend(resample_vector(v, config.visual_len)?);
            values.push(1.0);
        }
        None => {
            values.extend(std::iter::repeat(0.0).take(config.visual_len));
            values.push(0.0);
        }
    }
    match annotations {
        Some(flags) => {
            if flags.len() != N_ANNOTATIONS {
                return Err(Error::shape(format!(
                    "fuse: {} annotation flags, expected {N_ANNOTATIONS}",
                    flags.len()
                )));
            }
            values.extend(flags.iter().map(|&f| f as f64));
        }
        None => values.extend(std::iter::repeat(0.0).take(N_ANNOTATIONS)),
    }
    Ok(FeatureVector { values, spans })
}

/// Randomly down-sample the majority class (without replacement) to the
/// minority count; relative order of the kept samples is preserved.
pub fn balance_classes(samples: Vec<Sample>, rng: &mut RngStream) -> Result<Vec<Sample>> {
    let n1 = samples.iter().filter(|s| s.label == 1).count();
    let n0 = samples.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::precondition("balance_classes: a class is absent"));
    }
    if n0 == n1 {
        return Ok(samples);
    }
    let (majority, keep) = if n0 > n1 { (0u8, n1) } else { (1u8, n0) };
    let majority_positions: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == majority)
        .map(|(i, _)| i)
        .collect();
    let kept: BTreeSet<usize> = rng
        .sample_indices(majority_positions.len(), keep)
        .into_iter()
        .map(|i| majority_positions[i])
        .collect();
    Ok(samples
        .into_iter()
        .enumerate()
        .filter(|(i, s)| s.label != majority || kept.contains(i))
        .map(|(_, s)| s)
        .collect())
}

fn class_indices(samples: &[Sample]) -> (Vec<usize>, Vec<usize>) {
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if s.label == 0 {
            c0.push(i)
        } else {
            c1.push(i)
        }
    }
    (c0, c1)
}

/// Largest-remainder apportionment of `n` items over `ratios`.
fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut remainder = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if remainder == 0 {
            break;
        }
        counts[i] += 1;
        remainder -= 1;
    }
    counts
}

/// Stratified train/val/test split by index.
pub fn split_dataset(
    samples: &[Sample],
    ratios: (f64, f64, f64),
    rng: &mut RngStream,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios sum to {sum}, not 1")));
    }
    let (c0, c1) = class_indices(samples);
    if c0.len() < 3 || c1.len() < 3 {
        return Err(Error::precondition(
            "split_dataset: each class needs at least 3 samples",
        ));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for mut class in [c0, c1] {
        rng.shuffle(&mut class);
        let counts = apportion(class.len(), &[ratios.0, ratios.1, ratios.2]);
        let mut it = class.into_iter();
        train.extend(it.by_ref().take(counts[0]));
        val.extend(it.by_ref().take(counts[1]));
        test.extend(it);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((train, val, test))
}

/// Stratified k-fold partitions as (train, test) index pairs. Test folds are
/// disjoint and exhaustive; fold sizes differ by at most one.
pub fn kfold_partitions(
    samples: &[Sample],
    k: usize,
    rng: &mut RngStream,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::config("kfold: k must be >= 2"));
    }
    let (c0, c1) = class_indices(samples);
    if c0.len() < k || c1.len() < k {
        return Err(Error::precondition(format!(
            "kfold: k={k} exceeds a class count ({}/{})",
            c0.len(),
            c1.len()
        )));
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for mut class in [c0, c1] {
        rng.shuffle(&mut class);
        for idx in class {
            folds[cursor % k].push(idx);
            cursor += 1;
        }
    }
    let all: BTreeSet<usize> = (0..samples.len()).collect();
    Ok(folds
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let test_set: BTreeSet<usize> = test.iter().copied().collect();
            let train: Vec<usize> = all.difference(&test_set).copied().collect();
            (train, test)
        })
        .collect())
}

/// Read a feature CSV (`id,f0,f1,...` header, one row per id).
pub fn read_feature_csv(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(0, format!("{}: empty CSV", path.display())))?;
    if !header.starts_with("id,") {
        return Err(Error::format(
            0,
            format!("{}: CSV header must start with 'id,'", path.display()),
        ));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields
            .next()
            .ok_or_else(|| Error::format(lineno + 2, "missing id field"))?
            .to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::format(lineno + 2, format!("{}: bad float '{f}'", path.display()))
                })
            })
            .collect::<Result<_>>()?;
        rows.push((id, values));
    }
    Ok(rows)
}

/// Write a feature CSV in the shared format.
pub fn write_feature_csv(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let width = rows.first().map_or(0, |(_, v)| v.len());
    let mut out = String::from("id");
    for i in 0..width {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for (id, values) in rows {
        out.push_str(id);
        for v in values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Per-entry audio features: WAV files run through the extractor, CSV files
/// are read as precomputed vectors.
fn load_audio_vector(entry: &ManifestEntry) -> Result<Option<Vec<f64>>> {
    let Some(path) = &entry.audio_path else {
        return Ok(None);
    };
    let is_wav = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("wav"))
        .unwrap_or(false);
    if is_wav {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let signal = audio::read_wav(&bytes)?;
        Ok(Some(audio::extract_audio_features(&signal)?))
    } else {
        let rows = read_feature_csv(path)?;
        let row = rows
            .iter()
            .find(|(id, _)| *id == entry.id)
            .or_else(|| rows.first())
            .ok_or_else(|| Error::precondition(format!("{}: empty feature CSV", entry.id)))?;
        Ok(Some(row.1.clone()))
    }
}

fn load_visual_vector(entry: &ManifestEntry) -> Result<Option<Vec<f64>>> {
    let Some(path) = &entry.visual_path else {
        return Ok(None);
    };
    let rows = read_feature_csv(path)?;
    let row = rows
        .iter()
        .find(|(id, _)| *id == entry.id)
        .or_else(|| rows.first())
        .ok_or_else(|| Error::precondition(format!("{}: empty feature CSV", entry.id)))?;
    Ok(Some(row.1.clone()))
}

/// Load every manifest entry into a fused sample.
pub fn load_samples(manifest: &Manifest, config: &FusionConfig) -> Result<Vec<Sample>> {
    manifest
        .entries
        .iter()
        .map(|entry| {
            let audio_vec = load_audio_vector(entry)?;
            let visual_vec = load_visual_vector(entry)?;
            let features = fuse_modalities(
                audio_vec.as_deref(),
                visual_vec.as_deref(),
                entry.annotations.as_deref(),
                config,
            )?;
            Ok(Sample {
                id: entry.id.clone(),
                label: entry.label,
                features,
            })
        })
        .collect()
}
