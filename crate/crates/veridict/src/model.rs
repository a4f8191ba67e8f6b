//! Shared model surface: prediction trait, feature standardization, and the
//! versioned JSON on-disk format.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT: &str = "veridict-model";
pub const MODEL_VERSION: u32 = 1;

/// Probability of the deceptive class (label 1) for one feature vector.
pub trait Predictor {
    fn predict_proba(&self, x: &[f64]) -> f64;

    /// Hard decision at threshold 0.5; ties go to label 0.
    fn predict(&self, x: &[f64]) -> u8 {
        if self.predict_proba(x) > 0.5 {
            1
        } else {
            0
        }
    }
}

impl<F: Fn(&[f64]) -> f64> Predictor for F {
    fn predict_proba(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Per-column z-score parameters, fit on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Standardizer {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut means = vec![0.0; d];
        for row in rows {
            for (m, &v) in means.iter_mut().zip(*row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; d];
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                stds[j] += (v - means[j]) * (v - means[j]);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            // constant columns pass through unscaled
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Standardizer { means, stds }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn identity(d: usize) -> Standardizer {
        Standardizer {
            means: vec![0.0; d],
            stds: vec![1.0; d],
        }
    }
}

/// Versioned envelope written to disk.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub model: SavedModel,
}

/// All trainable model families, with their fitted standardizers where used.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SavedModel {
    LogisticRegression {
        standardizer: Standardizer,
        model: crate::classical::LogRegModel,
    },
    RandomForest {
        model: crate::classical::RandomForest,
    },
    Conv1d {
        standardizer: Standardizer,
        model: crate::conv1d::Conv1DNet,
    },
}

impl SavedModel {
    pub fn family(&self) -> &'static str {
        match self {
            SavedModel::LogisticRegression { .. } => "logreg",
            SavedModel::RandomForest { .. } => "random_forest",
            SavedModel::Conv1d { .. } => "conv1d",
        }
    }
}

impl Predictor for SavedModel {
    fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            SavedModel::LogisticRegression {
                standardizer,
                model,
            } => model.predict_proba(&standardizer.transform(x)).unwrap_or(0.5),
            SavedModel::RandomForest { model } => model.predict(x).map(|p| p.probability_of_one()).unwrap_or(0.5),
            SavedModel::Conv1d {
                standardizer,
                model,
            } => model
                .predict_proba(&standardizer.transform(x))
                .unwrap_or(0.5),
        }
    }
}

pub fn save_model(model: &SavedModel, path: &std::path::Path) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: &std::path::Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::config(format!(
            "unexpected model format '{}'",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::config(format!(
            "unsupported model version {}",
            file.version
        )));
    }
    Ok(file.model)
}
