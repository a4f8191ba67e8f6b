//! Feature dropping by target correlation and class-conditional
//! distribution overlap.

use crate::error::{Error, Result};
use crate::ingest::Sample;
use serde::{Deserialize, Serialize};

pub const DEFAULT_R_THRESH: f64 = 0.05;
pub const DEFAULT_OVERLAP_THRESH: f64 = 0.95;
const GRID_POINTS: usize = 512;
const BANDWIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureStats {
    pub pearson_r: f64,
    pub kde_overlap: f64,
    /// true when the feature column is constant (r undefined, reported as 0)
    pub constant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionMask {
    pub keep: Vec<bool>,
    pub stats: Vec<FeatureStats>,
}

impl SelectionMask {
    pub fn kept_indices(&self) -> Vec<usize> {
        self.keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| i)
            .collect()
    }

    /// Serialize as `feature,pearson_r,kde_overlap,kept` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,pearson_r,kde_overlap,kept\n");
        for (i, (stat, keep)) in self.stats.iter().zip(&self.keep).enumerate() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                stat.pearson_r, stat.kde_overlap, keep
            ));
        }
        out
    }
}

/// Pearson correlation; constant `x` is flagged and reported as r = 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, bool)> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "pearson: {} vs {} values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::precondition("pearson: need at least 2 values"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok((0.0, true));
    }
    Ok((sxy / (sxx * syy).sqrt(), false))
}

fn quartile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

/// Silverman bandwidth: 0.9 * min(sigma, IQR/1.34) * n^(-1/5), floored at 1e-6.
fn silverman(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sigma = (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quartile(&sorted, 0.75) - quartile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    (0.9 * spread * n.powf(-0.2)).max(BANDWIDTH_FLOOR)
}

fn gaussian_kde(values: &[f64], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| {
            values
                .iter()
                .map(|&v| {
                    let z = (g - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Overlap of two Gaussian KDEs: integral of min(p0, p1) on a shared
/// 512-point grid spanning [min - 3h, max + 3h].
pub fn kde_overlap(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::precondition(
            "kde_overlap: each class needs at least 2 values",
        ));
    }
    let ha = silverman(a);
    let hb = silverman(b);
    let h = ha.max(hb);
    let lo = a
        .iter()
        .chain(b)
        .cloned()
        .fold(f64::INFINITY, f64::min)
        - 3.0 * h;
    let hi = a
        .iter()
        .chain(b)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        + 3.0 * h;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
    let pa = gaussian_kde(a, ha, &grid);
    let pb = gaussian_kde(b, hb, &grid);
    let overlap: f64 = pa.iter().zip(&pb).map(|(x, y)| x.min(*y)).sum::<f64>() * step;
    Ok(overlap.clamp(0.0, 1.0 + 1e-9))
}

/// Drop feature i iff |r_i| < r_thresh and overlap_i > overlap_thresh.
pub fn select_features(
    samples: &[Sample],
    r_thresh: f64,
    overlap_thresh: f64,
) -> Result<SelectionMask> {
    let n0 = samples.iter().filter(|s| s.label == 0).count();
    let n1 = samples.len() - n0;
    if n0 == 0 || n1 == 0 {
        return Err(Error::precondition("select_features: a class is absent"));
    }
    let y: Vec<f64> = samples.iter().map(|s| s.label as f64).collect();
    let d = samples
        .first()
        .map(|s| s.features.values.len())
        .unwrap_or(0);

    let mut keep = Vec::with_capacity(d);
    let mut stats = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = samples.iter().map(|s| s.features.values[j]).collect();
        let (r, constant) = pearson(&col, &y)?;
        let class0: Vec<f64> = samples
            .iter()
            .filter(|s| s.label == 0)
            .map(|s| s.features.values[j])
            .collect();
        let class1: Vec<f64> = samples
            .iter()
            .filter(|s| s.label == 1)
            .map(|s| s.features.values[j])
            .collect();
        let overlap = if class0.len() < 2 || class1.len() < 2 {
            1.0
        } else {
            kde_overlap(&class0, &class1)?
        };
        let drop = r.abs() < r_thresh && overlap > overlap_thresh;
        keep.push(!drop);
        stats.push(FeatureStats {
            pearson_r: r,
            kde_overlap: overlap,
            constant,
        });
    }
    Ok(SelectionMask { keep, stats })
}

/// Zero out dropped feature values in place (vector lengths and spans are
/// preserved so downstream models keep a fixed input size).
pub fn apply_mask(samples: &mut [Sample], mask: &SelectionMask) {
    for s in samples.iter_mut() {
        for (v, &keep) in s.features.values.iter_mut().zip(&mask.keep) {
            if !keep {
                *v = 0.0;
            }
        }
    }
}
