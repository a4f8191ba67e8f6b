//! Model-agnostic explanations: Monte-Carlo Shapley attributions, a
//! LIME-style weighted linear surrogate, and permutation importance.

use crate::error::{Error, Result};
use crate::ingest::ModalitySpans;
use crate::math::RngStream;
use crate::model::Predictor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_N_PERM: usize = 200;
pub const DEFAULT_N_PERTURB: usize = 1000;
pub const RIDGE_LAMBDA: f64 = 1e-3;

/// One random permutation at a time: features flip from a background draw
/// to the instance's value in permutation order, and the marginal change in
/// model probability is credited to the flipped feature.
pub fn shapley_sample(
    model: &dyn Predictor,
    x: &[f64],
    background: &[Vec<f64>],
    n_perm: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if background.is_empty() {
        return Err(Error::precondition("shapley_sample: empty background"));
    }
    if n_perm == 0 {
        return Err(Error::precondition("shapley_sample: n_perm must be positive"));
    }
    let d = x.len();
    if background.iter().any(|b| b.len() != d) {
        return Err(Error::shape("shapley_sample: background width mismatch"));
    }
    let mut phi = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();
    for _ in 0..n_perm {
        let z = &background[rng.next_below(background.len())];
        rng.shuffle(&mut order);
        let mut current = z.clone();
        let mut prev = model.predict_proba(&current);
        for &j in &order {
            if current[j] == x[j] {
                // identical evaluations: credit exactly zero, skip the call
                continue;
            }
            current[j] = x[j];
            let next = model.predict_proba(&current);
            phi[j] += next - prev;
            prev = next;
        }
    }
    for v in &mut phi {
        *v /= n_perm as f64;
    }
    Ok(phi)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: usize,
    pub span: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub id: String,
    pub p: f64,
    /// top-k by |value|, descending
    pub attributions: Vec<Attribution>,
    pub r2: f64,
}

/// Solve M b = rhs by Gaussian elimination with partial pivoting.
fn solve_linear(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let diag = m[col][col];
        for row in (col + 1)..n {
            let factor = m[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut out = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in (col + 1)..n {
            acc -= m[col][k] * out[k];
        }
        out[col] = acc / m[col][col];
    }
    out
}

pub struct LimeOptions {
    pub n_perturb: usize,
    /// None -> 0.75 * sqrt(d)
    pub kernel_width: Option<f64>,
    pub k_top: usize,
}

impl Default for LimeOptions {
    fn default() -> Self {
        LimeOptions {
            n_perturb: DEFAULT_N_PERTURB,
            kernel_width: None,
            k_top: 10,
        }
    }
}

/// Gaussian perturbation around `x` (sigma = per-feature training std),
/// exponential-kernel weighting in standardized space, weighted ridge fit
/// to the model's probabilities. Coefficients are per standardized unit.
pub fn lime_explain(
    model: &dyn Predictor,
    id: &str,
    x: &[f64],
    feature_stds: &[f64],
    spans: &ModalitySpans,
    opts: &LimeOptions,
    rng: &mut RngStream,
) -> Result<LocalExplanation> {
    let d = x.len();
    if d == 0 {
        return Err(Error::precondition("lime_explain: empty feature vector"));
    }
    if feature_stds.len() != d {
        return Err(Error::shape("lime_explain: std vector width mismatch"));
    }
    let width = opts
        .kernel_width
        .unwrap_or_else(|| 0.75 * (d as f64).sqrt());

    let n = opts.n_perturb.max(1);
    // standardized offsets, responses, kernel weights
    let mut u = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut perturbed = vec![0.0; d];
    for _ in 0..n {
        let mut dist2 = 0.0;
        let offs: Vec<f64> = (0..d)
            .map(|_| {
                let e = rng.next_normal();
                dist2 += e * e;
                e
            })
            .collect();
        for j in 0..d {
            perturbed[j] = x[j] + offs[j] * feature_stds[j];
        }
        u.push(offs);
        y.push(model.predict_proba(&perturbed));
        w.push((-dist2 / (width * width)).exp());
    }

    // weighted ridge normal equations over [offsets, intercept]
    let cols = d + 1;
    let mut m = vec![vec![0.0; cols]; cols];
    let mut rhs = vec![0.0; cols];
    for i in 0..n {
        let wi = w[i];
        for a in 0..d {
            let ua = u[i][a] * wi;
            for b in a..d {
                m[a][b] += ua * u[i][b];
            }
            m[a][d] += ua;
            rhs[a] += ua * y[i];
        }
        m[d][d] += wi;
        rhs[d] += wi * y[i];
    }
    for a in 0..cols {
        for b in 0..a {
            m[a][b] = m[b][a];
        }
    }
    // penalize coefficients, not the intercept
    for (a, row) in m.iter_mut().enumerate().take(d) {
        row[a] += RIDGE_LAMBDA;
    }
    let beta = solve_linear(m, rhs);

    // weighted R^2
    let wsum: f64 = w.iter().sum();
    let ymean: f64 = y.iter().zip(&w).map(|(yi, wi)| yi * wi).sum::<f64>() / wsum;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let fit: f64 = u[i].iter().zip(&beta).map(|(ui, bi)| ui * bi).sum::<f64>() + beta[d];
        ss_res += w[i] * (y[i] - fit) * (y[i] - fit);
        ss_tot += w[i] * (y[i] - ymean) * (y[i] - ymean);
    }
    // a constant model leaves ss_tot at rounding-noise scale; R^2 is
    // undefined there and flagged as 0
    let r2 = if ss_tot <= 1e-12 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    };

    let mut indexed: Vec<(usize, f64)> = beta[..d].iter().copied().enumerate().collect();
    indexed.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));
    let attributions = indexed
        .into_iter()
        .take(opts.k_top.min(d))
        .map(|(feature, value)| Attribution {
            feature,
            span: spans.span_of(feature).to_string(),
            value,
        })
        .collect();

    Ok(LocalExplanation {
        id: id.to_string(),
        p: model.predict_proba(x),
        attributions,
        r2,
    })
}

/// Per-feature mean accuracy drop after shuffling that column.
pub fn permutation_importance(
    model: &dyn Predictor,
    x: &[Vec<f64>],
    y: &[u8],
    repeats: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::precondition("permutation_importance: empty data"));
    }
    if repeats == 0 {
        return Err(Error::precondition(
            "permutation_importance: repeats must be positive",
        ));
    }
    if x.len() != y.len() {
        return Err(Error::shape("permutation_importance: row/label mismatch"));
    }
    let d = x[0].len();
    let n = x.len();
    let accuracy = |rows: &dyn Fn(usize) -> Vec<f64>| -> f64 {
        let correct = (0..n)
            .filter(|&i| model.predict(&rows(i)) == y[i])
            .count();
        correct as f64 / n as f64
    };
    let baseline = accuracy(&|i| x[i].clone());

    let mut drops = vec![0.0; d];
    for feature in 0..d {
        for _ in 0..repeats {
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let shuffled = accuracy(&|i| {
                let mut row = x[i].clone();
                row[feature] = x[perm[i]][feature];
                row
            });
            drops[feature] += baseline - shuffled;
        }
        drops[feature] /= repeats as f64;
    }
    Ok(drops)
}

/// Sum attributions per modality span.
pub fn modality_rollup(values: &[f64], spans: &ModalitySpans) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (i, &v) in values.iter().enumerate() {
        *out.entry(spans.span_of(i).to_string()).or_insert(0.0) += v;
    }
    out
}

/// `feature,span,value` CSV of a full attribution vector.
pub fn attribution_csv(values: &[f64], spans: &ModalitySpans) -> String {
    let mut out = String::from("feature,span,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{},{v}\n", spans.span_of(i)));
    }
    out
}
