use crate::error::{Error, Result};
use crate::math::{bce, sigmoid, RngStream};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogRegHyper {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegHyper {
    fn default() -> Self {
        LogRegHyper {
            lr: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss_history: Vec<f64>,
}

impl LogRegModel {
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::shape(format!(
                "logreg: input length {} != {} weights",
                x.len(),
                self.weights.len()
            )));
        }
        let z: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias;
        Ok(sigmoid(z))
    }
}

/// Full-batch gradient descent on BCE + (l2/2)||w||^2.
pub fn logreg_fit(
    x: &[Vec<f64>],
    y: &[u8],
    hyper: &LogRegHyper,
    _rng: &mut RngStream,
) -> Result<LogRegModel> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "logreg_fit: {} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::precondition("logreg_fit: empty training set"));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::shape("logreg_fit: ragged feature rows"));
    }
    let m = x.len() as f64;
    let yf: Vec<f64> = y.iter().map(|&l| l as f64).collect();

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut loss_history = Vec::with_capacity(hyper.epochs.max(1));

    for epoch in 0..hyper.epochs.max(1) {
        let probs: Vec<f64> = x
            .iter()
            .map(|row| {
                sigmoid(weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + bias)
            })
            .collect();
        let data_loss = bce(&yf, &probs)?;
        let reg: f64 = 0.5 * hyper.l2 * weights.iter().map(|w| w * w).sum::<f64>();
        let loss = data_loss + reg;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                lr: hyper.lr,
            });
        }
        loss_history.push(loss);

        let mut grad_w = vec![0.0; d];
        let mut grad_b = 0.0;
        for (row, (&p, &t)) in x.iter().zip(probs.iter().zip(&yf)) {
            let err = p - t;
            for (g, &v) in grad_w.iter_mut().zip(row) {
                *g += err * v;
            }
            grad_b += err;
        }
        for (g, &w) in grad_w.iter_mut().zip(&weights) {
            *g = *g / m + hyper.l2 * w;
        }
        grad_b /= m;

        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= hyper.lr * g;
        }
        bias -= hyper.lr * grad_b;
    }

    Ok(LogRegModel {
        weights,
        bias,
        loss_history,
    })
}
