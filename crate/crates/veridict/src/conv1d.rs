//! 1D convolutional network with hand-implemented forward and backward
//! passes: valid convolution (stride 1), non-overlapping max pooling,
//! inverted dropout, dense layers, and BCE-through-sigmoid training.

use crate::error::{Error, Result};
use crate::math::{bce, sigmoid, RngStream};
use serde::{Deserialize, Serialize};

/// Channels x length activation.
pub type Act = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
    },
    MaxPool {
        window: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        out: usize,
    },
    Relu,
    Sigmoid,
}

/// Default stack: the smallest architecture exercising every layer kind.
pub fn default_architecture() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            in_ch: 1,
            out_ch: 16,
            kernel: 5,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { window: 2 },
        LayerSpec::Dropout { rate: 0.3 },
        LayerSpec::Conv {
            in_ch: 16,
            out_ch: 32,
            kernel: 5,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { window: 2 },
        LayerSpec::Flatten,
        LayerSpec::Dense { out: 64 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.3 },
        LayerSpec::Dense { out: 1 },
        LayerSpec::Sigmoid,
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Layer {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        /// [out_ch][in_ch][kernel]
        w: Vec<Vec<Vec<f64>>>,
        b: Vec<f64>,
    },
    MaxPool {
        window: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        /// [outputs][inputs]
        w: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conv1DNet {
    pub layers: Vec<Layer>,
    pub input_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum LayerGrad {
    Conv {
        dw: Vec<Vec<Vec<f64>>>,
        db: Vec<f64>,
    },
    Dense {
        dw: Vec<Vec<f64>>,
        db: Vec<f64>,
    },
    None,
}

/// Per-parameter gradients mirroring the net's layer list.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug)]
enum LayerCache {
    Conv { input: Act },
    MaxPool { input_len: usize, argmax: Vec<Vec<usize>> },
    Dropout { mask: Act },
    Flatten { channels: usize, len: usize },
    Dense { input: Vec<f64> },
    Relu { input: Act },
    Sigmoid { output: f64 },
}

/// Activation cache from one forward pass, consumed by `net_backward`.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    pub probability: f64,
}

fn xavier_uniform(rng: &mut RngStream, fan_in: usize, fan_out: usize) -> f64 {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (rng.next_f64() * 2.0 - 1.0) * limit
}

/// Valid (no padding) stride-1 convolution summed over input channels:
/// out[o][t] = sum_i sum_j x[i][t+j] * w[o][i][j] + b[o].
pub fn conv1d_forward(x: &Act, w: &[Vec<Vec<f64>>], b: &[f64]) -> Result<Act> {
    let in_ch = x.len();
    let length = x.first().map_or(0, |c| c.len());
    let out_ch = w.len();
    let kernel = w
        .first()
        .and_then(|wi| wi.first())
        .map_or(0, |k| k.len());
    if length < kernel || kernel == 0 {
        return Err(Error::shape(format!(
            "conv1d: input length {length} < kernel {kernel}"
        )));
    }
    if w.iter().any(|wi| wi.len() != in_ch) {
        return Err(Error::shape("conv1d: filter in_ch mismatch"));
    }
    let out_len = length - kernel + 1;
    let mut out = vec![vec![0.0; out_len]; out_ch];
    for o in 0..out_ch {
        for t in 0..out_len {
            let mut acc = b[o];
            for i in 0..in_ch {
                let xi = &x[i];
                let wi = &w[o][i];
                for j in 0..kernel {
                    acc += xi[t + j] * wi[j];
                }
            }
            out[o][t] = acc;
        }
    }
    Ok(out)
}

/// Non-overlapping max pooling; a trailing remainder is pooled as a short
/// window. Ties resolve to the first maximal index.
pub fn maxpool_forward(x: &[f64], window: usize) -> (Vec<f64>, Vec<usize>) {
    assert!(window >= 1);
    let out_len = x.len().div_ceil(window);
    let mut pooled = Vec::with_capacity(out_len);
    let mut argmax = Vec::with_capacity(out_len);
    for w in 0..out_len {
        let start = w * window;
        let end = (start + window).min(x.len());
        let (mut best_i, mut best) = (start, x[start]);
        for (i, &v) in x.iter().enumerate().take(end).skip(start + 1) {
            if v > best {
                best = v;
                best_i = i;
            }
        }
        pooled.push(best);
        argmax.push(best_i);
    }
    (pooled, argmax)
}

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// 1/(1-rate). Identity at inference. Returns (output, mask).
pub fn dropout(x: &[f64], rate: f64, rng: &mut RngStream, training: bool) -> (Vec<f64>, Vec<f64>) {
    assert!((0.0..1.0).contains(&rate));
    if !training || rate == 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.next_f64() < rate { 0.0 } else { scale })
        .collect();
    let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    (out, mask)
}

impl Conv1DNet {
    /// Build a net from layer specs, validating the whole shape chain and
    /// initializing parameters from the seeded stream (Xavier uniform,
    /// zero biases). The stack must end in Dense{out: 1} followed by Sigmoid.
    pub fn new(input_len: usize, specs: &[LayerSpec], seed: u64) -> Result<Conv1DNet> {
        let mut rng = RngStream::new(seed);
        let mut channels = 1usize;
        let mut length = input_len;
        let mut flattened = false;
        let mut layers = Vec::with_capacity(specs.len());

        for (li, spec) in specs.iter().enumerate() {
            match *spec {
                LayerSpec::Conv {
                    in_ch,
                    out_ch,
                    kernel,
                } => {
                    if flattened {
                        return Err(Error::config(format!("layer {li}: conv after flatten")));
                    }
                    if in_ch != channels {
                        return Err(Error::config(format!(
                            "layer {li}: conv expects {in_ch} channels, chain has {channels}"
                        )));
                    }
                    if kernel == 0 || length < kernel {
                        return Err(Error::config(format!(
                            "layer {li}: kernel {kernel} vs length {length}"
                        )));
                    }
                    let fan_in = in_ch * kernel;
                    let fan_out = out_ch * kernel;
                    let w: Vec<Vec<Vec<f64>>> = (0..out_ch)
                        .map(|_| {
                            (0..in_ch)
                                .map(|_| {
                                    (0..kernel)
                                        .map(|_| xavier_uniform(&mut rng, fan_in, fan_out))
                                        .collect()
                                })
                                .collect()
                        })
                        .collect();
                    layers.push(Layer::Conv {
                        in_ch,
                        out_ch,
                        kernel,
                        w,
                        b: vec![0.0; out_ch],
                    });
                    channels = out_ch;
                    length = length - kernel + 1;
                }
                LayerSpec::MaxPool { window } => {
                    if flattened {
                        return Err(Error::config(format!("layer {li}: pool after flatten")));
                    }
                    if window == 0 {
                        return Err(Error::config(format!("layer {li}: zero pool window")));
                    }
                    layers.push(Layer::MaxPool { window });
                    length = length.div_ceil(window);
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::config(format!("layer {li}: dropout rate {rate}")));
                    }
                    layers.push(Layer::Dropout { rate });
                }
                LayerSpec::Flatten => {
                    layers.push(Layer::Flatten);
                    length *= channels;
                    channels = 1;
                    flattened = true;
                }
                LayerSpec::Dense { out } => {
                    let inputs = channels * length;
                    if out == 0 {
                        return Err(Error::config(format!("layer {li}: dense with 0 outputs")));
                    }
                    let w: Vec<Vec<f64>> = (0..out)
                        .map(|_| (0..inputs).map(|_| xavier_uniform(&mut rng, inputs, out)).collect())
                        .collect();
                    layers.push(Layer::Dense {
                        inputs,
                        outputs: out,
                        w,
                        b: vec![0.0; out],
                    });
                    channels = 1;
                    length = out;
                    flattened = true;
                }
                LayerSpec::Relu => layers.push(Layer::Relu),
                LayerSpec::Sigmoid => layers.push(Layer::Sigmoid),
            }
        }

        // final layer contract: Dense(.., 1) then Sigmoid
        let n = layers.len();
        let tail_ok = n >= 2
            && matches!(layers[n - 1], Layer::Sigmoid)
            && matches!(layers[n - 2], Layer::Dense { outputs: 1, .. });
        if !tail_ok {
            return Err(Error::config(
                "network must end in Dense{out: 1} followed by Sigmoid",
            ));
        }
        Ok(Conv1DNet {
            layers,
            input_len,
            seed,
        })
    }

    /// Forward pass; caches every intermediate needed for backprop.
    pub fn forward(
        &self,
        x: &[f64],
        training: bool,
        rng: Option<&mut RngStream>,
    ) -> Result<ForwardCache> {
        if x.len() != self.input_len {
            return Err(Error::shape(format!(
                "net_forward: input length {} != {}",
                x.len(),
                self.input_len
            )));
        }
        let mut local_rng = RngStream::new(0);
        let rng = match rng {
            Some(r) => r,
            None => &mut local_rng,
        };

        let mut act: Act = vec![x.to_vec()];
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut probability = f64::NAN;

        for layer in &self.layers {
            match layer {
                Layer::Conv { w, b, .. } => {
                    let out = conv1d_forward(&act, w, b)?;
                    caches.push(LayerCache::Conv { input: act });
                    act = out;
                }
                Layer::MaxPool { window } => {
                    let input_len = act[0].len();
                    let mut pooled = Vec::with_capacity(act.len());
                    let mut argmax = Vec::with_capacity(act.len());
                    for ch in &act {
                        let (p, a) = maxpool_forward(ch, *window);
                        pooled.push(p);
                        argmax.push(a);
                    }
                    caches.push(LayerCache::MaxPool { input_len, argmax });
                    act = pooled;
                }
                Layer::Dropout { rate } => {
                    let mut out = Vec::with_capacity(act.len());
                    let mut masks = Vec::with_capacity(act.len());
                    for ch in &act {
                        let (o, m) = dropout(ch, *rate, rng, training);
                        out.push(o);
                        masks.push(m);
                    }
                    caches.push(LayerCache::Dropout { mask: masks });
                    act = out;
                }
                Layer::Flatten => {
                    let channels = act.len();
                    let len = act[0].len();
                    let flat: Vec<f64> = act.iter().flatten().copied().collect();
                    caches.push(LayerCache::Flatten { channels, len });
                    act = vec![flat];
                }
                Layer::Dense { w, b, inputs, .. } => {
                    let input = act[0].clone();
                    if input.len() != *inputs {
                        return Err(Error::shape("dense input length mismatch"));
                    }
                    let out: Vec<f64> = w
                        .iter()
                        .zip(b)
                        .map(|(row, bi)| row.iter().zip(&input).map(|(wi, xi)| wi * xi).sum::<f64>() + bi)
                        .collect();
                    caches.push(LayerCache::Dense { input });
                    act = vec![out];
                }
                Layer::Relu => {
                    let out: Act = act
                        .iter()
                        .map(|ch| ch.iter().map(|&v| v.max(0.0)).collect())
                        .collect();
                    caches.push(LayerCache::Relu { input: act });
                    act = out;
                }
                Layer::Sigmoid => {
                    let out: Act = act
                        .iter()
                        .map(|ch| ch.iter().map(|&v| sigmoid(v)).collect())
                        .collect();
                    probability = out[0][0];
                    caches.push(LayerCache::Sigmoid { output: probability });
                    act = out;
                }
            }
        }
        Ok(ForwardCache {
            layers: caches,
            probability,
        })
    }

    /// Probability of label 1 at inference (dropout disabled).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x, false, None)?.probability)
    }

    /// Backprop one sample: BCE-through-sigmoid start (dL/dz_f = p - y),
    /// then layer-by-layer. Batch averaging (1/m) happens in `train`.
    pub fn backward(&self, cache: &ForwardCache, y: f64) -> Result<GradientSet> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::precondition(
                "net_backward: cache does not match this network",
            ));
        }
        let mut grads: Vec<LayerGrad> = vec![LayerGrad::None; self.layers.len()];
        // delta starts after the final sigmoid: dL/dz_f = p - y
        let mut delta: Act = vec![vec![cache.probability - y]];
        let mut saw_final_sigmoid = false;

        for (li, (layer, lcache)) in self
            .layers
            .iter()
            .zip(&cache.layers)
            .enumerate()
            .rev()
        {
            match (layer, lcache) {
                (Layer::Sigmoid, LayerCache::Sigmoid { output }) => {
                    if !saw_final_sigmoid {
                        // delta already holds p - y for the pre-sigmoid input
                        saw_final_sigmoid = true;
                    } else {
                        let s = *output;
                        for ch in delta.iter_mut() {
                            for v in ch.iter_mut() {
                                *v *= s * (1.0 - s);
                            }
                        }
                    }
                }
                (Layer::Relu, LayerCache::Relu { input }) => {
                    for (dch, ich) in delta.iter_mut().zip(input) {
                        for (d, &z) in dch.iter_mut().zip(ich) {
                            if z <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                }
                (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    for (dch, mch) in delta.iter_mut().zip(mask) {
                        for (d, &m) in dch.iter_mut().zip(mch) {
                            *d *= m;
                        }
                    }
                }
                (Layer::Dense { w, .. }, LayerCache::Dense { input }) => {
                    let dout = &delta[0];
                    let dw: Vec<Vec<f64>> = dout
                        .iter()
                        .map(|&d| input.iter().map(|&xi| d * xi).collect())
                        .collect();
                    let db = dout.clone();
                    let mut dx = vec![0.0; input.len()];
                    for (row, &d) in w.iter().zip(dout) {
                        for (dxj, &wj) in dx.iter_mut().zip(row) {
                            *dxj += wj * d;
                        }
                    }
                    grads[li] = LayerGrad::Dense { dw, db };
                    delta = vec![dx];
                }
                (Layer::Flatten, LayerCache::Flatten { channels, len }) => {
                    let flat = &delta[0];
                    delta = (0..*channels)
                        .map(|c| flat[c * len..(c + 1) * len].to_vec())
                        .collect();
                }
                (Layer::MaxPool { .. }, LayerCache::MaxPool { input_len, argmax }) => {
                    let mut dx: Act = vec![vec![0.0; *input_len]; delta.len()];
                    for (c, (dch, ach)) in delta.iter().zip(argmax).enumerate() {
                        for (&d, &idx) in dch.iter().zip(ach) {
                            dx[c][idx] += d;
                        }
                    }
                    delta = dx;
                }
                (
                    Layer::Conv {
                        in_ch,
                        out_ch,
                        kernel,
                        w,
                        ..
                    },
                    LayerCache::Conv { input },
                ) => {
                    let out_len = delta[0].len();
                    let in_len = input[0].len();
                    let mut dw = vec![vec![vec![0.0; *kernel]; *in_ch]; *out_ch];
                    let mut db = vec![0.0; *out_ch];
                    let mut dx: Act = vec![vec![0.0; in_len]; *in_ch];
                    for o in 0..*out_ch {
                        let dout = &delta[o];
                        db[o] = dout.iter().sum();
                        for i in 0..*in_ch {
                            // dW: correlation of the input with the upstream gradient
                            for j in 0..*kernel {
                                let mut acc = 0.0;
                                for t in 0..out_len {
                                    acc += input[i][t + j] * dout[t];
                                }
                                dw[o][i][j] = acc;
                            }
                            // dX: full correlation of the upstream gradient with the kernel
                            for t in 0..out_len {
                                let d = dout[t];
                                for j in 0..*kernel {
                                    dx[i][t + j] += d * w[o][i][j];
                                }
                            }
                        }
                    }
                    grads[li] = LayerGrad::Conv { dw, db };
                    delta = dx;
                }
                _ => {
                    return Err(Error::precondition(
                        "net_backward: cache entry does not match layer",
                    ))
                }
            }
        }
        Ok(GradientSet { layers: grads })
    }

    fn apply_gradients(&mut self, grads: &GradientSet, lr: f64) {
        for (layer, grad) in self.layers.iter_mut().zip(&grads.layers) {
            match (layer, grad) {
                (Layer::Conv { w, b, .. }, LayerGrad::Conv { dw, db }) => {
                    for (wo, dwo) in w.iter_mut().zip(dw) {
                        for (wi, dwi) in wo.iter_mut().zip(dwo) {
                            for (wj, dwj) in wi.iter_mut().zip(dwi) {
                                *wj -= lr * dwj;
                            }
                        }
                    }
                    for (bo, dbo) in b.iter_mut().zip(db) {
                        *bo -= lr * dbo;
                    }
                }
                (Layer::Dense { w, b, .. }, LayerGrad::Dense { dw, db }) => {
                    for (row, drow) in w.iter_mut().zip(dw) {
                        for (wj, dwj) in row.iter_mut().zip(drow) {
                            *wj -= lr * dwj;
                        }
                    }
                    for (bo, dbo) in b.iter_mut().zip(db) {
                        *bo -= lr * dbo;
                    }
                }
                _ => {}
            }
        }
    }

    fn mean_loss(&self, xs: &[Vec<f64>], ys: &[u8]) -> Result<f64> {
        let probs: Vec<f64> = xs
            .iter()
            .map(|x| self.predict_proba(x))
            .collect::<Result<_>>()?;
        let yf: Vec<f64> = ys.iter().map(|&l| l as f64).collect();
        bce(&yf, &probs)
    }
}

fn accumulate(total: &mut GradientSet, part: &GradientSet) {
    for (t, p) in total.layers.iter_mut().zip(&part.layers) {
        match (t, p) {
            (LayerGrad::Conv { dw, db }, LayerGrad::Conv { dw: pdw, db: pdb }) => {
                for (a, b) in dw.iter_mut().flatten().flatten().zip(pdw.iter().flatten().flatten()) {
                    *a += b;
                }
                for (a, b) in db.iter_mut().zip(pdb) {
                    *a += b;
                }
            }
            (LayerGrad::Dense { dw, db }, LayerGrad::Dense { dw: pdw, db: pdb }) => {
                for (a, b) in dw.iter_mut().flatten().zip(pdw.iter().flatten()) {
                    *a += b;
                }
                for (a, b) in db.iter_mut().zip(pdb) {
                    *a += b;
                }
            }
            _ => {}
        }
    }
}

fn scale(grads: &mut GradientSet, factor: f64) {
    for g in &mut grads.layers {
        match g {
            LayerGrad::Conv { dw, db } => {
                for v in dw.iter_mut().flatten().flatten() {
                    *v *= factor;
                }
                for v in db.iter_mut() {
                    *v *= factor;
                }
            }
            LayerGrad::Dense { dw, db } => {
                for v in dw.iter_mut().flatten() {
                    *v *= factor;
                }
                for v in db.iter_mut() {
                    *v *= factor;
                }
            }
            LayerGrad::None => {}
        }
    }
}

/// Batch gradient: mean of per-sample gradients (1/m scaling).
pub fn batch_gradients(
    net: &Conv1DNet,
    xs: &[&[f64]],
    ys: &[f64],
    training: bool,
    rng: Option<&mut RngStream>,
) -> Result<GradientSet> {
    let mut local_rng = RngStream::new(0);
    let rng = match rng {
        Some(r) => r,
        None => &mut local_rng,
    };
    let mut total: Option<GradientSet> = None;
    for (x, &y) in xs.iter().zip(ys) {
        let cache = net.forward(x, training, Some(rng))?;
        let g = net.backward(&cache, y)?;
        match &mut total {
            None => total = Some(g),
            Some(t) => accumulate(t, &g),
        }
    }
    let mut total = total.ok_or_else(|| Error::precondition("batch_gradients: empty batch"))?;
    scale(&mut total, 1.0 / xs.len() as f64);
    Ok(total)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 0.01,
            epochs: 60,
            batch: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

const EARLY_STOP_PATIENCE: usize = 10;

/// Mini-batch SGD with per-epoch shuffling, early stopping on validation
/// loss (patience 10), returning the best-validation parameters.
pub fn train(
    mut net: Conv1DNet,
    train_x: &[Vec<f64>],
    train_y: &[u8],
    val_x: &[Vec<f64>],
    val_y: &[u8],
    hyper: &TrainHyper,
    rng: &mut RngStream,
) -> Result<(Conv1DNet, Vec<EpochLoss>)> {
    if train_x.is_empty() {
        return Err(Error::precondition("train: empty training set"));
    }
    let mut history = Vec::with_capacity(hyper.epochs);
    if hyper.epochs == 0 {
        return Ok((net, history));
    }
    let train_yf: Vec<f64> = train_y.iter().map(|&l| l as f64).collect();

    let mut best = net.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..train_x.len()).collect();
        rng.shuffle(&mut order);
        for chunk in order.chunks(hyper.batch.max(1)) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| train_x[i].as_slice()).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| train_yf[i]).collect();
            let grads = batch_gradients(&net, &xs, &ys, true, Some(rng))?;
            net.apply_gradients(&grads, hyper.lr);
        }
        let train_loss = net.mean_loss(train_x, train_y)?;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                lr: hyper.lr,
            });
        }
        let val_loss = if val_x.is_empty() {
            f64::NAN
        } else {
            net.mean_loss(val_x, val_y)?
        };
        history.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });

        if val_x.is_empty() {
            best = net.clone();
            continue;
        }
        if val_loss < best_val {
            best_val = val_loss;
            best = net.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= EARLY_STOP_PATIENCE {
                break;
            }
        }
    }
    Ok((best, history))
}

/// Training curves as `epoch,train_loss,val_loss` CSV.
pub fn history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in history {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    out
}
