//! Acceptance gate: one test per headline guarantee, each printing a
//! PASS/FAIL line (visible with `--nocapture`).

use std::path::Path;
use std::time::Instant;

use veridict::conv1d::{
    batch_gradients, conv1d_forward, maxpool_forward, Conv1DNet, Layer, LayerGrad, LayerSpec,
    TrainHyper,
};
use veridict::eval::{classification_report, compare_models, ConfusionMatrix, ModelSpec};
use veridict::explain::{lime_explain, shapley_sample, LimeOptions};
use veridict::gcn::{build_graph, gcn_forward, gcn_loss_and_grads, GcnModel};
use veridict::ingest::Sample;
use veridict::math::{bce, mean, population_std, sigmoid, Matrix, RngStream};
use veridict::pipeline::{cmd_run, read_dataset, PipelineConfig};

fn verdict(name: &str, ok: bool, detail: &str) {
    println!(
        "ACCEPTANCE {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name}: {detail}");
}

fn fixture(path: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(path)
}

// ---- gradient fidelity ------------------------------------------------------

#[derive(Clone, Copy)]
enum Coord {
    ConvW(usize, usize, usize),
    ConvB(usize),
    DenseW(usize, usize),
    DenseB(usize),
}

fn all_coords(net: &Conv1DNet) -> Vec<(usize, Coord)> {
    let mut out = Vec::new();
    for (li, layer) in net.layers.iter().enumerate() {
        match layer {
            Layer::Conv { w, b, .. } => {
                for (o, wo) in w.iter().enumerate() {
                    for (i, wi) in wo.iter().enumerate() {
                        for j in 0..wi.len() {
                            out.push((li, Coord::ConvW(o, i, j)));
                        }
                    }
                }
                for o in 0..b.len() {
                    out.push((li, Coord::ConvB(o)));
                }
            }
            Layer::Dense { w, b, .. } => {
                for (o, row) in w.iter().enumerate() {
                    for j in 0..row.len() {
                        out.push((li, Coord::DenseW(o, j)));
                    }
                }
                for o in 0..b.len() {
                    out.push((li, Coord::DenseB(o)));
                }
            }
            _ => {}
        }
    }
    out
}

fn nudge(net: &mut Conv1DNet, li: usize, coord: Coord, delta: f64) {
    match (&mut net.layers[li], coord) {
        (Layer::Conv { w, .. }, Coord::ConvW(o, i, j)) => w[o][i][j] += delta,
        (Layer::Conv { b, .. }, Coord::ConvB(o)) => b[o] += delta,
        (Layer::Dense { w, .. }, Coord::DenseW(o, j)) => w[o][j] += delta,
        (Layer::Dense { b, .. }, Coord::DenseB(o)) => b[o] += delta,
        _ => unreachable!(),
    }
}

fn grad_at(grads: &[LayerGrad], li: usize, coord: Coord) -> f64 {
    match (&grads[li], coord) {
        (LayerGrad::Conv { dw, .. }, Coord::ConvW(o, i, j)) => dw[o][i][j],
        (LayerGrad::Conv { db, .. }, Coord::ConvB(o)) => db[o],
        (LayerGrad::Dense { dw, .. }, Coord::DenseW(o, j)) => dw[o][j],
        (LayerGrad::Dense { db, .. }, Coord::DenseB(o)) => db[o],
        _ => unreachable!(),
    }
}

fn mean_bce(net: &Conv1DNet, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let probs: Vec<f64> = xs.iter().map(|x| net.predict_proba(x).unwrap()).collect();
    bce(ys, &probs).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    let denom = a.abs().max(n.abs());
    if denom < 1e-7 {
        0.0 // both effectively zero
    } else {
        (a - n).abs() / denom
    }
}

#[test]
fn gradient_fidelity() {
    let started = Instant::now();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;

    // 20 random small conv nets
    for seed in 0..20u64 {
        let mut rng = RngStream::new(1000 + seed);
        let input_len = 10 + rng.next_below(5);
        let net = Conv1DNet::new(
            input_len,
            &[
                LayerSpec::Conv {
                    in_ch: 1,
                    out_ch: 2,
                    kernel: 3,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool { window: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { out: 3 },
                LayerSpec::Relu,
                LayerSpec::Dense { out: 1 },
                LayerSpec::Sigmoid,
            ],
            seed,
        )
        .unwrap();
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..input_len).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        let ys = vec![1.0, 0.0, 1.0];
        let refs: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let analytic = batch_gradients(&net, &refs, &ys, false, None).unwrap();

        for (li, coord) in all_coords(&net) {
            let mut plus = net.clone();
            nudge(&mut plus, li, coord, eps);
            let mut minus = net.clone();
            nudge(&mut minus, li, coord, -eps);
            let numeric = (mean_bce(&plus, &xs, &ys) - mean_bce(&minus, &xs, &ys)) / (2.0 * eps);
            worst = worst.max(rel_err(grad_at(&analytic.layers, li, coord), numeric));
        }
    }

    // 5 random GCNs
    for seed in 0..5u64 {
        let mut rng = RngStream::new(2000 + seed);
        let n = 7 + rng.next_below(4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        let graph = build_graph(&rows, 3).unwrap();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let mask: Vec<usize> = (0..n).collect();
        let model = GcnModel::new(4, 3, n.min(5), seed);
        let (_, grads) = gcn_loss_and_grads(&model, &graph, &x, &y, &mask).unwrap();
        let loss_of = |m: &GcnModel| {
            let probs = gcn_forward(m, &graph, &x).unwrap();
            let yt: Vec<f64> = mask.iter().map(|&i| y[i] as f64).collect();
            let pt: Vec<f64> = mask.iter().map(|&i| probs[i]).collect();
            bce(&yt, &pt).unwrap()
        };
        let mut pairs: Vec<(f64, Box<dyn Fn(&mut GcnModel, f64)>)> = Vec::new();
        for i in 0..model.theta1.len() {
            for j in 0..model.theta1[0].len() {
                pairs.push((
                    grads.dtheta1[i][j],
                    Box::new(move |m, d| m.theta1[i][j] += d),
                ));
            }
        }
        for j in 0..model.theta2.len() {
            pairs.push((grads.dtheta2[j], Box::new(move |m, d| m.theta2[j] += d)));
            pairs.push((grads.dbias1[j], Box::new(move |m, d| m.bias1[j] += d)));
        }
        pairs.push((grads.dbias2, Box::new(|m, d| m.bias2 += d)));
        for (analytic, bump) in pairs {
            let mut plus = model.clone();
            bump(&mut plus, eps);
            let mut minus = model.clone();
            bump(&mut minus, -eps);
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps);
            worst = worst.max(rel_err(analytic, numeric));
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        "gradient-fidelity",
        worst < 1e-4 && elapsed < 60.0,
        &format!("worst rel err {worst:.2e}, {elapsed:.1}s"),
    );
}

// ---- equation reproduction --------------------------------------------------

#[test]
fn equation_reproduction() {
    let mut rng = RngStream::new(7);
    let mut worst: f64 = 0.0;

    for _ in 0..1000 {
        // conv1d vs quadruple loop
        let (in_ch, out_ch, k) = (1 + rng.next_below(3), 1 + rng.next_below(3), 1 + rng.next_below(4));
        let len = k + rng.next_below(10);
        let x: Vec<Vec<f64>> = (0..in_ch)
            .map(|_| (0..len).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        let w: Vec<Vec<Vec<f64>>> = (0..out_ch)
            .map(|_| {
                (0..in_ch)
                    .map(|_| (0..k).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..out_ch).map(|_| rng.next_f64() - 0.5).collect();
        let fast = conv1d_forward(&x, &w, &b).unwrap();
        for o in 0..out_ch {
            for t in 0..=(len - k) {
                let mut acc = b[o];
                for i in 0..in_ch {
                    for j in 0..k {
                        acc += x[i][t + j] * w[o][i][j];
                    }
                }
                worst = worst.max((fast[o][t] - acc).abs());
            }
        }

        // maxpool vs chunked scan
        let window = 1 + rng.next_below(4);
        let plen = 1 + rng.next_below(16);
        let v: Vec<f64> = (0..plen).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
        let (pooled, _) = maxpool_forward(&v, window);
        let oracle: Vec<f64> = v
            .chunks(window)
            .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        assert_eq!(pooled.len(), oracle.len());
        for (a, b) in pooled.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }

        // sigmoid vs textbook form
        let z = rng.next_f64() * 60.0 - 30.0;
        worst = worst.max((sigmoid(z) - 1.0 / (1.0 + (-z).exp())).abs());

        // bce vs direct formula (probabilities safely inside the clip range)
        let y = if rng.next_f64() < 0.5 { 0.0 } else { 1.0 };
        let p = 1e-6 + rng.next_f64() * (1.0 - 2e-6);
        let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        worst = worst.max((bce(&[y], &[p]).unwrap() - direct).abs());
    }

    verdict(
        "equation-reproduction",
        worst < 1e-10,
        &format!("max abs diff {worst:.2e}"),
    );
}

// ---- known-case metric arithmetic ----------------------------------------------

#[test]
fn report_rounding_known_case() {
    let cm = ConfusionMatrix {
        tp: 20,
        fp: 2,
        fn_: 0,
        tn: 18,
    };
    let r = classification_report(&cm).unwrap();
    let round2 = |v: f64| (v * 100.0).round() / 100.0;
    let got = [
        round2(r.deceptive.precision),
        round2(r.deceptive.recall),
        round2(r.deceptive.f1),
        round2(r.truthful.precision),
        round2(r.truthful.recall),
        round2(r.truthful.f1),
    ];
    let want = [0.91, 1.00, 0.95, 1.00, 0.90, 0.95];
    verdict(
        "report-rounding",
        got == want,
        &format!("{got:?} vs {want:?}"),
    );
}

#[test]
fn fold_summary_known_case() {
    let folds = [0.909, 0.909, 1.0, 0.95, 1.0];
    let m = mean(&folds);
    let s = population_std(&folds);
    verdict(
        "fold-summary",
        (m - 0.954).abs() < 5e-4 && (s - 0.04).abs() < 5e-3,
        &format!("mean {m:.4}, std {s:.4}"),
    );
}

// ---- end-to-end synthetic benchmark -------------------------------------------

fn benchmark_samples() -> Vec<Sample> {
    read_dataset(&fixture("synthetic")).unwrap()
}

#[test]
fn synthetic_benchmark() {
    let started = Instant::now();
    let samples = benchmark_samples();
    assert_eq!(samples.len(), 120);
    assert_eq!(samples[0].features.values.len(), 161);
    let specs = vec![
        ModelSpec::from_name("conv1d").unwrap(),
        ModelSpec::from_name("logreg").unwrap(),
        ModelSpec::from_name("random_forest").unwrap(),
    ];
    let reports = compare_models(&specs, &samples, 5, 42, 2).unwrap();
    let get = |name: &str| reports.iter().find(|r| r.model == name).unwrap().mean;
    let (conv, lr, rf) = (get("conv1d"), get("logreg"), get("random_forest"));
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        "synthetic-benchmark",
        conv >= 0.95 && lr >= 0.90 && rf >= 0.85 && elapsed < 300.0,
        &format!("conv1d {conv:.3}, logreg {lr:.3}, rf {rf:.3}, {elapsed:.0}s"),
    );
}

#[test]
fn ablation_parity() {
    let samples = benchmark_samples();
    let spec = ModelSpec::from_name("conv1d").unwrap();
    let with = compare_models(&[spec.clone()], &samples, 5, 42, 2).unwrap()[0].mean;

    let mut ablated = samples;
    for s in &mut ablated {
        let (start, end) = s.features.spans.annotation;
        for v in &mut s.features.values[start..end] {
            *v = 0.0;
        }
    }
    let without = compare_models(&[spec], &ablated, 5, 42, 2).unwrap()[0].mean;
    verdict(
        "ablation-parity",
        (with - without).abs() < 0.05,
        &format!("with {with:.3}, without {without:.3}"),
    );
}

// ---- spectral properties -------------------------------------------------------

#[test]
fn spectral_properties() {
    let mut rng = RngStream::new(31);
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut worst_idem: f64 = 0.0;
    for _ in 0..100 {
        let n = 6 + rng.next_below(12);
        let k = 2 + rng.next_below(3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        let graph = build_graph(&rows, k).unwrap();
        min_eig = min_eig.min(*graph.eigvals.first().unwrap());
        max_eig = max_eig.max(*graph.eigvals.last().unwrap());

        let h = Matrix::from_rows(
            &(0..n)
                .map(|_| (0..3).map(|_| rng.next_f64()).collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let m = n / 2;
        let once = veridict::gcn::spectral_filter(&graph, &h, m).unwrap();
        let twice = veridict::gcn::spectral_filter(&graph, &once, m).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            worst_idem = worst_idem.max((a - b).abs());
        }
    }
    verdict(
        "spectral-properties",
        min_eig >= -1e-9 && max_eig <= 2.0 + 1e-8 && worst_idem < 1e-9,
        &format!("eig range [{min_eig:.2e}, {max_eig:.10}], idempotency {worst_idem:.2e}"),
    );
}

// ---- explanation soundness -------------------------------------------------------

#[test]
fn explanation_soundness() {
    // Shapley efficiency
    let model = |x: &[f64]| sigmoid(0.7 * x[0] - 0.4 * x[1] + 0.2 * x[2] * x[3]);
    let mut rng = RngStream::new(17);
    let background: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..4).map(|_| rng.next_normal()).collect())
        .collect();
    let x = [0.9, -0.6, 0.5, 0.3];
    let phi = shapley_sample(&model, &x, &background, 200, &mut rng).unwrap();
    let lhs: f64 = phi.iter().sum();
    let mean_bg: f64 = background.iter().map(|z| model(z)).sum::<f64>() / background.len() as f64;
    let gap = (lhs - (model(&x) - mean_bg)).abs();

    // LIME on a globally linear probability model
    let coefs = [0.08f64, -0.05, 0.03];
    let linear = move |z: &[f64]| 0.5 + coefs.iter().zip(z).map(|(c, v)| c * v).sum::<f64>();
    let spans = veridict::ingest::FusionConfig::default().spans();
    let out = lime_explain(
        &linear,
        "probe",
        &[0.1, 0.2, -0.3],
        &[1.0, 1.0, 1.0],
        &spans,
        &LimeOptions::default(),
        &mut RngStream::new(18),
    )
    .unwrap();
    let signs_ok = out
        .attributions
        .iter()
        .all(|a| a.value.signum() == coefs[a.feature].signum());

    verdict(
        "explanation-soundness",
        gap < 0.02 && out.r2 > 0.99 && signs_ok,
        &format!("efficiency gap {gap:.4}, lime r2 {:.4}", out.r2),
    );
}

// ---- determinism across thread counts --------------------------------------------

#[test]
fn run_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = PipelineConfig {
        seed: 7,
        k: 5,
        threads: 1,
        select: true,
        conv1d: Some(TrainHyper {
            epochs: 12,
            ..TrainHyper::default()
        }),
        ..PipelineConfig::default()
    };
    let data = fixture("synthetic");
    let out1 = dir.path().join("t1");
    cmd_run(&config, Some(&data), &out1).unwrap();
    config.threads = 4;
    let out4 = dir.path().join("t4");
    cmd_run(&config, Some(&data), &out4).unwrap();

    let mut identical = true;
    let mut detail = String::new();
    for file in [
        "report.json",
        "report.txt",
        "selection.csv",
        "explanation.json",
        "train.txt",
        "val.txt",
        "test.txt",
    ] {
        let a = std::fs::read(out1.join(file)).unwrap();
        let b = std::fs::read(out4.join(file)).unwrap();
        if a != b {
            identical = false;
            detail.push_str(&format!("{file} differs; "));
        }
    }
    if identical {
        detail = "all artifacts byte-identical for --threads 1 vs 4".to_string();
    }
    verdict("run-determinism", identical, &detail);
}

// ---- MFCC oracle -------------------------------------------------------------------

#[test]
fn mfcc_oracle() {
    #[derive(serde::Deserialize)]
    struct Expected {
        file: String,
        expected: Vec<f64>,
    }
    let dir = fixture("audio");
    let manifest: Vec<Expected> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).unwrap())
            .unwrap();
    assert!(!manifest.is_empty());
    let mut worst: f64 = 0.0;
    for item in &manifest {
        let bytes = std::fs::read(dir.join(&item.file)).unwrap();
        let signal = veridict::audio::read_wav(&bytes).unwrap();
        let got = veridict::audio::extract_audio_features(&signal).unwrap();
        assert_eq!(got.len(), item.expected.len(), "{}", item.file);
        for (a, b) in got.iter().zip(&item.expected) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        "mfcc-oracle",
        worst < 1e-9,
        &format!("max abs diff {worst:.2e} over {} files", manifest.len()),
    );
}
