//! Spectral graph convolutional classifier over a sample-similarity graph.
//!
//! Nodes are samples, edges come from cosine-kNN over fused features, and
//! convolution is projection onto the lowest-frequency eigenvectors of the
//! normalized Laplacian.

use crate::error::{Error, Result};
use crate::math::{bce, sigmoid, sym_eig, Matrix, RngStream};
use serde::{Deserialize, Serialize};

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_FILTER_WIDTH: usize = 16;

#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub n: usize,
    pub adjacency: Matrix,
    pub degree: Vec<f64>,
    pub laplacian: Matrix,
    /// Ascending eigenvalues of the normalized Laplacian.
    pub eigvals: Vec<f64>,
    /// Matching eigenvectors, one per column.
    pub eigvecs: Matrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GcnModel {
    pub m: usize,
    /// [d][h]
    pub theta1: Vec<Vec<f64>>,
    /// [h]
    pub theta2: Vec<f64>,
    pub bias1: Vec<f64>,
    pub bias2: f64,
    pub seed: u64,
}

fn cosine(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Cosine-similarity kNN graph: edge i->j when j is among i's top-k most
/// similar rows, symmetrized by max, edge weight max(cos, 0). Eigenpairs of
/// the normalized Laplacian are computed once here.
pub fn build_graph(x: &[Vec<f64>], k: usize) -> Result<GraphSpec> {
    let n = x.len();
    if n < 2 {
        return Err(Error::precondition("build_graph: need at least 2 samples"));
    }
    if k == 0 {
        return Err(Error::config("build_graph: k must be positive"));
    }
    let norms: Vec<f64> = x
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for (i, nm) in norms.iter().enumerate() {
        if *nm == 0.0 {
            return Err(Error::precondition(format!(
                "build_graph: sample {i} has zero norm"
            )));
        }
        if !nm.is_finite() {
            return Err(Error::precondition(format!(
                "build_graph: sample {i} has non-finite features"
            )));
        }
    }

    let mut adjacency = Matrix::zeros(n, n);
    for i in 0..n {
        let mut sims: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, cosine(&x[i], &x[j], norms[i], norms[j])))
            .collect();
        // descending similarity, ascending index on ties
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(j, sim) in sims.iter().take(k.min(n - 1)) {
            let w = sim.max(0.0);
            // symmetrize by max
            if w > adjacency.get(i, j) {
                adjacency.set(i, j, w);
                adjacency.set(j, i, w);
            }
        }
    }

    let degree: Vec<f64> = (0..n).map(|i| adjacency.row(i).iter().sum()).collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut laplacian = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            let a = adjacency.get(i, j);
            if a != 0.0 {
                let l = laplacian.get(i, j) - inv_sqrt[i] * a * inv_sqrt[j];
                laplacian.set(i, j, l);
            }
        }
    }
    let (eigvals, eigvecs) = sym_eig(&laplacian)?;
    Ok(GraphSpec {
        n,
        adjacency,
        degree,
        laplacian,
        eigvals,
        eigvecs,
    })
}

impl GraphSpec {
    /// Dense projector onto the m smoothest eigenvectors: U_m U_m^T.
    pub fn projector(&self, m: usize) -> Result<Matrix> {
        if m > self.n {
            return Err(Error::config(format!(
                "spectral filter width {m} exceeds node count {}",
                self.n
            )));
        }
        let mut um = Matrix::zeros(self.n, m);
        for i in 0..self.n {
            for j in 0..m {
                um.set(i, j, self.eigvecs.get(i, j));
            }
        }
        um.matmul(&um.transpose())
    }

    /// Edge-list CSV (upper triangle, nonzero weights): `src,dst,weight`.
    pub fn edge_list_csv(&self) -> String {
        let mut out = String::from("src,dst,weight\n");
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let w = self.adjacency.get(i, j);
                if w != 0.0 {
                    out.push_str(&format!("{i},{j},{w}\n"));
                }
            }
        }
        out
    }
}

/// Project each column of H onto the m smoothest Laplacian eigenvectors.
pub fn spectral_filter(graph: &GraphSpec, h: &Matrix, m: usize) -> Result<Matrix> {
    if h.rows() != graph.n {
        return Err(Error::shape(format!(
            "spectral_filter: {} feature rows for {} nodes",
            h.rows(),
            graph.n
        )));
    }
    graph.projector(m)?.matmul(h)
}

impl GcnModel {
    pub fn new(d: usize, hidden: usize, m: usize, seed: u64) -> GcnModel {
        let mut rng = RngStream::new(seed);
        let lim1 = (6.0 / (d + hidden) as f64).sqrt();
        let theta1 = (0..d)
            .map(|_| {
                (0..hidden)
                    .map(|_| (rng.next_f64() * 2.0 - 1.0) * lim1)
                    .collect()
            })
            .collect();
        let lim2 = (6.0 / (hidden + 1) as f64).sqrt();
        let theta2 = (0..hidden)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) * lim2)
            .collect();
        GcnModel {
            m,
            theta1,
            theta2,
            bias1: vec![0.0; hidden],
            bias2: 0.0,
            seed,
        }
    }

    fn hidden(&self) -> usize {
        self.theta2.len()
    }
}

struct GcnCache {
    fx: Matrix,  // filter(X), n x d
    z1: Matrix,  // fx . theta1 + b1, n x h
    fh1: Matrix, // filter(relu(z1))
    probs: Vec<f64>,
}

fn forward_full(model: &GcnModel, graph: &GraphSpec, x: &Matrix) -> Result<GcnCache> {
    let d = model.theta1.len();
    let h = model.hidden();
    if x.cols() != d {
        return Err(Error::shape(format!(
            "gcn_forward: {} feature columns, model expects {d}",
            x.cols()
        )));
    }
    let theta1 = Matrix::from_rows(&model.theta1)?;
    let fx = spectral_filter(graph, x, model.m)?;
    let mut z1 = fx.matmul(&theta1)?;
    for i in 0..z1.rows() {
        for j in 0..h {
            let v = z1.get(i, j) + model.bias1[j];
            z1.set(i, j, v);
        }
    }
    let mut h1 = z1.clone();
    for v in h1.data_mut() {
        *v = v.max(0.0);
    }
    let fh1 = spectral_filter(graph, &h1, model.m)?;
    let probs = (0..graph.n)
        .map(|i| {
            let z: f64 = fh1
                .row(i)
                .iter()
                .zip(&model.theta2)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + model.bias2;
            sigmoid(z)
        })
        .collect();
    Ok(GcnCache {
        fx,
        z1,
        fh1,
        probs,
    })
}

/// Per-node probability of label 1 (transductive: all nodes scored).
pub fn gcn_forward(model: &GcnModel, graph: &GraphSpec, x: &Matrix) -> Result<Vec<f64>> {
    Ok(forward_full(model, graph, x)?.probs)
}

/// Masked BCE loss and its analytic parameter gradients in one pass.
pub fn gcn_loss_and_grads(
    model: &GcnModel,
    graph: &GraphSpec,
    x: &Matrix,
    y: &[u8],
    mask: &[usize],
) -> Result<(f64, GcnGradients)> {
    let cache = forward_full(model, graph, x)?;
    let loss = masked_loss(&cache.probs, y, mask)?;
    let grads = backward(model, graph, &cache, y, mask)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GcnHyper {
    pub lr: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub m: usize,
}

impl Default for GcnHyper {
    fn default() -> Self {
        GcnHyper {
            lr: 0.05,
            epochs: 300,
            hidden: 16,
            m: DEFAULT_FILTER_WIDTH,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GcnGradients {
    pub dtheta1: Vec<Vec<f64>>,
    pub dtheta2: Vec<f64>,
    pub dbias1: Vec<f64>,
    pub dbias2: f64,
}

fn backward(
    model: &GcnModel,
    graph: &GraphSpec,
    cache: &GcnCache,
    y: &[u8],
    mask: &[usize],
) -> Result<GcnGradients> {
    let n = graph.n;
    let h = model.hidden();
    let scale = 1.0 / mask.len() as f64;

    // dL/dz2 per node; zero off the mask
    let mut dz2 = vec![0.0; n];
    for &i in mask {
        dz2[i] = (cache.probs[i] - y[i] as f64) * scale;
    }

    // theta2 path: z2 = fh1 . theta2 + b2
    let mut dtheta2 = vec![0.0; h];
    for (i, &d) in dz2.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for (g, &v) in dtheta2.iter_mut().zip(cache.fh1.row(i)) {
            *g += d * v;
        }
    }
    let dbias2: f64 = dz2.iter().sum();

    // dH1 = P . dz2 . theta2^T (projector is symmetric)
    let proj = graph.projector(model.m)?;
    let pdz2 = proj.matvec(&dz2)?;
    let mut dz1 = Matrix::zeros(n, h);
    for i in 0..n {
        for j in 0..h {
            if cache.z1.get(i, j) > 0.0 {
                dz1.set(i, j, pdz2[i] * model.theta2[j]);
            }
        }
    }

    // theta1 path: z1 = fx . theta1 + b1
    let dtheta1_m = cache.fx.transpose().matmul(&dz1)?;
    let dtheta1: Vec<Vec<f64>> = (0..dtheta1_m.rows())
        .map(|i| dtheta1_m.row(i).to_vec())
        .collect();
    let dbias1: Vec<f64> = (0..h).map(|j| dz1.col(j).iter().sum()).collect();

    Ok(GcnGradients {
        dtheta1,
        dtheta2,
        dbias1,
        dbias2,
    })
}

fn masked_loss(probs: &[f64], y: &[u8], mask: &[usize]) -> Result<f64> {
    let yt: Vec<f64> = mask.iter().map(|&i| y[i] as f64).collect();
    let pt: Vec<f64> = mask.iter().map(|&i| probs[i]).collect();
    bce(&yt, &pt)
}

/// Full-batch gradient descent on BCE over the train-mask nodes; the
/// best-validation model is returned (final model when val mask is empty).
pub fn gcn_train(
    graph: &GraphSpec,
    x: &Matrix,
    y: &[u8],
    train_mask: &[usize],
    val_mask: &[usize],
    hyper: &GcnHyper,
    rng: &mut RngStream,
) -> Result<GcnModel> {
    if train_mask.is_empty() {
        return Err(Error::precondition("gcn_train: empty train mask"));
    }
    if train_mask.iter().any(|i| val_mask.contains(i)) {
        return Err(Error::precondition(
            "gcn_train: train and val masks overlap",
        ));
    }
    if let Some(&bad) = train_mask.iter().chain(val_mask).find(|&&i| i >= graph.n) {
        return Err(Error::precondition(format!(
            "gcn_train: mask index {bad} out of range"
        )));
    }
    if hyper.m > graph.n {
        return Err(Error::config(format!(
            "gcn_train: filter width {} exceeds node count {}",
            hyper.m, graph.n
        )));
    }

    let mut model = GcnModel::new(x.cols(), hyper.hidden, hyper.m, rng.next_u64());
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;

    for epoch in 0..hyper.epochs {
        let cache = forward_full(&model, graph, x)?;
        let train_loss = masked_loss(&cache.probs, y, train_mask)?;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                lr: hyper.lr,
            });
        }
        let grads = backward(&model, graph, &cache, y, train_mask)?;
        for (row, grow) in model.theta1.iter_mut().zip(&grads.dtheta1) {
            for (w, g) in row.iter_mut().zip(grow) {
                *w -= hyper.lr * g;
            }
        }
        for (w, g) in model.theta2.iter_mut().zip(&grads.dtheta2) {
            *w -= hyper.lr * g;
        }
        for (b, g) in model.bias1.iter_mut().zip(&grads.dbias1) {
            *b -= hyper.lr * g;
        }
        model.bias2 -= hyper.lr * grads.dbias2;

        if !val_mask.is_empty() {
            let probs = gcn_forward(&model, graph, x)?;
            let val_loss = masked_loss(&probs, y, val_mask)?;
            if val_loss < best_val {
                best_val = val_loss;
                best = model.clone();
            }
        }
    }
    Ok(if val_mask.is_empty() { model } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_features(rng: &mut RngStream, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect()
    }

    #[test]
    fn identical_unit_vectors_edge_weight_one() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let g = build_graph(&x, 1).unwrap();
        assert!((g.adjacency.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((g.adjacency.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k2_laplacian_spectrum() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let g = build_graph(&x, 1).unwrap();
        assert!((g.laplacian.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((g.laplacian.get(0, 1) + 1.0).abs() < 1e-12);
        assert!(g.eigvals[0].abs() < 1e-10);
        assert!((g.eigvals[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn adjacency_symmetric_and_zero_diagonal() {
        let mut rng = RngStream::new(11);
        let x = random_features(&mut rng, 12, 6);
        let g = build_graph(&x, 3).unwrap();
        assert!(g.adjacency.is_symmetric(0.0));
        for i in 0..g.n {
            assert_eq!(g.adjacency.get(i, i), 0.0);
        }
    }

    #[test]
    fn laplacian_eigenvalues_in_range() {
        let mut rng = RngStream::new(22);
        for seed_k in 2..5usize {
            let x = random_features(&mut rng, 15, 8);
            let g = build_graph(&x, seed_k).unwrap();
            assert!(*g.eigvals.first().unwrap() >= -1e-9);
            assert!(*g.eigvals.last().unwrap() <= 2.0 + 1e-8);
        }
    }

    #[test]
    fn zero_norm_row_rejected_with_index() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]];
        let err = build_graph(&x, 1).unwrap_err();
        assert!(err.to_string().contains("sample 1"), "{err}");
    }

    #[test]
    fn filter_complete_basis_is_identity() {
        let mut rng = RngStream::new(31);
        let x = random_features(&mut rng, 8, 4);
        let g = build_graph(&x, 3).unwrap();
        let h = Matrix::from_rows(&random_features(&mut rng, 8, 5)).unwrap();
        let filtered = spectral_filter(&g, &h, 8).unwrap();
        for (a, b) in filtered.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn filter_is_idempotent() {
        let mut rng = RngStream::new(32);
        let x = random_features(&mut rng, 10, 4);
        let g = build_graph(&x, 3).unwrap();
        let h = Matrix::from_rows(&random_features(&mut rng, 10, 3)).unwrap();
        let once = spectral_filter(&g, &h, 4).unwrap();
        let twice = spectral_filter(&g, &once, 4).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_matches_dense_projector_oracle() {
        let mut rng = RngStream::new(33);
        let x = random_features(&mut rng, 9, 5);
        let g = build_graph(&x, 3).unwrap();
        let h = Matrix::from_rows(&random_features(&mut rng, 9, 2)).unwrap();
        let m = 4;
        let fast = spectral_filter(&g, &h, m).unwrap();
        // oracle: element-wise double sum over the explicit projector
        for i in 0..9 {
            for c in 0..2 {
                let mut acc = 0.0;
                for j in 0..9 {
                    let mut pij = 0.0;
                    for t in 0..m {
                        pij += g.eigvecs.get(i, t) * g.eigvecs.get(j, t);
                    }
                    acc += pij * h.get(j, c);
                }
                assert!((fast.get(i, c) - acc).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn filter_m_too_large_is_config_error() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = build_graph(&x, 1).unwrap();
        let h = Matrix::zeros(2, 1);
        assert!(matches!(
            spectral_filter(&g, &h, 3),
            Err(Error::Config(_))
        ));
    }

    /// 2k-regular ring graph (every node linked to k neighbors either side
    /// with equal weight) so the lambda_0 eigenvector is exactly constant.
    fn regular_ring(n: usize) -> GraphSpec {
        let mut adjacency = Matrix::zeros(n, n);
        for i in 0..n {
            for off in [1usize, 2] {
                let j = (i + off) % n;
                adjacency.set(i, j, 1.0);
                adjacency.set(j, i, 1.0);
            }
        }
        let degree: Vec<f64> = (0..n).map(|i| adjacency.row(i).iter().sum()).collect();
        let mut laplacian = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                let a = adjacency.get(i, j);
                if a != 0.0 {
                    let l = laplacian.get(i, j) - a / (degree[i] * degree[j]).sqrt();
                    laplacian.set(i, j, l);
                }
            }
        }
        let (eigvals, eigvecs) = sym_eig(&laplacian).unwrap();
        GraphSpec {
            n,
            adjacency,
            degree,
            laplacian,
            eigvals,
            eigvecs,
        }
    }

    #[test]
    fn m1_filter_constant_on_regular_graph() {
        let g = regular_ring(10);
        let mut rng = RngStream::new(40);
        let h = Matrix::from_rows(&random_features(&mut rng, 10, 3)).unwrap();
        let filtered = spectral_filter(&g, &h, 1).unwrap();
        for c in 0..3 {
            let col = filtered.col(c);
            for v in &col {
                assert!((v - col[0]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_weights_give_half_everywhere() {
        let mut rng = RngStream::new(41);
        let xf = random_features(&mut rng, 8, 4);
        let g = build_graph(&xf, 3).unwrap();
        let x = Matrix::from_rows(&xf).unwrap();
        let mut model = GcnModel::new(4, 3, 4, 7);
        model.theta1.iter_mut().flatten().for_each(|v| *v = 0.0);
        model.theta2.iter_mut().for_each(|v| *v = 0.0);
        let probs = gcn_forward(&model, &g, &x).unwrap();
        assert!(probs.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = RngStream::new(42);
        let xf = random_features(&mut rng, 8, 4);
        let g = build_graph(&xf, 3).unwrap();
        let x = Matrix::from_rows(&xf).unwrap();
        let model = GcnModel::new(4, 3, 4, 7);
        let p1 = gcn_forward(&model, &g, &x).unwrap();
        let p2 = gcn_forward(&model, &g, &x).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = RngStream::new(43);
        let xf = random_features(&mut rng, 5, 4);
        let model = GcnModel::new(4, 3, 3, 9);

        let g = build_graph(&xf, 2).unwrap();
        let x = Matrix::from_rows(&xf).unwrap();
        let base = gcn_forward(&model, &g, &x).unwrap();

        let perm = [3usize, 0, 4, 1, 2];
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| xf[i].clone()).collect();
        let gp = build_graph(&permuted, 2).unwrap();
        let xp = Matrix::from_rows(&permuted).unwrap();
        let out = gcn_forward(&model, &gp, &xp).unwrap();

        for (slot, &orig) in perm.iter().enumerate() {
            assert!(
                (out[slot] - base[orig]).abs() < 1e-8,
                "node {orig}: {} vs {}",
                base[orig],
                out[slot]
            );
        }
    }

    #[test]
    fn gradient_check_against_central_differences() {
        let mut rng = RngStream::new(44);
        let xf = random_features(&mut rng, 7, 4);
        let g = build_graph(&xf, 3).unwrap();
        let x = Matrix::from_rows(&xf).unwrap();
        let y: Vec<u8> = (0..7).map(|i| (i % 2) as u8).collect();
        let mask: Vec<usize> = (0..7).collect();
        let model = GcnModel::new(4, 3, 4, 5);

        let cache = forward_full(&model, &g, &x).unwrap();
        let grads = backward(&model, &g, &cache, &y, &mask).unwrap();

        let loss_of = |m: &GcnModel| {
            let probs = gcn_forward(m, &g, &x).unwrap();
            masked_loss(&probs, &y, &mask).unwrap()
        };
        let eps = 1e-6;
        let check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "analytic {analytic} vs numeric {numeric}"
            );
        };

        for i in 0..model.theta1.len() {
            for j in 0..model.theta1[0].len() {
                let mut plus = model.clone();
                plus.theta1[i][j] += eps;
                let mut minus = model.clone();
                minus.theta1[i][j] -= eps;
                check(grads.dtheta1[i][j], (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps));
            }
        }
        for j in 0..model.theta2.len() {
            let mut plus = model.clone();
            plus.theta2[j] += eps;
            let mut minus = model.clone();
            minus.theta2[j] -= eps;
            check(grads.dtheta2[j], (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps));
        }
        for j in 0..model.bias1.len() {
            let mut plus = model.clone();
            plus.bias1[j] += eps;
            let mut minus = model.clone();
            minus.bias1[j] -= eps;
            check(grads.dbias1[j], (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps));
        }
        {
            let mut plus = model.clone();
            plus.bias2 += eps;
            let mut minus = model.clone();
            minus.bias2 -= eps;
            check(grads.dbias2, (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps));
        }
    }

    /// Two dense clusters in feature space, separated direction, labels by
    /// cluster. kNN wires mostly within clusters.
    fn two_cluster_fixture() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = RngStream::new(60);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let label = (i % 2) as u8;
            let center = if label == 1 { [3.0, 3.0, 0.5, 0.5] } else { [0.5, 0.5, 3.0, 3.0] };
            x.push(
                center
                    .iter()
                    .map(|c| c + 0.3 * rng.next_normal())
                    .collect::<Vec<f64>>(),
            );
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn two_cluster_fixture_test_accuracy() {
        let (xf, y) = two_cluster_fixture();
        let g = build_graph(&xf, 5).unwrap();
        let x = Matrix::from_rows(&xf).unwrap();
        // first 20 train, last 10 test
        let train: Vec<usize> = (0..20).collect();
        let test: Vec<usize> = (20..30).collect();
        let hyper = GcnHyper {
            m: 8,
            ..GcnHyper::default()
        };
        let model = gcn_train(&g, &x, &y, &train, &[], &hyper, &mut RngStream::new(3)).unwrap();
        let probs = gcn_forward(&model, &g, &x).unwrap();
        let correct = test
            .iter()
            .filter(|&&i| (probs[i] > 0.5) == (y[i] == 1))
            .count();
        assert!(
            correct as f64 / test.len() as f64 >= 0.9,
            "accuracy {}",
            correct as f64 / test.len() as f64
        );
    }

    #[test]
    fn overlapping_masks_rejected() {
        let (xf, y) = two_cluster_fixture();
        let g = build_graph(&xf, 5).unwrap();
        let x = Matrix::from_rows(&xf).unwrap();
        let err = gcn_train(
            &g,
            &x,
            &y,
            &[0, 1, 2],
            &[2, 3],
            &GcnHyper::default(),
            &mut RngStream::new(0),
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn same_seed_identical_model() {
        let (xf, y) = two_cluster_fixture();
        let g = build_graph(&xf, 5).unwrap();
        let x = Matrix::from_rows(&xf).unwrap();
        let train: Vec<usize> = (0..20).collect();
        let hyper = GcnHyper {
            epochs: 30,
            m: 8,
            ..GcnHyper::default()
        };
        let a = gcn_train(&g, &x, &y, &train, &[], &hyper, &mut RngStream::new(4)).unwrap();
        let b = gcn_train(&g, &x, &y, &train, &[], &hyper, &mut RngStream::new(4)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn edge_list_csv_round_trips_weights() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = build_graph(&x, 1).unwrap();
        let csv = g.edge_list_csv();
        assert!(csv.starts_with("src,dst,weight\n"));
        assert!(csv.contains("0,1,1\n"));
    }
}
