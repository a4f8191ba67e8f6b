use super::Matrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const OFF_DIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns of the returned matrix. Converges when the off-diagonal Frobenius
/// norm drops below 1e-12 (at most 100 sweeps).
pub fn sym_eig(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if s.rows() != s.cols() {
        return Err(Error::shape(format!(
            "sym_eig: matrix is {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    if !s.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::precondition("sym_eig: matrix not symmetric"));
    }
    let n = s.rows();
    let mut a = s.clone();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        if off_diag_norm(&a) < OFF_DIAG_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // rotation angle zeroing a[p][q]
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_ = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s_ * akq);
                    a.set(k, q, s_ * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s_ * aqk);
                    a.set(q, k, s_ * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s_ * vkq);
                    v.set(k, q, s_ * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, new_col, v.get(k, old_col));
        }
    }
    Ok((eigenvalues, vectors))
}

fn off_diag_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a.get(i, j) * a.get(i, j);
            }
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngStream;

    #[test]
    fn identity_eigenvalues() {
        let (vals, _) = sym_eig(&Matrix::identity(2)).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_sorted_ascending() {
        let d = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let (vals, _) = sym_eig(&d).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn k2_normalized_laplacian() {
        let l = Matrix::from_vec(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let (vals, _) = sym_eig(&l).unwrap();
        assert!(vals[0].abs() < 1e-10);
        assert!((vals[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_symmetric() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(sym_eig(&m).is_err());
    }

    fn random_symmetric(rng: &mut RngStream, n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.next_f64() * 2.0 - 1.0;
                m.set(i, j, x);
                m.set(j, i, x);
            }
        }
        m
    }

    #[test]
    fn eigenpairs_satisfy_definition_and_orthonormality() {
        let mut rng = RngStream::new(31);
        for n in [2usize, 5, 9] {
            let s = random_symmetric(&mut rng, n);
            let (vals, vecs) = sym_eig(&s).unwrap();
            for i in 1..n {
                assert!(vals[i] >= vals[i - 1]);
            }
            // S v_i = lambda_i v_i
            for i in 0..n {
                let vi = vecs.col(i);
                let sv = s.matvec(&vi).unwrap();
                for k in 0..n {
                    assert!((sv[k] - vals[i] * vi[k]).abs() < 1e-8);
                }
            }
            // orthonormal columns
            let vtv = vecs.transpose().matmul(&vecs).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv.get(i, j) - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn reconstruction_frobenius() {
        let mut rng = RngStream::new(77);
        let s = random_symmetric(&mut rng, 6);
        let (vals, vecs) = sym_eig(&s).unwrap();
        let mut lam = Matrix::zeros(6, 6);
        for i in 0..6 {
            lam.set(i, i, vals[i]);
        }
        let recon = vecs.matmul(&lam).unwrap().matmul(&vecs.transpose()).unwrap();
        let mut diff = 0.0;
        for (a, b) in recon.data().iter().zip(s.data()) {
            diff += (a - b) * (a - b);
        }
        assert!(diff.sqrt() < 1e-8);
    }
}
