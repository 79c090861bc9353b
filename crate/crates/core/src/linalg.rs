//! Dense symmetric linear algebra used by the kernel solver and PCA.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Reciprocal-condition threshold below which a solve is rejected.
pub(crate) const RCOND_LIMIT: f64 = 1e-14;

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky
/// factorization. Fails with a condition diagnostic when a pivot collapses
/// or the estimated reciprocal condition falls below [`RCOND_LIMIT`].
pub(crate) fn solve_spd(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "solve_spd expects a square matrix");
    assert_eq!(n, b.nrows(), "right-hand side row count must match");

    let mut l = a.clone();
    let mut min_diag = f64::INFINITY;
    let mut max_diag: f64 = 0.0;
    for j in 0..n {
        let mut d = l[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::SingularSystem { rcond: 0.0 });
        }
        let d = d.sqrt();
        min_diag = min_diag.min(d);
        max_diag = max_diag.max(d);
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut v = l[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / d;
        }
    }
    // Pivot-ratio estimate of the reciprocal condition number: for the
    // Cholesky factor, (min diag / max diag)^2 bounds the eigenvalue spread.
    let rcond = (min_diag / max_diag).powi(2);
    if rcond < RCOND_LIMIT {
        return Err(Error::SingularSystem { rcond });
    }

    let t = b.ncols();
    let mut x = b.clone();
    // Forward substitution: L Y = B.
    for col in 0..t {
        for i in 0..n {
            let mut v = x[[i, col]];
            for k in 0..i {
                v -= l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = v / l[[i, i]];
        }
    }
    // Back substitution: L^T X = Y.
    for col in 0..t {
        for i in (0..n).rev() {
            let mut v = x[[i, col]];
            for k in (i + 1)..n {
                v -= l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = v / l[[i, i]];
        }
    }
    Ok(x)
}

/// Convergence tolerance for the Jacobi eigensolver, relative to the
/// Frobenius norm of the input.
pub(crate) const EIG_TOL: f64 = 1e-10;

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub(crate) fn eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh expects a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n == 0 {
        return (Array1::zeros(0), v);
    }

    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = EIG_TOL * fro.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // Stable rotation: t = sign(theta) / (|theta| + sqrt(theta^2 + 1)).
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[[k, src]];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_hand_checked_system() {
        // A = [[4,2],[2,3]], b = [[2],[1]]; x = [ (6-2)/8, (4-4)/8 ] -> [0.5, 0].
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![[2.0], [1.0]];
        let x = solve_spd(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        let b = array![[1.0], [1.0]];
        assert!(matches!(
            solve_spd(&a, &b),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn eigh_recovers_diagonal() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        let (vals, vecs) = eigh(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[[0, 0]].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_symmetric_input() {
        let a = array![
            [2.0, -1.0, 0.5],
            [-1.0, 3.0, 1.5],
            [0.5, 1.5, 1.0]
        ];
        let (vals, vecs) = eigh(&a);
        // V diag(vals) V^T == A
        let mut rec = Array2::<f64>::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += vecs[[i, k]] * vals[k] * vecs[[j, k]];
                }
                rec[[i, j]] = s;
            }
        }
        for (x, y) in rec.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
