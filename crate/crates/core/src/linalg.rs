//! Dense complex Hermitian eigensolver (cyclic Jacobi).
//!
//! The matrices produced elsewhere in the crate stay small (dimension below a
//! couple hundred), so a dependency-free Jacobi iteration is fast enough and
//! fully deterministic. Used for density-matrix spectra, positivity checks,
//! partial-transpose trace norms, and the matrix-exponential oracles in tests.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
}

/// Eigenvalues (ascending) and eigenvectors (as columns) of a Hermitian matrix.
/// The input is symmetrized as (A + A†)/2 before iterating, so slightly
/// non-Hermitian inputs (integration round-off) are accepted.
pub fn eigh(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>), LinalgError> {
    jacobi(a, true).map(|(vals, vecs)| (vals, vecs.expect("vectors requested")))
}

/// Eigenvalues only (ascending); skips eigenvector accumulation.
pub fn eigvalsh(a: &Array2<C64>) -> Result<Vec<f64>, LinalgError> {
    jacobi(a, false).map(|(vals, _)| vals)
}

fn jacobi(
    a: &Array2<C64>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<C64>>), LinalgError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    let n = rows;
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| Array2::zeros((0, 0)))));
    }

    // Row-major working copy, hermitized.
    let mut m: Vec<C64> = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)].conj());
        }
    }
    let mut v: Vec<C64> = vec![C64::new(0.0, 0.0); if want_vectors { n * n } else { 0 }];
    if want_vectors {
        for i in 0..n {
            v[i * n + i] = C64::new(1.0, 0.0);
        }
    }

    let frob: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(f64::MIN_POSITIVE);
    let max_sweeps = 60;

    for sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j].norm_sqr();
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= tol {
            return Ok(finish(n, &m, if want_vectors { Some(&v) } else { None }));
        }
        let _ = sweep;

        for p in 0..n {
            for q in (p + 1)..n {
                let c_pq = m[p * n + q];
                let mag = c_pq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                let phase = c_pq / mag; // e^{i phi}
                let tau = (app - aqq) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_e = phase * s; // sin(theta) e^{i phi}
                let s_e_conj = s_e.conj();

                // Rows/columns i != p,q:
                //   A_ip <- c A_ip + s e^{-i phi} A_iq
                //   A_iq <- -s e^{i phi} A_ip + c A_iq
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    let new_ip = c * aip + s_e_conj * aiq;
                    let new_iq = -s_e * aip + c * aiq;
                    m[i * n + p] = new_ip;
                    m[i * n + q] = new_iq;
                    m[p * n + i] = new_ip.conj();
                    m[q * n + i] = new_iq.conj();
                }
                m[p * n + p] = C64::new(app + t * mag, 0.0);
                m[q * n + q] = C64::new(aqq - t * mag, 0.0);
                m[p * n + q] = C64::new(0.0, 0.0);
                m[q * n + p] = C64::new(0.0, 0.0);

                if want_vectors {
                    for i in 0..n {
                        let vip = v[i * n + p];
                        let viq = v[i * n + q];
                        v[i * n + p] = c * vip + s_e_conj * viq;
                        v[i * n + q] = -s_e * vip + c * viq;
                    }
                }
            }
        }
    }

    let mut off = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            off += m[i * n + j].norm_sqr();
        }
    }
    Err(LinalgError::NoConvergence {
        sweeps: max_sweeps,
        off: (2.0 * off).sqrt(),
    })
}

fn finish(
    n: usize,
    m: &[C64],
    v: Option<&[C64]>,
) -> (Vec<f64>, Option<Array2<C64>>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .re
            .partial_cmp(&m[j * n + j].re)
            .expect("eigenvalues are finite")
    });
    let vals: Vec<f64> = order.iter().map(|&i| m[i * n + i].re).collect();
    let vecs = v.map(|v| {
        let mut out = Array2::zeros((n, n));
        for (col, &src) in order.iter().enumerate() {
            for row in 0..n {
                out[(row, col)] = v[row * n + src];
            }
        }
        out
    });
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_matrix() {
        let a = array![
            [c(3.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(-1.0, 0.0)]
        ];
        let (vals, _) = eigh(&a).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn known_two_by_two() {
        // Pauli-y-like: eigenvalues +-1.
        let a = array![
            [c(0.0, 0.0), c(0.0, -1.0)],
            [c(0.0, 1.0), c(0.0, 0.0)]
        ];
        let (vals, vecs) = eigh(&a).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        // Residual ||A v - lambda v||.
        for k in 0..2 {
            let v0 = vecs[(0, k)];
            let v1 = vecs[(1, k)];
            let av0 = a[(0, 1)] * v1;
            let av1 = a[(1, 0)] * v0;
            let r = ((av0 - vals[k] * v0).norm_sqr() + (av1 - vals[k] * v1).norm_sqr()).sqrt();
            assert!(r < 1e-12, "residual {r}");
        }
    }

    #[test]
    fn random_hermitian_residuals_and_orthonormality() {
        // Deterministic pseudo-random Hermitian matrix.
        let n = 40;
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut g: Array2<C64> = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = c(next(), next());
            }
        }
        let mut a: Array2<C64> = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = 0.5 * (g[(i, j)] + g[(j, i)].conj());
            }
        }
        let (vals, vecs) = eigh(&a).unwrap();
        // Ascending order.
        for k in 1..n {
            assert!(vals[k] >= vals[k - 1]);
        }
        // Residuals.
        for k in 0..n {
            let mut r = 0.0f64;
            for i in 0..n {
                let mut av = c(0.0, 0.0);
                for j in 0..n {
                    av += a[(i, j)] * vecs[(j, k)];
                }
                r += (av - vals[k] * vecs[(i, k)]).norm_sqr();
            }
            assert!(r.sqrt() < 1e-9, "residual {}", r.sqrt());
        }
        // Orthonormal columns.
        for k in 0..n {
            for l in 0..n {
                let mut dot = c(0.0, 0.0);
                for i in 0..n {
                    dot += vecs[(i, k)].conj() * vecs[(i, l)];
                }
                let expect = if k == l { 1.0 } else { 0.0 };
                assert!((dot - c(expect, 0.0)).norm() < 1e-10);
            }
        }
        // Trace preserved by the spectrum.
        let tr: f64 = (0..n).map(|i| a[(i, i)].re).sum();
        let sum: f64 = vals.iter().sum();
        assert!((tr - sum).abs() < 1e-10);
    }

    #[test]
    fn eigvalsh_matches_eigh() {
        let a = array![
            [c(1.0, 0.0), c(0.5, 0.25), c(0.0, -0.3)],
            [c(0.5, -0.25), c(-2.0, 0.0), c(0.1, 0.0)],
            [c(0.0, 0.3), c(0.1, 0.0), c(0.7, 0.0)]
        ];
        let (v1, _) = eigh(&a).unwrap();
        let v2 = eigvalsh(&a).unwrap();
        for k in 0..3 {
            assert!((v1[k] - v2[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_non_square() {
        let a: Array2<C64> = Array2::zeros((2, 3));
        assert!(matches!(eigh(&a), Err(LinalgError::NotSquare { .. })));
    }
}
