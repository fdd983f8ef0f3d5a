//! Small dense linear-algebra kernels with explicit accuracy contracts.
//!
//! Cyclic Jacobi for Hermitian eigenproblems and one-sided Jacobi for the
//! SVD: dependency-free and accurate enough for the matrix sizes that occur
//! here (realified Jacobians stay below ~300 rows at desk scale).

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian within {tol:e} relative (deviation {dev:e})")]
    NotHermitian { dev: f64, tol: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("Jacobi iteration failed to converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

const HERMITIAN_RTOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 64;

pub fn frobenius_c(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_r(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. Each eigenvector's phase is canonicalized so its
/// largest-modulus component is real and positive, which keeps downstream
/// runs byte-reproducible.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>), LinalgError> {
    let n = check_square(a)?;
    let scale = frobenius_c(a);
    let dev = {
        let mut d = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        d
    };
    if dev > HERMITIAN_RTOL * scale.max(1e-300) && dev > 1e-14 {
        return Err(LinalgError::NotHermitian {
            dev: dev / scale.max(1e-300),
            tol: HERMITIAN_RTOL,
        });
    }

    // hermitize the working copy so rounding in the input cannot drift
    let mut m = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)].conj());
        }
    }
    let mut v = Array2::<C64>::eye(n);

    let off = |m: &Array2<C64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let tol = 1e-14 * scale.max(1e-300);
    let mut converged = scale == 0.0;
    for _sweep in 0..MAX_SWEEPS {
        if off(&m) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // phase factor turning the pivot real, then a real rotation
                let f = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // unitary columns: u_p = (f c, -s), u_q = (f s, c) in the (p,q) plane
                let upp = f * c;
                let uqp = C64::new(-s, 0.0);
                let upq = f * s;
                let uqq = C64::new(c, 0.0);
                // rows: m <- U^H m
                for k in 0..n {
                    let mp = m[(p, k)];
                    let mq = m[(q, k)];
                    m[(p, k)] = upp.conj() * mp + uqp.conj() * mq;
                    m[(q, k)] = upq.conj() * mp + uqq.conj() * mq;
                }
                // columns: m <- m U, v <- v U
                for k in 0..n {
                    let mp = m[(k, p)];
                    let mq = m[(k, q)];
                    m[(k, p)] = mp * upp + mq * uqp;
                    m[(k, q)] = mp * upq + mq * uqq;
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * upp + vq * uqp;
                    v[(k, q)] = vp * upq + vq * uqq;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
            }
        }
    }
    if !converged && off(&m) > tol * 10.0 {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(i, i)]
            .re
            .partial_cmp(&m[(j, j)].re)
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut vals = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<C64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = m[(src, src)].re;
        for k in 0..n {
            vecs[(k, dst)] = v[(k, src)];
        }
        // canonical phase: largest-modulus component real positive
        let mut imax = 0;
        let mut vmax = 0.0;
        for k in 0..n {
            let nk = vecs[(k, dst)].norm();
            if nk > vmax {
                vmax = nk;
                imax = k;
            }
        }
        if vmax > 0.0 {
            let ph = vecs[(imax, dst)] / vmax;
            for k in 0..n {
                vecs[(k, dst)] = vecs[(k, dst)] * ph.conj();
            }
        }
    }
    Ok((vals, vecs))
}

/// Eigendecomposition of a real symmetric matrix (wraps [`eigh`]).
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), LinalgError> {
    let ac = a.mapv(|x| C64::new(x, 0.0));
    let (vals, vecs) = eigh(&ac)?;
    Ok((vals, vecs.mapv(|z| z.re)))
}

/// Singular value decomposition of a real matrix by one-sided Jacobi.
///
/// Returns `(u, sigma, v)` with `a = u * diag(sigma) * v^T`, singular values
/// descending, `u` of shape m x k and `v` of shape n x k, k = min(m, n).
pub fn svd(a: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    if m < n {
        let at = a.t().to_owned();
        let (u, s, v) = svd(&at);
        return (v, s, u);
    }
    let mut w = a.clone();
    let mut v = Array2::<f64>::eye(n);

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for k in 0..m {
                    app += w[(k, p)] * w[(k, p)];
                    aqq += w[(k, q)] * w[(k, q)];
                    apq += w[(k, p)] * w[(k, q)];
                }
                if apq.abs() <= 1e-15 * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..m {
                    let wp = w[(k, p)];
                    let wq = w[(k, q)];
                    w[(k, p)] = c * wp - s * wq;
                    w[(k, q)] = s * wp + c * wq;
                }
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sig: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let s: f64 = (0..m).map(|k| w[(k, j)] * w[(k, j)]).sum::<f64>().sqrt();
            (s, j)
        })
        .collect();
    sig.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut u = Array2::<f64>::zeros((m, n));
    let mut s_out = Array1::<f64>::zeros(n);
    let mut v_out = Array2::<f64>::zeros((n, n));
    for (dst, &(s, src)) in sig.iter().enumerate() {
        s_out[dst] = s;
        for k in 0..n {
            v_out[(k, dst)] = v[(k, src)];
        }
        if s > 1e-300 {
            for k in 0..m {
                u[(k, dst)] = w[(k, src)] / s;
            }
        }
    }
    // complete U columns for (numerically) zero singular values
    for j in 0..n {
        if s_out[j] > 1e-300 {
            continue;
        }
        for cand in 0..m {
            let mut col = Array1::<f64>::zeros(m);
            col[cand] = 1.0;
            for jj in 0..n {
                if jj == j || (s_out[jj] <= 1e-300 && jj > j) {
                    continue;
                }
                let d: f64 = (0..m).map(|k| u[(k, jj)] * col[k]).sum();
                for k in 0..m {
                    col[k] -= d * u[(k, jj)];
                }
            }
            let nrm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-6 {
                for k in 0..m {
                    u[(k, j)] = col[k] / nrm;
                }
                break;
            }
        }
    }
    (u, s_out, v_out)
}

/// Symmetric inverse square root `X = S^{-1/2}` of an SPD matrix, so that
/// `X^T S X = I`.
pub fn loewdin_half_inverse(s: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    let n = check_square_r(s)?;
    let (vals, vecs) = eigh_real(s)?;
    if vals[0] <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { min_eig: vals[0] });
    }
    let mut x = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += vecs[(i, k)] * vecs[(j, k)] / vals[k].sqrt();
            }
            x[(i, j)] = acc;
        }
    }
    Ok(x)
}

fn check_square(a: &Array2<C64>) -> Result<usize, LinalgError> {
    let (r, c) = a.dim();
    if r != c {
        return Err(LinalgError::NotSquare { rows: r, cols: c });
    }
    Ok(r)
}

fn check_square_r(a: &Array2<f64>) -> Result<usize, LinalgError> {
    let (r, c) = a.dim();
    if r != c {
        return Err(LinalgError::NotSquare { rows: r, cols: c });
    }
    Ok(r)
}
