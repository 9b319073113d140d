//! Small dense symmetric-matrix routines: cyclic Jacobi eigendecomposition
//! and Cholesky factorization. Dependency-free on purpose; adequate for the
//! dimensions this pipeline sees (covariances up to a few hundred, mixture
//! covariances of the projected space).

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::{cast, Scalar};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (descending) and the matrix whose ROWS are the
/// corresponding unit eigenvectors. Sweeps until the off-diagonal Frobenius
/// norm falls below `tol` or `max_sweeps` is reached.
pub fn jacobi_eigh<S: Scalar>(a: &Mat<S>, tol: S, max_sweeps: usize) -> Result<(Vec<S>, Mat<S>)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "jacobi on {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if !a.all_finite() {
        return Err(Error::NonFinite("jacobi input".into()));
    }

    let mut m = a.clone();
    // v accumulates rotations; columns of v are eigenvectors of a.
    let mut v: Mat<S> = Mat::identity(n);

    for _ in 0..max_sweeps {
        let mut off = S::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if (off + off).sqrt() <= tol {
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == S::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (cast::<S>(2.0) * apq);
                // Smaller-magnitude root for stability.
                let t = if theta >= S::zero() {
                    S::one() / (theta + (S::one() + theta * theta).sqrt())
                } else {
                    -S::one() / (-theta + (S::one() + theta * theta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj - s * mqj;
                    m[(q, j)] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let eigenvalues: Vec<S> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (row, &col) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(row, i)] = v[(i, col)];
        }
    }
    Ok((eigenvalues, vectors))
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// Fails with `NonFinite` when the matrix is not positive definite.
pub fn cholesky<S: Scalar>(a: &Mat<S>) -> Result<Mat<S>> {
    let n = a.rows();
    let mut l: Mat<S> = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= S::zero() {
                    return Err(Error::NonFinite(
                        "matrix not positive definite in cholesky".into(),
                    ));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve<S: Scalar>(l: &Mat<S>, b: &[S]) -> Vec<S> {
    let n = l.rows();
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// `log(det(L L^T)) = 2 * sum(log(L_ii))`.
pub fn cholesky_log_det<S: Scalar>(l: &Mat<S>) -> S {
    let mut acc = S::zero();
    for i in 0..l.rows() {
        acc += l[(i, i)].ln();
    }
    acc + acc
}
