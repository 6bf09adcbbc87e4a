//! Dense linear-algebra helpers shared by the simulation and random-matrix
//! modules: Gram-side minimum-norm solves, SVD pseudoinverses with the
//! standard cutoff, and a power-iteration spectral-norm estimate.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Cholesky, Diag, SolveTriangular, SVD, UPLO};

use crate::error::{Error, Result};

/// Cutoff below which singular values are treated as zero:
/// `max(d, n) * eps * sigma_max`.
pub fn singular_value_cutoff(d: usize, n: usize, sigma_max: f64) -> f64 {
    d.max(n) as f64 * f64::EPSILON * sigma_max
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration with a
/// fixed deterministic start vector. Converged to a few digits only; callers
/// use it to scale cutoffs, not as a spectral quantity in its own right.
pub fn top_eigenvalue_psd(g: &ArrayView2<f64>) -> f64 {
    let m = g.nrows();
    if m == 0 {
        return 0.0;
    }
    let mut v = Array1::<f64>::from_elem(m, 1.0 / (m as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..30 {
        let w = g.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w.dot(&v);
        let rel = (next - lambda).abs() / next.abs().max(f64::MIN_POSITIVE);
        v = w / norm;
        lambda = next;
        if rel < 1e-6 {
            break;
        }
    }
    lambda.max(0.0)
}

/// Spectral norm (largest singular value) of a rectangular matrix via power
/// iteration on the implicit Gram operator.
pub fn spectral_norm(a: &ArrayView2<f64>) -> f64 {
    let (d, n) = a.dim();
    if d == 0 || n == 0 {
        return 0.0;
    }
    let mut v = Array1::<f64>::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut sigma2 = 0.0;
    for _ in 0..100 {
        let w = a.t().dot(&a.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w.dot(&v);
        let rel = (next - sigma2).abs() / next.abs().max(f64::MIN_POSITIVE);
        v = w / norm;
        sigma2 = next;
        if rel < 1e-13 {
            break;
        }
    }
    sigma2.max(0.0).sqrt()
}

/// Solve `G w = b` for symmetric positive-definite `G` via Cholesky.
/// Returns `None` when the factorization fails (treated as rank-deficient
/// upstream).
pub fn spd_solve(g: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Option<Array1<f64>> {
    let l = g.cholesky(UPLO::Lower).ok()?;
    let z = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &b.to_owned())
        .ok()?;
    l.t()
        .solve_triangular(UPLO::Upper, Diag::NonUnit, &z)
        .ok()
}

/// Moore-Penrose pseudoinverse via full SVD with the standard cutoff.
/// Returns `(pinv, rank, cutoff)`.
pub fn pinv(a: &ArrayView2<f64>) -> Result<(Array2<f64>, usize, f64)> {
    let (d, n) = a.dim();
    let (u, s, vt) = a
        .svd(true, true)
        .map_err(|e| Error::DecompositionFailure(format!("svd: {e}")))?;
    let u = u.ok_or_else(|| Error::DecompositionFailure("svd returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::DecompositionFailure("svd returned no Vt".into()))?;
    let sigma_max = s.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = singular_value_cutoff(d, n, sigma_max);
    let mut rank = 0usize;
    // pinv = V * diag(1/s) * U^T over the leading min(d, n) singular triples
    // (the decomposition returns full square U and Vt), keeping only singular
    // values above the cutoff.
    let k = s.len();
    let mut scaled_ut = Array2::<f64>::zeros((k, d));
    for (i, &sigma) in s.iter().enumerate() {
        if sigma > cutoff {
            rank += 1;
            let row = u.column(i).mapv(|x| x / sigma);
            scaled_ut.row_mut(i).assign(&row);
        }
    }
    let vt_k = vt.slice(ndarray::s![..k, ..]);
    Ok((vt_k.t().dot(&scaled_ut), rank, cutoff))
}

/// Singular values of a rectangular matrix, descending.
pub fn singular_values(a: &ArrayView2<f64>) -> Result<Array1<f64>> {
    let (_, s, _) = a
        .svd(false, false)
        .map_err(|e| Error::DecompositionFailure(format!("svd: {e}")))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn pinv_satisfies_moore_penrose_on_rank_deficient_input() {
        let a = array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]];
        let (p, rank, _) = pinv(&a.view()).unwrap();
        assert_eq!(rank, 1);
        let apa = a.dot(&p).dot(&a);
        for (x, y) in apa.iter().zip(a.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let a = array![[3.0, 1.0, -2.0], [0.5, -1.0, 4.0]];
        let s = singular_values(&a.view()).unwrap();
        assert_relative_eq!(spectral_norm(&a.view()), s[0], max_relative = 1e-10);
    }

    #[test]
    fn top_eigenvalue_matches_direct() {
        let g = array![[4.0, 1.0], [1.0, 3.0]];
        let expect = 3.5 + (0.25f64 + 1.0).sqrt();
        assert_relative_eq!(top_eigenvalue_psd(&g.view()), expect, max_relative = 1e-5);
    }
}
