//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-8;
/// Absolute singular-value floor used together with [`RANK_RTOL`]; round-off
/// in an otherwise vanishing matrix must not count as rank.
pub const RANK_ATOL: f64 = 1e-8;

fn cutoff(max: f64, rtol: f64, atol: f64) -> f64 {
    (rtol * max).max(atol)
}

/// `sqrt(u^T g v)`-style inner product.
pub fn inner(g: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (u.transpose() * g * v)[(0, 0)]
}

pub fn g_norm(g: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    inner(g, v, v).max(0.0).sqrt()
}

/// Norm of a `(0,2)` tensor with both indices raised by `g_inv`.
pub fn covariant2_norm(g_inv: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    let raised = g_inv * s * g_inv;
    s.component_mul(&raised).sum().max(0.0).sqrt()
}

/// Modified Gram–Schmidt in the inner product `g`. Vectors whose remainder
/// falls below `tol` (relative to their original g-norm) are dropped.
pub fn g_orthonormalize(g: &DMatrix<f64>, vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = g_norm(g, v);
        let mut w = v.clone();
        for b in &basis {
            let c = inner(g, b, &w);
            w -= b * c;
        }
        let len = g_norm(g, &w);
        if len > tol * scale.max(f64::MIN_POSITIVE) {
            basis.push(w / len);
        }
    }
    basis
}

/// Number of singular values above `max(rtol * sigma_max, atol)`.
pub fn numerical_rank(m: &DMatrix<f64>, rtol: f64, atol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > cutoff(max, rtol, atol)).count()
}

/// Orthonormal (Euclidean) basis of the kernel of `m`, using the same
/// singular-value threshold as [`numerical_rank`].
pub fn kernel_basis(m: &DMatrix<f64>, rtol: f64, atol: f64) -> Vec<DVector<f64>> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    for r in 0..v_t.nrows() {
        let s = svd.singular_values[r];
        if max == 0.0 || s <= cutoff(max, rtol, atol) {
            out.push(v_t.row(r).transpose());
        }
    }
    // thin SVD of a square matrix returns n rows; wide/tall cases are not used here
    debug_assert_eq!(v_t.nrows(), n);
    out
}

/// Minimum-norm least-squares solution of `a x = b` with singular values
/// below `max(rtol * sigma_max, atol)` treated as zero.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64, atol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if max <= atol {
        return DVector::zeros(a.ncols());
    }
    svd.solve(b, cutoff(max, rtol, atol)).expect("U and V^T were computed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_projects_onto_image() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = least_squares(&a, &b, RANK_RTOL, RANK_ATOL);
        let r = &a * &x - &b;
        assert!((r.norm() - 3.0).abs() < 1e-12);
        assert_eq!(numerical_rank(&a, RANK_RTOL, RANK_ATOL), 2);
        let k = kernel_basis(&a, RANK_RTOL, RANK_ATOL);
        assert_eq!(k.len(), 1);
        assert!((k[0][2].abs() - 1.0).abs() < 1e-12);
        let tiny = DMatrix::identity(3, 3) * 3.5e-17;
        assert_eq!(numerical_rank(&tiny, RANK_RTOL, RANK_ATOL), 0);
        assert_eq!(kernel_basis(&tiny, RANK_RTOL, RANK_ATOL).len(), 3);
        let x = least_squares(&tiny, &b, RANK_RTOL, RANK_ATOL);
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn gram_schmidt_in_metric() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let vs = [DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![1.0, -1.0]), DVector::from_vec(vec![2.0, 0.0])];
        let b = g_orthonormalize(&g, &vs, 1e-10);
        assert_eq!(b.len(), 2);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((inner(&g, &b[i], &b[j]) - expected).abs() < 1e-14);
            }
        }
    }
}
