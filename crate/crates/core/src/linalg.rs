//! Small dense solvers written out by hand so the oracles do not share code
//! with the SVD-backed pseudo-inverse.

use nalgebra::{DMatrix, DVector};

/// Gaussian elimination with partial pivoting. Returns `None` when a pivot
/// falls below `tol` times the largest entry of `a`.
pub(crate) fn solve(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= tol * scale {
            return None;
        }
        if pivot_row != col {
            m.swap_rows(pivot_row, col);
            rhs.swap_rows(pivot_row, col);
        }
        for r in col + 1..n {
            let factor = m[(r, col)] / m[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = DVector::zeros(n);
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[(r, c)] * x[c];
        }
        x[r] = acc / m[(r, r)];
    }
    Some(x)
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass. Vectors whose
/// residual norm is below `tol` times their original norm are dropped.
pub(crate) fn orthonormal_basis(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let original = v.norm();
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
            }
        }
        let n = w.norm();
        if n > tol * original {
            basis.push(w / n);
        }
    }
    basis
}

/// Orthonormal basis of the row space of `a`.
pub(crate) fn row_space(a: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let rows: Vec<DVector<f64>> = (0..a.nrows())
        .map(|r| a.row(r).transpose().into_owned())
        .collect();
    orthonormal_basis(&rows, tol)
}

/// Orthonormal basis of the null space of `a`.
pub(crate) fn null_space(a: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let n = a.ncols();
    let row_basis = row_space(a, tol);
    let rank = row_basis.len();
    let mut all = row_basis;
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let extended = orthonormal_basis(&[all.clone(), vec![e]].concat(), tol);
        if extended.len() > all.len() {
            all = extended;
        }
        if all.len() == n {
            break;
        }
    }
    all.split_off(rank)
}

/// Minimal-norm solution of `a x = b` computed on the row space: with `Q`
/// an orthonormal row-space basis, `x = Q c` where `(A Q) c = b` is solved by
/// least squares through its normal equations. Returns the solution and the
/// detected rank.
pub(crate) fn min_norm_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
) -> Option<(DVector<f64>, usize)> {
    let basis = row_space(a, tol);
    let rank = basis.len();
    if rank == 0 {
        return Some((DVector::zeros(a.ncols()), 0));
    }
    let q = DMatrix::from_columns(&basis);
    let aq = a * &q;
    let normal = aq.transpose() * &aq;
    let rhs = aq.transpose() * b;
    let c = solve(&normal, &rhs, 1e-14)?;
    Some((q * c, rank))
}
