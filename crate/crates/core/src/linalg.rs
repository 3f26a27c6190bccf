//! Small dense helpers shared by the geometric modules.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Real};

pub struct SortedSvd<T: Real> {
    pub u: DMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DMatrix<T>,
}

/// One-sided Jacobi SVD: rotates the columns of `m` until they are pairwise
/// orthogonal. Unlike bidiagonal QR it keeps the leading singular vectors
/// accurate when the condition number is far beyond 1/eps.
fn jacobi_svd<T: Real>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    let (rows, n) = m.shape();
    let scale = m.amax();
    let mut a = if scale > T::zero() { m / scale } else { m.clone() };
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    let two: T = lit(2.0);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (a[(r, i)], a[(r, j)]);
                    a[(r, i)] = c * x - s * y;
                    a[(r, j)] = s * x + c * y;
                }
                for r in 0..n {
                    let (x, y) = (v[(r, i)], v[(r, j)]);
                    v[(r, i)] = c * x - s * y;
                    v[(r, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<T> = (0..n).map(|j| a.column(j).norm()).collect();
    for (j, &sj) in sigma.iter().enumerate() {
        if sj > T::zero() {
            let col = a.column(j) / sj;
            a.set_column(j, &col);
        }
    }
    let sigma = sigma.into_iter().map(|x| x * scale).collect();
    (a, sigma, v)
}

/// Full SVD with singular values sorted non-increasing.
pub fn svd_sorted<T: Real>(m: &DMatrix<T>) -> SortedSvd<T> {
    let (u, sv, v) = jacobi_svd(m);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(Ordering::Equal));
    let n = m.nrows();
    let mut us = DMatrix::zeros(n, order.len());
    let mut vs = DMatrix::zeros(m.ncols(), order.len());
    let mut rank = 0;
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        if sv[src] > T::zero() {
            rank = dst + 1;
        }
    }
    if rank < order.len() && n == m.ncols() {
        // exactly singular: complete U orthonormally
        let head = us.columns(0, rank).into_owned();
        us = complete_frame(&head, &DMatrix::zeros(n, 0));
    }
    SortedSvd {
        u: us,
        sigma: order.iter().map(|&i| sv[i]).collect(),
        v: vs,
    }
}

pub fn singular_values_desc<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let (_, mut sv, _) = jacobi_svd(m);
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    sv
}

/// Removes the components of `v` along the orthonormal columns in `basis`
/// (two passes of modified Gram-Schmidt).
fn project_out<T: Real>(v: &mut DVector<T>, basis: &[DVector<T>]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(v);
            v.axpy(-c, b, T::one());
        }
    }
}

/// Orthonormalizes the columns of `m` in order, so that the span of the first
/// `j` output columns equals the span of the first `j` input columns.
pub fn orthonormalize_nested<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let mut v: DVector<T> = m.column(j).into_owned();
        project_out(&mut v, &basis);
        let n = v.norm();
        v /= n;
        basis.push(v);
    }
    DMatrix::from_columns(&basis)
}

/// Builds an orthonormal frame of R^d whose first `p` columns span the nested
/// spans of `top`, and whose last `q` columns span the nested spans of
/// `bottom_rev` read from the end (column 0 of `bottom_rev` becomes the last
/// frame column). Remaining columns are filled from the standard basis.
pub fn complete_frame<T: Real>(top: &DMatrix<T>, bottom_rev: &DMatrix<T>) -> DMatrix<T> {
    let d = top.nrows().max(bottom_rev.nrows());
    let p = top.ncols();
    let q = bottom_rev.ncols();
    assert!(p + q <= d, "frame blocks overlap");
    let mut head: Vec<DVector<T>> = Vec::with_capacity(d);
    for j in 0..p {
        let mut v: DVector<T> = top.column(j).into_owned();
        project_out(&mut v, &head);
        let n = v.norm();
        head.push(v / n);
    }
    let mut tail: Vec<DVector<T>> = Vec::with_capacity(q);
    for j in 0..q {
        let mut v: DVector<T> = bottom_rev.column(j).into_owned();
        let mut all = head.clone();
        all.extend(tail.iter().cloned());
        project_out(&mut v, &all);
        let n = v.norm();
        tail.push(v / n);
    }
    let mut fixed = head.clone();
    fixed.extend(tail.iter().cloned());
    let mut middle: Vec<DVector<T>> = Vec::new();
    while head.len() + middle.len() + tail.len() < d {
        let mut best: Option<DVector<T>> = None;
        let mut best_norm = T::zero();
        for i in 0..d {
            let mut v = DVector::zeros(d);
            v[i] = T::one();
            let mut all = fixed.clone();
            all.extend(middle.iter().cloned());
            project_out(&mut v, &all);
            let n = v.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(v / n);
            }
        }
        middle.push(best.expect("dimension count"));
    }
    let mut cols = head;
    cols.extend(middle);
    cols.extend(tail.into_iter().rev());
    DMatrix::from_columns(&cols)
}

/// log of the j-dimensional volume spanned by the columns of `m`.
pub fn log_volume<T: Real>(m: &DMatrix<T>) -> T {
    let r = m.clone().qr().r();
    let mut acc = T::zero();
    for i in 0..r.nrows().min(r.ncols()) {
        acc += r[(i, i)].abs().ln();
    }
    acc
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// k-th compound matrix (matrix of k×k minors in lexicographic index order).
pub fn compound<T: Real>(m: &DMatrix<T>, k: usize) -> DMatrix<T> {
    let n = m.nrows();
    if k == 1 {
        return m.clone();
    }
    let idx = combinations(n, k);
    let mut out = DMatrix::zeros(idx.len(), idx.len());
    for (a, rows) in idx.iter().enumerate() {
        for (b, cols) in idx.iter().enumerate() {
            let sub = DMatrix::from_fn(k, k, |i, j| m[(rows[i], cols[j])]);
            out[(a, b)] = sub.determinant();
        }
    }
    out
}

/// Largest eigenvalue modulus, or `None` if the Schur iteration fails.
pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> Option<T> {
    if m.nrows() == 1 {
        return Some(m[(0, 0)].abs());
    }
    let schur = m.clone().try_schur(T::default_epsilon(), 10_000)?;
    let ev = schur.complex_eigenvalues();
    let mut best = T::zero();
    for z in ev.iter() {
        let r = (z.re * z.re + z.im * z.im).sqrt();
        if !r.is_finite() {
            return None;
        }
        if r > best {
            best = r;
        }
    }
    Some(best)
}

/// Largest principal angle between the column spans of two orthonormal
/// d×j matrices.
pub fn max_principal_angle<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    if a.ncols() == 0 {
        return T::zero();
    }
    let bta = b.transpose() * a;
    let resid = a - b * &bta;
    let sin = singular_values_desc(&resid)
        .first()
        .copied()
        .unwrap_or(T::zero());
    let cos = singular_values_desc(&bta)
        .last()
        .copied()
        .unwrap_or(T::zero());
    sin.atan2(cos)
}

/// Row-echelon rank with a relative pivot threshold.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>, rel_tol: f64) -> usize {
    let sv = singular_values_desc(m);
    let top = sv.first().copied().unwrap_or(T::zero());
    if top == T::zero() {
        return 0;
    }
    let thr = top * lit::<T>(rel_tol);
    sv.iter().filter(|&&s| s > thr).count()
}
