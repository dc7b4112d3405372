//! Row-major dense matrices: Cholesky, LU, symmetric and generalized
//! symmetric eigenproblems, and exact integer rank.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{FeecError, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![T::zero(); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols);
            data.extend_from_slice(r);
        }
        Self { nrows, ncols, data }
    }

    /// Builds a matrix from column vectors.
    pub fn from_columns(cols: &[Vec<T>], nrows: usize) -> Self {
        let mut m = Self::zeros(nrows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), nrows);
            for i in 0..nrows {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut c = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let crow = c.row_mut(i);
                for (cj, oj) in crow.iter_mut().zip(orow) {
                    *cj = *cj + a * *oj;
                }
            }
        }
        c
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| crate::scalar::dot(self.row(i), x)).collect()
    }

    /// `Aᵀ x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            crate::scalar::axpy(xi, self.row(i), &mut y);
        }
        y
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    /// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.nrows;
        assert_eq!(n, self.ncols);
        let mut l = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    s = s - l.data[ri + k] * l.data[rj + k];
                }
                if i == j {
                    if s <= T::zero() || !s.is_finite() {
                        return Err(FeecError::NotPositiveDefinite { pivot: i });
                    }
                    l.data[ri + i] = s.sqrt();
                } else {
                    l.data[ri + j] = s / l.data[rj + j];
                }
            }
        }
        Ok(l)
    }

    /// Solves `L X = B` in place for lower-triangular `self`.
    pub fn forward_solve_in_place(&self, b: &mut Self) {
        let n = self.nrows;
        assert_eq!(b.nrows, n);
        let m = b.ncols;
        for i in 0..n {
            for k in 0..i {
                let lik = self.data[i * n + k];
                if lik == T::zero() {
                    continue;
                }
                let (head, tail) = b.data.split_at_mut(i * m);
                let bk = &head[k * m..(k + 1) * m];
                let bi = &mut tail[..m];
                for (x, y) in bi.iter_mut().zip(bk) {
                    *x = *x - lik * *y;
                }
            }
            let d = self.data[i * n + i];
            for x in b.row_mut(i) {
                *x = *x / d;
            }
        }
    }

    /// Solves `Lᵀ X = B` in place for lower-triangular `self`.
    pub fn backward_solve_transpose_in_place(&self, b: &mut Self) {
        let n = self.nrows;
        let m = b.ncols;
        for i in (0..n).rev() {
            let d = self.data[i * n + i];
            for x in b.row_mut(i) {
                *x = *x / d;
            }
            for k in 0..i {
                let lik = self.data[i * n + k];
                if lik == T::zero() {
                    continue;
                }
                let (head, tail) = b.data.split_at_mut(i * m);
                let bi = &tail[..m];
                let bk = &mut head[k * m..(k + 1) * m];
                for (x, y) in bk.iter_mut().zip(bi) {
                    *x = *x - lik * *y;
                }
            }
        }
    }

    /// Solves `A x = b` by LU with partial pivoting.
    pub fn lu_solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.nrows;
        assert_eq!(n, self.ncols);
        assert_eq!(b.len(), n);
        let mut a = self.clone();
        let mut x = b.to_vec();
        let scale = a.max_abs();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[(col, col)].abs();
            for r in (col + 1)..n {
                let v = a[(r, col)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= scale * T::EPS * T::from_usize_lossy(n) {
                return Err(FeecError::SingularMatrix { context: format!("LU pivot {col} of {n}") });
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                }
                x.swap(col, piv);
            }
            let d = a[(col, col)];
            for r in (col + 1)..n {
                let f = a[(r, col)] / d;
                if f == T::zero() {
                    continue;
                }
                a[(r, col)] = T::zero();
                for j in (col + 1)..n {
                    let v = a[(col, j)];
                    a[(r, j)] = a[(r, j)] - f * v;
                }
                x[r] = x[r] - f * x[col];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s = s - a[(i, j)] * x[j];
            }
            x[i] = s / a[(i, i)];
        }
        Ok(x)
    }

    /// Eigenvalues (ascending) and, optionally, orthonormal eigenvectors of a
    /// symmetric matrix via Householder tridiagonalization and implicit QL.
    pub fn sym_eigen(&self, want_vectors: bool) -> SymEigen<T> {
        let n = self.nrows;
        assert_eq!(n, self.ncols);
        if n == 0 {
            return SymEigen { values: vec![], vectors: None };
        }
        // column-major working copy: v[c * n + r]
        let mut v = vec![T::zero(); n * n];
        for r in 0..n {
            for c in 0..n {
                v[c * n + r] = T::lit(0.5) * (self[(r, c)] + self[(c, r)]);
            }
        }
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        tred2(n, &mut v, &mut d, &mut e, want_vectors);
        tql2(n, &mut v, &mut d, &mut e, want_vectors);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| d[i]).collect();
        let vectors = want_vectors.then(|| {
            let mut m = Self::zeros(n, n);
            for (j, &src) in order.iter().enumerate() {
                for r in 0..n {
                    m[(r, j)] = v[src * n + r];
                }
            }
            m
        });
        SymEigen { values, vectors }
    }

    /// Generalized symmetric-definite eigenproblem `A x = λ B x` with `B`
    /// SPD. Eigenvectors are `B`-orthonormal.
    pub fn generalized_sym_eigen(a: &Self, b: &Self, want_vectors: bool) -> Result<SymEigen<T>> {
        let n = a.nrows;
        assert!(a.ncols == n && b.nrows == n && b.ncols == n);
        let l = b.cholesky()?;
        let mut x = a.clone();
        l.forward_solve_in_place(&mut x);
        let mut c = x.transpose();
        l.forward_solve_in_place(&mut c);
        let eig = c.sym_eigen(want_vectors);
        let vectors = eig.vectors.map(|mut y| {
            l.backward_solve_transpose_in_place(&mut y);
            y
        });
        Ok(SymEigen { values: eig.values, vectors })
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.ncols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.ncols + j]
    }
}

#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Columns are eigenvectors, in the order of `values`.
    pub vectors: Option<DenseMatrix<T>>,
}

// Householder reduction to tridiagonal form (after the EISPACK tred2
// routine). `v` is column-major.
fn tred2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T], accumulate: bool) {
    let at = |r: usize, c: usize| c * n + r;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale = scale + d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
                v[at(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] = d[k] / scale;
                h = h + d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                let col = &v[j * n..j * n + n];
                for k in (j + 1)..i {
                    g = g + col[k] * d[k];
                    e[k] = e[k] + col[k] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col = &mut v[j * n..j * n + n];
                for k in j..i {
                    col[k] = col[k] - (f * e[k] + g * d[k]);
                }
                d[j] = col[i - 1];
                col[i] = T::zero();
            }
        }
        d[i] = h;
    }
    if accumulate {
        for i in 0..(n - 1) {
            v[at(n - 1, i)] = v[at(i, i)];
            v[at(i, i)] = T::one();
            let h = d[i + 1];
            if h != T::zero() {
                for k in 0..=i {
                    d[k] = v[at(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = T::zero();
                    for k in 0..=i {
                        g = g + v[at(k, i + 1)] * v[at(k, j)];
                    }
                    for k in 0..=i {
                        let idx = at(k, j);
                        v[idx] = v[idx] - g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[at(k, i + 1)] = T::zero();
            }
        }
        for j in 0..n {
            d[j] = v[at(n - 1, j)];
            v[at(n - 1, j)] = T::zero();
        }
        v[at(n - 1, n - 1)] = T::one();
    } else {
        // the reduced diagonal is left on v's diagonal
        for j in 0..n {
            d[j] = v[at(j, j)];
        }
    }
    e[0] = T::zero();
}

// Symmetric tridiagonal QL with implicit shifts (EISPACK tql2).
fn tql2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T], accumulate: bool) {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::EPS;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 * n.max(10) {
                    break;
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if accumulate {
                        let (lo, hi) = v.split_at_mut((i + 1) * n);
                        let ci = &mut lo[i * n..];
                        let ci1 = &mut hi[..n];
                        for k in 0..n {
                            let hk = ci1[k];
                            ci1[k] = s * ci[k] + c * hk;
                            ci[k] = c * ci[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = T::zero();
    }
}

/// Exact rank over the rationals of an integer matrix (fraction-free
/// Bareiss elimination with arbitrary precision).
pub fn integer_rank(rows: &[Vec<i64>]) -> usize {
    let nrows = rows.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = rows[0].len();
    let mut a: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    let mut prev = BigInt::from(1);
    let mut rank = 0;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(piv) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in (rank + 1)..nrows {
            for c in (col + 1)..ncols {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}
