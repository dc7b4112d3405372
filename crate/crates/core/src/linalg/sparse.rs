//! Compressed sparse row operators with deterministic assembly.

use std::fmt::Display;
use std::io::{self, Write};

use num_traits::{Num, Signed, ToPrimitive};

use crate::scalar::Real;

/// Coordinate-format accumulator. Duplicate entries are summed in push
/// order after a stable sort by `(row, col)`, so the result never depends
/// on thread scheduling upstream.
#[derive(Clone, Debug)]
pub struct CooBuilder<E> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, E)>,
}

impl<E: Num + Copy> CooBuilder<E> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: E) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Sums duplicates and drops exact zeros.
    pub fn finalize(mut self) -> SparseOperator<E> {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<E> = Vec::with_capacity(self.entries.len());
        let mut i = 0;
        while i < self.entries.len() {
            let (r, c, mut v) = self.entries[i];
            let mut j = i + 1;
            while j < self.entries.len() && self.entries[j].0 == r && self.entries[j].1 == c {
                v = v + self.entries[j].2;
                j += 1;
            }
            if !v.is_zero() {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
            }
            i = j;
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseOperator { nrows: self.nrows, ncols: self.ncols, indptr, indices, data, symmetric: false }
    }
}

/// Sparse matrix in CSR storage with an optional symmetry flag.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<E> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<E>,
    symmetric: bool,
}

impl<E: Num + Copy> SparseOperator<E> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CooBuilder::new(nrows, ncols).finalize()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = CooBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, E::one());
        }
        b.finalize().with_symmetric(true)
    }

    pub fn from_dense(rows: &[Vec<E>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut b = CooBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                b.push(i, j, v);
            }
        }
        b.finalize()
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
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn with_symmetric(mut self, flag: bool) -> Self {
        self.symmetric = flag;
        self
    }

    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, E)> + '_ {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[s..e].iter().copied().zip(self.data[s..e].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, E)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> E {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[s..e].binary_search(&c) {
            Ok(k) => self.data[s + k],
            Err(_) => E::zero(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut b = CooBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (r, c, v) in self.triplets() {
            b.push(c, r, v);
        }
        b.finalize().with_symmetric(self.symmetric)
    }

    pub fn map<F: Num + Copy>(&self, f: impl Fn(E) -> F) -> SparseOperator<F> {
        let mut b = CooBuilder::with_capacity(self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            b.push(r, c, f(v));
        }
        b.finalize().with_symmetric(self.symmetric)
    }

    /// `y = A x`
    pub fn apply(&self, x: &[E], y: &mut [E]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = E::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                s = s + self.data[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[E]) -> Vec<E> {
        let mut y = vec![E::zero(); self.nrows];
        self.apply(x, &mut y);
        y
    }

    /// `y = Aᵀ x`
    pub fn apply_transpose(&self, x: &[E], y: &mut [E]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = E::zero());
        for (r, &xr) in x.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                y[c] = y[c] + self.data[k] * xr;
            }
        }
    }

    /// Sparse product `self * other`, rows accumulated in column order.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut b = CooBuilder::new(self.nrows, other.ncols);
        let mut acc: Vec<E> = vec![E::zero(); other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(r) {
                for (c, v) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = E::zero();
                        cols.push(c);
                    }
                    acc[c] = acc[c] + a * v;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                b.push(r, c, acc[c]);
            }
        }
        b.finalize()
    }

    /// `alpha * self + beta * other`
    pub fn add_scaled(&self, alpha: E, other: &Self, beta: E) -> Self {
        assert!(self.nrows == other.nrows && self.ncols == other.ncols);
        let mut b = CooBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for (r, c, v) in self.triplets() {
            b.push(r, c, alpha * v);
        }
        for (r, c, v) in other.triplets() {
            b.push(r, c, beta * v);
        }
        b.finalize().with_symmetric(self.symmetric && other.symmetric)
    }

    pub fn diagonal(&self) -> Vec<E> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<E>> {
        let mut d = vec![vec![E::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }
}

impl<E: Num + Copy + Signed + PartialOrd> SparseOperator<E> {
    /// `max |A - Aᵀ|` over stored entries.
    pub fn max_asymmetry(&self) -> E {
        let mut m = E::zero();
        for (r, c, v) in self.triplets() {
            let d = (v - self.get(c, r)).abs();
            if d > m {
                m = d;
            }
        }
        m
    }

    pub fn max_abs(&self) -> E {
        self.data.iter().fold(E::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }
}

impl<E: Num + Copy + ToPrimitive> SparseOperator<E> {
    /// Converts an integer operator to a real one.
    pub fn to_real<T: Real>(&self) -> SparseOperator<T> {
        self.map(|v| T::from(v).expect("entry representable"))
    }
}

impl<T: Real> SparseOperator<T> {
    /// True if `max |A - Aᵀ| <= tol * max |A|`.
    pub fn check_symmetric(&self, tol: T) -> bool {
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut asym = T::zero();
        for (r, c, v) in self.triplets() {
            asym = asym.max((v - self.get(c, r)).abs());
        }
        asym <= tol * scale
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[T]) -> T {
        crate::scalar::dot(x, &self.mul_vec(x))
    }
}

impl<E: Num + Copy + Display> SparseOperator<E> {
    /// Coordinate text dump: header `rows cols nnz`, then `row col value`.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v}")?;
        }
        Ok(())
    }
}

impl<T: Real> SparseOperator<T> {
    /// Coordinate dump with 17 significant digits for real operators.
    pub fn write_coordinate_real<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {:.16e}", v)?;
        }
        Ok(())
    }
}
