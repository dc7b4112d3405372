//! Stack-allocated vectors and matrices of size at most 3.
//!
//! Chart Jacobians, metric tensors and form proxies never exceed three
//! components, so these avoid heap traffic inside quadrature loops.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

/// Component vector of a form proxy (length 1, 2 or 3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comps<T> {
    len: usize,
    v: [T; 3],
}

impl<T: Real> Comps<T> {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= 3);
        Self { len, v: [T::zero(); 3] }
    }

    pub fn scalar(x: T) -> Self {
        Self { len: 1, v: [x, T::zero(), T::zero()] }
    }

    pub fn from_slice(s: &[T]) -> Self {
        let mut c = Self::zeros(s.len());
        c.v[..s.len()].copy_from_slice(s);
        c
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.v[..self.len]
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len, other.len);
        let mut s = T::zero();
        for i in 0..self.len {
            s = s + self.v[i] * other.v[i];
        }
        s
    }

    pub fn scale(mut self, a: T) -> Self {
        for i in 0..self.len {
            self.v[i] = self.v[i] * a;
        }
        self
    }

    pub fn add(mut self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        for i in 0..self.len {
            self.v[i] = self.v[i] + other.v[i];
        }
        self
    }

    pub fn sub(mut self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        for i in 0..self.len {
            self.v[i] = self.v[i] - other.v[i];
        }
        self
    }

    pub fn max_abs(&self) -> T {
        self.as_slice().iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T> Index<usize> for Comps<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.v[i]
    }
}

impl<T> IndexMut<usize> for Comps<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.v[i]
    }
}

#[inline]
pub fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn norm3<T: Real>(a: [T; 3]) -> T {
    dot3(a, a).sqrt()
}

/// Dense matrix with at most three rows and columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat<T> {
    rows: usize,
    cols: usize,
    a: [[T; 3]; 3],
}

impl<T: Real> SmallMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows <= 3 && cols <= 3);
        Self { rows, cols, a: [[T::zero(); 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.a[i][i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.a[i][j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given 3-vectors.
    pub fn from_columns(cols: &[[T; 3]]) -> Self {
        Self::from_fn(3, cols.len(), |i, j| cols[j][i])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> [T; 3] {
        let mut c = [T::zero(); 3];
        for (i, ci) in c.iter_mut().enumerate().take(self.rows) {
            *ci = self.a[i][j];
        }
        c
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.a[j][i])
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut s = T::zero();
                for k in 0..self.cols {
                    s = s + self.a[i][k] * other.a[k][j];
                }
                m.a[i][j] = s;
            }
        }
        m
    }

    pub fn mul_comps(&self, x: &Comps<T>) -> Comps<T> {
        assert_eq!(self.cols, x.len());
        let mut y = Comps::zeros(self.rows);
        for i in 0..self.rows {
            let mut s = T::zero();
            for k in 0..self.cols {
                s = s + self.a[i][k] * x[k];
            }
            y[i] = s;
        }
        y
    }

    /// Quadratic/bilinear form `xᵀ A y`.
    pub fn bilinear(&self, x: &Comps<T>, y: &Comps<T>) -> T {
        x.dot(&self.mul_comps(y))
    }

    pub fn scale(&self, c: T) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.a[i][j] * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(self.rows == other.rows && self.cols == other.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self.a[i][j] + other.a[i][j])
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert!(self.rows == other.rows && self.cols == other.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self.a[i][j] - other.a[i][j])
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    pub fn det(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let a = &self.a;
        match self.rows {
            0 => T::one(),
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let a = &self.a;
        let inv = match self.rows {
            1 => Self::from_fn(1, 1, |_, _| T::one() / a[0][0]),
            2 => Self::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => a[1][1] / d,
                (0, 1) => -a[0][1] / d,
                (1, 0) => -a[1][0] / d,
                _ => a[0][0] / d,
            }),
            _ => Self::from_fn(3, 3, |i, j| {
                // cofactor of (j, i)
                let r: Vec<usize> = (0..3).filter(|&r| r != j).collect();
                let c: Vec<usize> = (0..3).filter(|&c| c != i).collect();
                let minor = a[r[0]][c[0]] * a[r[1]][c[1]] - a[r[0]][c[1]] * a[r[1]][c[0]];
                let sign = if (i + j) % 2 == 0 { T::one() } else { -T::one() };
                sign * minor / d
            }),
        };
        Some(inv)
    }

    /// Largest asymmetry `max |A - Aᵀ|`.
    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        m
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| half * (self.a[i][j] + self.a[j][i]))
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
    /// Returns eigenvalues ascending and the matrix whose columns are the
    /// corresponding orthonormal eigenvectors.
    pub fn sym_eigen(&self) -> (Comps<T>, Self) {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        for _sweep in 0..64 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + a.a[p][q] * a.a[p][q];
                }
            }
            if off <= T::min_positive_value() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.a[p][q];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a.a[q][q] - a.a[p][p]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.a[k][p];
                        let akq = a.a[k][q];
                        a.a[k][p] = c * akp - s * akq;
                        a.a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a.a[p][k];
                        let aqk = a.a[q][k];
                        a.a[p][k] = c * apk - s * aqk;
                        a.a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v.a[k][p];
                        let vkq = v.a[k][q];
                        v.a[k][p] = c * vkp - s * vkq;
                        v.a[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.a[i][i].partial_cmp(&a.a[j][j]).unwrap_or(std::cmp::Ordering::Equal));
        let vals = Comps::from_slice(&order.iter().map(|&i| a.a[i][i]).collect::<Vec<_>>());
        let vecs = Self::from_fn(n, n, |i, j| v.a[i][order[j]]);
        (vals, vecs)
    }

    /// Applies a scalar function to a symmetric matrix through its spectrum.
    pub fn sym_map(&self, f: impl Fn(T) -> T) -> Self {
        let (vals, vecs) = self.sym_eigen();
        let n = self.rows;
        Self::from_fn(n, n, |i, j| {
            let mut s = T::zero();
            for k in 0..n {
                s = s + vecs.a[i][k] * f(vals[k]) * vecs.a[j][k];
            }
            s
        })
    }

    /// Singular values of a (possibly rectangular) matrix, ascending.
    pub fn singular_values(&self) -> Comps<T> {
        let (vals, _) = self.transpose().mul(self).sym_eigen();
        let mut s = vals;
        for i in 0..s.len() {
            s[i] = s[i].max(T::zero()).sqrt();
        }
        s
    }
}

impl<T> Index<(usize, usize)> for SmallMat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.a[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for SmallMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.a[i][j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_3x3_roundtrip() {
        let m = SmallMat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { (i + 2 * j) as f64 * 0.3 });
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        assert!(prod.sub(&SmallMat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn jacobi_reconstructs_symmetric_matrix() {
        let m = SmallMat::from_fn(3, 3, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 1.0 } else { 0.0 });
        let (vals, vecs) = m.sym_eigen();
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let recon = m.sym_map(|x| x);
        assert!(recon.sub(&m).max_abs() < 1e-14);
        let vtv = vecs.transpose().mul(&vecs);
        assert!(vtv.sub(&SmallMat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn singular_values_of_tall_matrix() {
        let m = SmallMat::<f64>::from_columns(&[[3.0, 0.0, 0.0], [0.0, 0.0, 2.0]]);
        let s = m.singular_values();
        assert!((s[0] - 2.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }
}
