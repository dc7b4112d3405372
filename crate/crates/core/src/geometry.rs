//! Riemannian metrics in chart coordinates, reference-simplex quadrature and
//! the pointwise weights realizing the L² pairing of form proxies.

use std::sync::Arc;

use crate::error::{FeecError, Result};
use crate::linalg::small::{cross, dot3, norm3};
use crate::linalg::{DenseMatrix, SmallMat};
use crate::mesh::SimplicialComplex;
use crate::scalar::Real;

/// Quadrature on the reference simplex `{x_i ≥ 0, Σ x_i ≤ 1}`.
#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    dim: usize,
    degree: usize,
    points: Vec<[T; 3]>,
    weights: Vec<T>,
}

/// Highest exactness degree served by the collapsed-coordinate rules.
pub const MAX_QUADRATURE_DEGREE: usize = 30;

impl<T: Real> QuadratureRule<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[[T; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.points.iter().zip(&self.weights).map(move |(p, &w)| (&p[..self.dim], w))
    }
}

/// `m`-point Gauss-Jacobi rule on `[0, 1]` for the weight `(1 − t)^α`,
/// by the Golub-Welsch eigenvalue method. `α = 0` is Gauss-Legendre.
fn gauss_jacobi(m: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DenseMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        let s = 2.0 * kf + alpha;
        jac[(k, k)] = if s + 2.0 == 0.0 || s == 0.0 { 0.0 } else { -alpha * alpha / (s * (s + 2.0)) };
        if k + 1 < m {
            let j = kf + 1.0;
            let s = 2.0 * j + alpha;
            let b = (4.0 * j * (j + alpha) * j * (j + alpha) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
            jac[(k, k + 1)] = b;
            jac[(k + 1, k)] = b;
        }
    }
    let eig = jac.sym_eigen(true);
    let vecs = eig.vectors.expect("eigenvectors requested");
    // total mass of (1 − t)^α on [0, 1]
    let mu0 = 1.0 / (alpha + 1.0);
    let nodes = eig.values.iter().map(|x| 0.5 * (1.0 + x)).collect();
    let weights = (0..m).map(|i| mu0 * vecs[(0, i)] * vecs[(0, i)]).collect();
    (nodes, weights)
}

/// Rule on the reference `n`-simplex exact for polynomials of total degree
/// `degree`. Degrees 0 to 2 use the classical centroid and vertex-interior
/// rules; higher degrees use Gauss-Jacobi products in collapsed
/// coordinates. `n = 1` gives Gauss-Legendre on `[0, 1]`.
pub fn quadrature_rule<T: Real>(n: usize, degree: usize) -> Result<QuadratureRule<T>> {
    if !(1..=3).contains(&n) || degree > MAX_QUADRATURE_DEGREE {
        return Err(FeecError::UnsupportedQuadrature { n, degree });
    }
    let fact = (1..=n).product::<usize>() as f64;
    let mut points: Vec<[f64; 3]> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    if degree <= 1 {
        let c = 1.0 / (n as f64 + 1.0);
        let mut p = [0.0; 3];
        p[..n].iter_mut().for_each(|v| *v = c);
        points.push(p);
        weights.push(1.0 / fact);
    } else if degree == 2 && n == 2 {
        for p in [[1.0 / 6.0, 1.0 / 6.0, 0.0], [2.0 / 3.0, 1.0 / 6.0, 0.0], [1.0 / 6.0, 2.0 / 3.0, 0.0]] {
            points.push(p);
            weights.push(1.0 / 6.0);
        }
    } else if degree == 2 && n == 3 {
        let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
        let b = (5.0 - 5f64.sqrt()) / 20.0;
        for i in 0..4 {
            let mut bary = [b; 4];
            bary[i] = a;
            points.push([bary[1], bary[2], bary[3]]);
            weights.push(1.0 / 24.0);
        }
    } else {
        let m = degree / 2 + 1;
        let (t0, w0) = gauss_jacobi(m, 0.0);
        let (t1, w1) = gauss_jacobi(m, 1.0);
        let (t2, w2) = gauss_jacobi(m, 2.0);
        match n {
            1 => {
                for i in 0..m {
                    points.push([t0[i], 0.0, 0.0]);
                    weights.push(w0[i]);
                }
            }
            2 => {
                for i in 0..m {
                    for j in 0..m {
                        points.push([t1[i], (1.0 - t1[i]) * t0[j], 0.0]);
                        weights.push(w1[i] * w0[j]);
                    }
                }
            }
            _ => {
                for i in 0..m {
                    for j in 0..m {
                        for l in 0..m {
                            let (u, v) = (t2[i], t1[j]);
                            points.push([u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * t0[l]]);
                            weights.push(w2[i] * w1[j] * w0[l]);
                        }
                    }
                }
            }
        }
    }
    Ok(QuadratureRule {
        dim: n,
        degree,
        points: points.into_iter().map(|p| p.map(T::lit)).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    })
}

/// The homeomorphism from the computational manifold onto the exact one,
/// restricted cellwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaMap {
    Identity,
    /// `x ↦ x / |x|` onto the unit sphere.
    RadialProjection,
}

impl ThetaMap {
    pub fn point<T: Real>(&self, complex: &SimplicialComplex<T>, cell: usize, xhat: &[T]) -> [T; 3] {
        let p = complex.affine_point(cell, xhat);
        match self {
            ThetaMap::Identity => p,
            ThetaMap::RadialProjection => {
                let r = norm3(p);
                p.map(|v| v / r)
            }
        }
    }

    /// `3 × n` Jacobian of `Θ ∘ ı_T` at `xhat`.
    pub fn jacobian<T: Real>(&self, complex: &SimplicialComplex<T>, cell: usize, xhat: &[T]) -> SmallMat<T> {
        let j = complex.affine_jacobian(cell);
        match self {
            ThetaMap::Identity => j,
            ThetaMap::RadialProjection => {
                let p = complex.affine_point(cell, xhat);
                let r = norm3(p);
                let y = p.map(|v| v / r);
                let proj = SmallMat::from_fn(3, 3, |a, b| {
                    let id = if a == b { T::one() } else { T::zero() };
                    (id - y[a] * y[b]) / r
                });
                proj.mul(&j)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ThetaMap::Identity => "identity",
            ThetaMap::RadialProjection => "radial",
        }
    }
}

/// Exact metric on the target manifold in ambient coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExactMetric {
    Euclidean,
    /// `exp(ε S(x))` with `S` a symmetric, unit-periodic matrix of sines.
    Perturbed { eps: f64 },
}

impl ExactMetric {
    pub fn eval<T: Real>(&self, p: [T; 3]) -> SmallMat<T> {
        match *self {
            ExactMetric::Euclidean => SmallMat::identity(3),
            ExactMetric::Perturbed { eps } => perturbation(p).scale(T::lit(eps)).sym_map(|v| v.exp()),
        }
    }
}

/// Symmetric matrix field `S(x)` used by the perturbed torus metric.
pub fn perturbation<T: Real>(p: [T; 3]) -> SmallMat<T> {
    let tau = T::lit(2.0) * T::PI();
    let h = T::lit(0.5);
    let (sx, sy, sz) = ((tau * p[0]).sin(), (tau * p[1]).sin(), (tau * p[2]).sin());
    let (cy, cz) = ((tau * p[1]).cos(), (tau * p[2]).cos());
    let mut s = SmallMat::zeros(3, 3);
    s[(0, 0)] = sy;
    s[(1, 1)] = sz;
    s[(2, 2)] = cy;
    s[(0, 1)] = h * cz;
    s[(1, 0)] = h * cz;
    s[(1, 2)] = h * sx;
    s[(2, 1)] = h * sx;
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    Analytic,
    PiecewiseLinear,
    PiecewiseConstant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolationScheme {
    PiecewiseConstant,
    PiecewiseLinear,
}

#[derive(Clone, Debug)]
enum MetricKind<T> {
    Pullback { theta: ThetaMap, exact: ExactMetric },
    PiecewiseConstant(Vec<SmallMat<T>>),
    /// Metric values at the local vertices of each cell.
    PiecewiseLinear(Vec<Vec<SmallMat<T>>>),
}

/// Chart components of a Riemannian metric on a complex, evaluable at
/// reference points of each top cell.
#[derive(Clone, Debug)]
pub struct MetricField<T> {
    complex: Arc<SimplicialComplex<T>>,
    kind: MetricKind<T>,
    scale: T,
}

impl<T: Real> MetricField<T> {
    /// `g̃ = Jᵀ G(Θ(p)) J`, with `J` the Jacobian of `Θ ∘ ı_T`.
    pub fn pullback(complex: Arc<SimplicialComplex<T>>, theta: ThetaMap, exact: ExactMetric) -> Self {
        Self { complex, kind: MetricKind::Pullback { theta, exact }, scale: T::one() }
    }

    /// Gram matrix of the affine charts (the piecewise-flat metric).
    pub fn flat(complex: Arc<SimplicialComplex<T>>) -> Self {
        Self::pullback(complex, ThetaMap::Identity, ExactMetric::Euclidean)
    }

    pub fn piecewise_constant(complex: Arc<SimplicialComplex<T>>, values: Vec<SmallMat<T>>) -> Result<Self> {
        if values.len() != complex.num_cells() {
            return Err(FeecError::Mismatch(format!("{} cell values for {} cells", values.len(), complex.num_cells())));
        }
        for (cell, g) in values.iter().enumerate() {
            check_spd(cell, g)?;
        }
        Ok(Self { complex, kind: MetricKind::PiecewiseConstant(values), scale: T::one() })
    }

    /// `c·g`.
    pub fn scaled(&self, c: T) -> Self {
        Self { complex: self.complex.clone(), kind: self.kind.clone(), scale: self.scale * c }
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex<T>> {
        &self.complex
    }

    pub fn smoothness(&self) -> Smoothness {
        match self.kind {
            MetricKind::Pullback { .. } => Smoothness::Analytic,
            MetricKind::PiecewiseConstant(_) => Smoothness::PiecewiseConstant,
            MetricKind::PiecewiseLinear(_) => Smoothness::PiecewiseLinear,
        }
    }

    /// `n × n` metric matrix at reference point `xhat` of `cell`.
    pub fn eval(&self, cell: usize, xhat: &[T]) -> SmallMat<T> {
        let g = self.eval_unscaled(cell, xhat);
        if self.scale == T::one() {
            g
        } else {
            g.scale(self.scale)
        }
    }

    fn eval_unscaled(&self, cell: usize, xhat: &[T]) -> SmallMat<T> {
        match &self.kind {
            MetricKind::Pullback { theta, exact } => {
                let j = theta.jacobian(&self.complex, cell, xhat);
                let p = theta.point(&self.complex, cell, xhat);
                let gp = exact.eval(p);
                j.transpose().mul(&gp).mul(&j).symmetrized()
            }
            MetricKind::PiecewiseConstant(v) => v[cell].clone(),
            MetricKind::PiecewiseLinear(v) => {
                let vals = &v[cell];
                let l0 = T::one() - xhat.iter().copied().sum::<T>();
                let mut g = vals[0].scale(l0);
                for (i, &xi) in xhat.iter().enumerate() {
                    g = g.add(&vals[i + 1].scale(xi));
                }
                g
            }
        }
    }

    /// Interpolates this metric cellwise at barycenters or at vertices.
    pub fn interpolate(&self, scheme: InterpolationScheme) -> Result<Self> {
        let n = self.complex.dim();
        let kind = match (scheme, &self.kind) {
            (InterpolationScheme::PiecewiseConstant, MetricKind::PiecewiseConstant(_))
            | (InterpolationScheme::PiecewiseLinear, MetricKind::PiecewiseLinear(_)) => self.kind.clone(),
            (InterpolationScheme::PiecewiseConstant, _) => {
                let c = T::one() / T::from_usize_lossy(n + 1);
                let bary = vec![c; n];
                let vals = (0..self.complex.num_cells()).map(|cell| self.eval_unscaled(cell, &bary)).collect::<Vec<_>>();
                for (cell, g) in vals.iter().enumerate() {
                    check_spd(cell, g)?;
                }
                MetricKind::PiecewiseConstant(vals)
            }
            (InterpolationScheme::PiecewiseLinear, _) => {
                let mut corners = vec![vec![T::zero(); n]];
                for i in 0..n {
                    let mut e = vec![T::zero(); n];
                    e[i] = T::one();
                    corners.push(e);
                }
                let vals = (0..self.complex.num_cells())
                    .map(|cell| corners.iter().map(|p| self.eval_unscaled(cell, p)).collect::<Vec<_>>())
                    .collect::<Vec<_>>();
                for (cell, gs) in vals.iter().enumerate() {
                    for g in gs {
                        check_spd(cell, g)?;
                    }
                }
                MetricKind::PiecewiseLinear(vals)
            }
        };
        Ok(Self { complex: self.complex.clone(), kind, scale: self.scale })
    }
}

fn check_spd<T: Real>(cell: usize, g: &SmallMat<T>) -> Result<()> {
    let scale = g.max_abs();
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(FeecError::DegenerateMetric { cell, detail: "zero or non-finite metric".into() });
    }
    if g.asymmetry() > T::lit(1e-12) * scale {
        return Err(FeecError::DegenerateMetric { cell, detail: "asymmetric metric".into() });
    }
    let (vals, _) = g.sym_eigen();
    if !(vals[0] > T::zero()) {
        return Err(FeecError::DegenerateMetric {
            cell,
            detail: format!("smallest eigenvalue {:e}", vals[0].to_f64_lossy()),
        });
    }
    Ok(())
}

/// Pointwise weight `W_k(G)` of the L² pairing of degree-`k` proxies in an
/// `n`-dimensional chart. Returned as `1 × 1` for scalar proxies.
pub fn mass_weight<T: Real>(k: usize, g: &SmallMat<T>) -> Result<SmallMat<T>> {
    let n = g.rows();
    if k > n {
        return Err(FeecError::DegreeOutOfRange { k, n });
    }
    let det = g.det();
    if !(det > T::zero()) {
        return Err(FeecError::DegenerateMetric { cell: usize::MAX, detail: format!("det G = {:e}", det.to_f64_lossy()) });
    }
    let sq = det.sqrt();
    let scalar = |v: T| SmallMat::from_fn(1, 1, |_, _| v);
    Ok(match (n, k) {
        (_, 0) => scalar(sq),
        (n, k) if k == n => scalar(T::one() / sq),
        (_, 1) => g.inverse().expect("positive determinant").scale(sq),
        _ => g.scale(T::one() / sq),
    })
}

/// `∫ 1 dvol` over all cells.
pub fn total_volume<T: Real>(metric: &MetricField<T>, quad: &QuadratureRule<T>) -> Result<T> {
    let complex = metric.complex();
    let mut total = T::zero();
    for cell in 0..complex.num_cells() {
        for (p, w) in quad.iter() {
            let det = metric.eval(cell, p).det();
            if !(det > T::zero()) {
                return Err(FeecError::DegenerateMetric { cell, detail: format!("det G = {:e}", det.to_f64_lossy()) });
            }
            total = total + w * det.sqrt();
        }
    }
    Ok(total)
}

/// Outward unit normal of a sphere cell chart, used for orientation checks.
pub fn chart_normal<T: Real>(complex: &SimplicialComplex<T>, cell: usize) -> [T; 3] {
    let j = complex.affine_jacobian(cell);
    let n = cross(j.column(0), j.column(1));
    let len = norm3(n);
    let s = if dot3(n, complex.cell_centroid(cell)) < T::zero() { -T::one() } else { T::one() };
    n.map(|v| s * v / len)
}
