//! Lowest-order Whitney forms: P1, Nédélec, Raviart-Thomas and broken
//! constants, written in reference-simplex coordinates.
//!
//! Every field is represented on each top cell by the proxy components of
//! its pullback to the reference simplex. The metric is pulled back as well
//! (`G = Jᵀ g J`), so the Piola transforms are implicit: the covariant and
//! contravariant maps are absorbed into `G` and the weights `W_k(G)`.
//!
//! Proxy conventions in an `n`-dimensional chart:
//! * degree 0 and `n`: one scalar;
//! * degree 1: covector components;
//! * degree 2 for `n = 3`: components on `(dx₂∧dx₃, dx₃∧dx₁, dx₁∧dx₂)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{FeecError, Result};
use crate::geometry::{mass_weight, quadrature_rule, MetricField, QuadratureRule, ThetaMap};
use crate::linalg::small::cross;
use crate::linalg::{Comps, CooBuilder, SmallMat, SparseOperator};
use crate::mesh::{binomial, local_subsimplices, SimplicialComplex};
use crate::scalar::Real;
use crate::symbolic::FormField;

/// Trace regularity of a field, which decides the interpolants it admits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuity {
    Smooth,
    TangentiallyContinuous,
    Discontinuous,
}

impl Continuity {
    pub fn name(&self) -> &'static str {
        match self {
            Continuity::Smooth => "smooth",
            Continuity::TangentiallyContinuous => "tangentially-continuous",
            Continuity::Discontinuous => "discontinuous",
        }
    }
}

/// A differential form given cellwise by chart proxies.
pub trait CellwiseForm<T: Real>: Sync {
    fn degree(&self) -> usize;

    /// Proxy components of the pulled-back form at `xhat` in `cell`.
    fn eval(&self, cell: usize, xhat: &[T]) -> Comps<T>;

    /// Proxy components of the exterior derivative, if available.
    fn eval_d(&self, _cell: usize, _xhat: &[T]) -> Option<Comps<T>> {
        None
    }

    fn continuity(&self) -> Continuity {
        Continuity::Smooth
    }
}

/// Number of proxy components of a degree-`k` form in dimension `n`.
pub fn proxy_len(n: usize, k: usize) -> usize {
    if k == 0 || k == n {
        1
    } else {
        n
    }
}

/// Proxy of `a₁ ∧ … ∧ a_m` for `m` covectors (or vectors) in dimension `n`.
pub fn wedge_proxy<T: Real>(n: usize, a: &[Comps<T>]) -> Comps<T> {
    match a.len() {
        0 => Comps::scalar(T::one()),
        1 => a[0].clone(),
        2 if n == 2 => Comps::scalar(a[0][0] * a[1][1] - a[0][1] * a[1][0]),
        2 => Comps::from_slice(&cross(to3(&a[0]), to3(&a[1]))),
        _ => {
            let cols: Vec<[T; 3]> = a.iter().map(to3).collect();
            Comps::scalar(SmallMat::from_columns(&cols).det())
        }
    }
}

fn to3<T: Real>(c: &Comps<T>) -> [T; 3] {
    let mut v = [T::zero(); 3];
    v[..c.len()].copy_from_slice(c.as_slice());
    v
}

fn barycentric_gradients<T: Real>(n: usize) -> Vec<Comps<T>> {
    let mut g = vec![Comps::from_slice(&vec![-T::one(); n])];
    for i in 0..n {
        let mut e = Comps::zeros(n);
        e[i] = T::one();
        g.push(e);
    }
    g
}

fn barycentric<T: Real>(xhat: &[T]) -> Vec<T> {
    let mut l = vec![T::one() - xhat.iter().copied().sum::<T>()];
    l.extend_from_slice(xhat);
    l
}

/// Whitney basis forms of degree `k` on the reference `n`-simplex at `xhat`,
/// one per local `k`-face in [`local_subsimplices`] order:
/// `φ_σ = k! Σᵢ (−1)ⁱ λ_{σᵢ} dλ_{σ₀} ∧ … (omit σᵢ) … ∧ dλ_{σ_k}`.
pub fn reference_basis<T: Real>(n: usize, k: usize, xhat: &[T]) -> Vec<Comps<T>> {
    let grads = barycentric_gradients::<T>(n);
    let lambda = barycentric(xhat);
    let kfact = T::from_usize_lossy((1..=k).product::<usize>());
    local_subsimplices(n, k)
        .iter()
        .map(|s| {
            let mut acc = Comps::zeros(proxy_len(n, k));
            for i in 0..=k {
                let others: Vec<Comps<T>> = s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| grads[v].clone()).collect();
                let sign = if i % 2 == 0 { T::one() } else { -T::one() };
                acc = acc.add(&wedge_proxy(n, &others).scale(sign * lambda[s[i]]));
            }
            acc.scale(kfact)
        })
        .collect()
}

/// Exterior derivatives of the reference Whitney basis (constant):
/// `dφ_σ = (k+1)! dλ_{σ₀} ∧ … ∧ dλ_{σ_k}`. Empty for `k = n`.
pub fn reference_basis_d<T: Real>(n: usize, k: usize) -> Vec<Comps<T>> {
    if k >= n {
        return Vec::new();
    }
    let grads = barycentric_gradients::<T>(n);
    let f = T::from_usize_lossy((1..=k + 1).product::<usize>());
    local_subsimplices(n, k)
        .iter()
        .map(|s| {
            let g: Vec<Comps<T>> = s.iter().map(|&v| grads[v].clone()).collect();
            wedge_proxy(n, &g).scale(f)
        })
        .collect()
}

/// Lowest-order Whitney space of degree `k` on a complex; one dof per
/// `k`-simplex, oriented by its canonical vertex order.
#[derive(Clone, Debug)]
pub struct FESpace<T> {
    complex: Arc<SimplicialComplex<T>>,
    k: usize,
}

impl<T: Real> FESpace<T> {
    pub fn new(complex: Arc<SimplicialComplex<T>>, k: usize) -> Result<Self> {
        if k > complex.dim() {
            return Err(FeecError::DegreeOutOfRange { k, n: complex.dim() });
        }
        Ok(Self { complex, k })
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.complex.count(self.k)
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex<T>> {
        &self.complex
    }

    pub fn same_complex(&self, other: &FESpace<T>) -> bool {
        Arc::ptr_eq(&self.complex, &other.complex)
    }

    pub fn local_count(&self) -> usize {
        binomial(self.complex.dim() + 1, self.k + 1)
    }

    pub fn proxy_len(&self) -> usize {
        proxy_len(self.complex.dim(), self.k)
    }
}

fn require_same<T: Real>(a: &FESpace<T>, metric: &MetricField<T>) -> Result<()> {
    if Arc::ptr_eq(a.complex(), metric.complex()) {
        Ok(())
    } else {
        Err(FeecError::Mismatch("space and metric are defined on different complexes".into()))
    }
}

/// `D^k`: the transpose of the signed incidence `∂_{k+1}`.
pub fn exterior_derivative<T: Real>(from: &FESpace<T>, to: &FESpace<T>) -> Result<SparseOperator<i32>> {
    if !from.same_complex(to) {
        return Err(FeecError::Mismatch("exterior derivative between different complexes".into()));
    }
    if to.degree() != from.degree() + 1 {
        return Err(FeecError::Mismatch(format!("degrees {} -> {}", from.degree(), to.degree())));
    }
    Ok(from.complex().boundary_operator(to.degree())?.transpose())
}

fn weight_at<T: Real>(k: usize, metric: &MetricField<T>, cell: usize, p: &[T]) -> Result<SmallMat<T>> {
    mass_weight(k, &metric.eval(cell, p)).map_err(|e| match e {
        FeecError::DegenerateMetric { detail, .. } => FeecError::DegenerateMetric { cell, detail },
        other => other,
    })
}

/// Sums per-cell triplet lists in cell order; duplicate keys are reduced in
/// that same order, so the result does not depend on the thread count.
fn reduce_cells<T: Real>(nrows: usize, ncols: usize, per_cell: Vec<Vec<(usize, usize, T)>>) -> SparseOperator<T> {
    let cap = per_cell.iter().map(Vec::len).sum();
    let mut b = CooBuilder::with_capacity(nrows, ncols, cap);
    for trip in per_cell {
        for (r, c, v) in trip {
            b.push(r, c, v);
        }
    }
    b.finalize()
}

/// Local `nloc × nloc` matrices `Σ_q w_q φ_iᵀ W_k(G) φ_j` for a weight degree
/// `wk` and precomputed basis proxies.
fn local_gram<T: Real>(
    metric: &MetricField<T>,
    cell: usize,
    wk: usize,
    quad: &QuadratureRule<T>,
    basis: &[Vec<Comps<T>>],
) -> Result<Vec<T>> {
    let nloc = basis[0].len();
    let mut local = vec![T::zero(); nloc * nloc];
    for (q, (p, w)) in quad.iter().enumerate() {
        let wmat = weight_at(wk, metric, cell, p)?;
        let phis = &basis[q];
        let weighted: Vec<Comps<T>> = phis.iter().map(|f| wmat.mul_comps(f)).collect();
        for i in 0..nloc {
            for j in i..nloc {
                local[i * nloc + j] = local[i * nloc + j] + w * phis[i].dot(&weighted[j]);
            }
        }
    }
    for i in 0..nloc {
        for j in 0..i {
            local[i * nloc + j] = local[j * nloc + i];
        }
    }
    Ok(local)
}

/// Mass matrix `M^k`. Symmetric; checked to have a positive diagonal.
pub fn assemble_mass<T: Real>(space: &FESpace<T>, metric: &MetricField<T>, quad: &QuadratureRule<T>) -> Result<SparseOperator<T>> {
    require_same(space, metric)?;
    let complex = space.complex();
    let (n, k) = (complex.dim(), space.degree());
    if quad.dim() != n {
        return Err(FeecError::Mismatch(format!("{}-dimensional quadrature on a {n}-complex", quad.dim())));
    }
    let basis: Vec<Vec<Comps<T>>> = quad.iter().map(|(p, _)| reference_basis(n, k, p)).collect();
    let per_cell = (0..complex.num_cells())
        .into_par_iter()
        .map(|cell| {
            let local = local_gram(metric, cell, k, quad, &basis)?;
            let dofs = complex.cell_simplices(k, cell);
            let nloc = dofs.len();
            Ok((0..nloc * nloc).map(|ij| (dofs[ij / nloc], dofs[ij % nloc], local[ij])).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let m = reduce_cells(space.dim(), space.dim(), per_cell).with_symmetric(true);
    if let Some(i) = m.diagonal().iter().position(|&d| !(d > T::zero())) {
        return Err(FeecError::NotPositiveDefinite { pivot: i });
    }
    Ok(m)
}

/// Load vector `b_i = ∫ ⟨F, φ_i⟩_g` for a cellwise form `F` of the space's degree.
pub fn assemble_load<T: Real>(
    space: &FESpace<T>,
    metric: &MetricField<T>,
    field: &dyn CellwiseForm<T>,
    quad: &QuadratureRule<T>,
) -> Result<Vec<T>> {
    require_same(space, metric)?;
    if field.degree() != space.degree() {
        return Err(FeecError::Mismatch(format!("load of degree {} for space of degree {}", field.degree(), space.degree())));
    }
    let complex = space.complex();
    let (n, k) = (complex.dim(), space.degree());
    let basis: Vec<Vec<Comps<T>>> = quad.iter().map(|(p, _)| reference_basis(n, k, p)).collect();
    let per_cell = (0..complex.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut local = vec![T::zero(); space.local_count()];
            for (q, (p, w)) in quad.iter().enumerate() {
                let wf = weight_at(k, metric, cell, p)?.mul_comps(&field.eval(cell, p));
                for (l, phi) in basis[q].iter().enumerate() {
                    local[l] = local[l] + w * phi.dot(&wf);
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut b = vec![T::zero(); space.dim()];
    for (cell, local) in per_cell.into_iter().enumerate() {
        for (l, &dof) in complex.cell_simplices(k, cell).iter().enumerate() {
            b[dof] = b[dof] + local[l];
        }
    }
    Ok(b)
}

/// `∫ ⟨F, F⟩_g` for a cellwise form, summed over cells in order.
pub fn form_norm_sq<T: Real>(metric: &MetricField<T>, field: &dyn CellwiseForm<T>, quad: &QuadratureRule<T>) -> Result<T> {
    let complex = metric.complex();
    let k = field.degree();
    let per_cell = (0..complex.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut acc = T::zero();
            for (p, w) in quad.iter() {
                let f = field.eval(cell, p);
                acc = acc + w * weight_at(k, metric, cell, p)?.bilinear(&f, &f);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(per_cell.into_iter().fold(T::zero(), |a, b| a + b))
}

/// Default exactness degree of the dof integrals of the canonical interpolant.
pub const INTERPOLATION_DEGREE: usize = 30;

/// Canonical interpolant `I_h^k`: vertex values, edge circulations, face
/// fluxes and cell integrals, each taken in the first cell containing the
/// simplex. Refuses discontinuous fields below the top degree.
pub fn canonical_interpolant<T: Real>(space: &FESpace<T>, field: &dyn CellwiseForm<T>) -> Result<Vec<T>> {
    canonical_interpolant_with_degree(space, field, INTERPOLATION_DEGREE)
}

pub fn canonical_interpolant_with_degree<T: Real>(
    space: &FESpace<T>,
    field: &dyn CellwiseForm<T>,
    degree: usize,
) -> Result<Vec<T>> {
    if field.degree() != space.degree() {
        return Err(FeecError::Mismatch(format!("field of degree {} for space of degree {}", field.degree(), space.degree())));
    }
    if field.continuity() == Continuity::Discontinuous && space.degree() < space.complex().dim() {
        return Err(FeecError::RefusedContinuity { tag: field.continuity().name().into() });
    }
    let complex = space.complex();
    let k = space.degree();
    let star = complex.simplex_star(k);
    let rule = if k == 0 { None } else { Some(quadrature_rule::<T>(k, degree)?) };
    let locals = local_subsimplices(complex.dim(), k);
    Ok(star
        .par_iter()
        .map(|cells| {
            let (cell, l) = cells[0];
            simplex_integral(complex.dim(), field, cell, &locals[l], rule.as_ref())
        })
        .collect())
}

/// `∫_σ tr ω` over the local face with reference vertices `verts`.
pub(crate) fn simplex_integral<T: Real>(
    n: usize,
    field: &dyn CellwiseForm<T>,
    cell: usize,
    verts: &[usize],
    rule: Option<&QuadratureRule<T>>,
) -> T {
    let corners: Vec<Vec<T>> = {
        let mut c = vec![vec![T::zero(); n]];
        for i in 0..n {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            c.push(e);
        }
        c
    };
    let v0 = &corners[verts[0]];
    let Some(rule) = rule else {
        return field.eval(cell, v0)[0];
    };
    let tangents: Vec<Comps<T>> = verts[1..]
        .iter()
        .map(|&v| Comps::from_slice(&corners[v].iter().zip(v0).map(|(a, b)| *a - *b).collect::<Vec<_>>()))
        .collect();
    let t = wedge_proxy(n, &tangents);
    let mut acc = T::zero();
    for (s, w) in rule.iter() {
        let mut x = v0.clone();
        for (j, &sj) in s.iter().enumerate() {
            for d in 0..n {
                x[d] = x[d] + sj * tangents[j][d];
            }
        }
        acc = acc + w * field.eval(cell, &x).dot(&t);
    }
    acc
}

/// `Σ_i c_i φ_i(xhat)` on `cell`.
pub fn evaluate_fe_field<T: Real>(space: &FESpace<T>, coeffs: &[T], cell: usize, xhat: &[T]) -> Result<Comps<T>> {
    let complex = space.complex();
    if cell >= complex.num_cells() {
        return Err(FeecError::InvalidArgument(format!("cell {cell} out of range (0..{})", complex.num_cells())));
    }
    if coeffs.len() != space.dim() {
        return Err(FeecError::Mismatch(format!("{} coefficients for {} dofs", coeffs.len(), space.dim())));
    }
    let basis = reference_basis(complex.dim(), space.degree(), xhat);
    Ok(combine(&basis, complex.cell_simplices(space.degree(), cell), coeffs, space.proxy_len()))
}

fn combine<T: Real>(basis: &[Comps<T>], dofs: &[usize], coeffs: &[T], len: usize) -> Comps<T> {
    let mut acc = Comps::zeros(len);
    for (phi, &dof) in basis.iter().zip(dofs) {
        acc = acc.add(&phi.clone().scale(coeffs[dof]));
    }
    acc
}

/// A finite element field viewed as a cellwise form.
#[derive(Clone, Debug)]
pub struct FeField<'a, T> {
    pub space: &'a FESpace<T>,
    pub coeffs: &'a [T],
}

impl<'a, T: Real> FeField<'a, T> {
    pub fn new(space: &'a FESpace<T>, coeffs: &'a [T]) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(FeecError::Mismatch(format!("{} coefficients for {} dofs", coeffs.len(), space.dim())));
        }
        Ok(Self { space, coeffs })
    }
}

impl<T: Real> CellwiseForm<T> for FeField<'_, T> {
    fn degree(&self) -> usize {
        self.space.degree()
    }

    fn eval(&self, cell: usize, xhat: &[T]) -> Comps<T> {
        let c = self.space.complex();
        let basis = reference_basis(c.dim(), self.space.degree(), xhat);
        combine(&basis, c.cell_simplices(self.space.degree(), cell), self.coeffs, self.space.proxy_len())
    }

    fn eval_d(&self, cell: usize, _xhat: &[T]) -> Option<Comps<T>> {
        let c = self.space.complex();
        let (n, k) = (c.dim(), self.space.degree());
        if k == n {
            return Some(Comps::zeros(0));
        }
        let d = reference_basis_d(n, k);
        Some(combine(&d, c.cell_simplices(k, cell), self.coeffs, proxy_len(n, k + 1)))
    }

    fn continuity(&self) -> Continuity {
        if self.space.degree() == self.space.complex().dim() {
            Continuity::Discontinuous
        } else {
            Continuity::TangentiallyContinuous
        }
    }
}

/// Pullback of an ambient form to the charts of `Θ ∘ ı_T`.
pub fn pullback_proxy<T: Real>(n: usize, degree: usize, j: &SmallMat<T>, ambient: &[T]) -> Comps<T> {
    match degree {
        0 => Comps::scalar(ambient[0]),
        1 => {
            let f = Comps::from_slice(ambient);
            j.transpose().mul_comps(&f)
        }
        2 if n == 2 => {
            let c = cross(j.column(0), j.column(1));
            Comps::scalar(ambient[0] * c[0] + ambient[1] * c[1] + ambient[2] * c[2])
        }
        2 => {
            let w = [ambient[0], ambient[1], ambient[2]];
            let cols = [j.column(0), j.column(1), j.column(2)];
            Comps::from_slice(&[0, 1, 2].map(|i| {
                let c = cross(cols[(i + 1) % 3], cols[(i + 2) % 3]);
                w[0] * c[0] + w[1] * c[1] + w[2] * c[2]
            }))
        }
        _ => {
            let cols = [j.column(0), j.column(1), j.column(2)];
            Comps::scalar(ambient[0] * SmallMat::from_columns(&cols).det())
        }
    }
}

/// A smooth ambient form pulled back through `Θ ∘ ı_T` on every cell.
#[derive(Clone, Debug)]
pub struct PulledBack<T> {
    complex: Arc<SimplicialComplex<T>>,
    theta: ThetaMap,
    field: FormField,
    derivative: FormField,
}

impl<T: Real> PulledBack<T> {
    pub fn new(complex: Arc<SimplicialComplex<T>>, theta: ThetaMap, field: FormField) -> Result<Self> {
        if field.degree() > complex.dim() {
            return Err(FeecError::DegreeOutOfRange { k: field.degree(), n: complex.dim() });
        }
        let derivative = field.d();
        Ok(Self { complex, theta, field, derivative })
    }

    pub fn field(&self) -> &FormField {
        &self.field
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex<T>> {
        &self.complex
    }

    fn pull(&self, f: &FormField, cell: usize, xhat: &[T]) -> Comps<T> {
        let p = self.theta.point(&self.complex, cell, xhat);
        let j = self.theta.jacobian(&self.complex, cell, xhat);
        pullback_proxy(self.complex.dim(), f.degree(), &j, &f.eval(&p))
    }
}

impl<T: Real> CellwiseForm<T> for PulledBack<T> {
    fn degree(&self) -> usize {
        self.field.degree()
    }

    fn eval(&self, cell: usize, xhat: &[T]) -> Comps<T> {
        self.pull(&self.field, cell, xhat)
    }

    fn eval_d(&self, cell: usize, xhat: &[T]) -> Option<Comps<T>> {
        if self.field.degree() == self.complex.dim() {
            return Some(Comps::zeros(0));
        }
        Some(self.pull(&self.derivative, cell, xhat))
    }
}
