//! Error norms, convergence rates, the canonical interpolation error path
//! and a patchwise L² quasi-interpolant for the edge-element space.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{FeecError, Result};
use crate::geometry::{mass_weight, quadrature_rule, MetricField, QuadratureRule, ThetaMap};
use crate::linalg::{Comps, DenseMatrix, SmallMat};
use crate::mesh::{local_subsimplices, GeometryKind, SimplicialComplex};
use crate::scalar::Real;
use crate::symbolic::{c, cos, sin, x, y, z, FormField};
use crate::whitney::{
    canonical_interpolant, exterior_derivative, form_norm_sq, pullback_proxy, reference_basis, CellwiseForm, Continuity, FESpace,
    FeField,
};

/// Minimum exactness degree for error quadrature.
pub const ERROR_DEGREE: usize = 5;

/// A form given by analytic pieces on groups of cells.
#[derive(Clone, Debug)]
pub struct BrokenField<T> {
    complex: Arc<SimplicialComplex<T>>,
    theta: ThetaMap,
    pieces: Vec<FormField>,
    derivatives: Vec<FormField>,
    /// Ambient gradients of each proxy component, per piece.
    gradients: Vec<Vec<FormField>>,
    assignment: Vec<usize>,
    tag: Continuity,
}

fn component_gradients(f: &FormField) -> Vec<FormField> {
    f.components().iter().map(|e| FormField::vector(1, [e.diff(0), e.diff(1), e.diff(2)])).collect()
}

impl<T: Real> BrokenField<T> {
    pub fn new(
        complex: Arc<SimplicialComplex<T>>,
        theta: ThetaMap,
        pieces: Vec<FormField>,
        assignment: Vec<usize>,
        tag: Continuity,
    ) -> Result<Self> {
        if assignment.len() != complex.num_cells() {
            return Err(FeecError::Mismatch(format!("{} piece labels for {} cells", assignment.len(), complex.num_cells())));
        }
        if pieces.is_empty() || assignment.iter().any(|&a| a >= pieces.len()) {
            return Err(FeecError::InvalidArgument("piece label out of range".into()));
        }
        let k = pieces[0].degree();
        if pieces.iter().any(|p| p.degree() != k) || k > complex.dim() {
            return Err(FeecError::InvalidArgument("pieces must share a degree not above the dimension".into()));
        }
        let derivatives = pieces.iter().map(FormField::d).collect();
        let gradients = pieces.iter().map(component_gradients).collect();
        Ok(Self { complex, theta, pieces, derivatives, gradients, assignment, tag })
    }

    /// One analytic field on every cell.
    pub fn smooth(complex: Arc<SimplicialComplex<T>>, theta: ThetaMap, field: FormField) -> Result<Self> {
        let n = complex.num_cells();
        Self::new(complex, theta, vec![field], vec![0; n], Continuity::Smooth)
    }

    /// Edge field on the torus whose normal component jumps across the planes
    /// `x = 0` and `x = 1/2` while its tangential components stay continuous.
    pub fn torus_jump(complex: Arc<SimplicialComplex<T>>) -> Result<Self> {
        let t = 2.0 * std::f64::consts::PI;
        let a = FormField::vector(1, [c(2.0) + sin(t * y()), sin(t * z()), sin(t * x())]);
        let b = FormField::vector(1, [c(1.0) + cos(t * z()), sin(t * z()), sin(t * x())]);
        let half = T::lit(0.5);
        let assignment = (0..complex.num_cells())
            .map(|cell| {
                let cx = complex.cell_centroid(cell)[0];
                let frac = cx - cx.floor();
                usize::from(frac >= half)
            })
            .collect();
        Self::new(complex, ThetaMap::Identity, vec![a, b], assignment, Continuity::TangentiallyContinuous)
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex<T>> {
        &self.complex
    }

    pub fn piece_of(&self, cell: usize) -> usize {
        self.assignment[cell]
    }

    /// Replaces the analytic piece used on `cells`.
    pub fn with_override(&self, cells: &[usize], field: FormField) -> Result<Self> {
        let mut out = self.clone();
        out.pieces.push(field.clone());
        out.derivatives.push(field.d());
        out.gradients.push(component_gradients(&field));
        let id = out.pieces.len() - 1;
        for &cell in cells {
            out.assignment[cell] = id;
        }
        out.tag = Continuity::Discontinuous;
        Ok(out)
    }

    fn pull(&self, f: &FormField, cell: usize, xhat: &[T]) -> Comps<T> {
        let p = self.theta.point(&self.complex, cell, xhat);
        let j = self.theta.jacobian(&self.complex, cell, xhat);
        pullback_proxy(self.complex.dim(), f.degree(), &j, &f.eval(&p))
    }

    /// `‖U‖²_{H¹(T)}` of the chart proxy in the flat chart metric:
    /// `∫_T |U|² + Σ_{ij} (∂_j U_i)²` in ambient coordinates (`Θ = identity`).
    pub fn h1_norm_sq(&self, cell: usize, quad: &QuadratureRule<T>) -> T {
        let field = &self.pieces[self.assignment[cell]];
        let grads = &self.gradients[self.assignment[cell]];
        let jac = self.complex.affine_jacobian(cell);
        let vol = jac_volume(&jac, self.complex.dim());
        let mut acc = T::zero();
        for (p, w) in quad.iter() {
            let pt = self.complex.affine_point(cell, p);
            for (i, comp) in field.components().iter().enumerate() {
                let v = comp.eval(&pt);
                acc = acc + w * v * v;
                for g in grads[i].eval(&pt) {
                    acc = acc + w * g * g;
                }
            }
        }
        acc * vol
    }
}

fn jac_volume<T: Real>(j: &SmallMat<T>, n: usize) -> T {
    let sv = j.singular_values();
    (0..n).fold(T::one(), |a, i| a * sv[i])
}

impl<T: Real> CellwiseForm<T> for BrokenField<T> {
    fn degree(&self) -> usize {
        self.pieces[0].degree()
    }

    fn eval(&self, cell: usize, xhat: &[T]) -> Comps<T> {
        self.pull(&self.pieces[self.assignment[cell]], cell, xhat)
    }

    fn eval_d(&self, cell: usize, xhat: &[T]) -> Option<Comps<T>> {
        if self.degree() == self.complex.dim() {
            return Some(Comps::zeros(0));
        }
        Some(self.pull(&self.derivatives[self.assignment[cell]], cell, xhat))
    }

    fn continuity(&self) -> Continuity {
        self.tag
    }
}

/// `a − b` for two cellwise forms of the same degree.
struct Difference<'a, T> {
    a: &'a dyn CellwiseForm<T>,
    b: &'a dyn CellwiseForm<T>,
}

impl<T: Real> CellwiseForm<T> for Difference<'_, T> {
    fn degree(&self) -> usize {
        self.a.degree()
    }

    fn eval(&self, cell: usize, xhat: &[T]) -> Comps<T> {
        self.a.eval(cell, xhat).sub(&self.b.eval(cell, xhat))
    }

    fn eval_d(&self, cell: usize, xhat: &[T]) -> Option<Comps<T>> {
        Some(self.a.eval_d(cell, xhat)?.sub(&self.b.eval_d(cell, xhat)?))
    }
}

/// The exterior derivative of a cellwise form, as a form of one degree higher.
struct DerivativeOf<'a, T> {
    f: &'a dyn CellwiseForm<T>,
}

impl<T: Real> CellwiseForm<T> for DerivativeOf<'_, T> {
    fn degree(&self) -> usize {
        self.f.degree() + 1
    }

    fn eval(&self, cell: usize, xhat: &[T]) -> Comps<T> {
        self.f.eval_d(cell, xhat).expect("derivative available")
    }
}

/// Error norms of one refinement level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRow<T> {
    pub h: T,
    pub dofs: usize,
    pub l2: T,
    pub curl: T,
    pub hcurl: T,
    pub zeta_h1: T,
}

/// `‖U − u_h‖_{L²}`, `‖d(U − u_h)‖_{L²}`, their H(curl) combination and
/// `‖ζ − z_h‖_{H¹}` (zero when no multiplier is given).
pub fn error_norms<T: Real>(
    metric: &MetricField<T>,
    u_h: &FeField<'_, T>,
    u: &dyn CellwiseForm<T>,
    zeta: Option<(&FeField<'_, T>, &dyn CellwiseForm<T>)>,
    quad: &QuadratureRule<T>,
) -> Result<ErrorRow<T>> {
    if quad.degree() < ERROR_DEGREE {
        return Err(FeecError::InvalidArgument(format!("error quadrature degree {} < {ERROR_DEGREE}", quad.degree())));
    }
    if u.eval_d(0, &vec![T::zero(); metric.complex().dim()]).is_none() {
        return Err(FeecError::InvalidArgument("exact field has no derivative".into()));
    }
    let diff = Difference { a: u, b: u_h };
    let l2 = form_norm_sq(metric, &diff, quad)?;
    let curl = form_norm_sq(metric, &DerivativeOf { f: &diff }, quad)?;
    let zeta_h1 = match zeta {
        Some((z_h, z)) => {
            let dz = Difference { a: z, b: z_h };
            (form_norm_sq(metric, &dz, quad)? + form_norm_sq(metric, &DerivativeOf { f: &dz }, quad)?).sqrt()
        }
        None => T::zero(),
    };
    let h = metric.complex().shape_regularity()?.h;
    Ok(ErrorRow { h, dofs: u_h.space.dim(), l2: l2.sqrt(), curl: curl.sqrt(), hcurl: (l2 + curl).sqrt(), zeta_h1 })
}

/// `rate_ℓ = log₂(e_ℓ / e_{ℓ+1})`; `None` where an error is not positive.
pub fn rate_table<T: Real>(errors: &[T]) -> Vec<Option<T>> {
    errors
        .windows(2)
        .map(|w| (w[0] > T::zero() && w[1] > T::zero()).then(|| (w[0] / w[1]).log2()))
        .collect()
}

/// Canonical interpolation errors of a smooth field over a sequence of
/// metrics (one per level). Refuses fields that are not smooth.
pub fn canonical_error_path<T: Real>(
    metrics: &[MetricField<T>],
    field: &dyn Fn(&Arc<SimplicialComplex<T>>) -> Result<BrokenField<T>>,
) -> Result<Vec<ErrorRow<T>>> {
    let mut rows = Vec::new();
    for metric in metrics {
        let f = field(metric.complex())?;
        if f.continuity() != Continuity::Smooth {
            return Err(FeecError::RefusedContinuity { tag: f.continuity().name().into() });
        }
        let space = FESpace::new(metric.complex().clone(), f.degree())?;
        let coeffs = canonical_interpolant(&space, &f)?;
        let quad = quadrature_rule(metric.complex().dim(), ERROR_DEGREE)?;
        rows.push(error_norms(metric, &FeField::new(&space, &coeffs)?, &f, None, &quad)?);
    }
    Ok(rows)
}

/// Per-cell local mass matrices and load vectors of the edge space.
struct CellData<T> {
    mass: Vec<T>,
    load: Vec<T>,
}

/// Patchwise L² quasi-interpolant onto the edge space: for each edge, the
/// best approximation of `field` on the cells containing the edge within
/// the local edge-element space of that patch, read at the edge's dof.
pub fn quasi_interpolant<T: Real>(
    space: &FESpace<T>,
    metric: &MetricField<T>,
    field: &dyn CellwiseForm<T>,
    quad: &QuadratureRule<T>,
) -> Result<Vec<T>> {
    if space.degree() != 1 || field.degree() != 1 {
        return Err(FeecError::InvalidArgument("quasi-interpolant is defined for degree-1 fields".into()));
    }
    let complex = space.complex();
    if !Arc::ptr_eq(complex, metric.complex()) {
        return Err(FeecError::Mismatch("space and metric are defined on different complexes".into()));
    }
    let n = complex.dim();
    let nloc = local_subsimplices(n, 1).len();
    let basis: Vec<Vec<Comps<T>>> = quad.iter().map(|(p, _)| reference_basis(n, 1, p)).collect();
    let cells: Vec<CellData<T>> = (0..complex.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut mass = vec![T::zero(); nloc * nloc];
            let mut load = vec![T::zero(); nloc];
            for (q, (p, w)) in quad.iter().enumerate() {
                let wm = mass_weight(1, &metric.eval(cell, p)).map_err(|_| FeecError::DegenerateMetric { cell, detail: "mass weight".into() })?;
                let f = wm.mul_comps(&field.eval(cell, p));
                let phis = &basis[q];
                for i in 0..nloc {
                    load[i] = load[i] + w * phis[i].dot(&f);
                    let wi = wm.mul_comps(&phis[i]);
                    for j in 0..nloc {
                        mass[i * nloc + j] = mass[i * nloc + j] + w * wi.dot(&phis[j]);
                    }
                }
            }
            Ok(CellData { mass, load })
        })
        .collect::<Result<Vec<_>>>()?;
    let star = complex.simplex_star(1);
    star.par_iter()
        .enumerate()
        .map(|(edge, patch)| {
            let mut patch_cells: Vec<usize> = patch.iter().map(|&(c, _)| c).collect();
            patch_cells.dedup();
            let mut dofs: Vec<usize> = patch_cells.iter().flat_map(|&c| complex.cell_simplices(1, c).iter().copied()).collect();
            dofs.sort_unstable();
            dofs.dedup();
            let pos = |d: usize| dofs.binary_search(&d).expect("patch dof");
            let m = dofs.len();
            let mut a = DenseMatrix::zeros(m, m);
            let mut b = DenseMatrix::zeros(m, 1);
            for &cell in &patch_cells {
                let g = complex.cell_simplices(1, cell);
                let data = &cells[cell];
                for i in 0..nloc {
                    let pi = pos(g[i]);
                    b[(pi, 0)] = b[(pi, 0)] + data.load[i];
                    for j in 0..nloc {
                        let pj = pos(g[j]);
                        a[(pi, pj)] = a[(pi, pj)] + data.mass[i * nloc + j];
                    }
                }
            }
            let chol = a.cholesky().map_err(|_| FeecError::DegeneratePatch { edge, cells: patch_cells.clone() })?;
            chol.forward_solve_in_place(&mut b);
            chol.backward_solve_transpose_in_place(&mut b);
            Ok(b[(pos(edge), 0)])
        })
        .collect()
}

/// Interpolant whose commutation defect is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolant {
    Canonical,
    Quasi,
}

/// `‖D^k Π^k u − I^{k+1} du‖_∞`, with `Π` the chosen interpolant on degree
/// `k` and the canonical interpolant on degree `k + 1`. The quasi-interpolant
/// is available for `k = 1`.
pub fn commuting_residual<T: Real>(
    which: Interpolant,
    metric: &MetricField<T>,
    field: &BrokenField<T>,
) -> Result<T> {
    if field.continuity() != Continuity::Smooth {
        return Err(FeecError::RefusedContinuity { tag: field.continuity().name().into() });
    }
    let complex = metric.complex().clone();
    let k = field.degree();
    let sk = FESpace::new(complex.clone(), k)?;
    let sk1 = FESpace::new(complex.clone(), k + 1)?;
    let d = exterior_derivative(&sk, &sk1)?.to_real::<T>();
    let iu = match which {
        Interpolant::Canonical => canonical_interpolant(&sk, field)?,
        Interpolant::Quasi => quasi_interpolant(&sk, metric, field, &quadrature_rule(complex.dim(), ERROR_DEGREE)?)?,
    };
    let du = BrokenField::new(
        complex,
        field.theta,
        field.derivatives.clone(),
        field.assignment.clone(),
        Continuity::Smooth,
    )?;
    let idu = canonical_interpolant(&sk1, &du)?;
    Ok(d.mul_vec(&iu).iter().zip(&idu).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
}

/// Smooth test forms of every degree below the top one: unit-periodic
/// trigonometric fields on the torus, ambient polynomials on the sphere.
pub fn commuting_catalog(geometry: GeometryKind) -> Vec<(&'static str, FormField)> {
    let t = 2.0 * std::f64::consts::PI;
    match geometry {
        GeometryKind::Sphere2 { .. } => vec![
            ("p0-cubic", FormField::scalar(0, x() * y() + z().powi(3))),
            ("p0-quartic", FormField::scalar(0, x().powi(4) - c(2.0) * y() * y() * z() + x() * z())),
            ("p1-rotation", FormField::vector(1, [-y(), x(), c(0.0)])),
            ("p1-mixed", FormField::vector(1, [y() * z(), -x(), x() * y() * z()])),
            ("t1-wave", FormField::vector(1, [sin(t * z()), cos(x()), sin(y() + z())])),
        ],
        _ => vec![
            ("t0-product", FormField::scalar(0, sin(t * x()) * cos(t * y()) + sin(t * z()))),
            ("t0-diagonal", FormField::scalar(0, cos(t * (x() + y() + z())))),
            ("t1-sines", FormField::vector(1, [sin(t * z()), sin(t * x()), sin(t * y())])),
            ("t1-mixed", FormField::vector(1, [cos(t * y()) * sin(t * z()), c(1.0), sin(2.0 * t * x())])),
            ("t2-shear", FormField::vector(2, [cos(t * (x() + y())), sin(t * z()), c(1.0)])),
            ("t2-product", FormField::vector(2, [sin(t * y()) * sin(t * z()), cos(t * x()), sin(t * x()) * cos(t * z())])),
        ],
    }
}

/// Per-cell L² errors of an edge-element approximation.
pub fn cell_errors<T: Real>(
    metric: &MetricField<T>,
    approx: &FeField<'_, T>,
    field: &dyn CellwiseForm<T>,
    quad: &QuadratureRule<T>,
) -> Result<Vec<T>> {
    let complex = metric.complex();
    (0..complex.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut acc = T::zero();
            for (p, w) in quad.iter() {
                let e = field.eval(cell, p).sub(&approx.eval(cell, p));
                let wm = mass_weight(field.degree(), &metric.eval(cell, p))?;
                acc = acc + w * wm.bilinear(&e, &e);
            }
            Ok(acc.sqrt())
        })
        .collect()
}

/// Largest ratio `‖U − QU‖_{L²(T)} / (h_T ‖U‖_{H¹(ω_T)})` over cells, where
/// `ω_T` is the union of cells sharing a vertex with `T` and the broken norm
/// is summed piecewise.
pub fn broken_bound_ratio<T: Real>(metric: &MetricField<T>, approx: &FeField<'_, T>, field: &BrokenField<T>) -> Result<T> {
    let complex = metric.complex();
    let quad = quadrature_rule(complex.dim(), ERROR_DEGREE)?;
    let errs = cell_errors(metric, approx, field, &quad)?;
    let h1: Vec<T> = (0..complex.num_cells()).into_par_iter().map(|cell| field.h1_norm_sq(cell, &quad)).collect();
    let diam = complex.shape_regularity()?.diameters;
    let nb = complex.cell_neighbors();
    let mut worst = T::zero();
    for cell in 0..complex.num_cells() {
        let patch: T = nb[cell].iter().map(|&c| h1[c]).fold(T::zero(), |a, b| a + b);
        let bound = diam[cell] * patch.sqrt();
        if bound > T::zero() {
            worst = worst.max(errs[cell] / bound);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_from_halving_errors() {
        let r = rate_table(&[4.0f64, 2.0, 1.0]);
        assert!(r.iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-15));
        let r = rate_table(&[16.0f64, 4.0, 1.0]);
        assert!(r.iter().all(|v| (v.unwrap() - 2.0).abs() < 1e-15));
        let r = rate_table(&[3.0f64, 3.0, 3.0]);
        assert!(r.iter().all(|v| v.unwrap().abs() < 1e-15));
        assert_eq!(rate_table(&[1.0f64, 0.0]), vec![None]);
    }
}
