//! Mixed curl-curl problem with a scalar Lagrange multiplier and an
//! explicit harmonic block:
//!
//! ```text
//! [ A    B    M¹H ] [u]   [r]
//! [ Bᵀ  −M⁰   0   ] [z] = [0]
//! [ HᵀM¹ 0    0   ] [p]   [0]
//! ```
//!
//! with `A = (D¹)ᵀM²D¹`, `B = M¹D⁰` and `r_i = ∫⟨F, φ_i⟩_g`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FeecError, Result};
use crate::geometry::{quadrature_rule, MetricField, QuadratureRule, ThetaMap};
use crate::linalg::{pcg, DenseMatrix, FnOperator, Jacobi, SparseOperator};
use crate::mesh::{GeometryKind, SimplicialComplex};
use crate::scalar::{dot, norm2, Real};
use crate::symbolic::{c, cos, sin, x, y, z, Expr, FormField};
use crate::whitney::{assemble_load, assemble_mass, canonical_interpolant, exterior_derivative, form_norm_sq, FESpace, PulledBack};

/// Largest dof count for which dense factorizations are used.
pub const DENSE_LIMIT: usize = 2000;

/// Largest degree-1 dof count for which the harmonic basis is computed by a
/// dense eigensolve.
pub const HARMONIC_DENSE_LIMIT: usize = 600;

/// Relative gap separating harmonic from non-harmonic eigenvalues.
pub const HARMONIC_GAP: f64 = 1e-10;

/// Relative residual required of every mixed solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Degree-1 harmonic fields, `M¹`-orthonormal columns.
#[derive(Clone, Debug)]
pub struct HarmonicBasis<T> {
    pub vectors: Vec<Vec<T>>,
    /// Smallest generalized eigenvalues of `(L, M¹)` when computed densely
    /// (`betti + 1` values), otherwise the Rayleigh quotients of the basis.
    pub eigenvalues: Vec<T>,
}

impl<T: Real> HarmonicBasis<T> {
    pub fn empty() -> Self {
        Self { vectors: Vec::new(), eigenvalues: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `Hᵀ x`.
    pub fn coefficients(&self, x: &[T]) -> Vec<T> {
        self.vectors.iter().map(|h| dot(h, x)).collect()
    }

    /// `H p`.
    pub fn combine(&self, p: &[T], n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        for (h, &pi) in self.vectors.iter().zip(p) {
            for (o, &hv) in out.iter_mut().zip(h) {
                *o = *o + pi * hv;
            }
        }
        out
    }
}

/// Operators of the discrete de Rham complex in degrees 0, 1, 2.
#[derive(Clone, Debug)]
pub struct ComplexOperators<T> {
    pub spaces: [FESpace<T>; 3],
    pub m0: SparseOperator<T>,
    pub m1: SparseOperator<T>,
    pub m2: SparseOperator<T>,
    pub d0: SparseOperator<T>,
    pub d1: SparseOperator<T>,
    /// `(D¹)ᵀ M² D¹`
    pub a: SparseOperator<T>,
    /// `M¹ D⁰`
    pub b: SparseOperator<T>,
}

impl<T: Real> ComplexOperators<T> {
    pub fn assemble(metric: &MetricField<T>, quad: &QuadratureRule<T>) -> Result<Self> {
        let complex = metric.complex().clone();
        let spaces = [0, 1, 2].map(|k| FESpace::new(complex.clone(), k));
        let [s0, s1, s2] = spaces;
        let spaces = [s0?, s1?, s2?];
        let m0 = assemble_mass(&spaces[0], metric, quad)?;
        let m1 = assemble_mass(&spaces[1], metric, quad)?;
        let m2 = assemble_mass(&spaces[2], metric, quad)?;
        let d0 = exterior_derivative(&spaces[0], &spaces[1])?.to_real::<T>();
        let d1 = exterior_derivative(&spaces[1], &spaces[2])?.to_real::<T>();
        let a = d1.transpose().matmul(&m2).matmul(&d1).with_symmetric(true);
        let b = m1.matmul(&d0);
        Ok(Self { spaces, m0, m1, m2, d0, d1, a, b })
    }

    pub fn n_edges(&self) -> usize {
        self.m1.nrows()
    }

    pub fn n_vertices(&self) -> usize {
        self.m0.nrows()
    }

    /// `M⁰⁻¹ x` by Jacobi-preconditioned CG to near machine precision.
    pub fn solve_m0(&self, x: &[T]) -> Result<Vec<T>> {
        let pre = Jacobi::from_operator(&self.m0);
        let tol = T::lit(1e-13).max(T::EPS * T::lit(64.0));
        Ok(pcg(&self.m0, x, None, Some(&pre), tol, 10 * x.len() + 100).require("mass CG")?.x)
    }

    /// `L x = A x + B M⁰⁻¹ Bᵀ x`.
    pub fn apply_laplacian(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = self.a.mul_vec(x);
        let mut bt = vec![T::zero(); self.n_vertices()];
        self.b.apply_transpose(x, &mut bt);
        let w = self.solve_m0(&bt)?;
        let bw = self.b.mul_vec(&w);
        for (yi, v) in y.iter_mut().zip(bw) {
            *yi = *yi + v;
        }
        Ok(y)
    }

    /// Dense Hodge-Laplacian `A + B M⁰⁻¹ Bᵀ`.
    pub fn dense_laplacian(&self) -> Result<DenseMatrix<T>> {
        let ne = self.n_edges();
        let m0 = DenseMatrix::from_rows(&self.m0.to_dense());
        let chol = m0.cholesky()?;
        let bt = DenseMatrix::from_rows(&self.b.transpose().to_dense());
        let mut x = bt.clone();
        chol.forward_solve_in_place(&mut x);
        let mut l = DenseMatrix::from_rows(&self.a.to_dense());
        // B M⁰⁻¹ Bᵀ = (L⁻¹Bᵀ)ᵀ (L⁻¹Bᵀ)
        for i in 0..ne {
            for j in 0..ne {
                let mut s = T::zero();
                for r in 0..x.nrows() {
                    s = s + x[(r, i)] * x[(r, j)];
                }
                l[(i, j)] = l[(i, j)] + s;
            }
        }
        Ok(l)
    }

    /// Diagonal of `A + B diag(M⁰)⁻¹ Bᵀ`, used as a Jacobi preconditioner.
    fn laplacian_diagonal(&self) -> Vec<T> {
        let m0d = self.m0.diagonal();
        let ad = self.a.diagonal();
        (0..self.n_edges())
            .map(|i| ad[i] + self.b.row(i).map(|(j, v)| v * v / m0d[j]).fold(T::zero(), |s, t| s + t))
            .collect()
    }
}

/// The smallest `count` generalized eigenvalues of `(L, M¹)` by a dense solve.
pub fn harmonic_spectrum<T: Real>(ops: &ComplexOperators<T>, count: usize) -> Result<Vec<T>> {
    if ops.n_edges() > DENSE_LIMIT {
        return Err(FeecError::InvalidArgument(format!("dense spectrum limited to {DENSE_LIMIT} dofs")));
    }
    let l = ops.dense_laplacian()?;
    let m1 = DenseMatrix::from_rows(&ops.m1.to_dense());
    let eig = DenseMatrix::generalized_sym_eigen(&l, &m1, false)?;
    Ok(eig.values.into_iter().take(count).collect())
}

/// Discrete harmonic 1-fields: the null space of the Hodge-Laplacian in the
/// `M¹` inner product. Small problems use a dense generalized eigensolve
/// with a gap check; larger torus meshes project the interpolants of the
/// coordinate 1-forms off the gradients and verify the result.
pub fn compute_harmonic_basis<T: Real>(ops: &ComplexOperators<T>, betti: usize) -> Result<HarmonicBasis<T>> {
    let ne = ops.n_edges();
    if ne <= HARMONIC_DENSE_LIMIT {
        return dense_harmonic_basis(ops, betti);
    }
    if betti == 0 {
        return Ok(HarmonicBasis::empty());
    }
    let complex = ops.spaces[1].complex().clone();
    match complex.geometry() {
        GeometryKind::Torus3 { .. } if betti == 3 => projected_generators(ops, &complex),
        _ => Err(FeecError::BettiMismatch {
            declared: betti,
            detail: format!("no cocycle generators known for {} with {ne} dofs", complex.geometry().name()),
        }),
    }
}

fn dense_harmonic_basis<T: Real>(ops: &ComplexOperators<T>, betti: usize) -> Result<HarmonicBasis<T>> {
    let ne = ops.n_edges();
    let l = ops.dense_laplacian()?;
    let m1 = DenseMatrix::from_rows(&ops.m1.to_dense());
    let eig = DenseMatrix::generalized_sym_eigen(&l, &m1, betti > 0)?;
    let vals = &eig.values;
    let gap = T::lit(HARMONIC_GAP);
    if betti > ne {
        return Err(FeecError::BettiMismatch { declared: betti, detail: format!("only {ne} dofs") });
    }
    if betti > 0 && !(vals[betti - 1] <= gap * vals.get(betti).copied().unwrap_or(T::infinity())) {
        return Err(FeecError::BettiMismatch {
            declared: betti,
            detail: format!("eigenvalue {} = {:e} is not separated from {:e}", betti, vals[betti - 1].to_f64_lossy(), vals.get(betti).map_or(f64::NAN, |v| v.to_f64_lossy())),
        });
    }
    if betti + 1 < ne && vals[betti] <= gap * vals[betti + 1] {
        return Err(FeecError::BettiMismatch {
            declared: betti,
            detail: format!("found more than {betti} near-zero eigenvalues"),
        });
    }
    Ok(HarmonicBasis {
        vectors: eig.vectors.map_or_else(Vec::new, |v| (0..betti).map(|j| v.column(j)).collect()),
        eigenvalues: vals.iter().take(betti + 1).copied().collect(),
    })
}

fn projected_generators<T: Real>(ops: &ComplexOperators<T>, complex: &Arc<SimplicialComplex<T>>) -> Result<HarmonicBasis<T>> {
    let nv = ops.n_vertices();
    let stiff = ops.d0.transpose().matmul(&ops.b).with_symmetric(true);
    let pre = Jacobi::from_operator(&stiff);
    let b_abs = ops.b.map(|v| v.abs());
    let mut vectors: Vec<Vec<T>> = Vec::new();
    for axis in 0..3 {
        let mut comps = [c(0.0), c(0.0), c(0.0)];
        comps[axis] = c(1.0);
        let form = PulledBack::new(complex.clone(), ThetaMap::Identity, FormField::vector(1, comps))?;
        let gen = canonical_interpolant(&ops.spaces[1], &form)?;
        let mut rhs = vec![T::zero(); nv];
        ops.b.apply_transpose(&gen, &mut rhs);
        let abs_gen: Vec<T> = gen.iter().map(|v| v.abs()).collect();
        let mut reference = vec![T::zero(); nv];
        b_abs.apply_transpose(&abs_gen, &mut reference);
        let reference = norm2(&reference);
        let rhs_norm = norm2(&rhs);
        let potential = if rhs_norm <= T::lit(1e-14) * reference {
            vec![T::zero(); nv]
        } else {
            let tol = (T::lit(1e-13) * reference / rhs_norm).min(T::lit(1e-10));
            let s = pcg(&stiff, &rhs, None, Some(&pre), tol, 10 * nv + 100);
            if !(s.relative_residual <= tol * T::lit(100.0)) {
                return Err(FeecError::NonConvergence { method: "gradient projection CG", iterations: s.iterations, residual: s.relative_residual.to_f64_lossy() });
            }
            s.x
        };
        let grad = ops.d0.mul_vec(&potential);
        let mut h: Vec<T> = gen.iter().zip(&grad).map(|(a, b)| *a - *b).collect();
        // M¹-Gram-Schmidt, twice for stability
        for _ in 0..2 {
            let mh = ops.m1.mul_vec(&h);
            for q in &vectors {
                let c = dot(q, &mh);
                for (hi, qi) in h.iter_mut().zip(q) {
                    *hi = *hi - c * *qi;
                }
            }
        }
        let nrm = ops.m1.quadratic_form(&h).sqrt();
        if !(nrm > T::lit(1e-8)) {
            return Err(FeecError::BettiMismatch { declared: 3, detail: "cocycle generators are linearly dependent".into() });
        }
        vectors.push(h.iter().map(|&v| v / nrm).collect());
    }
    // compare with the Laplacian scale on this mesh
    let scale = ops.laplacian_diagonal().iter().zip(ops.m1.diagonal()).fold(T::zero(), |m, (l, d)| m.max(*l / d));
    let mut quotients = Vec::new();
    for h in &vectors {
        let lh = ops.apply_laplacian(h)?;
        let q = dot(h, &lh);
        if !(q.abs() <= T::lit(HARMONIC_GAP) * scale) {
            return Err(FeecError::BettiMismatch { declared: 3, detail: format!("projected generator has Rayleigh quotient {:e}", q.to_f64_lossy()) });
        }
        quotients.push(q);
    }
    Ok(HarmonicBasis { vectors, eigenvalues: quotients })
}

/// Assembled blocks of the mixed problem plus the harmonic block.
#[derive(Clone, Debug)]
pub struct MixedSystem<T> {
    pub metric: MetricField<T>,
    pub quad: QuadratureRule<T>,
    pub ops: ComplexOperators<T>,
    /// `None` when harmonic deflation was not requested.
    pub harmonic: Option<HarmonicBasis<T>>,
    pub betti: usize,
}

/// Whether to build the harmonic block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deflation {
    Enabled,
    Disabled,
}

/// Assembles the mixed system for a metric. The declared first Betti number
/// comes from the geometry metadata.
pub fn assemble_mixed<T: Real>(metric: &MetricField<T>, quad: &QuadratureRule<T>, deflation: Deflation) -> Result<MixedSystem<T>> {
    let complex = metric.complex();
    if complex.dim() != 3 && complex.dim() != 2 {
        return Err(FeecError::InvalidArgument("mixed problem needs n = 2 or 3".into()));
    }
    let betti = complex.betti().map_or(0, |b| b[1]);
    let ops = ComplexOperators::assemble(metric, quad)?;
    let harmonic = match deflation {
        Deflation::Enabled => Some(compute_harmonic_basis(&ops, betti)?),
        Deflation::Disabled => None,
    };
    Ok(MixedSystem { metric: metric.clone(), quad: quad.clone(), ops, harmonic, betti })
}

impl<T: Real> MixedSystem<T> {
    pub fn harmonic_count(&self) -> usize {
        self.harmonic.as_ref().map_or(0, HarmonicBasis::len)
    }

    /// Full symmetric block matrix, for inspection and cross-checks.
    pub fn block_matrix(&self) -> SparseOperator<T> {
        let (ne, nv, nh) = (self.ops.n_edges(), self.ops.n_vertices(), self.harmonic_count());
        let mut b = crate::linalg::CooBuilder::new(ne + nv + nh, ne + nv + nh);
        for (r, c, v) in self.ops.a.triplets() {
            b.push(r, c, v);
        }
        for (r, c, v) in self.ops.b.triplets() {
            b.push(r, ne + c, v);
            b.push(ne + c, r, v);
        }
        for (r, c, v) in self.ops.m0.triplets() {
            b.push(ne + r, ne + c, -v);
        }
        if let Some(h) = &self.harmonic {
            for (j, col) in h.vectors.iter().enumerate() {
                let mh = self.ops.m1.mul_vec(col);
                for (i, v) in mh.into_iter().enumerate() {
                    b.push(i, ne + nv + j, v);
                    b.push(ne + nv + j, i, v);
                }
            }
        }
        b.finalize().with_symmetric(true)
    }

    /// Load vector for a 1-form.
    pub fn load_vector(&self, load: &dyn crate::whitney::CellwiseForm<T>, quad: &QuadratureRule<T>) -> Result<Vec<T>> {
        assemble_load(&self.ops.spaces[1], &self.metric, load, quad)
    }
}

/// Solution of the mixed problem with diagnostics.
#[derive(Clone, Debug)]
pub struct MixedSolution<T> {
    pub u: Vec<T>,
    pub z: Vec<T>,
    pub p: Vec<T>,
    /// `‖K x − F‖ / ‖F‖` of the full block system.
    pub relative_residual: T,
    pub iterations: usize,
    /// `max |Hᵀ M¹ u|`.
    pub harmonic_constraint: T,
    /// `‖u‖_{H(curl)}`.
    pub hcurl_norm: T,
}

impl<T: Real> MixedSolution<T> {
    /// `‖u‖_{H(curl)} / ‖F‖_{L²}`.
    pub fn stability_ratio(&self, load_norm: T) -> T {
        self.hcurl_norm / load_norm
    }
}

/// Solves the mixed problem for a given right-hand side vector `r`.
///
/// The harmonic multipliers are `p = Hᵀr`; the remaining part of `r` lies in
/// the range of the Hodge-Laplacian `L = A + B M⁰⁻¹ Bᵀ`, which is solved by
/// preconditioned CG with an inner mass solve; `z = M⁰⁻¹ Bᵀ u`.
pub fn solve_mixed_rhs<T: Real>(system: &MixedSystem<T>, r: &[T]) -> Result<MixedSolution<T>> {
    let ops = &system.ops;
    let (ne, nv) = (ops.n_edges(), ops.n_vertices());
    if r.len() != ne {
        return Err(FeecError::Mismatch(format!("right-hand side of length {} for {ne} dofs", r.len())));
    }
    let empty = HarmonicBasis::empty();
    let h = match (&system.harmonic, system.betti) {
        (Some(h), _) => h,
        (None, 0) => &empty,
        (None, b) => return Err(FeecError::HarmonicBlockMissing { betti: b }),
    };
    let p = h.coefficients(r);
    let m1h = ops.m1.mul_vec(&h.combine(&p, ne));
    let rperp: Vec<T> = r.iter().zip(&m1h).map(|(a, b)| *a - *b).collect();
    let rnorm = norm2(r);
    let pnorm = norm2(&rperp);
    let mut u = vec![T::zero(); ne];
    let mut iterations = 0;
    if pnorm > T::lit(1e-14) * rnorm {
        let inner_err = std::cell::RefCell::new(None);
        let lap = FnOperator {
            n: ne,
            f: |x: &[T], y: &mut [T]| match ops.apply_laplacian(x) {
                Ok(v) => y.copy_from_slice(&v),
                Err(e) => {
                    *inner_err.borrow_mut() = Some(e);
                    y.iter_mut().for_each(|v| *v = T::zero());
                }
            },
        };
        let pre = Jacobi::new(&ops.laplacian_diagonal());
        let tol = (T::lit(SOLVE_TOLERANCE * 0.05) * rnorm / pnorm).min(T::lit(0.5));
        let out = pcg(&lap, &rperp, None, Some(&pre), tol, 10 * ne);
        if let Some(e) = inner_err.into_inner() {
            return Err(e);
        }
        iterations = out.iterations;
        let out = out.require("Hodge-Laplacian CG")?;
        u = out.x;
        // remove round-off drift along the harmonic directions
        let mu = ops.m1.mul_vec(&u);
        let c = h.coefficients(&mu);
        let hc = h.combine(&c, ne);
        for (ui, v) in u.iter_mut().zip(hc) {
            *ui = *ui - v;
        }
    }
    let mut btu = vec![T::zero(); nv];
    ops.b.apply_transpose(&u, &mut btu);
    let z = ops.solve_m0(&btu)?;

    // residual of the full block system
    let mut res1 = ops.a.mul_vec(&u);
    let bz = ops.b.mul_vec(&z);
    let m1hp = ops.m1.mul_vec(&h.combine(&p, ne));
    for i in 0..ne {
        res1[i] = res1[i] + bz[i] + m1hp[i] - r[i];
    }
    let m0z = ops.m0.mul_vec(&z);
    let res2: Vec<T> = btu.iter().zip(&m0z).map(|(a, b)| *a - *b).collect();
    let m1u = ops.m1.mul_vec(&u);
    let res3 = h.coefficients(&m1u);
    let total = (dot(&res1, &res1) + dot(&res2, &res2) + dot(&res3, &res3)).sqrt();
    let relative_residual = if rnorm > T::zero() { total / rnorm } else { total };
    let harmonic_constraint = res3.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if !(relative_residual <= T::lit(SOLVE_TOLERANCE)) {
        return Err(FeecError::NonConvergence { method: "mixed solve", iterations, residual: relative_residual.to_f64_lossy() });
    }
    let curl = ops.d1.mul_vec(&u);
    let hcurl_norm = (ops.m1.quadratic_form(&u) + ops.m2.quadratic_form(&curl)).sqrt();
    Ok(MixedSolution { u, z, p, relative_residual, iterations, harmonic_constraint, hcurl_norm })
}

/// Default exactness degree for load assembly.
pub const LOAD_DEGREE: usize = 4;

/// Assembles `r = ∫⟨F, φ_i⟩_g` for the load and solves.
pub fn solve_mixed<T: Real>(system: &MixedSystem<T>, load: &dyn crate::whitney::CellwiseForm<T>) -> Result<MixedSolution<T>> {
    let n = system.metric.complex().dim();
    let quad = quadrature_rule(n, LOAD_DEGREE)?;
    let r = system.load_vector(load, &quad)?;
    solve_mixed_rhs(system, &r)
}

/// `‖F‖_{L²(g)}` of a 1-form load.
pub fn load_norm<T: Real>(metric: &MetricField<T>, load: &dyn crate::whitney::CellwiseForm<T>) -> Result<T> {
    let quad = quadrature_rule(metric.complex().dim(), 5)?;
    Ok(form_norm_sq(metric, load, &quad)?.sqrt())
}

/// Analytic data `(U, ζ, F)` of the curl-curl problem
/// `curl curl U + grad ζ + h = F`, `ζ = −div U`, with `h` the harmonic
/// part of `F`. The exact solution refers to the flat metric of the
/// geometry it is declared for.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub name: &'static str,
    pub geometry: &'static str,
    /// `None` for load-only problems.
    pub u: Option<FormField>,
    pub zeta: Option<FormField>,
    pub load: FormField,
    /// Constant harmonic part of the load (flat torus coordinates).
    pub harmonic: [f64; 3],
}

/// Names of the shipped problems.
pub const PROBLEMS: [&str; 5] = ["sines", "gradient", "zero", "harmonic", "swirl"];

fn tau() -> f64 {
    2.0 * std::f64::consts::PI
}

/// Looks up a problem by name and verifies it at 1000 random points.
pub fn manufactured_problem(name: &str) -> Result<ManufacturedProblem> {
    let t = tau();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let p = match name {
        "sines" => {
            let u = [sin(t * z()), sin(t * x()), sin(t * y())];
            ManufacturedProblem {
                name: "sines",
                geometry: "torus3",
                load: FormField::vector(1, u.clone().map(|e| 4.0 * pi2 * e)),
                u: Some(FormField::vector(1, u)),
                zeta: Some(FormField::scalar(0, c(0.0))),
                harmonic: [0.0; 3],
            }
        }
        "gradient" => {
            let phi = cos(t * x()) * cos(t * y());
            let grad = |e: &Expr| [e.diff(0), e.diff(1), e.diff(2)];
            let zeta = 8.0 * pi2 * phi.clone();
            ManufacturedProblem {
                name: "gradient",
                geometry: "torus3",
                u: Some(FormField::vector(1, grad(&phi))),
                load: FormField::vector(1, [
                    -(8.0 * pi2 * t) * sin(t * x()) * cos(t * y()),
                    -(8.0 * pi2 * t) * cos(t * x()) * sin(t * y()),
                    c(0.0),
                ]),
                zeta: Some(FormField::scalar(0, zeta)),
                harmonic: [0.0; 3],
            }
        }
        "zero" => ManufacturedProblem {
            name: "zero",
            geometry: "any",
            u: Some(FormField::zero(1)),
            zeta: Some(FormField::zero(0)),
            load: FormField::zero(1),
            harmonic: [0.0; 3],
        },
        "harmonic" => ManufacturedProblem {
            name: "harmonic",
            geometry: "torus3",
            u: Some(FormField::zero(1)),
            zeta: Some(FormField::zero(0)),
            load: FormField::vector(1, [c(1.0), c(-2.0), c(0.5)]),
            harmonic: [1.0, -2.0, 0.5],
        },
        "swirl" => ManufacturedProblem {
            name: "swirl",
            geometry: "sphere2",
            u: None,
            zeta: None,
            load: FormField::vector(1, [-y() + x() * z(), x() + y() * z(), z() * z() - c(1.0)]),
            harmonic: [0.0; 3],
        },
        other => {
            return Err(FeecError::UnknownName { kind: "problem", name: other.into(), valid: PROBLEMS.join(", ") });
        }
    };
    let residual = manufactured_residual(&p, 1000, 0x5eed);
    if !(residual <= 1e-10) {
        return Err(FeecError::ManufacturedResidual { name: p.name.into(), residual });
    }
    Ok(p)
}

/// Largest pointwise residual of both equations at `samples` random points,
/// relative to the size of the load. The load is recomputed symbolically
/// from `(U, ζ)`.
pub fn manufactured_residual(p: &ManufacturedProblem, samples: usize, seed: u64) -> f64 {
    let (Some(u), Some(zeta)) = (&p.u, &p.zeta) else {
        return 0.0;
    };
    let curlcurl = u.d().flat_curl();
    let grad_zeta = zeta.d();
    let div_u = u.flat_divergence();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for _ in 0..samples {
        let pt: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let f = p.load.eval(&pt);
        let cc = curlcurl.eval(&pt);
        let gz = grad_zeta.eval(&pt);
        for i in 0..3 {
            scale = scale.max(f[i].abs());
            worst = worst.max((cc[i] + gz[i] + p.harmonic[i] - f[i]).abs());
        }
        worst = worst.max((zeta.eval(&pt)[0] + div_u.eval(&pt)).abs());
    }
    worst / scale
}
