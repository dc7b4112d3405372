//! Geometric variational crime: how far the edge-element mass matrix of a
//! computational metric `ĝ` is from an isometry against a reference metric
//! `g̃`, the load transfer discrepancy, and the gap between the discrete
//! solutions computed with the two metrics.

use std::sync::Arc;

use crate::error::{FeecError, Result};
use crate::geometry::{quadrature_rule, ExactMetric, InterpolationScheme, MetricField, QuadratureRule, ThetaMap};
use crate::hodge::{assemble_mixed, manufactured_problem, solve_mixed_rhs, Deflation, DENSE_LIMIT, LOAD_DEGREE};
use crate::linalg::{lanczos_largest, pcg, DenseMatrix, Jacobi, SparseOperator};
use crate::mesh::SimplicialComplex;
use crate::scalar::Real;
use crate::approx::rate_table;
use crate::symbolic::FormField;
use crate::whitney::{assemble_load, assemble_mass, canonical_interpolant, CellwiseForm, FESpace, PulledBack};

/// Relative eigenvalue tolerance of the iterative pencil solver.
pub const PENCIL_TOLERANCE: f64 = 1e-8;

/// Extreme eigenvalues of `S x = λ R x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PencilExtremes<T> {
    pub lambda_min: T,
    pub lambda_max: T,
    /// Lanczos steps taken; zero for the dense path.
    pub iterations: usize,
}

impl<T: Real> PencilExtremes<T> {
    /// `max(|1 − λ_min|, |1 − λ_max|)`.
    pub fn crime_norm(&self) -> T {
        (T::one() - self.lambda_min).abs().max((T::one() - self.lambda_max).abs())
    }
}

fn check_spd<T: Real>(m: &SparseOperator<T>, what: &str) -> Result<()> {
    if !m.check_symmetric(T::lit(1e-13)) {
        return Err(FeecError::InvalidArgument(format!("{what} matrix is not symmetric")));
    }
    if let Some(i) = m.diagonal().iter().position(|d| !(*d > T::zero())) {
        return Err(FeecError::NotPositiveDefinite { pivot: i });
    }
    Ok(())
}

fn mass_solver<T: Real>(m: &SparseOperator<T>) -> impl Fn(&[T]) -> Result<Vec<T>> + '_ {
    let pre = Jacobi::from_operator(m);
    move |b: &[T]| Ok(pcg(m, b, None, Some(&pre), T::lit(1e-14).max(T::EPS * T::lit(16.0)), 20 * b.len() + 100).require("mass CG")?.x)
}

/// Solves `M x = b` for an SPD mass matrix.
pub fn solve_mass<T: Real>(m: &SparseOperator<T>, b: &[T]) -> Result<Vec<T>> {
    mass_solver(m)(b)
}

/// Extreme generalized eigenvalues of `(source, reference)`: dense below
/// the dense limit, Lanczos on both orderings of the pencil above it.
pub fn pencil_extremes<T: Real>(source: &SparseOperator<T>, reference: &SparseOperator<T>) -> Result<PencilExtremes<T>> {
    let n = source.nrows();
    if source.ncols() != n || reference.nrows() != n || reference.ncols() != n {
        return Err(FeecError::Mismatch(format!(
            "pencil of {}x{} and {}x{} matrices",
            source.nrows(),
            source.ncols(),
            reference.nrows(),
            reference.ncols()
        )));
    }
    check_spd(source, "source")?;
    check_spd(reference, "reference")?;
    if n < DENSE_LIMIT {
        let s = DenseMatrix::from_rows(&source.to_dense());
        let r = DenseMatrix::from_rows(&reference.to_dense());
        let eig = DenseMatrix::generalized_sym_eigen(&s, &r, false)?;
        let (lo, hi) = (eig.values[0], eig.values[n - 1]);
        if !(lo > T::zero()) {
            return Err(FeecError::NotPositiveDefinite { pivot: 0 });
        }
        return Ok(PencilExtremes { lambda_min: lo, lambda_max: hi, iterations: 0 });
    }
    pencil_extremes_lanczos(source, reference)
}

/// The iterative path of [`pencil_extremes`]: `λ_max` from Lanczos on
/// `(S, R)` and `λ_min` as the reciprocal of the largest eigenvalue of `(R, S)`.
pub fn pencil_extremes_lanczos<T: Real>(source: &SparseOperator<T>, reference: &SparseOperator<T>) -> Result<PencilExtremes<T>> {
    let n = source.nrows();
    check_spd(source, "source")?;
    check_spd(reference, "reference")?;
    let tol = T::lit(PENCIL_TOLERANCE) * T::lit(0.01);
    let apply_src = |x: &[T]| source.mul_vec(x);
    let apply_ref = |x: &[T]| reference.mul_vec(x);
    let solve_ref = mass_solver(reference);
    let solve_src = mass_solver(source);
    let hi = lanczos_largest(&apply_src, &apply_ref, &solve_ref, n, tol, 60, 40)?;
    let inv_lo = lanczos_largest(&apply_ref, &apply_src, &solve_src, n, tol, 60, 40)?;
    Ok(PencilExtremes { lambda_min: T::one() / inv_lo.value, lambda_max: hi.value, iterations: hi.iterations + inv_lo.iterations })
}

/// Edge-element mass matrix of a metric with the assembly rule.
fn edge_mass<T: Real>(metric: &MetricField<T>, quad: &QuadratureRule<T>) -> Result<(FESpace<T>, SparseOperator<T>)> {
    let space = FESpace::new(metric.complex().clone(), 1)?;
    let m = assemble_mass(&space, metric, quad)?;
    Ok((space, m))
}

/// Isometry defect of the identity map between the edge spaces of `ĝ` and
/// `g̃`, measured through the pencil `(M¹_ĝ, M¹_g̃)`.
pub fn crime_norm<T: Real>(ghat: &MetricField<T>, gtilde: &MetricField<T>, quad: &QuadratureRule<T>) -> Result<T> {
    if !Arc::ptr_eq(ghat.complex(), gtilde.complex()) {
        return Err(FeecError::Mismatch("metrics live on different complexes".into()));
    }
    let (_, mh) = edge_mass(ghat, quad)?;
    let (_, mt) = edge_mass(gtilde, quad)?;
    Ok(pencil_extremes(&mh, &mt)?.crime_norm())
}

/// How the computational load is built from the exact one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transfer {
    /// Canonical interpolant of the pulled-back load.
    Interp,
    /// `L²(ĝ)` projection of the pulled-back load.
    L2Projection,
}

impl Transfer {
    pub const NAMES: [&'static str; 2] = ["interp", "l2-projection"];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "interp" => Ok(Self::Interp),
            "l2-projection" => Ok(Self::L2Projection),
            other => Err(FeecError::UnknownName { kind: "transfer", name: other.into(), valid: Self::NAMES.join(", ") }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Interp => "interp",
            Self::L2Projection => "l2-projection",
        }
    }
}

/// Coefficients of the computational load and of the transferred reference
/// load `(M¹_ĝ)⁻¹ M¹_g̃ f̃ = (M¹_ĝ)⁻¹ b_g̃`, plus both mass matrices.
struct Loads<T> {
    space: FESpace<T>,
    m_hat: SparseOperator<T>,
    m_tilde: SparseOperator<T>,
    f_hat: Vec<T>,
    transferred: Vec<T>,
    b_tilde: Vec<T>,
}

fn build_loads<T: Real>(
    load: &dyn CellwiseForm<T>,
    transfer: Transfer,
    ghat: &MetricField<T>,
    gtilde: &MetricField<T>,
    quad: &QuadratureRule<T>,
) -> Result<Loads<T>> {
    if !Arc::ptr_eq(ghat.complex(), gtilde.complex()) {
        return Err(FeecError::Mismatch("metrics live on different complexes".into()));
    }
    let (space, m_hat) = edge_mass(ghat, quad)?;
    let (_, m_tilde) = edge_mass(gtilde, quad)?;
    let lq = quadrature_rule(space.complex().dim(), LOAD_DEGREE.max(quad.degree()))?;
    let b_tilde = assemble_load(&space, gtilde, load, &lq)?;
    let transferred = solve_mass(&m_hat, &b_tilde)?;
    let f_hat = match transfer {
        Transfer::Interp => canonical_interpolant(&space, load)?,
        Transfer::L2Projection => solve_mass(&m_hat, &assemble_load(&space, ghat, load, &lq)?)?,
    };
    Ok(Loads { space, m_hat, m_tilde, f_hat, transferred, b_tilde })
}

/// `‖F̂ − A_h* Θ*F‖_{L²(ĝ)}` with `F̂` built by `transfer`.
pub fn data_transfer_discrepancy<T: Real>(
    load: &dyn CellwiseForm<T>,
    transfer: Transfer,
    ghat: &MetricField<T>,
    gtilde: &MetricField<T>,
    quad: &QuadratureRule<T>,
) -> Result<T> {
    let l = build_loads(load, transfer, ghat, gtilde, quad)?;
    Ok(discrepancy_of(&l))
}

fn discrepancy_of<T: Real>(l: &Loads<T>) -> T {
    let diff: Vec<T> = l.f_hat.iter().zip(&l.transferred).map(|(a, b)| *a - *b).collect();
    l.m_hat.quadratic_form(&diff).max(T::zero()).sqrt()
}

/// Geometry of a crime experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CrimeGeometry {
    /// Icosphere at level `ℓ`, reference metric pulled back by the radial map.
    Sphere2,
    /// Torus with `2^ℓ` subdivisions, reference metric `exp(ε S)`.
    Torus3 { eps: f64 },
}

/// How the computational metric `ĝ` is obtained from `g̃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricApprox {
    /// Affine cell metric of the mesh embedding.
    Flat,
    PiecewiseConstant,
    PiecewiseLinear,
    /// `ĝ = g̃`.
    Exact,
    /// `ĝ = c g̃`.
    Scaled(f64),
}

impl MetricApprox {
    pub const NAMES: [&'static str; 4] = ["pw-constant", "pw-linear", "flat", "exact"];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "pw-constant" => Ok(Self::PiecewiseConstant),
            "pw-linear" => Ok(Self::PiecewiseLinear),
            "exact" => Ok(Self::Exact),
            other => Err(FeecError::UnknownName { kind: "approx", name: other.into(), valid: Self::NAMES.join(", ") }),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Flat => "flat".into(),
            Self::PiecewiseConstant => "pw-constant".into(),
            Self::PiecewiseLinear => "pw-linear".into(),
            Self::Exact => "exact".into(),
            Self::Scaled(c) => format!("scaled:{c}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CrimeConfig {
    pub geometry: CrimeGeometry,
    pub approx: MetricApprox,
    pub levels: usize,
    pub transfer: Transfer,
    /// Load field in ambient coordinates.
    pub load: FormField,
}

impl CrimeConfig {
    /// Icosphere with the swirl load, or the perturbed torus with the sine load.
    pub fn new(geometry: CrimeGeometry, approx: MetricApprox, levels: usize) -> Result<Self> {
        let name = match geometry {
            CrimeGeometry::Sphere2 => "swirl",
            CrimeGeometry::Torus3 { .. } => "sines",
        };
        Ok(Self { geometry, approx, levels, transfer: Transfer::L2Projection, load: manufactured_problem(name)?.load })
    }
}

/// One refinement level of a crime experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct CrimeLevel<T> {
    pub level: usize,
    pub h: T,
    pub dofs: usize,
    pub lambda_min: T,
    pub lambda_max: T,
    pub crime_norm: T,
    pub discrepancy: T,
    pub solution_gap: T,
    /// `‖Θ*F‖_{L²(g̃)}`.
    pub load_norm: T,
}

impl<T: Real> CrimeLevel<T> {
    /// `gap / (discrepancy + crime_norm ‖F‖)`; `None` when the denominator vanishes.
    pub fn bound_ratio(&self) -> Option<T> {
        let denom = self.discrepancy + self.crime_norm * self.load_norm;
        (denom > T::zero()).then(|| self.solution_gap / denom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrimeReport<T> {
    pub levels: Vec<CrimeLevel<T>>,
}

impl<T: Real> CrimeReport<T> {
    /// `log₂(gap_{ℓ−1} / gap_ℓ)` aligned with the levels; `None` on the first.
    pub fn gap_rates(&self) -> Vec<Option<T>> {
        let gaps: Vec<T> = self.levels.iter().map(|l| l.solution_gap).collect();
        std::iter::once(None).chain(rate_table(&gaps)).collect()
    }

    pub fn crime_rates(&self) -> Vec<Option<T>> {
        let c: Vec<T> = self.levels.iter().map(|l| l.crime_norm).collect();
        std::iter::once(None).chain(rate_table(&c)).collect()
    }
}

/// Complex, theta map and reference metric of one level.
pub fn crime_setting<T: Real>(geometry: CrimeGeometry, level: usize) -> Result<(ThetaMap, MetricField<T>)> {
    match geometry {
        CrimeGeometry::Sphere2 => {
            let cx = Arc::new(SimplicialComplex::icosphere(level));
            Ok((ThetaMap::RadialProjection, MetricField::pullback(cx, ThetaMap::RadialProjection, ExactMetric::Euclidean)))
        }
        CrimeGeometry::Torus3 { eps } => {
            if level > 20 {
                return Err(FeecError::InvalidArgument(format!("torus level {level} is too large")));
            }
            let cx = Arc::new(SimplicialComplex::torus3(1 << level)?);
            Ok((ThetaMap::Identity, MetricField::pullback(cx, ThetaMap::Identity, ExactMetric::Perturbed { eps })))
        }
    }
}

/// The computational metric for a reference metric.
pub fn approximate_metric<T: Real>(gtilde: &MetricField<T>, approx: MetricApprox) -> Result<MetricField<T>> {
    match approx {
        MetricApprox::Flat => Ok(MetricField::flat(gtilde.complex().clone())),
        MetricApprox::PiecewiseConstant => gtilde.interpolate(InterpolationScheme::PiecewiseConstant),
        MetricApprox::PiecewiseLinear => gtilde.interpolate(InterpolationScheme::PiecewiseLinear),
        MetricApprox::Exact => Ok(gtilde.clone()),
        MetricApprox::Scaled(c) => {
            if !(c > 0.0) {
                return Err(FeecError::InvalidArgument(format!("metric scale {c} must be positive")));
            }
            Ok(gtilde.scaled(T::lit(c)))
        }
    }
}

/// One level of the experiment: pencil, discrepancy and solution gap.
pub fn crime_level<T: Real>(config: &CrimeConfig, level: usize) -> Result<CrimeLevel<T>> {
    let (theta, gtilde) = crime_setting::<T>(config.geometry, level)?;
    let ghat = approximate_metric(&gtilde, config.approx)?;
    let complex = gtilde.complex().clone();
    let quad = quadrature_rule(complex.dim(), 2)?;
    let load = PulledBack::new(complex.clone(), theta, config.load.clone())?;
    let loads = build_loads(&load, config.transfer, &ghat, &gtilde, &quad)?;
    let pencil = pencil_extremes(&loads.m_hat, &loads.m_tilde)?;
    let discrepancy = discrepancy_of(&loads);

    let sys_hat = assemble_mixed(&ghat, &quad, Deflation::Enabled)?;
    let sys_tilde = assemble_mixed(&gtilde, &quad, Deflation::Enabled)?;
    let r_hat = loads.m_hat.mul_vec(&loads.f_hat);
    let u_hat = solve_mixed_rhs(&sys_hat, &r_hat)?.u;
    let u_tilde = solve_mixed_rhs(&sys_tilde, &loads.b_tilde)?.u;
    let e: Vec<T> = u_tilde.iter().zip(&u_hat).map(|(a, b)| *a - *b).collect();
    let de = sys_hat.ops.d1.mul_vec(&e);
    let gap = (sys_hat.ops.m1.quadratic_form(&e) + sys_hat.ops.m2.quadratic_form(&de)).max(T::zero()).sqrt();
    let load_norm = crate::hodge::load_norm(&gtilde, &load)?;
    Ok(CrimeLevel {
        level,
        h: complex.shape_regularity()?.h,
        dofs: loads.space.dim(),
        lambda_min: pencil.lambda_min,
        lambda_max: pencil.lambda_max,
        crime_norm: pencil.crime_norm(),
        discrepancy,
        solution_gap: gap,
        load_norm,
    })
}

/// Runs levels `1..=levels` in order.
pub fn run_crime_experiment<T: Real>(config: &CrimeConfig) -> Result<CrimeReport<T>> {
    if config.levels == 0 {
        return Err(FeecError::InvalidArgument("at least one level is required".into()));
    }
    let levels = (1..=config.levels).map(|l| crime_level(config, l)).collect::<Result<Vec<_>>>()?;
    Ok(CrimeReport { levels })
}
