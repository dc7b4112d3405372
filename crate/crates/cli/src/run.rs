//! Pipelines behind each command. Every command renders its report to a
//! string first, so a failing run never leaves a partial file behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use feec_core::approx::{commuting_catalog, commuting_residual, error_norms, quasi_interpolant, rate_table, BrokenField, Interpolant};
use feec_core::crime::{run_crime_experiment, CrimeConfig, CrimeGeometry};
use feec_core::geometry::{mass_weight, quadrature_rule, ExactMetric, InterpolationScheme, MetricField, ThetaMap};
use feec_core::hodge::{assemble_mixed, load_norm, manufactured_problem, solve_mixed, Deflation, ManufacturedProblem};
use feec_core::linalg::SmallMat;
use feec_core::symbolic::FormField;
use feec_core::whitney::{canonical_interpolant, FESpace, FeField};
use feec_core::{Complex, FeecError};

use crate::config::{Command, ExperimentConfig, Geometry, InterpolantChoice, MetricSpec, DEFAULT_EPS};

/// Tolerance of the pass column in interp-check reports.
pub const CHECK_TOLERANCE: f64 = 1e-10;

/// Number of random SPD matrices drawn by interp-check.
pub const SPD_SAMPLES: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(#[from] crate::config::ValidationErrors),
    #[error(transparent)]
    Core(#[from] FeecError),
    #[error("cannot write `{path}`: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("cannot build thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Core(e) => e.kind(),
            CliError::Write { .. } => "io",
            CliError::Threads(_) => "threads",
        }
    }

    /// Single-line JSON description for standard error.
    pub fn json_line(&self) -> String {
        let details: Vec<String> = match self {
            CliError::Validation(v) => v.0.clone(),
            other => vec![other.to_string()],
        };
        serde_json::json!({ "error": self.kind(), "message": self.to_string(), "details": details }).to_string()
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers see either nothing or the complete report.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let err = |source| CliError::Write { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// Runs the configured command on a pool of the requested size.
pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    let outputs = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Threads(e.to_string()))?
            .install(|| render(config))?,
        None => render(config)?,
    };
    if let (Some(path), Some(dump)) = (&config.dump_solution, &outputs.dump) {
        write_atomic(path, dump)?;
    }
    match &config.out {
        Some(path) => write_atomic(path, &outputs.report)?,
        None => print!("{}", outputs.report),
    }
    Ok(())
}

/// Rendered report plus the optional solution dump.
pub struct Outputs {
    pub report: String,
    pub dump: Option<String>,
}

pub fn render(config: &ExperimentConfig) -> Result<Outputs, CliError> {
    let report = match config.command {
        Command::MeshInfo => mesh_info(config)?,
        Command::Solve => return solve(config),
        Command::Converge => converge(config)?,
        Command::Crime => crime(config)?,
        Command::InterpCheck => interp_check(config)?,
    };
    Ok(Outputs { report, dump: None })
}

fn geometry(config: &ExperimentConfig) -> Geometry {
    config.geometry.expect("validated geometry")
}

pub fn build_complex(geometry: Geometry, level: usize) -> Result<Arc<Complex>, FeecError> {
    Ok(Arc::new(match geometry {
        Geometry::Torus3 => Complex::torus3(1 << level)?,
        Geometry::Sphere2 => Complex::icosphere(level),
    }))
}

pub fn theta_of(geometry: Geometry) -> ThetaMap {
    match geometry {
        Geometry::Torus3 => ThetaMap::Identity,
        Geometry::Sphere2 => ThetaMap::RadialProjection,
    }
}

/// Metric on `complex` described by `spec`. The piecewise schemes
/// interpolate the perturbed metric on the torus and the round metric on
/// the sphere.
pub fn build_metric(geometry: Geometry, complex: Arc<Complex>, spec: MetricSpec) -> Result<MetricField<f64>, FeecError> {
    let theta = theta_of(geometry);
    let source = |eps: f64| match geometry {
        Geometry::Torus3 => MetricField::pullback(complex.clone(), theta, ExactMetric::Perturbed { eps }),
        Geometry::Sphere2 => MetricField::pullback(complex.clone(), theta, ExactMetric::Euclidean),
    };
    match spec {
        MetricSpec::Flat => Ok(MetricField::flat(complex)),
        MetricSpec::Perturbed { eps } => Ok(MetricField::pullback(complex, theta, ExactMetric::Perturbed { eps })),
        MetricSpec::RoundPullback => Ok(MetricField::pullback(complex, theta, ExactMetric::Euclidean)),
        MetricSpec::PiecewiseConstant { eps } => source(eps).interpolate(InterpolationScheme::PiecewiseConstant),
        MetricSpec::PiecewiseLinear { eps } => source(eps).interpolate(InterpolationScheme::PiecewiseLinear),
    }
}

fn mesh_info(config: &ExperimentConfig) -> Result<String, CliError> {
    let g = geometry(config);
    let cx = build_complex(g, config.level)?;
    let shape = cx.shape_regularity()?;
    let mut out = String::from("quantity,value\n");
    let _ = writeln!(out, "geometry,{}", g.name());
    let _ = writeln!(out, "level,{}", config.level);
    let _ = writeln!(out, "dimension,{}", cx.dim());
    for (k, count) in cx.counts().iter().enumerate() {
        let _ = writeln!(out, "simplices_{k},{count}");
    }
    let _ = writeln!(out, "euler_characteristic,{}", cx.euler_characteristic());
    if let Some(betti) = cx.betti() {
        for (k, b) in betti.iter().enumerate() {
            let _ = writeln!(out, "betti_{k},{b}");
        }
    }
    let _ = writeln!(out, "h,{}", num(shape.h));
    let _ = writeln!(out, "volume_ratio,{}", num(shape.volume_ratio));
    let _ = writeln!(out, "jacobian_bound,{}", num(shape.jacobian_bound));
    let _ = writeln!(out, "inverse_jacobian_bound,{}", num(shape.inverse_jacobian_bound));
    Ok(out)
}

fn problem(config: &ExperimentConfig) -> Result<ManufacturedProblem, CliError> {
    Ok(manufactured_problem(&config.problem)?)
}

fn smooth(cx: &Arc<Complex>, theta: ThetaMap, f: &FormField) -> Result<BrokenField<f64>, FeecError> {
    BrokenField::smooth(cx.clone(), theta, f.clone())
}

fn metric_label(spec: MetricSpec) -> String {
    match spec {
        MetricSpec::Flat => "flat".into(),
        MetricSpec::RoundPullback => "round-pullback".into(),
        MetricSpec::Perturbed { eps } => format!("perturbed:eps={eps}"),
        MetricSpec::PiecewiseConstant { eps } => format!("pw-constant:eps={eps}"),
        MetricSpec::PiecewiseLinear { eps } => format!("pw-linear:eps={eps}"),
    }
}

fn solve(config: &ExperimentConfig) -> Result<Outputs, CliError> {
    let g = geometry(config);
    let p = problem(config)?;
    let cx = build_complex(g, config.level)?;
    let theta = theta_of(g);
    let metric = build_metric(g, cx.clone(), config.metric)?;
    let sys = assemble_mixed(&metric, &quadrature_rule(cx.dim(), 2)?, Deflation::Enabled)?;
    let load = smooth(&cx, theta, &p.load)?;
    let sol = solve_mixed(&sys, &load)?;
    let fnorm = load_norm(&metric, &load)?;
    let stability = (fnorm > 0.0).then(|| sol.stability_ratio(fnorm));

    // exact solutions refer to the flat metric
    let errors = match (&p.u, &p.zeta) {
        (Some(u), Some(zeta)) if config.metric.is_flat() && g == Geometry::Torus3 => {
            let u = smooth(&cx, theta, u)?;
            let zeta = smooth(&cx, theta, zeta)?;
            let uh = FeField::new(&sys.ops.spaces[1], &sol.u)?;
            let zh = FeField::new(&sys.ops.spaces[0], &sol.z)?;
            let q = quadrature_rule(cx.dim(), feec_core::approx::ERROR_DEGREE)?;
            Some(error_norms(&metric, &uh, &u, Some((&zh, &zeta)), &q)?)
        }
        _ => None,
    };

    let mut report = String::from(
        "geometry,level,metric,problem,h,dofs,iterations,relative_residual,harmonic_count,hcurl_norm,load_norm,stability_ratio,err_l2,err_curl,err_hcurl,err_zeta_h1\n",
    );
    let h = cx.shape_regularity()?.h;
    let _ = writeln!(
        report,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        g.name(),
        config.level,
        metric_label(config.metric),
        p.name,
        num(h),
        sys.ops.n_edges(),
        sol.iterations,
        num(sol.relative_residual),
        sys.harmonic_count(),
        num(sol.hcurl_norm),
        num(fnorm),
        opt(stability),
        opt(errors.map(|e| e.l2)),
        opt(errors.map(|e| e.curl)),
        opt(errors.map(|e| e.hcurl)),
        opt(errors.map(|e| e.zeta_h1)),
    );
    let dump = config.dump_solution.as_ref().map(|_| {
        let mut d = String::from("block,index,value\n");
        for (name, block) in [("u", &sol.u), ("z", &sol.z), ("p", &sol.p)] {
            for (i, v) in block.iter().enumerate() {
                let _ = writeln!(d, "{name},{i},{}", num(*v));
            }
        }
        d
    });
    Ok(Outputs { report, dump })
}

/// One row of a convergence table.
pub fn converge_row(config: &ExperimentConfig, level: usize) -> Result<feec_core::approx::ErrorRow<f64>, CliError> {
    let g = geometry(config);
    let p = problem(config)?;
    let cx = build_complex(g, level)?;
    let theta = theta_of(g);
    let metric = build_metric(g, cx.clone(), config.metric)?;
    let q = quadrature_rule(cx.dim(), feec_core::approx::ERROR_DEGREE)?;
    // interpolants approximate the exact solution, or the load when there is none
    let target = p.u.as_ref().unwrap_or(&p.load);
    let u = smooth(&cx, theta, target)?;
    let space = FESpace::new(cx.clone(), 1)?;
    let row = match config.interpolant {
        InterpolantChoice::Canonical => {
            let coeffs = canonical_interpolant(&space, &u)?;
            error_norms(&metric, &FeField::new(&space, &coeffs)?, &u, None, &q)?
        }
        InterpolantChoice::Quasi => {
            let coeffs = quasi_interpolant(&space, &metric, &u, &q)?;
            error_norms(&metric, &FeField::new(&space, &coeffs)?, &u, None, &q)?
        }
        InterpolantChoice::Galerkin => {
            let sys = assemble_mixed(&metric, &quadrature_rule(cx.dim(), 2)?, Deflation::Enabled)?;
            let sol = solve_mixed(&sys, &smooth(&cx, theta, &p.load)?)?;
            let zeta = smooth(&cx, theta, p.zeta.as_ref().expect("validated problem"))?;
            let uh = FeField::new(&sys.ops.spaces[1], &sol.u)?;
            let zh = FeField::new(&sys.ops.spaces[0], &sol.z)?;
            error_norms(&metric, &uh, &u, Some((&zh, &zeta)), &q)?
        }
    };
    Ok(row)
}

fn converge(config: &ExperimentConfig) -> Result<String, CliError> {
    let rows = (1..=config.levels).map(|l| converge_row(config, l)).collect::<Result<Vec<_>, _>>()?;
    let hcurl: Vec<f64> = rows.iter().map(|r| r.hcurl).collect();
    let rates: Vec<Option<f64>> = std::iter::once(None).chain(rate_table(&hcurl)).collect();
    let mut out = String::from("level,h,dofs,err_l2,err_curl,err_hcurl,err_zeta_h1,rate_hcurl\n");
    for (i, (r, rate)) in rows.iter().zip(rates).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            num(r.h),
            r.dofs,
            num(r.l2),
            num(r.curl),
            num(r.hcurl),
            num(r.zeta_h1),
            opt(rate)
        );
    }
    Ok(out)
}

fn crime(config: &ExperimentConfig) -> Result<String, CliError> {
    let geometry = match geometry(config) {
        Geometry::Sphere2 => CrimeGeometry::Sphere2,
        Geometry::Torus3 => CrimeGeometry::Torus3 {
            eps: match config.metric {
                MetricSpec::Perturbed { eps } | MetricSpec::PiecewiseConstant { eps } | MetricSpec::PiecewiseLinear { eps } => eps,
                _ => DEFAULT_EPS,
            },
        },
    };
    let mut crime = CrimeConfig::new(geometry, config.approx, config.levels)?;
    crime.transfer = config.transfer;
    let report = run_crime_experiment::<f64>(&crime)?;
    let mut out = String::from("level,h,dofs,lambda_min,lambda_max,crime_norm,discrepancy,solution_gap,rate_gap\n");
    for (l, rate) in report.levels.iter().zip(report.gap_rates()) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            l.level,
            num(l.h),
            l.dofs,
            num(l.lambda_min),
            num(l.lambda_max),
            num(l.crime_norm),
            num(l.discrepancy),
            num(l.solution_gap),
            opt(rate)
        );
    }
    Ok(out)
}

/// Random SPD matrix `AᵀA + δI` with entries of `A` in `[-1, 1]`.
fn random_spd(rng: &mut ChaCha8Rng) -> SmallMat<f64> {
    let entries: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = SmallMat::from_fn(3, 3, |i, j| entries[3 * i + j]);
    let mut g = a.transpose().mul(&a);
    let delta = rng.gen_range(0.05..1.0);
    for i in 0..3 {
        g[(i, i)] += delta;
    }
    g
}

/// Largest violation of the determinant and inverse identities of the
/// three-dimensional metric weights.
fn weight_defect(g: &SmallMat<f64>) -> Result<f64, FeecError> {
    let s = g.det().sqrt();
    let w0 = mass_weight(0, g)?[(0, 0)];
    let w1 = mass_weight(1, g)?;
    let w2 = mass_weight(2, g)?;
    let w3 = mass_weight(3, g)?[(0, 0)];
    let defects = [
        (w0 - s).abs() / s,
        (w1.det() - s).abs() / s,
        (w2.det() * s - 1.0).abs(),
        (w3 * s - 1.0).abs(),
        w1.mul(&w2).sub(&SmallMat::identity(3)).max_abs(),
    ];
    Ok(defects.into_iter().fold(0.0, f64::max))
}

fn interp_check(config: &ExperimentConfig) -> Result<String, CliError> {
    let geometries = match config.geometry {
        Some(g) => vec![g],
        None => vec![Geometry::Torus3, Geometry::Sphere2],
    };
    let mut out = String::from("check,geometry,level,item,degree,value,pass\n");
    let pass = |v: f64| if v <= CHECK_TOLERANCE { "true" } else { "false" };
    for g in geometries {
        let cx = build_complex(g, config.level)?;
        let theta = theta_of(g);
        let metric = build_metric(g, cx.clone(), MetricSpec::Flat)?;
        for (name, f) in commuting_catalog(cx.geometry()) {
            let degree = f.degree();
            let field = smooth(&cx, theta, &f)?;
            let r = commuting_residual(Interpolant::Canonical, &metric, &field)?;
            let _ = writeln!(out, "commuting-canonical,{},{},{name},{degree},{},{}", g.name(), config.level, num(r), pass(r));
            if degree == 1 {
                let r = commuting_residual(Interpolant::Quasi, &metric, &field)?;
                let _ = writeln!(out, "commuting-quasi,{},{},{name},{degree},{},", g.name(), config.level, num(r));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for i in 0..SPD_SAMPLES {
        let d = weight_defect(&random_spd(&mut rng))?;
        let _ = writeln!(out, "weight-identity,,,spd-{i},,{},{}", num(d), pass(d));
    }
    Ok(out)
}
