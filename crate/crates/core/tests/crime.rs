use std::sync::Arc;

use feec_core::crime::{
    approximate_metric, crime_norm, crime_setting, data_transfer_discrepancy, pencil_extremes, pencil_extremes_lanczos,
    run_crime_experiment, CrimeConfig, CrimeGeometry, MetricApprox, Transfer,
};
use feec_core::geometry::{quadrature_rule, ExactMetric, MetricField, ThetaMap};
use feec_core::linalg::DenseMatrix;
use feec_core::symbolic::FormField;
use feec_core::whitney::{assemble_mass, FESpace, PulledBack};
use feec_core::Complex;

const TORUS: CrimeGeometry = CrimeGeometry::Torus3 { eps: 0.3 };

fn edge_masses(n: usize) -> (feec_core::linalg::SparseOperator<f64>, feec_core::linalg::SparseOperator<f64>) {
    let cx = Arc::new(Complex::torus3(n).unwrap());
    let gt = MetricField::pullback(cx.clone(), ThetaMap::Identity, ExactMetric::Perturbed { eps: 0.3 });
    let gh = approximate_metric(&gt, MetricApprox::PiecewiseConstant).unwrap();
    let space = FESpace::new(cx, 1).unwrap();
    let q = quadrature_rule(3, 2).unwrap();
    (assemble_mass(&space, &gh, &q).unwrap(), assemble_mass(&space, &gt, &q).unwrap())
}

#[test]
fn identical_and_scaled_pencils() {
    let (m, _) = edge_masses(2);
    let same = pencil_extremes(&m, &m).unwrap();
    assert!((same.lambda_min - 1.0).abs() < 1e-12 && (same.lambda_max - 1.0).abs() < 1e-12);
    assert!(same.crime_norm() < 1e-12);
    for c in [0.5, 2.0, 10.0] {
        let p = pencil_extremes(&m.map(|v| v * c), &m).unwrap();
        assert!((p.crime_norm() - (1.0f64 - c).abs()).abs() < 1e-10, "c={c}");
        let p = pencil_extremes_lanczos(&m.map(|v| v * c), &m).unwrap();
        assert!((p.crime_norm() - (1.0f64 - c).abs()).abs() < 1e-10, "lanczos c={c}");
    }
}

#[test]
fn dense_and_iterative_pencils_agree() {
    for n in [1, 2] {
        let (s, r) = edge_masses(n);
        let dense = pencil_extremes(&s, &r).unwrap();
        let lanczos = pencil_extremes_lanczos(&s, &r).unwrap();
        assert!((dense.lambda_min - lanczos.lambda_min).abs() <= 1e-8 * dense.lambda_min, "n={n}");
        assert!((dense.lambda_max - lanczos.lambda_max).abs() <= 1e-8 * dense.lambda_max, "n={n}");
        // the extremes bound every Rayleigh quotient of the pencil
        let sd = DenseMatrix::from_rows(&s.to_dense());
        for j in 0..s.nrows() {
            let e: Vec<f64> = (0..s.nrows()).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            let q = sd[(j, j)] / r.quadratic_form(&e);
            assert!(q >= dense.lambda_min - 1e-12 && q <= dense.lambda_max + 1e-12);
        }
    }
}

#[test]
fn pencil_rejects_bad_input() {
    let (m, r) = edge_masses(1);
    assert!(pencil_extremes(&m.map(|v| -v), &r).is_err());
    let (big, _) = edge_masses(2);
    assert_eq!(pencil_extremes(&big, &r).unwrap_err().kind(), "mismatch");
}

#[test]
fn crime_norm_of_exact_and_scaled_metrics() {
    let q3 = quadrature_rule(3, 2).unwrap();
    let (_, gt) = crime_setting::<f64>(TORUS, 1).unwrap();
    assert!(crime_norm(&gt, &gt, &q3).unwrap() < 1e-12);
    // edge mass weights scale like c^{1/2} in three dimensions and are invariant in two
    for c in [0.5, 2.0, 10.0] {
        let v = crime_norm(&gt.scaled(c), &gt, &q3).unwrap();
        assert!((v - (1.0 - c.sqrt()).abs()).abs() < 1e-10);
    }
    let (_, gs) = crime_setting::<f64>(CrimeGeometry::Sphere2, 1).unwrap();
    let q2 = quadrature_rule(2, 2).unwrap();
    assert!(crime_norm(&gs.scaled(3.0), &gs, &q2).unwrap() < 1e-12);
    assert!(crime_norm(&MetricField::flat(gs.complex().clone()), &gs, &q2).unwrap() > 1e-3);
}

#[test]
fn discrepancy_vanishes_without_crime_or_load() {
    let q2 = quadrature_rule(2, 2).unwrap();
    let (theta, gt) = crime_setting::<f64>(CrimeGeometry::Sphere2, 2).unwrap();
    let swirl = feec_core::hodge::manufactured_problem("swirl").unwrap().load;
    let load = PulledBack::new(gt.complex().clone(), theta, swirl).unwrap();
    assert!(data_transfer_discrepancy(&load, Transfer::L2Projection, &gt, &gt, &q2).unwrap() <= 1e-12);
    let zero = PulledBack::new(gt.complex().clone(), theta, FormField::zero(1)).unwrap();
    let flat = MetricField::flat(gt.complex().clone());
    for t in [Transfer::Interp, Transfer::L2Projection] {
        assert_eq!(data_transfer_discrepancy(&zero, t, &flat, &gt, &q2).unwrap(), 0.0);
    }
}

#[test]
fn discrepancy_decays_on_the_sphere() {
    let swirl = feec_core::hodge::manufactured_problem("swirl").unwrap().load;
    let q2 = quadrature_rule(2, 2).unwrap();
    for t in [Transfer::Interp, Transfer::L2Projection] {
        let d: Vec<f64> = (1..=3)
            .map(|l| {
                let (theta, gt) = crime_setting::<f64>(CrimeGeometry::Sphere2, l).unwrap();
                let load = PulledBack::new(gt.complex().clone(), theta, swirl.clone()).unwrap();
                data_transfer_discrepancy(&load, t, &MetricField::flat(gt.complex().clone()), &gt, &q2).unwrap()
            })
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{t:?}: {d:?}");
    }
}

#[test]
fn zero_crime_experiment() {
    for geometry in [CrimeGeometry::Sphere2, TORUS] {
        let report = run_crime_experiment::<f64>(&CrimeConfig::new(geometry, MetricApprox::Exact, 2).unwrap()).unwrap();
        for l in &report.levels {
            assert!(l.crime_norm <= 1e-9 && l.discrepancy <= 1e-9 && l.solution_gap <= 1e-9, "{l:?}");
        }
    }
}

#[test]
fn sphere_experiment_decays() {
    let report = run_crime_experiment::<f64>(&CrimeConfig::new(CrimeGeometry::Sphere2, MetricApprox::Flat, 3).unwrap()).unwrap();
    let gaps: Vec<f64> = report.levels.iter().map(|l| l.solution_gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let rates = report.crime_rates();
    assert!(rates[0].is_none());
    assert!((rates[2].unwrap() - 2.0).abs() < 0.3, "{rates:?}");
    let c1 = report.levels[0].bound_ratio().unwrap();
    for l in &report.levels {
        assert!(l.bound_ratio().unwrap() <= 2.0 * c1);
    }
    assert_eq!(report.gap_rates().len(), 3);
}

#[test]
fn unknown_names_are_rejected() {
    assert_eq!(MetricApprox::parse("warp").unwrap_err().kind(), "unknown_name");
    assert_eq!(Transfer::parse("exact").unwrap_err().kind(), "unknown_name");
    assert!(run_crime_experiment::<f64>(&CrimeConfig::new(TORUS, MetricApprox::Flat, 0).unwrap()).is_err());
    assert!(approximate_metric(&crime_setting::<f64>(TORUS, 1).unwrap().1, MetricApprox::Scaled(-1.0)).is_err());
}
