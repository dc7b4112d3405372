use std::f64::consts::PI;
use std::sync::Arc;

use feec_core::approx::rate_table;
use feec_core::geometry::{
    quadrature_rule, total_volume, ExactMetric, InterpolationScheme, MetricField, Smoothness, ThetaMap,
};
use feec_core::linalg::SmallMat;
use feec_core::Complex;

fn perturbed_torus(level: usize) -> MetricField<f64> {
    let cx = Arc::new(Complex::torus3(1 << level).unwrap());
    MetricField::pullback(cx, ThetaMap::Identity, ExactMetric::Perturbed { eps: 0.3 })
}

fn round_sphere(level: usize) -> MetricField<f64> {
    let cx = Arc::new(Complex::icosphere(level));
    MetricField::pullback(cx, ThetaMap::RadialProjection, ExactMetric::Euclidean)
}

#[test]
fn flat_torus_has_unit_volume() {
    for n in [1, 2, 4] {
        let cx = Arc::new(Complex::torus3(n).unwrap());
        for metric in [MetricField::flat(cx.clone()), MetricField::pullback(cx, ThetaMap::Identity, ExactMetric::Euclidean)] {
            let v = total_volume(&metric, &quadrature_rule(3, 1).unwrap()).unwrap();
            assert!((v - 1.0).abs() <= 1e-12, "{v}");
        }
    }
}

#[test]
fn pulled_back_sphere_area_is_exact_up_to_quadrature() {
    let q = quadrature_rule(2, 20).unwrap();
    for level in 0..=3 {
        let area = total_volume(&round_sphere(level), &q).unwrap();
        assert!((area - 4.0 * PI).abs() <= 1e-10, "level {level}: {area}");
    }
}

#[test]
fn sphere_area_converges_at_second_order_with_centroid_rule() {
    let q = quadrature_rule(2, 1).unwrap();
    let errs: Vec<f64> = (1..=4).map(|l| (total_volume(&round_sphere(l), &q).unwrap() - 4.0 * PI).abs()).collect();
    for rate in rate_table(&errs).into_iter().skip(1) {
        assert!((rate.unwrap() - 2.0).abs() <= 0.3, "{errs:?}");
    }
}

#[test]
fn flat_icosphere_underestimates_area_at_second_order() {
    let q = quadrature_rule(2, 1).unwrap();
    let deficit: Vec<f64> = (1..=4)
        .map(|l| 4.0 * PI - total_volume(&MetricField::flat(Arc::new(Complex::icosphere(l))), &q).unwrap())
        .collect();
    assert!(deficit.iter().all(|d| *d > 0.0));
    for rate in rate_table(&deficit).into_iter().skip(1) {
        assert!((rate.unwrap() - 2.0).abs() <= 0.3, "{deficit:?}");
    }
}

#[test]
fn torus_pullback_is_constant_chart_gram() {
    let cx = Arc::new(Complex::torus3(2).unwrap());
    let metric = MetricField::pullback(cx.clone(), ThetaMap::Identity, ExactMetric::Euclidean);
    let q = quadrature_rule::<f64>(3, 3).unwrap();
    for cell in 0..cx.num_cells() {
        let j = cx.affine_jacobian(cell);
        let gram = j.transpose().mul(&j);
        for (p, _) in q.iter() {
            assert!(metric.eval(cell, p).sub(&gram).max_abs() <= 1e-14);
        }
    }
}

#[test]
fn orthogonal_change_of_target_leaves_pullback_unchanged() {
    let cx = Complex::icosphere(1);
    let (a, b) = (0.7f64, -1.3f64);
    let rz = SmallMat::from_fn(3, 3, |i, j| match (i, j) {
        (0, 0) | (1, 1) => a.cos(),
        (0, 1) => -a.sin(),
        (1, 0) => a.sin(),
        (2, 2) => 1.0,
        _ => 0.0,
    });
    let rx = SmallMat::from_fn(3, 3, |i, j| match (i, j) {
        (1, 1) | (2, 2) => b.cos(),
        (1, 2) => -b.sin(),
        (2, 1) => b.sin(),
        (0, 0) => 1.0,
        _ => 0.0,
    });
    let rot = rz.mul(&rx);
    let q = quadrature_rule::<f64>(2, 4).unwrap();
    for cell in 0..cx.num_cells() {
        for (p, _) in q.iter() {
            let j = ThetaMap::RadialProjection.jacobian(&cx, cell, p);
            let qj = rot.mul(&j);
            let g = j.transpose().mul(&j);
            assert!(qj.transpose().mul(&qj).sub(&g).max_abs() <= 1e-14);
        }
    }
}

#[test]
fn metric_evaluations_are_symmetric_positive_definite() {
    let metric = perturbed_torus(1);
    let q = quadrature_rule::<f64>(3, 4).unwrap();
    for cell in 0..metric.complex().num_cells() {
        for (p, _) in q.iter() {
            let g = metric.eval(cell, p);
            assert!(g.asymmetry() <= 1e-14 * g.max_abs());
            let (vals, _) = g.sym_eigen();
            assert!(vals.as_slice().iter().all(|v| *v > 0.0));
        }
    }
}

#[test]
fn piecewise_constant_interpolation_is_idempotent() {
    let once = perturbed_torus(1).interpolate(InterpolationScheme::PiecewiseConstant).unwrap();
    assert_eq!(once.smoothness(), Smoothness::PiecewiseConstant);
    let twice = once.interpolate(InterpolationScheme::PiecewiseConstant).unwrap();
    let q = quadrature_rule::<f64>(3, 2).unwrap();
    for cell in 0..once.complex().num_cells() {
        for (p, _) in q.iter() {
            assert_eq!(once.eval(cell, p).sub(&twice.eval(cell, p)).max_abs(), 0.0);
        }
    }
}

#[test]
fn identity_metric_interpolates_to_identity() {
    let cx = Arc::new(Complex::torus3(2).unwrap());
    let flat = MetricField::flat(cx.clone());
    let q = quadrature_rule::<f64>(3, 2).unwrap();
    for scheme in [InterpolationScheme::PiecewiseConstant, InterpolationScheme::PiecewiseLinear] {
        let gh = flat.interpolate(scheme).unwrap();
        for cell in 0..cx.num_cells() {
            for (p, _) in q.iter() {
                let j = cx.affine_jacobian(cell);
                assert!(gh.eval(cell, p).sub(&j.transpose().mul(&j)).max_abs() <= 1e-14);
            }
        }
    }
}

/// Largest deviation at quadrature points, relative to the size of the
/// pulled back metric on the same cell.
fn relative_deviation(scheme: InterpolationScheme, level: usize) -> f64 {
    let g = perturbed_torus(level);
    let gh = g.interpolate(scheme).unwrap();
    let q = quadrature_rule::<f64>(3, 5).unwrap();
    let mut worst: f64 = 0.0;
    for cell in 0..g.complex().num_cells() {
        for (p, _) in q.iter() {
            let exact = g.eval(cell, p);
            worst = worst.max(exact.sub(&gh.eval(cell, p)).max_abs() / exact.max_abs());
        }
    }
    worst
}

#[test]
fn interpolated_metrics_converge_at_expected_orders() {
    for (scheme, order) in [(InterpolationScheme::PiecewiseConstant, 1.0), (InterpolationScheme::PiecewiseLinear, 2.0)] {
        let devs: Vec<f64> = (1..=4).map(|l| relative_deviation(scheme, l)).collect();
        let last = rate_table(&devs).last().copied().flatten().unwrap();
        assert!(last >= order - 0.2, "{scheme:?}: {devs:?}");
    }
}

#[test]
fn quadrature_examples() {
    let centroid = quadrature_rule::<f64>(3, 1).unwrap();
    assert_eq!(centroid.len(), 1);
    assert!((centroid.weights()[0] - 1.0 / 6.0).abs() <= 1e-15);
    assert!(centroid.points()[0].iter().all(|c| (c - 0.25).abs() <= 1e-15));
    let tri = quadrature_rule::<f64>(2, 4).unwrap();
    assert!((tri.weights().iter().sum::<f64>() - 0.5).abs() <= 1e-15);
    assert!(quadrature_rule::<f64>(3, 31).is_err());
    assert!(quadrature_rule::<f64>(4, 2).is_err());
}
