use std::sync::Arc;

use proptest::prelude::*;

use feec_core::approx::rate_table;
use feec_core::crime::pencil_extremes;
use feec_core::geometry::{mass_weight, quadrature_rule, ExactMetric, MetricField, ThetaMap};
use feec_core::linalg::SmallMat;
use feec_core::symbolic::{c, cos, sin, x, y, z, FormField};
use feec_core::whitney::{assemble_mass, canonical_interpolant, FESpace, PulledBack};
use feec_core::Complex;

/// Random SPD matrix `AᵀA + δI`.
fn spd(n: usize) -> impl Strategy<Value = SmallMat<f64>> {
    (prop::collection::vec(-1.0f64..1.0, n * n), 0.05f64..1.0).prop_map(move |(a, delta)| {
        let m = SmallMat::from_fn(n, n, |i, j| a[i * n + j]);
        let mut g = m.transpose().mul(&m);
        for i in 0..n {
            g[(i, i)] += delta;
        }
        g
    })
}

fn rel_close(a: &SmallMat<f64>, b: &SmallMat<f64>, tol: f64) -> bool {
    a.sub(b).max_abs() <= tol * b.max_abs().max(1e-300)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_scale_homogeneously(n in 2usize..=3, g in spd(3), scale in 0.1f64..20.0) {
        let g = SmallMat::from_fn(n, n, |i, j| g[(i, j)]);
        for k in 0..=n {
            let w = mass_weight(k, &g).unwrap();
            let ws = mass_weight(k, &g.scale(scale)).unwrap();
            let power = n as f64 / 2.0 - k as f64;
            prop_assert!(rel_close(&ws, &w.scale(scale.powf(power)), 1e-12), "n={n} k={k}");
        }
    }

    #[test]
    fn weight_determinants(g in spd(3)) {
        let det = g.det();
        let w1 = mass_weight(1, &g).unwrap();
        let w2 = mass_weight(2, &g).unwrap();
        prop_assert!((w1.det() - det.sqrt()).abs() <= 1e-10 * det.sqrt());
        prop_assert!((w2.det() - 1.0 / det.sqrt()).abs() <= 1e-10 / det.sqrt());
        // the edge and face weights are inverse to each other in three dimensions
        prop_assert!(rel_close(&w1.mul(&w2), &SmallMat::identity(3), 1e-10));
        let w0 = mass_weight(0, &g).unwrap()[(0, 0)];
        let w3 = mass_weight(3, &g).unwrap()[(0, 0)];
        prop_assert!((w0 * w3 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn weights_are_spd(g in spd(3)) {
        for k in 0..=3 {
            let w = mass_weight(k, &g).unwrap();
            prop_assert!(w.asymmetry() <= 1e-12 * w.max_abs());
            let (vals, _) = w.sym_eigen();
            prop_assert!(vals.as_slice().iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn rules_integrate_monomials(n in 1usize..=3, degree in 0usize..=30, seed in 0usize..1000) {
        let q = quadrature_rule::<f64>(n, degree).unwrap();
        // a random monomial of total degree at most `degree`
        let a = seed % (degree + 1);
        let b = if n >= 2 { (seed / 7) % (degree - a + 1) } else { 0 };
        let cexp = if n == 3 { (seed / 49) % (degree - a - b + 1) } else { 0 };
        let exact = factorial(a) * factorial(b) * factorial(cexp) / factorial(a + b + cexp + n);
        let got: f64 = q.iter().map(|(p, w)| {
            let mut v = w * p[0].powi(a as i32);
            if n >= 2 { v *= p[1].powi(b as i32); }
            if n == 3 { v *= p[2].powi(cexp as i32); }
            v
        }).sum();
        prop_assert!((got - exact).abs() <= 1e-12 * exact, "n={n} degree={degree} ({a},{b},{cexp}): {got} vs {exact}");
    }

    #[test]
    fn rates_recover_geometric_decay(e0 in 1e-6f64..1e3, r in 0.1f64..4.0, len in 2usize..6) {
        let errs: Vec<f64> = (0..len).map(|l| e0 * 2f64.powf(-r * l as f64)).collect();
        for rate in rate_table(&errs) {
            prop_assert!((rate.unwrap() - r).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_pencils_have_exact_crime(scale in 0.05f64..20.0) {
        let cx = Arc::new(Complex::torus3(1).unwrap());
        let metric = MetricField::pullback(cx.clone(), ThetaMap::Identity, ExactMetric::Perturbed { eps: 0.3 });
        let space = FESpace::new(cx, 1).unwrap();
        let m = assemble_mass(&space, &metric, &quadrature_rule(3, 2).unwrap()).unwrap();
        let p = pencil_extremes(&m.map(|v| v * scale), &m).unwrap();
        prop_assert!(p.crime_norm() >= 0.0);
        prop_assert!((p.crime_norm() - (1.0 - scale).abs()).abs() <= 1e-10);
    }

    #[test]
    fn interpolant_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let cx = Arc::new(Complex::torus3(2).unwrap());
        let space = FESpace::new(cx.clone(), 1).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let f = FormField::vector(1, [sin(tau * y()), c(1.0), cos(tau * x())]);
        let g = FormField::vector(1, [c(0.0), sin(tau * z()), c(-2.0)]);
        let pull = |h: FormField| PulledBack::new(cx.clone(), ThetaMap::Identity, h).unwrap();
        let combined = canonical_interpolant(&space, &pull(f.scale(a).add(&g.scale(b)))).unwrap();
        let fi = canonical_interpolant(&space, &pull(f)).unwrap();
        let gi = canonical_interpolant(&space, &pull(g)).unwrap();
        for i in 0..space.dim() {
            prop_assert!((combined[i] - (a * fi[i] + b * gi[i])).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn boundary_of_boundary_vanishes(n in 1usize..=4, level in 0usize..=2) {
        let t = Complex::torus3(n).unwrap();
        for k in 2..=3 {
            let dd = t.boundary_operator(k - 1).unwrap().matmul(&t.boundary_operator(k).unwrap());
            prop_assert_eq!(dd.nnz(), 0);
        }
        let s = Complex::icosphere(level);
        let dd = s.boundary_operator(1).unwrap().matmul(&s.boundary_operator(2).unwrap());
        prop_assert_eq!(dd.nnz(), 0);
        prop_assert_eq!(s.euler_characteristic(), 2);
        prop_assert_eq!(t.euler_characteristic(), 0);
    }
}

#[test]
fn assembly_is_identical_across_thread_counts() {
    let cx = Arc::new(Complex::torus3(4).unwrap());
    let metric = MetricField::pullback(cx.clone(), ThetaMap::Identity, ExactMetric::Perturbed { eps: 0.3 });
    let space = FESpace::new(cx, 1).unwrap();
    let q = quadrature_rule(3, 2).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| assemble_mass(&space, &metric, &q).unwrap())
    };
    let bits = |m: &feec_core::linalg::SparseOperator<f64>| m.triplets().map(|(r, c, v)| (r, c, v.to_bits())).collect::<Vec<_>>();
    let reference = bits(&run(1));
    for threads in [2, 8] {
        assert_eq!(bits(&run(threads)), reference);
    }
}
