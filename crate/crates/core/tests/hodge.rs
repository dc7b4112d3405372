use std::sync::Arc;

use feec_core::approx::{error_norms, BrokenField};
use feec_core::geometry::{quadrature_rule, ExactMetric, MetricField, ThetaMap};
use feec_core::hodge::{
    assemble_mixed, compute_harmonic_basis, harmonic_spectrum, load_norm, manufactured_problem, manufactured_residual, solve_mixed,
    solve_mixed_rhs, ComplexOperators, Deflation, ManufacturedProblem, HARMONIC_DENSE_LIMIT,
};
use feec_core::linalg::{Comps, SmallMat};
use feec_core::mesh::local_subsimplices;
use feec_core::symbolic::{c, FormField};
use feec_core::whitney::{assemble_load, canonical_interpolant, FESpace, FeField, PulledBack};
use feec_core::Complex;

fn torus(n: usize) -> Arc<Complex> {
    Arc::new(Complex::torus3(n).unwrap())
}

fn perturbed(cx: &Arc<Complex>) -> MetricField<f64> {
    MetricField::pullback(cx.clone(), ThetaMap::Identity, ExactMetric::Perturbed { eps: 0.3 })
}

fn q2() -> feec_core::geometry::QuadratureRule<f64> {
    quadrature_rule(3, 2).unwrap()
}

fn constant_form(axis: usize) -> FormField {
    let mut comps = [c(0.0), c(0.0), c(0.0)];
    comps[axis] = c(1.0);
    FormField::vector(1, comps)
}

#[test]
fn torus_has_three_harmonic_fields_for_any_metric() {
    let cx = torus(2);
    for metric in [MetricField::flat(cx.clone()), perturbed(&cx)] {
        let ops = ComplexOperators::assemble(&metric, &q2()).unwrap();
        let vals = harmonic_spectrum(&ops, 5).unwrap();
        assert!(vals[2] <= 1e-10 * vals[3], "{vals:?}");
        assert!(vals[3] > 1e-10 * vals[4]);
    }
}

#[test]
fn sphere_has_no_harmonic_fields() {
    let cx = Arc::new(Complex::icosphere(1));
    let metric = MetricField::pullback(cx.clone(), ThetaMap::RadialProjection, ExactMetric::Euclidean);
    let ops = ComplexOperators::assemble(&metric, &quadrature_rule(2, 2).unwrap()).unwrap();
    let vals = harmonic_spectrum(&ops, 2).unwrap();
    assert!(vals[0] > 1e-10 * vals[1], "{vals:?}");
    assert!(compute_harmonic_basis(&ops, 0).unwrap().is_empty());
}

#[test]
fn declared_betti_number_is_checked() {
    let cx = torus(2);
    let ops = ComplexOperators::assemble(&MetricField::flat(cx), &q2()).unwrap();
    for wrong in [2, 4] {
        let err = compute_harmonic_basis(&ops, wrong).unwrap_err();
        assert_eq!(err.kind(), "betti_mismatch");
    }
}

fn assert_orthonormal(ops: &ComplexOperators<f64>, vectors: &[Vec<f64>]) {
    for (i, a) in vectors.iter().enumerate() {
        let ma = ops.m1.mul_vec(a);
        for (j, b) in vectors.iter().enumerate() {
            let g: f64 = ma.iter().zip(b).map(|(x, y)| x * y).sum();
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((g - e).abs() < 1e-10, "gram ({i},{j}) = {g}");
        }
    }
}

/// Relative `M¹` distance of the constant coordinate forms from the span of the basis.
fn constant_forms_residual(ops: &ComplexOperators<f64>, vectors: &[Vec<f64>], cx: &Arc<Complex>) -> f64 {
    let mut worst: f64 = 0.0;
    for axis in 0..3 {
        let f = PulledBack::new(cx.clone(), ThetaMap::Identity, constant_form(axis)).unwrap();
        let v = canonical_interpolant(&ops.spaces[1], &f).unwrap();
        let mv = ops.m1.mul_vec(&v);
        let mut r = v.clone();
        for h in vectors {
            let coef: f64 = h.iter().zip(&mv).map(|(a, b)| a * b).sum();
            for (ri, hi) in r.iter_mut().zip(h) {
                *ri -= coef * hi;
            }
        }
        worst = worst.max((ops.m1.quadratic_form(&r) / ops.m1.quadratic_form(&v)).sqrt());
    }
    worst
}

#[test]
fn harmonic_space_contains_constant_forms() {
    let cx = torus(2);
    let ops = ComplexOperators::assemble(&MetricField::flat(cx.clone()), &q2()).unwrap();
    let basis = compute_harmonic_basis(&ops, 3).unwrap();
    assert_eq!(basis.len(), 3);
    assert_orthonormal(&ops, &basis.vectors);
    assert!(constant_forms_residual(&ops, &basis.vectors, &cx) < 1e-8);
}

#[test]
fn large_torus_generators_are_harmonic() {
    let cx = torus(8);
    for metric in [MetricField::flat(cx.clone()), perturbed(&cx)] {
        let ops = ComplexOperators::assemble(&metric, &q2()).unwrap();
        assert!(ops.n_edges() > HARMONIC_DENSE_LIMIT);
        let basis = compute_harmonic_basis(&ops, 3).unwrap();
        assert_eq!(basis.len(), 3);
        assert_orthonormal(&ops, &basis.vectors);
        for h in &basis.vectors {
            let lh = ops.apply_laplacian(h).unwrap();
            let q: f64 = h.iter().zip(&lh).map(|(a, b)| a * b).sum();
            assert!(q.abs() < 1e-9, "Rayleigh quotient {q}");
        }
    }
    let ops = ComplexOperators::assemble(&MetricField::flat(cx.clone()), &q2()).unwrap();
    let basis = compute_harmonic_basis(&ops, 3).unwrap();
    assert!(constant_forms_residual(&ops, &basis.vectors, &cx) < 1e-8);
}

#[test]
fn block_matrix_is_symmetric() {
    let cx = torus(2);
    for metric in [MetricField::flat(cx.clone()), perturbed(&cx)] {
        let sys = assemble_mixed(&metric, &q2(), Deflation::Enabled).unwrap();
        let k = sys.block_matrix();
        let n = sys.ops.n_edges() + sys.ops.n_vertices() + 3;
        assert_eq!(k.nrows(), n);
        assert!(k.check_symmetric(1e-13));
    }
}

/// Curl-curl stiffness from `curl(λ_a∇λ_b − λ_b∇λ_a) = 2 ∇λ_a × ∇λ_b`.
fn curl_curl_oracle(cx: &Complex) -> Vec<Vec<f64>> {
    let ne = cx.count(1);
    let mut a = vec![vec![0.0; ne]; ne];
    let locals = local_subsimplices(3, 1);
    for cell in 0..cx.num_cells() {
        let chart = cx.chart(cell);
        let jac = SmallMat::from_columns(&[1, 2, 3].map(|i| [0, 1, 2].map(|d| chart[i][d] - chart[0][d])));
        let vol = jac.det().abs() / 6.0;
        let jinv_t = jac.inverse().unwrap().transpose();
        let mut grads = vec![jinv_t.mul_comps(&Comps::from_slice(&[-1.0, -1.0, -1.0]))];
        for i in 0..3 {
            let mut e = Comps::zeros(3);
            e[i] = 1.0;
            grads.push(jinv_t.mul_comps(&e));
        }
        let g3 = |v: &Comps<f64>| [v[0], v[1], v[2]];
        let curls: Vec<[f64; 3]> = locals
            .iter()
            .map(|e| {
                let (p, q) = (g3(&grads[e[0]]), g3(&grads[e[1]]));
                [2.0 * (p[1] * q[2] - p[2] * q[1]), 2.0 * (p[2] * q[0] - p[0] * q[2]), 2.0 * (p[0] * q[1] - p[1] * q[0])]
            })
            .collect();
        let edges = cx.cell_simplices(1, cell);
        for i in 0..locals.len() {
            for j in 0..locals.len() {
                let d: f64 = (0..3).map(|k| curls[i][k] * curls[j][k]).sum();
                a[edges[i]][edges[j]] += vol * d;
            }
        }
    }
    a
}

#[test]
fn curl_curl_block_matches_oracle() {
    for cx in [torus(1), torus(2)] {
        let ops = ComplexOperators::assemble(&MetricField::flat(cx.clone()), &q2()).unwrap();
        let oracle = curl_curl_oracle(&cx);
        for (i, row) in oracle.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((ops.a.get(i, j) - v).abs() < 1e-12, "({i},{j}) {} vs {v}", ops.a.get(i, j));
            }
        }
    }
}

#[test]
fn zero_load_gives_zero_solution() {
    let cx = torus(2);
    let sys = assemble_mixed(&perturbed(&cx), &q2(), Deflation::Enabled).unwrap();
    let sol = solve_mixed_rhs(&sys, &vec![0.0; sys.ops.n_edges()]).unwrap();
    assert!(sol.u.iter().chain(&sol.z).chain(&sol.p).all(|v| *v == 0.0));
}

#[test]
fn gradient_loads_are_absorbed_by_the_multiplier() {
    // torus3(1) has one vertex, so its only discrete gradient is zero
    let one = assemble_mixed(&MetricField::flat(torus(1)), &q2(), Deflation::Enabled).unwrap();
    assert_eq!(one.ops.n_vertices(), 1);
    assert!(one.ops.d0.mul_vec(&[1.0]).iter().all(|v| *v == 0.0));

    let cx = torus(2);
    for metric in [MetricField::flat(cx.clone()), perturbed(&cx)] {
        let sys = assemble_mixed(&metric, &q2(), Deflation::Enabled).unwrap();
        let phi: Vec<f64> = (0..sys.ops.n_vertices()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let f = sys.ops.d0.mul_vec(&phi);
        let r = sys.ops.m1.mul_vec(&f);
        let sol = solve_mixed_rhs(&sys, &r).unwrap();
        let energy = sys.ops.a.quadratic_form(&sol.u);
        let f2 = sys.ops.m1.quadratic_form(&f);
        assert!(energy <= 1e-16 * f2, "curl energy {energy} vs load {f2}");
        assert!(sol.relative_residual <= 1e-10);
    }
}

#[test]
fn harmonic_load_is_captured_by_the_multipliers() {
    let cx = torus(2);
    let metric = MetricField::flat(cx.clone());
    let sys = assemble_mixed(&metric, &q2(), Deflation::Enabled).unwrap();
    let p = manufactured_problem("harmonic").unwrap();
    let load = PulledBack::new(cx.clone(), ThetaMap::Identity, p.load.clone()).unwrap();
    let sol = solve_mixed(&sys, &load).unwrap();
    let umax = sol.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zmax = sol.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(umax <= 1e-9 && zmax <= 1e-9, "u {umax} z {zmax}");
    // H p reproduces the interpolant of the constant load
    let h = sys.harmonic.as_ref().unwrap();
    let hp = h.combine(&sol.p, sys.ops.n_edges());
    let target = canonical_interpolant(&sys.ops.spaces[1], &load).unwrap();
    for (a, b) in hp.iter().zip(&target) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn missing_harmonic_block_is_reported() {
    let cx = torus(2);
    let sys = assemble_mixed(&MetricField::flat(cx), &q2(), Deflation::Disabled).unwrap();
    let err = solve_mixed_rhs(&sys, &vec![1.0; sys.ops.n_edges()]).unwrap_err();
    assert_eq!(err.kind(), "harmonic_block_missing");
    assert!(err.to_string().contains("deflation"));

    let sphere = Arc::new(Complex::icosphere(1));
    let metric = MetricField::pullback(sphere.clone(), ThetaMap::RadialProjection, ExactMetric::Euclidean);
    let sys = assemble_mixed(&metric, &quadrature_rule(2, 2).unwrap(), Deflation::Disabled).unwrap();
    let p = manufactured_problem("swirl").unwrap();
    let load = PulledBack::new(sphere, ThetaMap::RadialProjection, p.load).unwrap();
    assert!(solve_mixed(&sys, &load).unwrap().relative_residual <= 1e-10);
}

#[test]
fn solution_scales_with_constant_metric_factor() {
    // W₁ ∝ c^{1/2}, W₂ ∝ c^{-1/2}, W₀ ∝ c^{3/2}: for a fixed 1-form load
    // u ↦ c u, z ↦ z and M¹H p ↦ c^{1/2} M¹H p.
    let cx = torus(2);
    let base = perturbed(&cx);
    let p = manufactured_problem("sines").unwrap();
    let load = PulledBack::new(cx.clone(), ThetaMap::Identity, p.load.add(&FormField::vector(1, [c(1.0), c(0.5), c(-2.0)]))).unwrap();
    let sys = assemble_mixed(&base, &q2(), Deflation::Enabled).unwrap();
    let sol = solve_mixed(&sys, &load).unwrap();
    let hp = |s: &feec_core::hodge::MixedSystem<f64>, p: &[f64]| s.ops.m1.mul_vec(&s.harmonic.as_ref().unwrap().combine(p, s.ops.n_edges()));
    let base_hp = hp(&sys, &sol.p);
    let umax = sol.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zmax = sol.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let hmax = base_hp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for scale in [0.5, 2.0, 10.0] {
        let s2 = assemble_mixed(&base.scaled(scale), &q2(), Deflation::Enabled).unwrap();
        let sol2 = solve_mixed(&s2, &load).unwrap();
        for (a, b) in sol2.u.iter().zip(&sol.u) {
            assert!((a - scale * b).abs() <= 1e-9 * scale * umax);
        }
        for (a, b) in sol2.z.iter().zip(&sol.z) {
            assert!((a - b).abs() <= 1e-9 * zmax);
        }
        for (a, b) in hp(&s2, &sol2.p).iter().zip(&base_hp) {
            assert!((a - scale.sqrt() * b).abs() <= 1e-9 * scale.sqrt() * hmax);
        }
        let pn: f64 = sol.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pn2: f64 = sol2.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((pn2 - scale.powf(0.25) * pn).abs() <= 1e-9 * pn.max(1e-300) * scale.powf(0.25));
    }
}

/// Residual of the discrete equations tested against the exact solution:
/// `a(U − u_h, v) + b(ζ − z_h, v) = 0` and `(U − u_h, dτ) − (ζ − z_h, τ) = 0`.
#[test]
fn galerkin_orthogonality_for_manufactured_solution() {
    let cx = torus(2);
    let metric = MetricField::flat(cx.clone());
    let sys = assemble_mixed(&metric, &q2(), Deflation::Enabled).unwrap();
    let quad = quadrature_rule(3, 24).unwrap();
    for name in ["sines", "gradient"] {
        let p = manufactured_problem(name).unwrap();
        let pull = |f: &FormField| PulledBack::new(cx.clone(), ThetaMap::Identity, f.clone()).unwrap();
        let (u, zeta) = (p.u.clone().unwrap(), p.zeta.clone().unwrap());
        let r = assemble_load(&sys.ops.spaces[1], &metric, &pull(&p.load), &quad).unwrap();
        let sol = solve_mixed_rhs(&sys, &r).unwrap();
        let s2 = FESpace::new(cx.clone(), 2).unwrap();
        let curl_moments = assemble_load(&s2, &metric, &pull(&u.d()), &quad).unwrap();
        let a_exact = sys.ops.d1.transpose().mul_vec(&curl_moments);
        let b_exact = assemble_load(&sys.ops.spaces[1], &metric, &pull(&zeta.d()), &quad).unwrap();
        let au = sys.ops.a.mul_vec(&sol.u);
        let bz = sys.ops.b.mul_vec(&sol.z);
        let m1hp = sys.ops.m1.mul_vec(&sys.harmonic.as_ref().unwrap().combine(&sol.p, sys.ops.n_edges()));
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let first: f64 = (0..r.len()).map(|i| (a_exact[i] + b_exact[i] - au[i] - bz[i] - m1hp[i]).powi(2)).sum::<f64>().sqrt();
        assert!(first <= 1e-9 * rn, "{name}: first equation {first} vs {rn}");

        let u_moments = assemble_load(&sys.ops.spaces[1], &metric, &pull(&u), &quad).unwrap();
        let z_moments = assemble_load(&sys.ops.spaces[0], &metric, &pull(&zeta), &quad).unwrap();
        let exact2: Vec<f64> = sys.ops.d0.transpose().mul_vec(&u_moments).iter().zip(&z_moments).map(|(a, b)| a - b).collect();
        let mut btu = vec![0.0; sys.ops.n_vertices()];
        sys.ops.b.apply_transpose(&sol.u, &mut btu);
        let m0z = sys.ops.m0.mul_vec(&sol.z);
        let second: f64 = (0..btu.len()).map(|i| (exact2[i] - (btu[i] - m0z[i])).powi(2)).sum::<f64>().sqrt();
        assert!(second <= 1e-9 * rn, "{name}: second equation {second}");
    }
}

#[test]
fn manufactured_catalog_verifies_itself() {
    for name in feec_core::hodge::PROBLEMS {
        let p = manufactured_problem(name).unwrap();
        assert!(manufactured_residual(&p, 1000, 7) <= 1e-10);
    }
    assert_eq!(manufactured_problem("warp").unwrap_err().kind(), "unknown_name");
}

fn galerkin_errors(p: &ManufacturedProblem, n: usize) -> (f64, f64, f64) {
    let cx = torus(n);
    let metric = MetricField::flat(cx.clone());
    let sys = assemble_mixed(&metric, &q2(), Deflation::Enabled).unwrap();
    let load = BrokenField::smooth(cx.clone(), ThetaMap::Identity, p.load.clone()).unwrap();
    let sol = solve_mixed(&sys, &load).unwrap();
    let u = BrokenField::smooth(cx.clone(), ThetaMap::Identity, p.u.clone().unwrap()).unwrap();
    let q5 = quadrature_rule(3, 5).unwrap();
    let e = error_norms(&metric, &FeField::new(&sys.ops.spaces[1], &sol.u).unwrap(), &u, None, &q5).unwrap();
    (e.hcurl, sol.stability_ratio(load_norm(&metric, &load).unwrap()), sol.relative_residual)
}

#[test]
fn manufactured_errors_decrease() {
    let p = manufactured_problem("sines").unwrap();
    let rows: Vec<_> = [2, 4, 8].iter().map(|&n| galerkin_errors(&p, n)).collect();
    for w in rows.windows(2) {
        assert!(w[1].0 < w[0].0);
    }
    let rate = (rows[1].0 / rows[2].0).log2();
    assert!((rate - 1.0).abs() < 0.15, "rate {rate}");
    assert!(rows.iter().all(|r| r.2 <= 1e-10));
}
