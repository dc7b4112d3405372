use std::collections::BTreeSet;

use feec_core::linalg::integer_rank;
use feec_core::mesh::{GeometryKind, SimplicialComplex};
use feec_core::Complex;

/// Counts translation classes of Kuhn sub-simplices by brute force: a
/// simplex is keyed by its lexicographically smallest vertex reduced modulo
/// the lattice and the sorted offsets of the others from it.
fn brute_force_torus_counts(m: i64) -> Vec<usize> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut classes: Vec<BTreeSet<(Vec<i64>, Vec<Vec<i64>>)>> = vec![BTreeSet::new(); 4];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for perm in perms {
                    let mut p = vec![i, j, k];
                    let mut verts = vec![p.clone()];
                    for a in perm {
                        p[a] += 1;
                        verts.push(p.clone());
                    }
                    for mask in 1u32..16 {
                        let mut sub: Vec<Vec<i64>> = (0..4).filter(|b| mask & (1 << b) != 0).map(|b| verts[b].clone()).collect();
                        sub.sort();
                        let base = sub[0].clone();
                        let offs: Vec<Vec<i64>> = sub[1..].iter().map(|v| v.iter().zip(&base).map(|(a, b)| a - b).collect()).collect();
                        let key = base.iter().map(|v| v.rem_euclid(m)).collect();
                        classes[mask.count_ones() as usize - 1].insert((key, offs));
                    }
                }
            }
        }
    }
    classes.iter().map(BTreeSet::len).collect()
}

fn complexes() -> Vec<Complex> {
    let mut v: Vec<Complex> = (1..=3).map(|n| SimplicialComplex::torus3(n).unwrap()).collect();
    v.extend((0..=3).map(SimplicialComplex::icosphere));
    v
}

#[test]
fn torus_counts_match_brute_force_enumeration() {
    for m in 1..=3 {
        let t = Complex::torus3(m as usize).unwrap();
        assert_eq!(t.counts(), brute_force_torus_counts(m), "subdivisions {m}");
    }
    assert_eq!(Complex::torus3(1).unwrap().counts(), vec![1, 7, 12, 6]);
    assert_eq!(Complex::torus3(2).unwrap().num_cells(), 48);
    assert!(Complex::torus3(0).is_err());
}

#[test]
fn icosphere_counts_and_radius() {
    let s = Complex::icosphere(0);
    assert_eq!(s.counts(), vec![12, 30, 20]);
    for level in 0..=3 {
        let s = Complex::icosphere(level);
        assert_eq!(s.num_cells(), 20 * 4usize.pow(level as u32));
        assert_eq!(s.euler_characteristic(), 2);
        let dev = s.vertex_coordinates().unwrap().iter().map(|p| ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-14, "level {level}: {dev:e}");
    }
}

#[test]
fn boundary_of_boundary_vanishes_exactly() {
    for c in complexes() {
        for k in 2..=c.dim() {
            let dd = c.boundary_operator(k - 1).unwrap().matmul(&c.boundary_operator(k).unwrap());
            assert_eq!(dd.nnz(), 0, "{} k={k}", c.geometry().name());
        }
    }
}

#[test]
fn closed_manifold_face_pairing() {
    for c in complexes() {
        let n = c.dim();
        let star = c.simplex_star(n - 1);
        let locals = feec_core::mesh::local_subsimplices(n, n - 1);
        for (f, cells) in star.iter().enumerate() {
            assert_eq!(cells.len(), 2, "face {f}");
            let induced: i32 = cells
                .iter()
                .map(|&(cell, l)| {
                    // local face l omits exactly one local vertex i; sign (-1)^i
                    let omitted = (0..=n).find(|v| !locals[l].contains(v)).unwrap();
                    let sign = if omitted % 2 == 0 { 1 } else { -1 };
                    sign * c.orientation(cell) as i32
                })
                .sum();
            assert_eq!(induced, 0, "{} face {f}", c.geometry().name());
        }
    }
}

#[test]
fn euler_characteristic_by_geometry() {
    for c in complexes() {
        let expected = match c.geometry() {
            GeometryKind::Torus3 { .. } => 0,
            _ => 2,
        };
        assert_eq!(c.euler_characteristic(), expected);
    }
}

#[test]
fn torus_face_rows_have_two_cells() {
    let t = Complex::torus3(1).unwrap();
    let d3 = t.boundary_operator(3).unwrap();
    for r in 0..d3.nrows() {
        let s: i32 = d3.row(r).map(|(_, v)| v.abs()).sum();
        assert_eq!(s, 2);
    }
}

#[test]
fn single_tetrahedron_boundary() {
    let t = Complex::from_cells(3, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], &[vec![0, 1, 2, 3]]).unwrap();
    let d3 = t.boundary_operator(3).unwrap();
    assert_eq!(d3.transpose().row(0).count(), 4);
}

#[test]
fn refinement_matches_direct_construction() {
    let r = Complex::torus3(1).unwrap().refine_uniform();
    assert_eq!(r.counts(), Complex::torus3(2).unwrap().counts());
    assert_eq!(r.geometry(), GeometryKind::Torus3 { subdivisions: 2 });
    let s = Complex::icosphere(0).refine_uniform();
    assert_eq!(s.num_cells(), 80);
    assert_eq!(s.euler_characteristic(), 2);
    assert_eq!(s.counts(), Complex::icosphere(1).counts());
}

#[test]
fn refinement_halves_mesh_size() {
    for c in [Complex::torus3(1).unwrap(), Complex::torus3(2).unwrap(), Complex::icosphere(1), Complex::icosphere(2)] {
        let h0 = c.shape_regularity().unwrap().h;
        let h1 = c.refine_uniform().shape_regularity().unwrap().h;
        let ratio = h0 / h1;
        assert!((ratio - 2.0).abs() <= 0.2, "{}: ratio {ratio}", c.geometry().name());
    }
}

#[test]
fn shape_constants() {
    let reports: Vec<_> = (1..=3).map(|n| Complex::torus3(n).unwrap().shape_regularity().unwrap()).collect();
    for r in &reports[1..] {
        assert!((r.jacobian_bound - reports[0].jacobian_bound).abs() < 1e-12);
        assert!((r.inverse_jacobian_bound - reports[0].inverse_jacobian_bound).abs() < 1e-12);
        assert!((r.volume_ratio - 1.0).abs() < 1e-12);
    }
    let mut worst: f64 = 0.0;
    for level in 0..=3 {
        let r = Complex::icosphere(level).shape_regularity().unwrap();
        assert!(r.jacobian_bound.is_finite() && r.jacobian_bound > 0.0);
        assert!(r.inverse_jacobian_bound.is_finite() && r.inverse_jacobian_bound > 0.0);
        worst = worst.max(r.inverse_jacobian_bound);
    }
    assert!(worst < 3.0, "icosphere inverse Jacobian bound {worst}");
}

#[test]
fn derivative_ranks_give_torus_betti() {
    for m in 1..=2 {
        let t = Complex::torus3(m).unwrap();
        let dense = |k: usize| -> Vec<Vec<i64>> {
            t.boundary_operator(k).unwrap().transpose().to_dense().into_iter().map(|r| r.into_iter().map(i64::from).collect()).collect()
        };
        let r0 = integer_rank(&dense(1));
        let r1 = integer_rank(&dense(2));
        assert_eq!(r0, t.count(0) - 1);
        assert_eq!(t.count(1) - r1 - r0, 3, "subdivisions {m}");
    }
}

#[test]
fn dump_lists_every_simplex() {
    let t = Complex::torus3(1).unwrap();
    let mut buf = Vec::new();
    t.write_dump(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let simplex_lines = text.lines().filter(|l| !l.starts_with("chart")).count();
    assert_eq!(simplex_lines, 1 + 7 + 12 + 6);
    assert_eq!(text.lines().filter(|l| l.starts_with("chart")).count(), 6);
}
