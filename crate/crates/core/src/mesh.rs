//! Oriented simplicial complexes for closed manifolds.
//!
//! Every simplex stores its vertices in a canonical order and every top
//! cell stores its vertices in that same order, so each local sub-simplex
//! of a cell is the canonical ordering of the corresponding global simplex
//! and all local-to-global orientation signs are `+1`.
//!
//! Two identification schemes are supported:
//! * vertex-indexed complexes (icosphere, hand-built meshes), where a
//!   simplex is its ascending tuple of global vertex indices;
//! * the periodic Kuhn triangulation of the 3-torus, where a simplex is a
//!   chain of lattice points taken modulo lattice translations. This keeps
//!   distinct edges distinct even when their endpoints coincide after
//!   identification (one or two subdivisions per axis).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use crate::error::{FeecError, Result};
use crate::linalg::{CooBuilder, SmallMat, SparseOperator};
use crate::scalar::Real;

/// Which construction produced a complex. Refinement dispatches on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryKind {
    /// Periodic unit cube with `subdivisions` cells per axis.
    Torus3 { subdivisions: usize },
    /// Icosahedron refined `level` times, vertices on the unit sphere.
    Sphere2 { level: usize },
    /// Hand-built vertex-indexed complex (may have boundary).
    Custom,
}

impl GeometryKind {
    /// Declared Betti numbers `b_0..b_n`, when known.
    pub fn betti(&self) -> Option<Vec<usize>> {
        match self {
            GeometryKind::Torus3 { .. } => Some(vec![1, 3, 3, 1]),
            GeometryKind::Sphere2 { .. } => Some(vec![1, 0, 1]),
            GeometryKind::Custom => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeometryKind::Torus3 { .. } => "torus3",
            GeometryKind::Sphere2 { .. } => "sphere2",
            GeometryKind::Custom => "custom",
        }
    }
}

/// All `(k+1)`-subsets of `0..=n` in lexicographic order. This is the
/// local numbering of the `k`-dimensional faces of an `n`-simplex.
pub fn local_subsimplices(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, end: usize, need: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if need == 0 {
            out.push(cur.clone());
            return;
        }
        for v in start..=end {
            if end + 1 - v < need {
                break;
            }
            cur.push(v);
            rec(v + 1, end, need - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k + 1, &mut Vec::new(), &mut out);
    out
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

type Token = Vec<i64>;

/// Oriented simplicial complex with per-cell affine charts into R³.
#[derive(Clone, Debug)]
pub struct SimplicialComplex<T> {
    dim: usize,
    geometry: GeometryKind,
    /// `simplices[k][s]`: global vertex indices in canonical order.
    simplices: Vec<Vec<Vec<usize>>>,
    /// `faces[k][s]`: for `k >= 1`, the `(k-1)`-faces obtained by deleting
    /// vertex `i` of the canonical order, with sign `(-1)^i`.
    faces: Vec<Vec<Vec<(usize, i8)>>>,
    /// `cell_simplices[k][cell * nloc + l]`: global index of local face `l`.
    cell_simplices: Vec<Vec<usize>>,
    /// `charts[cell][i]`: chart coordinates of local vertex `i`.
    charts: Vec<Vec<[T; 3]>>,
    /// `+1` if the canonical vertex order agrees with the manifold orientation.
    orientation: Vec<i8>,
    /// Lattice tokens per cell (torus only), kept for refinement.
    lattice: Option<Vec<Vec<[i64; 3]>>>,
    /// Vertex coordinates (vertex-indexed complexes only).
    vertex_coords: Option<Vec<[T; 3]>>,
}

impl<T: Real> SimplicialComplex<T> {
    fn assemble(
        dim: usize,
        geometry: GeometryKind,
        cells: &[Vec<Token>],
        normalize: &dyn Fn(&[Token]) -> Vec<Token>,
        charts: Vec<Vec<[T; 3]>>,
    ) -> Self {
        let locals: Vec<Vec<Vec<usize>>> = (0..=dim).map(|k| local_subsimplices(dim, k)).collect();
        let mut keysets: Vec<BTreeSet<Vec<Token>>> = vec![BTreeSet::new(); dim + 1];
        let sub_key = |cell: &[Token], local: &[usize]| -> Vec<Token> {
            let toks: Vec<Token> = local.iter().map(|&i| cell[i].clone()).collect();
            normalize(&toks)
        };
        for cell in cells {
            for k in 0..=dim {
                for local in &locals[k] {
                    keysets[k].insert(sub_key(cell, local));
                }
            }
        }
        let index: Vec<BTreeMap<Vec<Token>, usize>> =
            keysets.iter().map(|set| set.iter().cloned().enumerate().map(|(i, key)| (key, i)).collect()).collect();
        let vertex_of = |tok: &Token| -> usize { index[0][&normalize(std::slice::from_ref(tok))] };
        let simplices: Vec<Vec<Vec<usize>>> =
            keysets.iter().map(|set| set.iter().map(|key| key.iter().map(vertex_of).collect()).collect()).collect();
        let mut faces: Vec<Vec<Vec<(usize, i8)>>> = vec![Vec::new()];
        for k in 1..=dim {
            let f = keysets[k]
                .iter()
                .map(|key| {
                    (0..=k)
                        .map(|i| {
                            let mut face = key.clone();
                            face.remove(i);
                            let sign = if i % 2 == 0 { 1 } else { -1 };
                            (index[k - 1][&normalize(&face)], sign)
                        })
                        .collect()
                })
                .collect();
            faces.push(f);
        }
        let cell_simplices: Vec<Vec<usize>> = (0..=dim)
            .map(|k| {
                cells.iter().flat_map(|cell| locals[k].iter().map(|l| index[k][&sub_key(cell, l)]).collect::<Vec<_>>()).collect()
            })
            .collect();
        let mut complex = Self {
            dim,
            geometry,
            simplices,
            faces,
            cell_simplices,
            charts,
            orientation: Vec::new(),
            lattice: None,
            vertex_coords: None,
        };
        complex.orientation = (0..cells.len()).map(|c| complex.natural_orientation(c)).collect();
        complex
    }

    fn natural_orientation(&self, cell: usize) -> i8 {
        let j = self.affine_jacobian(cell);
        let s = if self.dim == 3 {
            j.det()
        } else {
            let n = crate::linalg::small::cross(j.column(0), j.column(1));
            match self.geometry {
                GeometryKind::Sphere2 { .. } => {
                    let c = self.cell_centroid(cell);
                    crate::linalg::small::dot3(n, c)
                }
                _ => n[2],
            }
        };
        if s < T::zero() {
            -1
        } else {
            1
        }
    }

    fn from_lattice_cells(subdivisions: usize, cells: Vec<Vec<[i64; 3]>>) -> Self {
        let m = subdivisions as i64;
        let normalize = move |toks: &[Token]| -> Vec<Token> {
            let shift: Vec<i64> = toks[0].iter().map(|&v| v.div_euclid(m) * m).collect();
            toks.iter().map(|t| t.iter().zip(&shift).map(|(a, s)| a - s).collect()).collect()
        };
        let tokens: Vec<Vec<Token>> = cells.iter().map(|c| c.iter().map(|p| p.to_vec()).collect()).collect();
        let scale = T::one() / T::from_usize_lossy(subdivisions);
        let charts = cells
            .iter()
            .map(|c| c.iter().map(|p| [0, 1, 2].map(|i| T::lit(p[i] as f64) * scale)).collect())
            .collect();
        let mut complex =
            Self::assemble(3, GeometryKind::Torus3 { subdivisions }, &tokens, &normalize, charts);
        complex.lattice = Some(cells);
        complex
    }

    /// Kuhn/Freudenthal triangulation of the periodic unit cube: each of the
    /// `subdivisions³` subcubes is split into 6 tetrahedra along its main
    /// diagonal and opposite faces are identified.
    pub fn torus3(subdivisions: usize) -> Result<Self> {
        if subdivisions == 0 {
            return Err(FeecError::InvalidArgument("torus3 needs at least one subdivision".into()));
        }
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let m = subdivisions as i64;
        let mut cells = Vec::with_capacity(6 * subdivisions.pow(3));
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for perm in PERMS {
                        let mut p = [i, j, k];
                        let mut chain = vec![p];
                        for axis in perm {
                            p[axis] += 1;
                            chain.push(p);
                        }
                        cells.push(chain);
                    }
                }
            }
        }
        Ok(Self::from_lattice_cells(subdivisions, cells))
    }

    /// Builds a vertex-indexed complex. Cell vertex lists are sorted
    /// ascending; charts follow the sorted order. Unused vertices are
    /// dropped and the remaining ones renumbered in increasing order.
    pub fn from_cells(dim: usize, vertices: Vec<[T; 3]>, cells: &[Vec<usize>]) -> Result<Self> {
        Self::from_cells_with_kind(dim, vertices, cells, GeometryKind::Custom)
    }

    fn from_cells_with_kind(dim: usize, vertices: Vec<[T; 3]>, cells: &[Vec<usize>], kind: GeometryKind) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(FeecError::InvalidArgument(format!("dimension {dim} not supported")));
        }
        let mut sorted = Vec::with_capacity(cells.len());
        for c in cells {
            if c.len() != dim + 1 {
                return Err(FeecError::InvalidArgument(format!("cell {c:?} is not a {dim}-simplex")));
            }
            let mut s = c.clone();
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) || s.iter().any(|&v| v >= vertices.len()) {
                return Err(FeecError::InvalidArgument(format!("cell {c:?} has repeated or unknown vertices")));
            }
            sorted.push(s);
        }
        let tokens: Vec<Vec<Token>> = sorted.iter().map(|c| c.iter().map(|&v| vec![v as i64]).collect()).collect();
        let charts = sorted.iter().map(|c| c.iter().map(|&v| vertices[v]).collect()).collect();
        let normalize = |toks: &[Token]| toks.to_vec();
        let mut complex = Self::assemble(dim, kind, &tokens, &normalize, charts);
        let used: BTreeSet<usize> = sorted.iter().flatten().copied().collect();
        complex.vertex_coords = Some(used.into_iter().map(|v| vertices[v]).collect());
        Ok(complex)
    }

    /// Regular icosahedron refined `level` times, new vertices projected
    /// radially onto the unit sphere.
    pub fn icosphere(level: usize) -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let mut vertices: Vec<[T; 3]> = raw.iter().map(|p| project_unit(p.map(T::lit))).collect();
        let mut cells: Vec<Vec<usize>> = [
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ]
        .iter()
        .map(|c| c.to_vec())
        .collect();
        for _ in 0..level {
            let (v, c) = red_refine(2, &vertices, &cells, true);
            vertices = v;
            cells = c;
        }
        Self::from_cells_with_kind(2, vertices, &cells, GeometryKind::Sphere2 { level })
            .expect("icosphere connectivity is valid")
    }

    /// Uniform refinement: red refinement of triangles (new vertices
    /// projected back to the sphere for the icosphere), Freudenthal/Bey
    /// refinement of tetrahedra, which maps the Kuhn triangulation onto the
    /// Kuhn triangulation of the halved lattice.
    pub fn refine_uniform(&self) -> Self {
        match self.geometry {
            GeometryKind::Torus3 { subdivisions } => {
                let lattice = self.lattice.as_ref().expect("torus keeps lattice data");
                let cells = lattice
                    .iter()
                    .flat_map(|c| {
                        let doubled: Vec<[i64; 3]> = c.iter().map(|p| p.map(|v| 2 * v)).collect();
                        bey_children(&doubled, |a, b| [0, 1, 2].map(|i| (a[i] + b[i]) / 2))
                    })
                    .collect();
                Self::from_lattice_cells(2 * subdivisions, cells)
            }
            GeometryKind::Sphere2 { level } => {
                let verts = self.vertex_coords.clone().expect("vertex-indexed");
                let cells = self.vertex_cells();
                let (v, c) = red_refine(2, &verts, &cells, true);
                Self::from_cells_with_kind(2, v, &c, GeometryKind::Sphere2 { level: level + 1 }).expect("valid refinement")
            }
            GeometryKind::Custom => {
                let verts = self.vertex_coords.clone().expect("vertex-indexed");
                let cells = self.vertex_cells();
                let (v, c) = red_refine(self.dim, &verts, &cells, false);
                Self::from_cells(self.dim, v, &c).expect("valid refinement")
            }
        }
    }

    fn vertex_cells(&self) -> Vec<Vec<usize>> {
        (0..self.num_cells()).map(|c| self.cell_vertices(c).to_vec()).collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn geometry(&self) -> GeometryKind {
        self.geometry
    }

    pub fn betti(&self) -> Option<Vec<usize>> {
        self.geometry.betti()
    }

    #[inline]
    pub fn count(&self, k: usize) -> usize {
        self.simplices.get(k).map_or(0, |s| s.len())
    }

    /// Simplex counts `(#0-simplices, ..., #n-simplices)`.
    pub fn counts(&self) -> Vec<usize> {
        (0..=self.dim).map(|k| self.count(k)).collect()
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.charts.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.counts().iter().enumerate().map(|(k, &c)| if k % 2 == 0 { c as i64 } else { -(c as i64) }).sum()
    }

    pub fn simplex(&self, k: usize, s: usize) -> &[usize] {
        &self.simplices[k][s]
    }

    pub fn faces_of(&self, k: usize, s: usize) -> &[(usize, i8)] {
        &self.faces[k][s]
    }

    /// Global vertex indices of a top cell in canonical order.
    pub fn cell_vertices(&self, cell: usize) -> &[usize] {
        let nloc = self.dim + 1;
        &self.cell_simplices[0][cell * nloc..(cell + 1) * nloc]
    }

    /// Global indices of the local `k`-faces of `cell`, in
    /// [`local_subsimplices`] order.
    pub fn cell_simplices(&self, k: usize, cell: usize) -> &[usize] {
        let nloc = binomial(self.dim + 1, k + 1);
        &self.cell_simplices[k][cell * nloc..(cell + 1) * nloc]
    }

    pub fn orientation(&self, cell: usize) -> i8 {
        self.orientation[cell]
    }

    pub fn chart(&self, cell: usize) -> &[[T; 3]] {
        &self.charts[cell]
    }

    pub fn vertex_coordinates(&self) -> Option<&[[T; 3]]> {
        self.vertex_coords.as_deref()
    }

    /// Columns `p_i - p_0` of the affine chart `ı_T`.
    pub fn affine_jacobian(&self, cell: usize) -> SmallMat<T> {
        let c = &self.charts[cell];
        let cols: Vec<[T; 3]> = (1..=self.dim).map(|i| crate::linalg::small::sub3(c[i], c[0])).collect();
        SmallMat::from_columns(&cols)
    }

    /// `ı_T(x̂) = p_0 + J x̂`
    pub fn affine_point(&self, cell: usize, xhat: &[T]) -> [T; 3] {
        let c = &self.charts[cell];
        let mut p = c[0];
        for (i, &xi) in xhat.iter().enumerate().take(self.dim) {
            for (d, pd) in p.iter_mut().enumerate() {
                *pd = *pd + xi * (c[i + 1][d] - c[0][d]);
            }
        }
        p
    }

    pub fn cell_centroid(&self, cell: usize) -> [T; 3] {
        let c = &self.charts[cell];
        let w = T::one() / T::from_usize_lossy(c.len());
        let mut p = [T::zero(); 3];
        for v in c {
            for d in 0..3 {
                p[d] = p[d] + w * v[d];
            }
        }
        p
    }

    /// For every `k`-simplex, the `(cell, local index)` pairs containing it,
    /// in cell order.
    pub fn simplex_star(&self, k: usize) -> Vec<Vec<(usize, usize)>> {
        let mut star = vec![Vec::new(); self.count(k)];
        let nloc = binomial(self.dim + 1, k + 1);
        for cell in 0..self.num_cells() {
            for l in 0..nloc {
                star[self.cell_simplices[k][cell * nloc + l]].push((cell, l));
            }
        }
        star
    }

    /// Cells sharing at least one vertex with each cell (including itself),
    /// sorted ascending.
    pub fn cell_neighbors(&self) -> Vec<Vec<usize>> {
        let star = self.simplex_star(0);
        (0..self.num_cells())
            .map(|c| {
                let mut nb: Vec<usize> =
                    self.cell_vertices(c).iter().flat_map(|&v| star[v].iter().map(|&(cell, _)| cell)).collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect()
    }

    /// Signed incidence matrix `∂_k` of size `#(k-1)-simplices × #k-simplices`.
    pub fn boundary_operator(&self, k: usize) -> Result<SparseOperator<i32>> {
        if k == 0 || k > self.dim {
            return Err(FeecError::DegreeOutOfRange { k, n: self.dim });
        }
        let mut b = CooBuilder::with_capacity(self.count(k - 1), self.count(k), self.count(k) * (k + 1));
        for (s, faces) in self.faces[k].iter().enumerate() {
            for &(f, sign) in faces {
                b.push(f, s, sign as i32);
            }
        }
        Ok(b.finalize())
    }

    /// Cell diameters, volumes and chart-derivative bounds.
    pub fn shape_regularity(&self) -> Result<ShapeRegularityReport<T>> {
        let n = self.dim;
        let fact = T::from_usize_lossy((1..=n).product::<usize>());
        let mut diameters = Vec::with_capacity(self.num_cells());
        let mut vmin = T::infinity();
        let mut vmax = T::zero();
        let mut upper = T::zero();
        let mut lower = T::zero();
        for cell in 0..self.num_cells() {
            let c = &self.charts[cell];
            let mut h = T::zero();
            for i in 0..=n {
                for j in (i + 1)..=n {
                    h = h.max(crate::linalg::small::norm3(crate::linalg::small::sub3(c[i], c[j])));
                }
            }
            let jac = self.affine_jacobian(cell);
            let sv = jac.singular_values();
            let vol = (0..n).fold(T::one(), |a, i| a * sv[i]) / fact;
            if !(vol > h.powi(n as i32) * T::EPS.sqrt()) {
                return Err(FeecError::DegenerateCell { cell, volume: vol.to_f64_lossy() });
            }
            diameters.push(h);
            vmin = vmin.min(vol);
            vmax = vmax.max(vol);
            upper = upper.max(sv[n - 1] / h);
            lower = lower.max(h / sv[0]);
        }
        let h = diameters.iter().fold(T::zero(), |m, &d| m.max(d));
        Ok(ShapeRegularityReport {
            diameters,
            h,
            volume_ratio: vmin / vmax,
            jacobian_bound: upper,
            inverse_jacobian_bound: lower,
        })
    }

    /// Plain-text dump: one line `k v0 ... vk` per simplex, then one line
    /// per cell with its chart vertex coordinates.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for k in 0..=self.dim {
            for s in &self.simplices[k] {
                write!(w, "{k}")?;
                for v in s {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
        }
        for (cell, chart) in self.charts.iter().enumerate() {
            write!(w, "chart {cell}")?;
            for p in chart {
                write!(w, " {:.16e} {:.16e} {:.16e}", p[0], p[1], p[2])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn project_unit<T: Real>(p: [T; 3]) -> [T; 3] {
    let r = crate::linalg::small::norm3(p);
    p.map(|v| v / r)
}

/// Freudenthal/Bey children of an ordered tetrahedron, given a midpoint rule.
fn bey_children<P: Copy>(x: &[P], mid: impl Fn(&P, &P) -> P) -> Vec<Vec<P>> {
    let m = |i: usize, j: usize| mid(&x[i], &x[j]);
    let (x0, x1, x2, x3) = (x[0], x[1], x[2], x[3]);
    let (x01, x02, x03, x12, x13, x23) = (m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3));
    vec![
        vec![x0, x01, x02, x03],
        vec![x01, x1, x12, x13],
        vec![x02, x12, x2, x23],
        vec![x03, x13, x23, x3],
        vec![x01, x02, x03, x13],
        vec![x01, x02, x12, x13],
        vec![x02, x03, x13, x23],
        vec![x02, x12, x13, x23],
    ]
}

/// Red refinement of a vertex-indexed complex; midpoints are appended in
/// ascending edge order and optionally projected onto the unit sphere.
fn red_refine<T: Real>(
    dim: usize,
    vertices: &[[T; 3]],
    cells: &[Vec<usize>],
    project: bool,
) -> (Vec<[T; 3]>, Vec<Vec<usize>>) {
    let mut edges = BTreeSet::new();
    for c in cells {
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                edges.insert((c[i].min(c[j]), c[i].max(c[j])));
            }
        }
    }
    let mut verts = vertices.to_vec();
    let mut midpoint = BTreeMap::new();
    let half = T::lit(0.5);
    for &(a, b) in &edges {
        let mut p = [0, 1, 2].map(|d| half * (vertices[a][d] + vertices[b][d]));
        if project {
            p = project_unit(p);
        }
        midpoint.insert((a, b), verts.len());
        verts.push(p);
    }
    let mid = |a: &usize, b: &usize| midpoint[&((*a).min(*b), (*a).max(*b))];
    let mut out = Vec::new();
    for c in cells {
        let mut s = c.clone();
        s.sort_unstable();
        let children = if dim == 2 {
            let (a, b, cc) = (s[0], s[1], s[2]);
            let (ab, ac, bc) = (mid(&a, &b), mid(&a, &cc), mid(&b, &cc));
            vec![vec![a, ab, ac], vec![ab, b, bc], vec![ac, bc, cc], vec![ab, bc, ac]]
        } else {
            bey_children(&s, mid)
        };
        out.extend(children);
    }
    (verts, out)
}

/// Mesh-size and chart-regularity data of a complex.
#[derive(Clone, Debug)]
pub struct ShapeRegularityReport<T> {
    /// Per-cell chart diameters `h_T`.
    pub diameters: Vec<T>,
    /// `max h_T`.
    pub h: T,
    /// `min vol / max vol` over cells.
    pub volume_ratio: T,
    /// `max ‖∇ı_T‖ / h_T`.
    pub jacobian_bound: T,
    /// `max ‖∇ı_T⁻¹‖ h_T`.
    pub inverse_jacobian_bound: T,
}
