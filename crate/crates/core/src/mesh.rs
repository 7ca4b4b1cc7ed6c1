//! Structured tetrahedral meshes of the unit cube.
//!
//! Each of the `n^3` subcubes is split into six tetrahedra sharing the
//! subcube's main diagonal (Kuhn/Freudenthal split). The split is
//! translation invariant, so meshes with `n_coarse | n_fine` are nested: every
//! fine tetrahedron lies inside exactly one coarse tetrahedron.
//!
//! Edges are the Nédélec degrees of freedom. They are stored as vertex pairs
//! `(a, b)` with `a < b`; the global tangent runs from `a` to `b`.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Local vertex pairs of the six tetrahedron edges. The local direction runs
/// from the first to the second entry.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local vertices of face `f`, which is the face opposite vertex `f`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Axis orders for the six tetrahedra of a subcube. Tetrahedron `p` is the
/// set of points whose local coordinates satisfy
/// `u[PERMS[p][0]] >= u[PERMS[p][1]] >= u[PERMS[p][2]]`.
const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
const PERM_IS_ODD: [bool; 6] = [false, true, true, false, false, true];

/// Local edge index for the local vertex pair `(i, j)`, `i < j`.
#[inline]
pub fn local_edge_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => panic!("invalid local edge ({i}, {j})"),
    }
}

/// The six faces of the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CubeFace {
    XLow,
    XHigh,
    YLow,
    YHigh,
    ZLow,
    ZHigh,
}

impl CubeFace {
    fn from_axis(axis: usize, high: bool) -> Self {
        match (axis, high) {
            (0, false) => CubeFace::XLow,
            (0, true) => CubeFace::XHigh,
            (1, false) => CubeFace::YLow,
            (1, true) => CubeFace::YHigh,
            (2, false) => CubeFace::ZLow,
            _ => CubeFace::ZHigh,
        }
    }
}

/// A triangle of a tetrahedron lying on the cube surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    pub face: CubeFace,
    pub tet: usize,
    /// Index into [`LOCAL_FACES`] of the owning tetrahedron.
    pub local_face: usize,
}

/// An edge reference inside a tetrahedron: global edge index and the sign
/// relating the local edge direction to the global one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetEdge {
    pub edge: usize,
    pub sign: f64,
}

/// Boundary of a union of tetrahedra, as `(tet, local_face)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ElementSetBoundary {
    /// Faces shared with a tetrahedron outside the set.
    pub artificial: Vec<(usize, usize)>,
    /// Faces on the cube surface.
    pub physical: Vec<(usize, usize)>,
}

/// Structured tetrahedral mesh of `[0,1]^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    n_per_dir: usize,
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    tet_edges: Vec<[TetEdge; 6]>,
    boundary_faces: Vec<BoundaryFace>,
    on_boundary: Vec<bool>,
}

/// Builds the Kuhn-split mesh with `n` subcubes per axis.
pub fn build_cube_mesh(n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidMeshSize(n));
    }
    let np = n + 1;
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let h = 1.0 / n as f64;

    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for (p, perm) in PERMS.iter().enumerate() {
                    let mut c = [i, j, k];
                    let mut t = [0usize; 4];
                    t[0] = vid(c[0], c[1], c[2]);
                    for (step, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        t[step + 1] = vid(c[0], c[1], c[2]);
                    }
                    if PERM_IS_ODD[p] {
                        t.swap(2, 3);
                    }
                    tets.push(t);
                }
            }
        }
    }

    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(7 * n * n * n + 9 * n * n + 3 * n + 1);
    for t in &tets {
        for [a, b] in LOCAL_EDGES {
            let (u, v) = (t[a], t[b]);
            edges.push(if u < v { [u, v] } else { [v, u] });
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let tet_edges: Vec<[TetEdge; 6]> = tets
        .iter()
        .map(|t| {
            let mut out = [TetEdge { edge: 0, sign: 1.0 }; 6];
            for (l, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (u, v) = (t[*a], t[*b]);
                let key = if u < v { [u, v] } else { [v, u] };
                let e = edges.binary_search(&key).expect("edge enumerated above");
                out[l] = TetEdge { edge: e, sign: if u < v { 1.0 } else { -1.0 } };
            }
            out
        })
        .collect();

    let grid = |v: usize| [v % np, (v / np) % np, v / (np * np)];
    let mut boundary_faces = Vec::new();
    let mut on_boundary = vec![false; edges.len()];
    for (ti, t) in tets.iter().enumerate() {
        for (f, lf) in LOCAL_FACES.iter().enumerate() {
            let verts = [t[lf[0]], t[lf[1]], t[lf[2]]];
            let g = verts.map(grid);
            let mut tag = None;
            for axis in 0..3 {
                for (bound, high) in [(0, false), (n, true)] {
                    if g.iter().all(|c| c[axis] == bound) {
                        tag = Some(CubeFace::from_axis(axis, high));
                    }
                }
            }
            if let Some(face) = tag {
                boundary_faces.push(BoundaryFace { vertices: verts, face, tet: ti, local_face: f });
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    let le = local_edge_index(lf[a], lf[b]);
                    on_boundary[tet_edges[ti][le].edge] = true;
                }
            }
        }
    }

    Ok(TetMesh { n_per_dir: n, vertices, tets, edges, tet_edges, boundary_faces, on_boundary })
}

impl TetMesh {
    pub fn n_per_dir(&self) -> usize {
        self.n_per_dir
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_per_dir as f64
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn tet_edges(&self) -> &[[TetEdge; 6]] {
        &self.tet_edges
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// True when edge `e` lies on a boundary face.
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.on_boundary[e]
    }

    /// Boundary edge indices in ascending order.
    pub fn boundary_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.on_boundary[e]).collect()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Subcube `(i, j, k)` and split index `p` of tetrahedron `t`.
    pub fn tet_cell(&self, t: usize) -> ([usize; 3], usize) {
        let n = self.n_per_dir;
        let c = t / 6;
        ([c % n, (c / n) % n, c / (n * n)], t % 6)
    }

    /// Index of tetrahedron `p` in subcube `(i, j, k)`.
    pub fn cell_tet(&self, cell: [usize; 3], p: usize) -> usize {
        let n = self.n_per_dir;
        6 * (cell[0] + n * (cell[1] + n * cell[2])) + p
    }

    /// Grid coordinates of vertex `v`.
    pub fn vertex_grid(&self, v: usize) -> [usize; 3] {
        let np = self.n_per_dir + 1;
        [v % np, (v / np) % np, v / (np * np)]
    }

    /// Cube face containing all of `vertices`, if any.
    pub fn face_on_boundary(&self, vertices: &[usize; 3]) -> Option<CubeFace> {
        let g = vertices.map(|v| self.vertex_grid(v));
        for axis in 0..3 {
            for (bound, high) in [(0, false), (self.n_per_dir, true)] {
                if g.iter().all(|c| c[axis] == bound) {
                    return Some(CubeFace::from_axis(axis, high));
                }
            }
        }
        None
    }

    /// Tetrahedron containing point `x` of the closed cube. Points on shared
    /// faces resolve to one of the adjacent tetrahedra.
    pub fn locate(&self, x: Point) -> usize {
        let n = self.n_per_dir as f64;
        let mut cell = [0usize; 3];
        let mut u = [0f64; 3];
        for d in 0..3 {
            let s = (x[d] * n).clamp(0.0, n);
            let c = (s.floor() as usize).min(self.n_per_dir - 1);
            cell[d] = c;
            u[d] = s - c as f64;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).unwrap().then(a.cmp(&b)));
        let p = PERMS.iter().position(|q| *q == order).unwrap();
        self.cell_tet(cell, p)
    }

    /// For each edge, one tetrahedron containing it (the lowest index).
    pub fn edge_owner_tets(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.edges.len()];
        for (t, te) in self.tet_edges.iter().enumerate() {
            for e in te {
                if owner[e.edge] == usize::MAX {
                    owner[e.edge] = t;
                }
            }
        }
        owner
    }

    /// Boundary faces of the union of `elements`, as `(tet, local_face)`
    /// pairs, split into faces interior to the cube (the artificial
    /// boundary) and faces lying on the cube surface.
    pub fn element_set_boundary(&self, elements: &[usize]) -> ElementSetBoundary {
        let mut faces: HashMap<[usize; 3], (u8, usize, usize)> = HashMap::with_capacity(2 * elements.len());
        for &t in elements {
            let tv = self.tets[t];
            for (f, lf) in LOCAL_FACES.iter().enumerate() {
                let mut key = [tv[lf[0]], tv[lf[1]], tv[lf[2]]];
                key.sort_unstable();
                faces.entry(key).and_modify(|e| e.0 += 1).or_insert((1, t, f));
            }
        }
        let mut artificial = Vec::new();
        let mut physical = Vec::new();
        for (key, (count, t, f)) in faces {
            if count != 1 {
                continue;
            }
            if self.face_on_boundary(&key).is_some() {
                physical.push((t, f));
            } else {
                artificial.push((t, f));
            }
        }
        artificial.sort_unstable();
        physical.sort_unstable();
        ElementSetBoundary { artificial, physical }
    }

    /// Signed volume of tetrahedron `t`.
    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t))
    }

    /// Plain-text dump: a header line, then `v x y z`, `t a b c d` and
    /// `e a b` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# n_per_dir {} vertices {} tets {} edges {}",
            self.n_per_dir,
            self.vertices.len(),
            self.tets.len(),
            self.edges.len()
        )?;
        for p in &self.vertices {
            writeln!(out, "v {} {} {}", p[0], p[1], p[2])?;
        }
        for t in &self.tets {
            writeln!(out, "t {} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        for e in &self.edges {
            writeln!(out, "e {} {}", e[0], e[1])?;
        }
        Ok(())
    }
}

/// Signed volume of a tetrahedron.
pub fn signed_volume(p: &[Point; 4]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    let c = sub(p[3], p[0]);
    dot(a, cross(b, c)) / 6.0
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Ascending list of edges that do not lie on the cube surface.
pub fn interior_edge_set(mesh: &TetMesh) -> Vec<usize> {
    (0..mesh.n_edges()).filter(|&e| !mesh.is_boundary_edge(e)).collect()
}

/// A fine mesh together with a coarse mesh it refines.
#[derive(Debug, Clone)]
pub struct NestedMeshPair {
    pub fine: TetMesh,
    pub coarse: TetMesh,
    /// For each fine tetrahedron, the coarse tetrahedron containing it.
    pub containment: Vec<usize>,
}

/// Builds nested meshes with `n_coarse | n_fine`.
pub fn build_nested_pair(n_fine: usize, n_coarse: usize) -> Result<NestedMeshPair> {
    let fine = build_cube_mesh(n_fine)?;
    nest_into(fine, n_coarse)
}

/// Builds the coarse partner of an existing fine mesh.
pub fn nest_into(fine: TetMesh, n_coarse: usize) -> Result<NestedMeshPair> {
    let n_fine = fine.n_per_dir();
    if n_coarse == 0 {
        return Err(Error::InvalidMeshSize(0));
    }
    if !n_fine.is_multiple_of(n_coarse) {
        return Err(Error::NotNested { fine: n_fine, coarse: n_coarse });
    }
    let coarse = build_cube_mesh(n_coarse)?;
    let containment = (0..fine.n_tets())
        .map(|t| {
            let p = fine.tet_points(t);
            let mut bary = [0.0; 3];
            for q in &p {
                for d in 0..3 {
                    bary[d] += 0.25 * q[d];
                }
            }
            coarse.locate(bary)
        })
        .collect();
    Ok(NestedMeshPair { fine, coarse, containment })
}
