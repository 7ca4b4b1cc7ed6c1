//! Galerkin assembly for lowest-order Nédélec elements.
//!
//! The operator assembled on a set of active edges is
//!
//! ```text
//! A = S - (k^2 + i kappa) M - i k M_Γ
//! ```
//!
//! where `S` is the curl-curl matrix, `M` the mass matrix and `M_Γ` the
//! tangential surface mass matrix on impedance faces. Element integrals are
//! computed in closed form; the right-hand side uses a collapsed Gauss rule.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{cross, dot, local_edge_index, sub, Point, TetMesh, LOCAL_EDGES, LOCAL_FACES};
use crate::quadrature::{map_point, TetRule};
use crate::sparse::SparseComplexMatrix;

/// Boundary condition on the cube surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// Perfect electric conductor: tangential trace vanishes, boundary edges
    /// are eliminated.
    Pec,
    /// First-order absorbing condition `(curl E) x n - i k n x (E x n) = 0`.
    Impedance,
}

/// Source term `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// `J = (f, f, f)` with `f = -exp(-400 |x - c|^2)`, `c` the cube center.
    GaussianBump,
    /// `J = (2 pi^2 + c) E*` for `E* = (sin πy sin πz, sin πz sin πx, sin πx sin πy)`,
    /// the exact solution of `curl curl E + c E = J` with `E x n = 0`.
    Manufactured {
        mass_coefficient: f64,
    },
    Zero,
}

impl Source {
    /// Source value at `x`.
    pub fn eval(&self, x: Point) -> Point {
        match *self {
            Source::GaussianBump => {
                let r2: f64 = x.iter().map(|c| (c - 0.5) * (c - 0.5)).sum();
                let f = -(-400.0 * r2).exp();
                [f, f, f]
            }
            Source::Manufactured { mass_coefficient } => {
                let e = manufactured_field(x);
                let s = 2.0 * std::f64::consts::PI * std::f64::consts::PI + mass_coefficient;
                [s * e[0], s * e[1], s * e[2]]
            }
            Source::Zero => [0.0; 3],
        }
    }

    /// Length over which the source varies appreciably; drives quadrature
    /// subdivision on large elements.
    fn length_scale(&self) -> f64 {
        match self {
            Source::GaussianBump => 0.05,
            _ => f64::INFINITY,
        }
    }
}

/// `E* = (sin πy sin πz, sin πz sin πx, sin πx sin πy)`.
pub fn manufactured_field(x: Point) -> Point {
    use std::f64::consts::PI;
    let (sx, sy, sz) = ((PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[2]).sin());
    [sy * sz, sz * sx, sx * sy]
}

/// `curl E*` for [`manufactured_field`].
pub fn manufactured_curl(x: Point) -> Point {
    use std::f64::consts::PI;
    let (sx, sy, sz) = ((PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[2]).sin());
    let (cx, cy, cz) = ((PI * x[0]).cos(), (PI * x[1]).cos(), (PI * x[2]).cos());
    [PI * sx * (cy - cz), PI * sy * (cz - cx), PI * sz * (cx - cy)]
}

/// Parameters of one boundary value problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub k: f64,
    pub kappa: f64,
    pub bc: BoundaryCondition,
    pub rhs: Source,
}

impl ProblemConfig {
    pub fn new(k: f64, kappa: f64, bc: BoundaryCondition) -> Self {
        Self { k, kappa, bc, rhs: Source::GaussianBump }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() || !self.kappa.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need k > 0 and finite kappa, got k = {}, kappa = {}",
                self.k, self.kappa
            )));
        }
        Ok(())
    }

    /// Operator coefficients `(1, -(k^2 + i kappa), -i k)`.
    pub fn coefficients(&self) -> OperatorCoefficients {
        OperatorCoefficients {
            stiffness: Complex64::new(1.0, 0.0),
            mass: -Complex64::new(self.k * self.k, self.kappa),
            surface: Complex64::new(0.0, -self.k),
        }
    }
}

/// Coefficients of `stiffness * S + mass * M + surface * M_Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorCoefficients {
    pub stiffness: Complex64,
    pub mass: Complex64,
    pub surface: Complex64,
}

/// Maps mesh edges to unknowns. Active edges are numbered in ascending edge
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    active: Vec<usize>,
    edge_to_dof: Vec<u32>,
}

const INACTIVE: u32 = u32::MAX;

impl DofMap {
    /// Global unknowns for a boundary condition: interior edges for PEC, all
    /// edges for impedance.
    pub fn new(mesh: &TetMesh, bc: BoundaryCondition) -> Self {
        let active: Vec<usize> = match bc {
            BoundaryCondition::Pec => (0..mesh.n_edges()).filter(|&e| !mesh.is_boundary_edge(e)).collect(),
            BoundaryCondition::Impedance => (0..mesh.n_edges()).collect(),
        };
        Self::from_edges(mesh.n_edges(), active)
    }

    /// Unknowns on an explicit ascending edge list.
    pub fn from_edges(n_edges: usize, active: Vec<usize>) -> Self {
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
        let mut edge_to_dof = vec![INACTIVE; n_edges];
        for (d, &e) in active.iter().enumerate() {
            edge_to_dof[e] = d as u32;
        }
        Self { active, edge_to_dof }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Active edge indices, ascending.
    pub fn active_edges(&self) -> &[usize] {
        &self.active
    }

    #[inline]
    pub fn dof(&self, edge: usize) -> Option<usize> {
        match self.edge_to_dof[edge] {
            INACTIVE => None,
            d => Some(d as usize),
        }
    }
}

/// Barycentric gradients and volume of a tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    pub grads: [Point; 4],
}

pub fn tet_geometry(p: &[Point; 4]) -> Result<TetGeometry> {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    let e3 = sub(p[3], p[0]);
    let det = dot(e1, cross(e2, e3));
    let volume = det / 6.0;
    if !(volume > 0.0) {
        return Err(Error::DegenerateElement { volume });
    }
    let g1 = cross(e2, e3).map(|c| c / det);
    let g2 = cross(e3, e1).map(|c| c / det);
    let g3 = cross(e1, e2).map(|c| c / det);
    let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
    Ok(TetGeometry { volume, grads: [g0, g1, g2, g3] })
}

impl TetGeometry {
    /// Basis function of local edge `l` (local orientation, no sign) at the
    /// barycentric point `lam`.
    #[inline]
    pub fn basis(&self, l: usize, lam: &[f64; 4]) -> Point {
        let [a, b] = LOCAL_EDGES[l];
        let (ga, gb) = (self.grads[a], self.grads[b]);
        [lam[a] * gb[0] - lam[b] * ga[0], lam[a] * gb[1] - lam[b] * ga[1], lam[a] * gb[2] - lam[b] * ga[2]]
    }

    /// Constant curl of local edge basis `l`: `2 ∇λa × ∇λb`.
    #[inline]
    pub fn curl(&self, l: usize) -> Point {
        let [a, b] = LOCAL_EDGES[l];
        cross(self.grads[a], self.grads[b]).map(|c| 2.0 * c)
    }
}

/// Element matrices in local edge order with orientation signs applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrices {
    pub curl_curl: [[f64; 6]; 6],
    pub mass: [[f64; 6]; 6],
}

/// `∫ (λa∇λb - λb∇λa)·(λc∇λd - λd∇λc)` given pairwise gradient dots and
/// `∫ λi λj = scale (1 + δij)`.
#[inline]
fn whitney_mass(gg: &[[f64; 4]; 4], scale: f64, (a, b): (usize, usize), (c, d): (usize, usize)) -> f64 {
    let ll = |i: usize, j: usize| if i == j { 2.0 * scale } else { scale };
    ll(a, c) * gg[b][d] - ll(a, d) * gg[b][c] - ll(b, c) * gg[a][d] + ll(b, d) * gg[a][c]
}

/// Curl-curl and mass matrices of one tetrahedron.
pub fn element_matrices(p: &[Point; 4], signs: &[f64; 6]) -> Result<ElementMatrices> {
    let geo = tet_geometry(p)?;
    Ok(element_matrices_from(&geo, signs))
}

fn element_matrices_from(geo: &TetGeometry, signs: &[f64; 6]) -> ElementMatrices {
    let gg: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| dot(geo.grads[i], geo.grads[j])));
    let curls: [Point; 6] = std::array::from_fn(|l| geo.curl(l));
    let scale = geo.volume / 20.0;
    let mut m = ElementMatrices { curl_curl: [[0.0; 6]; 6], mass: [[0.0; 6]; 6] };
    for i in 0..6 {
        let [a, b] = LOCAL_EDGES[i];
        for j in 0..6 {
            let [c, d] = LOCAL_EDGES[j];
            let s = signs[i] * signs[j];
            m.curl_curl[i][j] = s * geo.volume * dot(curls[i], curls[j]);
            m.mass[i][j] = s * whitney_mass(&gg, scale, (a, b), (c, d));
        }
    }
    m
}

/// Tangential mass matrix `∫_F (w_i x n)·(w_j x n)` of a triangle for its
/// edges `(0,1), (0,2), (1,2)` in local orientation.
pub fn face_mass_matrix(q: &[Point; 3]) -> [[f64; 3]; 3] {
    let e1 = sub(q[1], q[0]);
    let e2 = sub(q[2], q[0]);
    let (g11, g12, g22) = (dot(e1, e1), dot(e1, e2), dot(e2, e2));
    let det = g11 * g22 - g12 * g12;
    let area = 0.5 * det.sqrt();
    // surface gradients: dual basis of (e1, e2) within the plane
    let (i11, i12, i22) = (g22 / det, -g12 / det, g11 / det);
    let grad1 = [i11 * e1[0] + i12 * e2[0], i11 * e1[1] + i12 * e2[1], i11 * e1[2] + i12 * e2[2]];
    let grad2 = [i12 * e1[0] + i22 * e2[0], i12 * e1[1] + i22 * e2[1], i12 * e1[2] + i22 * e2[2]];
    let grad0 = [-(grad1[0] + grad2[0]), -(grad1[1] + grad2[1]), -(grad1[2] + grad2[2])];
    let grads = [grad0, grad1, grad2];
    let mut gg = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            gg[i][j] = dot(grads[i], grads[j]);
        }
    }
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let scale = area / 12.0;
    let mut out = [[0.0; 3]; 3];
    for (i, &pi) in pairs.iter().enumerate() {
        for (j, &pj) in pairs.iter().enumerate() {
            out[i][j] = whitney_mass(&gg, scale, pi, pj);
        }
    }
    out
}

/// Assembles `stiffness * S + mass * M` over `elements` plus
/// `surface * M_Γ` over the listed `(tet, local_face)` faces, on the unknowns
/// of `dofs`. Edges without a dof are eliminated.
pub fn assemble_on_elements(
    mesh: &TetMesh,
    elements: &[usize],
    dofs: &DofMap,
    coeffs: OperatorCoefficients,
    surface_faces: &[(usize, usize)],
) -> Result<SparseComplexMatrix> {
    let n = dofs.len();
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
    let tet_edges = mesh.tet_edges();
    for &t in elements {
        let local: Vec<u32> = tet_edges[t].iter().filter_map(|e| dofs.dof(e.edge)).map(|d| d as u32).collect();
        for &i in &local {
            rows[i as usize].extend_from_slice(&local);
        }
    }
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
        r.shrink_to_fit();
    }
    let mut a = SparseComplexMatrix::from_pattern(n, n, &rows);
    drop(rows);

    for &t in elements {
        let geo = tet_geometry(&mesh.tet_points(t))?;
        let te = &tet_edges[t];
        let signs: [f64; 6] = std::array::from_fn(|l| te[l].sign);
        let em = element_matrices_from(&geo, &signs);
        let ld: [Option<usize>; 6] = std::array::from_fn(|l| dofs.dof(te[l].edge));
        for (i, di) in ld.iter().enumerate() {
            let Some(di) = *di else { continue };
            for (j, dj) in ld.iter().enumerate() {
                let Some(dj) = *dj else { continue };
                let v = coeffs.stiffness * em.curl_curl[i][j] + coeffs.mass * em.mass[i][j];
                a.add_to(di, dj, v);
            }
        }
    }

    if coeffs.surface != Complex64::new(0.0, 0.0) {
        for &(t, f) in surface_faces {
            let lf = LOCAL_FACES[f];
            let tv = mesh.tets()[t];
            let q = [mesh.vertices()[tv[lf[0]]], mesh.vertices()[tv[lf[1]]], mesh.vertices()[tv[lf[2]]]];
            let fm = face_mass_matrix(&q);
            let te = &tet_edges[t];
            let edges = [(lf[0], lf[1]), (lf[0], lf[2]), (lf[1], lf[2])].map(|(a, b)| te[local_edge_index(a, b)]);
            for i in 0..3 {
                let Some(di) = dofs.dof(edges[i].edge) else { continue };
                for j in 0..3 {
                    let Some(dj) = dofs.dof(edges[j].edge) else { continue };
                    a.add_to(di, dj, coeffs.surface * (edges[i].sign * edges[j].sign * fm[i][j]));
                }
            }
        }
    }
    Ok(a)
}

fn all_elements(mesh: &TetMesh) -> Vec<usize> {
    (0..mesh.n_tets()).collect()
}

fn physical_faces(mesh: &TetMesh) -> Vec<(usize, usize)> {
    mesh.boundary_faces().iter().map(|f| (f.tet, f.local_face)).collect()
}

/// Global Galerkin matrix and its dof map.
pub fn assemble_global(mesh: &TetMesh, config: &ProblemConfig) -> Result<(SparseComplexMatrix, DofMap)> {
    config.validate()?;
    let dofs = DofMap::new(mesh, config.bc);
    let a = assemble_with_dofs(mesh, config, &dofs)?;
    Ok((a, dofs))
}

/// Global Galerkin matrix on a given dof map.
pub fn assemble_with_dofs(mesh: &TetMesh, config: &ProblemConfig, dofs: &DofMap) -> Result<SparseComplexMatrix> {
    config.validate()?;
    let faces = match config.bc {
        BoundaryCondition::Pec => Vec::new(),
        BoundaryCondition::Impedance => physical_faces(mesh),
    };
    assemble_on_elements(mesh, &all_elements(mesh), dofs, config.coefficients(), &faces)
}

/// Mass matrix `M` on the given unknowns.
pub fn assemble_mass(mesh: &TetMesh, dofs: &DofMap) -> Result<SparseComplexMatrix> {
    let coeffs = OperatorCoefficients {
        stiffness: Complex64::new(0.0, 0.0),
        mass: Complex64::new(1.0, 0.0),
        surface: Complex64::new(0.0, 0.0),
    };
    assemble_on_elements(mesh, &all_elements(mesh), dofs, coeffs, &[])
}

/// Weighted inner-product matrix `C_k = S + k^2 M`.
pub fn assemble_ck(mesh: &TetMesh, k: f64, dofs: &DofMap) -> Result<SparseComplexMatrix> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("need k > 0, got {k}")));
    }
    let coeffs = OperatorCoefficients {
        stiffness: Complex64::new(1.0, 0.0),
        mass: Complex64::new(k * k, 0.0),
        surface: Complex64::new(0.0, 0.0),
    };
    assemble_on_elements(mesh, &all_elements(mesh), dofs, coeffs, &[])
}

/// Settings of the right-hand-side quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsQuadrature {
    /// Gauss points per collapsed axis; exact degree is `2 q - 3`.
    pub points_per_axis: usize,
}

impl Default for RhsQuadrature {
    fn default() -> Self {
        Self { points_per_axis: 4 }
    }
}

/// Load vector `F_i = ∫ J · w_i` with the default quadrature.
pub fn assemble_rhs(mesh: &TetMesh, config: &ProblemConfig, dofs: &DofMap) -> Vec<Complex64> {
    assemble_rhs_with(mesh, &config.rhs, dofs, RhsQuadrature::default())
}

/// Load vector with an explicit quadrature setting.
pub fn assemble_rhs_with(mesh: &TetMesh, source: &Source, dofs: &DofMap, quad: RhsQuadrature) -> Vec<Complex64> {
    let mut f = vec![Complex64::new(0.0, 0.0); dofs.len()];
    if matches!(source, Source::Zero) {
        return f;
    }
    // all tetrahedra of the structured mesh share the diameter h√3
    let diameter = mesh.h() * 3f64.sqrt();
    let ls = source.length_scale();
    let subdivisions = if ls.is_finite() { (diameter / ls).ceil().max(1.0) as usize } else { 1 };
    let rule = TetRule::collapsed(quad.points_per_axis, subdivisions);
    for t in 0..mesh.n_tets() {
        let te = &mesh.tet_edges()[t];
        let ld: [Option<usize>; 6] = std::array::from_fn(|l| dofs.dof(te[l].edge));
        if ld.iter().all(Option::is_none) {
            continue;
        }
        let p = mesh.tet_points(t);
        let geo = tet_geometry(&p).expect("structured mesh elements are non-degenerate");
        let mut acc = [0.0; 6];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let j = source.eval(map_point(&p, lam));
            for (l, a) in acc.iter_mut().enumerate() {
                *a += w * dot(j, geo.basis(l, lam));
            }
        }
        for l in 0..6 {
            if let Some(d) = ld[l] {
                f[d] += Complex64::new(te[l].sign * acc[l] * geo.volume, 0.0);
            }
        }
    }
    f
}

/// Principal submatrix of the global matrix on a subdomain's unknowns.
pub fn local_matrix_pec(a: &SparseComplexMatrix, subset: &[usize]) -> Result<SparseComplexMatrix> {
    a.principal_submatrix(subset)
}

/// Local matrix with an impedance condition on the artificial boundary of
/// the element set.
///
/// Unknowns are all edges of `elements` that are active globally. The global
/// boundary condition is kept on the part of the subdomain boundary lying on
/// the cube surface. Returns the matrix and the global dof index of each
/// local unknown.
pub fn local_matrix_impedance(
    mesh: &TetMesh,
    elements: &[usize],
    global_dofs: &DofMap,
    config: &ProblemConfig,
) -> Result<(SparseComplexMatrix, Vec<usize>)> {
    config.validate()?;
    if elements.is_empty() {
        return Err(Error::EmptySubdomain);
    }
    let mut edges: Vec<usize> = elements
        .iter()
        .flat_map(|&t| mesh.tet_edges()[t].iter().map(|e| e.edge))
        .filter(|&e| global_dofs.dof(e).is_some())
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let boundary = mesh.element_set_boundary(elements);
    let mut faces = boundary.artificial;
    if config.bc == BoundaryCondition::Impedance {
        faces.extend(boundary.physical);
    }
    let global: Vec<usize> = edges.iter().map(|&e| global_dofs.dof(e).unwrap()).collect();
    let local_dofs = DofMap::from_edges(mesh.n_edges(), edges);
    let b = assemble_on_elements(mesh, elements, &local_dofs, config.coefficients(), &faces)?;
    Ok((b, global))
}

/// Error of a discrete field against an exact one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcurlError {
    /// `‖E - E_h‖_{L2}`.
    pub l2: f64,
    /// `‖curl (E - E_h)‖_{L2}`.
    pub curl: f64,
}

impl HcurlError {
    /// The H(curl) norm of the error.
    pub fn total(&self) -> f64 {
        self.l2.hypot(self.curl)
    }
}

/// Error of the real part of `u` (coefficients on `dofs`) against the
/// field `exact` with curl `exact_curl`, by a degree-5 rule per element.
pub fn hcurl_error(
    mesh: &TetMesh,
    dofs: &DofMap,
    u: &[Complex64],
    exact: impl Fn(Point) -> Point,
    exact_curl: impl Fn(Point) -> Point,
) -> Result<HcurlError> {
    if u.len() != dofs.len() {
        return Err(Error::DimensionMismatch { expected: dofs.len(), found: u.len() });
    }
    let rule = TetRule::collapsed(4, 1);
    let (mut l2, mut curl) = (0.0, 0.0);
    for t in 0..mesh.n_tets() {
        let p = mesh.tet_points(t);
        let geo = tet_geometry(&p)?;
        let te = &mesh.tet_edges()[t];
        let coef: [f64; 6] = std::array::from_fn(|l| dofs.dof(te[l].edge).map_or(0.0, |d| te[l].sign * u[d].re));
        let mut ch = [0.0; 3];
        for (l, c) in coef.iter().enumerate() {
            let cl = geo.curl(l);
            for d in 0..3 {
                ch[d] += c * cl[d];
            }
        }
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let x = map_point(&p, lam);
            let mut eh = [0.0; 3];
            for (l, c) in coef.iter().enumerate() {
                let b = geo.basis(l, lam);
                for d in 0..3 {
                    eh[d] += c * b[d];
                }
            }
            let e = sub(exact(x), eh);
            let ce = sub(exact_curl(x), ch);
            l2 += w * geo.volume * dot(e, e);
            curl += w * geo.volume * dot(ce, ce);
        }
    }
    Ok(HcurlError { l2: l2.sqrt(), curl: curl.sqrt() })
}
