//! Overlapping subdomain covers, partition of unity and the coarse space.
//!
//! Subdomains are boxes of fine subcubes extended by a number of element
//! layers. Restrictions are index selections, so a subdomain is stored as
//! the ascending list of global unknowns it touches.

use std::io::Write;

use log::info;

use crate::assembly::{tet_geometry, BoundaryCondition, DofMap};
use crate::error::{Error, Result};
use crate::mesh::{sub, NestedMeshPair, TetMesh};
use crate::sparse::{SparseComplexMatrix, SparseRealMatrix};

/// Half-open cell range `[lo, hi)` per axis.
pub type CellBox = [[usize; 2]; 3];

/// One overlapping subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    /// Cells owned before the overlap extension.
    pub owned: CellBox,
    /// Cells after the extension, clipped to the cube.
    pub extended: CellBox,
    /// Fine tetrahedra of the extended box, ascending.
    pub elements: Vec<usize>,
    /// Global unknowns not lying on the artificial boundary, ascending.
    pub interior_dofs: Vec<usize>,
    /// All global unknowns on edges of `elements`, ascending.
    pub closure_dofs: Vec<usize>,
    /// Partition-of-unity weight for each entry of `interior_dofs`.
    pub pou_weights: Vec<f64>,
}

/// A set of overlapping subdomains covering every unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    pub subdomains: Vec<Subdomain>,
    pub n_dofs: usize,
    pub n_sub_per_dir: usize,
    pub overlap_layers: usize,
}

/// Regular `n_sub^3` box cover of the mesh with `layers` rings of overlap.
pub fn build_cover(mesh: &TetMesh, dofs: &DofMap, n_sub: usize, layers: usize) -> Result<Cover> {
    let n = mesh.n_per_dir();
    if n_sub == 0 || !n.is_multiple_of(n_sub) {
        return Err(Error::NonDivisibleCover { n, sub: n_sub });
    }
    let w = n / n_sub;
    let mut subdomains = Vec::with_capacity(n_sub.pow(3));
    for sk in 0..n_sub {
        for sj in 0..n_sub {
            for si in 0..n_sub {
                let owned = [si, sj, sk].map(|s| [s * w, (s + 1) * w]);
                let extended = owned.map(|[lo, hi]| [lo.saturating_sub(layers), (hi + layers).min(n)]);
                if extended.iter().all(|&[lo, hi]| lo == 0 && hi == n) && n_sub > 1 {
                    info!("subdomain ({si}, {sj}, {sk}) covers the whole cube");
                }
                subdomains.push(box_subdomain(mesh, dofs, owned, extended));
            }
        }
    }
    let mut cover = Cover { subdomains, n_dofs: dofs.len(), n_sub_per_dir: n_sub, overlap_layers: layers };
    let weights = build_partition_of_unity(&cover)?;
    for (s, w) in cover.subdomains.iter_mut().zip(weights) {
        s.pou_weights = w;
    }
    Ok(cover)
}

fn box_subdomain(mesh: &TetMesh, dofs: &DofMap, owned: CellBox, extended: CellBox) -> Subdomain {
    let n = mesh.n_per_dir();
    let mut elements = Vec::new();
    for k in extended[2][0]..extended[2][1] {
        for j in extended[1][0]..extended[1][1] {
            for i in extended[0][0]..extended[0][1] {
                for p in 0..6 {
                    elements.push(mesh.cell_tet([i, j, k], p));
                }
            }
        }
    }
    let mut closure: Vec<usize> =
        elements.iter().flat_map(|&t| mesh.tet_edges()[t].iter().filter_map(|e| dofs.dof(e.edge))).collect();
    closure.sort_unstable();
    closure.dedup();

    // an edge is on the artificial boundary when both endpoints sit on a
    // box plane strictly inside the cube
    let on_artificial = |dof: usize| {
        let [a, b] = mesh.edges()[dofs.active_edges()[dof]];
        let (ga, gb) = (mesh.vertex_grid(a), mesh.vertex_grid(b));
        (0..3).any(|d| {
            let [lo, hi] = extended[d];
            (lo > 0 && ga[d] == lo && gb[d] == lo) || (hi < n && ga[d] == hi && gb[d] == hi)
        })
    };
    let interior: Vec<usize> = closure.iter().copied().filter(|&d| !on_artificial(d)).collect();
    Subdomain { owned, extended, elements, interior_dofs: interior, closure_dofs: closure, pou_weights: Vec::new() }
}

/// Multiplicity weights: an unknown interior to `m` subdomains gets `1/m`
/// in each of them.
pub fn build_partition_of_unity(cover: &Cover) -> Result<Vec<Vec<f64>>> {
    let mut mult = vec![0u32; cover.n_dofs];
    for s in &cover.subdomains {
        for &d in &s.interior_dofs {
            mult[d] += 1;
        }
    }
    if let Some(dof) = mult.iter().position(|&m| m == 0) {
        return Err(Error::UncoveredDof { dof });
    }
    Ok(cover.subdomains.iter().map(|s| s.interior_dofs.iter().map(|&d| 1.0 / mult[d] as f64).collect()).collect())
}

impl Cover {
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    /// Per-subdomain summary as CSV.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["subdomain", "elements", "interior_dofs", "closure_dofs"]).map_err(io)?;
        for (i, s) in self.subdomains.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.elements.len().to_string(),
                s.interior_dofs.len().to_string(),
                s.closure_dofs.len().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nested coarse space: coarse unknowns and the restriction `R0`.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    pub n_coarse_per_dir: usize,
    pub coarse_dofs: DofMap,
    /// `n_coarse_dofs x n_fine_dofs`; entry `(p, j)` is the tangential
    /// integral of coarse basis `p` along fine edge `j`.
    pub r0: SparseRealMatrix,
}

impl CoarseSpace {
    pub fn len(&self) -> usize {
        self.coarse_dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coarse_dofs.is_empty()
    }
}

/// Coarse restriction for a nested pair. Both levels use the same boundary
/// condition.
pub fn build_coarse_restriction(pair: &NestedMeshPair, bc: BoundaryCondition) -> Result<CoarseSpace> {
    let fine = &pair.fine;
    let coarse = &pair.coarse;
    if !fine.n_per_dir().is_multiple_of(coarse.n_per_dir()) || pair.containment.len() != fine.n_tets() {
        return Err(Error::NotNested { fine: fine.n_per_dir(), coarse: coarse.n_per_dir() });
    }
    let fine_dofs = DofMap::new(fine, bc);
    let coarse_dofs = DofMap::new(coarse, bc);
    let owner = fine.edge_owner_tets();
    let mut trip = Vec::new();
    for (j, &e) in fine_dofs.active_edges().iter().enumerate() {
        let [a, b] = fine.edges()[e];
        let (pa, pb) = (fine.vertices()[a], fine.vertices()[b]);
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), 0.5 * (pa[2] + pb[2])];
        let t = sub(pb, pa);
        // the coarse basis is linear along the fine edge, so the midpoint
        // rule is exact
        let ct = pair.containment[owner[e]];
        let cp = coarse.tet_points(ct);
        let geo = tet_geometry(&cp)?;
        let lam: [f64; 4] = std::array::from_fn(|i| {
            let g = geo.grads[i];
            let base = cp[(i + 1) % 4];
            g[0] * (mid[0] - base[0]) + g[1] * (mid[1] - base[1]) + g[2] * (mid[2] - base[2])
        });
        for (l, te) in coarse.tet_edges()[ct].iter().enumerate() {
            let Some(p) = coarse_dofs.dof(te.edge) else { continue };
            let w = geo.basis(l, &lam);
            let v = te.sign * (w[0] * t[0] + w[1] * t[1] + w[2] * t[2]);
            if v.abs() > 1e-13 {
                trip.push((p, j, v));
            }
        }
    }
    let r0 = SparseRealMatrix::from_triplets(coarse_dofs.len(), fine_dofs.len(), trip)?;
    Ok(CoarseSpace { n_coarse_per_dir: coarse.n_per_dir(), coarse_dofs, r0 })
}

/// Galerkin coarse matrix `R0 A R0ᵀ`, symmetrized to remove roundoff
/// asymmetry.
pub fn galerkin_coarse_matrix(r0: &SparseRealMatrix, a: &SparseComplexMatrix) -> Result<SparseComplexMatrix> {
    if r0.ncols() != a.nrows() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: r0.ncols(), found: a.nrows() });
    }
    let r = r0.to_complex();
    let ar = a.matmul(&r.transpose())?;
    let c = r.matmul(&ar)?;
    let half = num_complex::Complex64::new(0.5, 0.0);
    c.linear_combination(half, &c.transpose(), half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_global, ProblemConfig};
    use crate::mesh::build_cube_mesh;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn single_subdomain_is_everything() {
        let mesh = build_cube_mesh(3).unwrap();
        let dofs = DofMap::new(&mesh, BoundaryCondition::Pec);
        let cover = build_cover(&mesh, &dofs, 1, 2).unwrap();
        assert_eq!(cover.len(), 1);
        let s = &cover.subdomains[0];
        assert_eq!(s.interior_dofs, (0..dofs.len()).collect::<Vec<_>>());
        assert!(s.pou_weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn slab_overlap_on_n4() {
        let mesh = build_cube_mesh(4).unwrap();
        let dofs = DofMap::new(&mesh, BoundaryCondition::Pec);
        let cover = build_cover(&mesh, &dofs, 2, 1).unwrap();
        assert_eq!(cover.len(), 8);
        assert_eq!(cover.subdomains[0].extended, [[0, 3]; 3]);
        assert_eq!(cover.subdomains[1].extended, [[1, 4], [0, 3], [0, 3]]);
        for s in &cover.subdomains {
            assert_eq!(s.elements.len(), 6 * 27);
        }
        // shared slab between x-neighbours is two cells thick
        let a = &cover.subdomains[0].extended[0];
        let b = &cover.subdomains[1].extended[0];
        assert_eq!(a[1] - b[0], 2);
    }

    #[test]
    fn weights_follow_multiplicity() {
        let mesh = build_cube_mesh(4).unwrap();
        let dofs = DofMap::new(&mesh, BoundaryCondition::Impedance);
        let cover = build_cover(&mesh, &dofs, 2, 1).unwrap();
        let mut sum = vec![0.0; dofs.len()];
        for s in &cover.subdomains {
            assert!(s.interior_dofs.iter().all(|d| s.closure_dofs.binary_search(d).is_ok()));
            for (&d, &w) in s.interior_dofs.iter().zip(&s.pou_weights) {
                assert!(w > 0.0 && w <= 1.0);
                sum[d] += w;
            }
        }
        assert!(sum.iter().all(|&s| (s - 1.0).abs() < 1e-15));
        assert!(cover.subdomains.iter().any(|s| s.pou_weights.contains(&0.5)));
        assert!(cover.subdomains.iter().any(|s| s.pou_weights.contains(&1.0)));
    }

    #[test]
    fn non_divisible_cover_rejected() {
        let mesh = build_cube_mesh(5).unwrap();
        let dofs = DofMap::new(&mesh, BoundaryCondition::Pec);
        assert_eq!(build_cover(&mesh, &dofs, 2, 1), Err(Error::NonDivisibleCover { n: 5, sub: 2 }));
    }

    #[test]
    fn summary_csv_has_one_row_per_subdomain() {
        let mesh = build_cube_mesh(4).unwrap();
        let dofs = DofMap::new(&mesh, BoundaryCondition::Pec);
        let cover = build_cover(&mesh, &dofs, 2, 1).unwrap();
        let mut buf = Vec::new();
        cover.write_summary_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("subdomain,elements,interior_dofs,closure_dofs"));
    }

    #[test]
    fn coarse_equal_fine_gives_identity() {
        for bc in [BoundaryCondition::Pec, BoundaryCondition::Impedance] {
            let pair = crate::mesh::build_nested_pair(3, 3).unwrap();
            let cs = build_coarse_restriction(&pair, bc).unwrap();
            let n = cs.len();
            assert_eq!(cs.r0.nnz(), n);
            for i in 0..n {
                assert!((cs.r0.get(i, i) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn half_edge_entry_matches_line_quadrature() {
        let pair = crate::mesh::build_nested_pair(2, 1).unwrap();
        let cs = build_coarse_restriction(&pair, BoundaryCondition::Impedance).unwrap();
        let (fine, coarse) = (&pair.fine, &pair.coarse);
        // coarse edge from (0,0,0) to (1,0,0), fine half edge from (0,0,0) to (0.5,0,0)
        let ce = coarse.edges().iter().position(|&[a, b]| a == 0 && b == 1).unwrap();
        let fe = fine.edges().iter().position(|&[a, b]| a == 0 && b == 1).unwrap();
        let p = cs.coarse_dofs.dof(ce).unwrap();
        let j = fe;
        let ct = (0..coarse.n_tets()).find(|&t| coarse.tet_edges()[t].iter().any(|e| e.edge == ce)).unwrap();
        let l = coarse.tet_edges()[ct].iter().position(|e| e.edge == ce).unwrap();
        let cp = coarse.tet_points(ct);
        let geo = tet_geometry(&cp).unwrap();
        let (x, w) = gauss_legendre(5);
        let mut integral = 0.0;
        for (s, ws) in x.iter().zip(&w) {
            let pt = [0.5 * s, 0.0, 0.0];
            let lam: [f64; 4] = std::array::from_fn(|i| {
                let g = geo.grads[i];
                let base = cp[(i + 1) % 4];
                g[0] * (pt[0] - base[0]) + g[1] * (pt[1] - base[1]) + g[2] * (pt[2] - base[2])
            });
            let b = geo.basis(l, &lam);
            integral += ws * 0.5 * b[0] * coarse.tet_edges()[ct][l].sign;
        }
        assert!((integral - 0.5).abs() < 1e-14);
        assert!((cs.r0.get(p, j) - integral).abs() < 1e-14);
    }

    #[test]
    fn galerkin_matches_coarse_assembly() {
        for bc in [BoundaryCondition::Pec, BoundaryCondition::Impedance] {
            let pair = crate::mesh::build_nested_pair(4, 2).unwrap();
            let cfg = ProblemConfig::new(3.0, 9.0, bc);
            let (a, _) = assemble_global(&pair.fine, &cfg).unwrap();
            let (ac, _) = assemble_global(&pair.coarse, &cfg).unwrap();
            let cs = build_coarse_restriction(&pair, bc).unwrap();
            let g = galerkin_coarse_matrix(&cs.r0, &a).unwrap();
            let scale = ac.max_abs();
            let diff = g.linear_combination(1.0.into(), &ac, (-1.0).into()).unwrap();
            assert!(diff.max_abs() / scale < 1e-10, "{bc:?}: {}", diff.max_abs() / scale);
        }
    }

    #[test]
    fn galerkin_rejects_mismatch() {
        let r0 = SparseRealMatrix::identity(3, 1.0);
        let a = SparseComplexMatrix::identity(4, 1.0.into());
        assert!(galerkin_coarse_matrix(&r0, &a).is_err());
    }
}
