//! Quadrature on tetrahedra and triangles.
//!
//! General-order tetrahedron rules are collapsed (Duffy) products of
//! Gauss–Legendre rules, optionally composite along each collapsed axis so
//! that sharply peaked integrands can be resolved on large elements.

use crate::mesh::Point;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// A rule on the reference tetrahedron: barycentric points and weights that
/// sum to one (multiply by the element volume).
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl TetRule {
    /// Collapsed Gauss product with `q` points per axis on each of `m`
    /// subintervals. Exact for polynomials of degree `2q - 3`.
    pub fn collapsed(q: usize, m: usize) -> Self {
        let (gx, gw) = gauss_legendre(q);
        let m = m.max(1);
        let mut nodes = Vec::with_capacity(q * m);
        for s in 0..m {
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(((s as f64 + x) / m as f64, w / m as f64));
            }
        }
        let mut points = Vec::with_capacity(nodes.len().pow(3));
        let mut weights = Vec::with_capacity(nodes.len().pow(3));
        for &(u, wu) in &nodes {
            for &(v, wv) in &nodes {
                for &(t, wt) in &nodes {
                    let x = u;
                    let y = (1.0 - u) * v;
                    let z = (1.0 - u) * (1.0 - v) * t;
                    let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                    points.push([1.0 - x - y - z, x, y, z]);
                    weights.push(6.0 * wu * wv * wt * jac);
                }
            }
        }
        Self { points, weights }
    }

    /// Symmetric 4-point rule, exact for quadratics.
    pub fn degree2() -> Self {
        let a = 0.585_410_196_624_968_5;
        let b = 0.138_196_601_125_010_5;
        Self { points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]], weights: vec![0.25; 4] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Physical location of barycentric point `lam` in a tetrahedron.
#[inline]
pub fn map_point(p: &[Point; 4], lam: &[f64; 4]) -> Point {
    let mut x = [0.0; 3];
    for i in 0..4 {
        for d in 0..3 {
            x[d] += lam[i] * p[i][d];
        }
    }
    x
}

/// Triangle rule with the three edge midpoints, exact for quadratics.
/// Barycentric points; weights sum to one.
pub fn triangle_midpoint_rule() -> ([[f64; 3]; 3], [f64; 3]) {
    ([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]], [1.0 / 3.0; 3])
}
