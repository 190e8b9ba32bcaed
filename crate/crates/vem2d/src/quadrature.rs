//! Numerical quadrature: Gauss-Legendre line rules, triangle rules, and
//! sub-triangulation of simple polygons by ear clipping.
//!
//! Line rules are used for the boundary integrals (tractions and the
//! divergence-theorem reduction of area integrals). Triangle rules back the
//! volume quadrature needed for non-polynomial integrands (load moments and
//! energy errors of trigonometric exact solutions) and serve as the
//! independent oracle for the exact polygon integration.

use crate::mesh::Point2;
use std::sync::OnceLock;

const MAX_GL_POINTS: usize = 24;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Exact for polynomials of degree <= 2n - 1. Computed once by Newton
/// iteration on the Legendre recurrence and cached.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    assert!(n >= 1 && n <= MAX_GL_POINTS, "unsupported rule size {n}");
    static TABLES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| (0..=MAX_GL_POINTS).map(compute_gauss_legendre).collect());
    &tables[n]
}

fn compute_gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    if n == 0 {
        return Vec::new();
    }
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre points mapped to [0, 1] with weights summing to 1.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// A quadrature point in physical coordinates.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub point: Point2,
    pub weight: f64,
}

/// Rule selector for triangle quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangleRule {
    /// Symmetric 7-point rule, exact for degree 5. Cheap default for smooth
    /// integrands (load moments).
    Degree5,
    /// Collapsed-coordinate Gauss rule with q x q points, exact for
    /// polynomials of total degree <= 2q - 2.
    Collapsed(usize),
}

/// Barycentric coordinates and weights of the symmetric 7-point degree-5 rule.
const TRI7: [(f64, f64, f64); 7] = [
    (1.0 / 3.0, 1.0 / 3.0, 0.225),
    (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506),
    (0.470_142_064_105_115, 0.059_715_871_789_770, 0.132_394_152_788_506),
    (0.470_142_064_105_115, 0.470_142_064_105_115, 0.132_394_152_788_506),
    (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827),
    (0.101_286_507_323_456, 0.797_426_985_353_087, 0.125_939_180_544_827),
    (0.101_286_507_323_456, 0.101_286_507_323_456, 0.125_939_180_544_827),
];

/// Quadrature points for a physical triangle (a, b, c).
pub fn triangle_quadrature(a: Point2, b: Point2, c: Point2, rule: TriangleRule) -> Vec<QuadPoint> {
    let area2 = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let area = 0.5 * area2;
    if area == 0.0 {
        return Vec::new();
    }
    match rule {
        TriangleRule::Degree5 => TRI7
            .iter()
            .map(|&(l1, l2, w)| {
                let l3 = 1.0 - l1 - l2;
                QuadPoint {
                    point: Point2 {
                        x: l1 * a.x + l2 * b.x + l3 * c.x,
                        y: l1 * a.y + l2 * b.y + l3 * c.y,
                    },
                    weight: w * area,
                }
            })
            .collect(),
        TriangleRule::Collapsed(q) => {
            // Map the unit square to the reference triangle by
            // (u, v) = (xi, eta (1 - xi)); the Jacobian (1 - xi) keeps the
            // rule polynomially exact.
            let gl = gauss_legendre_unit(q);
            let mut pts = Vec::with_capacity(q * q);
            for &(xi, wx) in &gl {
                for &(eta, wy) in &gl {
                    let u = xi;
                    let v = eta * (1.0 - xi);
                    let w = wx * wy * (1.0 - xi);
                    pts.push(QuadPoint {
                        point: Point2 {
                            x: a.x + (b.x - a.x) * u + (c.x - a.x) * v,
                            y: a.y + (b.y - a.y) * u + (c.y - a.y) * v,
                        },
                        weight: w * area2,
                    });
                }
            }
            pts
        }
    }
}

/// Triangulate a simple CCW polygon by ear clipping.
///
/// Returns index triples into `points`. Handles non-convex polygons and
/// collinear consecutive vertices (edge-midpoint meshes produce those).
pub fn ear_clip(points: &[Point2]) -> Vec<[usize; 3]> {
    let n = points.len();
    assert!(n >= 3, "polygon needs at least 3 vertices");
    let scale: f64 = {
        let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in points {
            lo_x = lo_x.min(p.x);
            hi_x = hi_x.max(p.x);
            lo_y = lo_y.min(p.y);
            hi_y = hi_y.max(p.y);
        }
        (hi_x - lo_x).max(hi_y - lo_y).max(f64::MIN_POSITIVE)
    };
    let eps = 1e-12 * scale * scale;

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut triangles = Vec::with_capacity(n - 2);

    let cross_at = |rem: &[usize], i: usize| -> f64 {
        let m = rem.len();
        let p = points[rem[(i + m - 1) % m]];
        let q = points[rem[i]];
        let r = points[rem[(i + 1) % m]];
        (q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y)
    };

    while remaining.len() > 3 {
        let m = remaining.len();
        let mut clipped = false;
        // Pass 1: strictly convex ears; pass 2: allow degenerate (collinear) ears.
        for pass in 0..2 {
            let threshold = if pass == 0 { eps } else { -eps };
            for i in 0..m {
                let c = cross_at(&remaining, i);
                if c <= threshold {
                    continue;
                }
                let ia = remaining[(i + m - 1) % m];
                let ib = remaining[i];
                let ic = remaining[(i + 1) % m];
                let (a, b, cc) = (points[ia], points[ib], points[ic]);
                let blocked = remaining.iter().any(|&j| {
                    j != ia && j != ib && j != ic && point_strictly_inside(points[j], a, b, cc, eps)
                });
                if !blocked {
                    triangles.push([ia, ib, ic]);
                    remaining.remove(i);
                    clipped = true;
                    break;
                }
            }
            if clipped {
                break;
            }
        }
        assert!(clipped, "ear clipping failed; polygon is not simple");
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);
    triangles
}

fn point_strictly_inside(p: Point2, a: Point2, b: Point2, c: Point2, eps: f64) -> bool {
    let d1 = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    let d2 = (c.x - b.x) * (p.y - b.y) - (p.x - b.x) * (c.y - b.y);
    let d3 = (a.x - c.x) * (p.y - c.y) - (p.x - c.x) * (a.y - c.y);
    d1 > eps && d2 > eps && d3 > eps
}

/// Quadrature over a simple CCW polygon by ear clipping into triangles.
///
/// `subdivisions` uniformly splits every triangle into 4^level children
/// before applying the rule; used for convergence checks of non-polynomial
/// integrands.
pub fn polygon_quadrature(
    points: &[Point2],
    rule: TriangleRule,
    subdivisions: usize,
) -> Vec<QuadPoint> {
    let mut out = Vec::new();
    for tri in ear_clip(points) {
        let mut stack = vec![(points[tri[0]], points[tri[1]], points[tri[2]], subdivisions)];
        while let Some((a, b, c, level)) = stack.pop() {
            if level == 0 {
                out.extend(triangle_quadrature(a, b, c, rule));
            } else {
                let ab = a.midpoint(b);
                let bc = b.midpoint(c);
                let ca = c.midpoint(a);
                stack.push((a, ab, ca, level - 1));
                stack.push((ab, b, bc, level - 1));
                stack.push((ca, bc, c, level - 1));
                stack.push((ab, bc, ca, level - 1));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_monomials_exactly() {
        for n in 1..=10 {
            let rule = gauss_legendre(n);
            for d in 0..=(2 * n - 1) {
                let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                let approx: f64 = rule.iter().map(|&(x, w)| w * x.powi(d as i32)).sum();
                assert_relative_eq!(approx, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn triangle_rules_integrate_polynomials() {
        let a = Point2 { x: 0.0, y: 0.0 };
        let b = Point2 { x: 1.0, y: 0.0 };
        let c = Point2 { x: 0.0, y: 1.0 };
        // int_T x^i y^j dA = i! j! / (i + j + 2)! on the unit triangle
        let exact = |i: u32, j: u32| -> f64 {
            let fact = |k: u32| (1..=k).map(|v| v as f64).product::<f64>().max(1.0);
            fact(i) * fact(j) / fact(i + j + 2)
        };
        for &(rule, max_deg) in &[
            (TriangleRule::Degree5, 5),
            (TriangleRule::Collapsed(4), 6),
            (TriangleRule::Collapsed(6), 10),
        ] {
            for i in 0..=max_deg {
                for j in 0..=(max_deg - i) {
                    let val: f64 = triangle_quadrature(a, b, c, rule)
                        .iter()
                        .map(|qp| qp.weight * qp.point.x.powi(i as i32) * qp.point.y.powi(j as i32))
                        .sum();
                    assert_relative_eq!(val, exact(i, j), epsilon = 1e-14, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn ear_clip_handles_concave_and_collinear() {
        // L-shaped hexagon, area 0.75.
        let lshape = [
            Point2 { x: 0.0, y: 0.0 },
            Point2 { x: 1.0, y: 0.0 },
            Point2 { x: 1.0, y: 0.5 },
            Point2 { x: 0.5, y: 0.5 },
            Point2 { x: 0.5, y: 1.0 },
            Point2 { x: 0.0, y: 1.0 },
        ];
        let area: f64 = polygon_quadrature(&lshape, TriangleRule::Degree5, 0)
            .iter()
            .map(|qp| qp.weight)
            .sum();
        assert_relative_eq!(area, 0.75, epsilon = 1e-14);

        // Square with collinear midpoint vertices on every edge.
        let sq = [
            (0.0, 0.0),
            (0.5, 0.0),
            (1.0, 0.0),
            (1.0, 0.5),
            (1.0, 1.0),
            (0.5, 1.0),
            (0.0, 1.0),
            (0.0, 0.5),
        ]
        .map(|(x, y)| Point2 { x, y });
        let area: f64 = polygon_quadrature(&sq, TriangleRule::Degree5, 1)
            .iter()
            .map(|qp| qp.weight)
            .sum();
        assert_relative_eq!(area, 1.0, epsilon = 1e-14);
    }
}
