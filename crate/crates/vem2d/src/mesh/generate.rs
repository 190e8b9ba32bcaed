//! Structured mesh generators for the unit square.
//!
//! All generators are deterministic functions of (family, refinement, seed);
//! only WEBM consumes the seed. Cell counts grow as Theta(N^2) and the mesh
//! size decreases as Theta(1/N) in the refinement parameter N.

use super::{boundary_edges_from_incidence, polygon_geometry, Point2, Polygon, PolygonalMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Seed used when none is given; recorded in the mesh header.
pub const DEFAULT_SEED: u64 = 42;

/// The five mesh families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeshFamily {
    /// Structured regular quadrilaterals.
    Quad,
    /// Quadrilaterals with rows of interior vertices shifted horizontally.
    Rhom,
    /// Regular hexagons clipped to the unit square.
    Hexa,
    /// HEXA with randomly perturbed interior vertices (may be non-convex).
    Webm,
    /// HEXA with a midpoint vertex on every edge; interior cells are 12-gons.
    Dode,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 5] =
        [MeshFamily::Quad, MeshFamily::Rhom, MeshFamily::Hexa, MeshFamily::Webm, MeshFamily::Dode];

    pub fn tag(&self) -> &'static str {
        match self {
            MeshFamily::Quad => "QUAD",
            MeshFamily::Rhom => "RHOM",
            MeshFamily::Hexa => "HEXA",
            MeshFamily::Webm => "WEBM",
            MeshFamily::Dode => "DODE",
        }
    }
}

impl std::str::FromStr for MeshFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "QUAD" => Ok(MeshFamily::Quad),
            "RHOM" => Ok(MeshFamily::Rhom),
            "HEXA" => Ok(MeshFamily::Hexa),
            "WEBM" => Ok(MeshFamily::Webm),
            "DODE" => Ok(MeshFamily::Dode),
            other => Err(format!("unknown mesh family '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum MeshGenError {
    #[error("refinement must be >= 1")]
    ZeroRefinement,
    #[error("generated mesh failed validation: {0}")]
    Invalid(String),
}

/// Generate a mesh with the default seed.
pub fn generate_mesh(family: MeshFamily, refinement: u32) -> Result<PolygonalMesh, MeshGenError> {
    generate_mesh_seeded(family, refinement, DEFAULT_SEED)
}

/// Generate a mesh; the seed only affects WEBM.
pub fn generate_mesh_seeded(
    family: MeshFamily,
    refinement: u32,
    seed: u64,
) -> Result<PolygonalMesh, MeshGenError> {
    if refinement == 0 {
        return Err(MeshGenError::ZeroRefinement);
    }
    let mut mesh = match family {
        MeshFamily::Quad => quad_mesh(refinement, 0.0),
        MeshFamily::Rhom => quad_mesh(refinement, 0.2),
        MeshFamily::Hexa => hexa_mesh(refinement),
        MeshFamily::Webm => webm_mesh(refinement, seed),
        MeshFamily::Dode => insert_edge_midpoints(hexa_mesh(refinement)),
    };
    mesh.family = family;
    mesh.refinement = refinement;
    mesh.seed = seed;
    let report = super::validate_mesh(&mesh);
    if !report.is_empty() {
        return Err(MeshGenError::Invalid(
            report.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        ));
    }
    Ok(mesh)
}

fn finish(points: Vec<Point2>, cells: Vec<Polygon>) -> PolygonalMesh {
    let boundary_edges = boundary_edges_from_incidence(&cells);
    PolygonalMesh {
        family: MeshFamily::Quad,
        refinement: 0,
        seed: DEFAULT_SEED,
        points,
        cells,
        boundary_edges,
    }
}

/// N x N tensor grid. `shear` shifts interior vertex rows horizontally by
/// +-shear*h with alternating sign, which produces the RHOM family.
fn quad_mesh(n: u32, shear: f64) -> PolygonalMesh {
    let n = n as usize;
    let h = 1.0 / n as f64;
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let mut x = i as f64 / n as f64;
            let y = j as f64 / n as f64;
            if shear != 0.0 && i > 0 && i < n && j > 0 && j < n {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                x += sign * shear * h;
            }
            points.push(Point2::new(x, y));
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(Polygon::new(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]));
        }
    }
    finish(points, cells)
}

/// Regular hexagonal tiling clipped to the unit square.
///
/// The row height is s = 1/M with M = 2N, so horizontal hexagon edges land
/// exactly on y = 0 and y = 1 and clipping never creates thin slivers (no
/// hexagon edge is vertical, so cuts by x = 0 and x = 1 meet edges at
/// >= 30 degrees). The column pattern is centered so both vertical
/// boundaries are cut alike. Interior cells are regular hexagons with side
/// s/sqrt(3) and diameter 2s/sqrt(3) < 1/N.
fn hexa_mesh(n: u32) -> PolygonalMesh {
    let sqrt3 = 3.0_f64.sqrt();
    let m_rows = 2 * n as i64;
    let s = 1.0 / m_rows as f64; // row height
    let a = s / sqrt3; // hexagon side = half width

    // Every lattice vertex is (x_off + ix * a/2, iy * s/2) for integers
    // (ix, iy), which makes shared vertices bit-identical across cells.
    let n_cols = (1.0 / (1.5 * a)).floor();
    let x_off = 0.5 * (1.0 - 1.5 * a * n_cols);
    let half_x = 0.5 * a;
    let half_y = 0.5 * s;
    let coord = |ix: i64, iy: i64| -> Point2 {
        let mut x = x_off + ix as f64 * half_x;
        let y = if iy == 2 * m_rows { 1.0 } else { iy as f64 * half_y };
        if x.abs() < 1e-9 * a {
            x = 0.0;
        } else if (x - 1.0).abs() < 1e-9 * a {
            x = 1.0;
        }
        Point2::new(x, y)
    };

    let q_max = ((1.0 + a) / (1.5 * a)).ceil() as i64 + 1;
    let mut key_of_point: HashMap<(u64, u64), usize> = HashMap::new();
    let mut points: Vec<Point2> = Vec::new();
    let mut cells: Vec<Polygon> = Vec::new();
    let mut intern = |p: Point2, points: &mut Vec<Point2>| -> usize {
        let key = (p.x.to_bits(), p.y.to_bits());
        *key_of_point.entry(key).or_insert_with(|| {
            points.push(p);
            points.len() - 1
        })
    };

    // CCW from the east vertex, in lattice offsets from the center.
    const OFFSETS: [(i64, i64); 6] = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)];

    for q in -1..=q_max {
        let (r_lo, r_hi) = if q % 2 == 0 { (0, m_rows) } else { (0, m_rows - 1) };
        for r in r_lo..=r_hi {
            let cx = 3 * q;
            let cy = 2 * r + (q.rem_euclid(2));
            let hex: Vec<Point2> =
                OFFSETS.iter().map(|&(dx, dy)| coord(cx + dx, cy + dy)).collect();
            if let Some(clipped) = clip_to_unit_square(&hex) {
                if polygon_geometry(&clipped).map(|g| g.area).unwrap_or(0.0) > 1e-13 * a * a {
                    let ids: Vec<usize> =
                        clipped.iter().map(|&p| intern(p, &mut points)).collect();
                    cells.push(Polygon::new(ids));
                }
            }
        }
    }
    finish(points, cells)
}

/// Sutherland-Hodgman clip against the four half-planes of (0,1)^2.
///
/// Intersections are computed after ordering the edge endpoints
/// lexicographically, so two cells clipping the same shared edge produce
/// bit-identical cut points and vertex dedup can be exact.
fn clip_to_unit_square(poly: &[Point2]) -> Option<Vec<Point2>> {
    #[derive(Clone, Copy)]
    enum Plane {
        XMin,
        XMax,
        YMin,
        YMax,
    }
    let inside = |pl: Plane, p: Point2| -> bool {
        match pl {
            Plane::XMin => p.x >= 0.0,
            Plane::XMax => p.x <= 1.0,
            Plane::YMin => p.y >= 0.0,
            Plane::YMax => p.y <= 1.0,
        }
    };
    let cut = |pl: Plane, p: Point2, q: Point2| -> Point2 {
        // Canonical endpoint order makes the arithmetic direction-independent.
        let (u, v) = if (p.x, p.y) <= (q.x, q.y) { (p, q) } else { (q, p) };
        let snap = |w: f64| {
            if w.abs() < 1e-12 {
                0.0
            } else if (w - 1.0).abs() < 1e-12 {
                1.0
            } else {
                w
            }
        };
        match pl {
            Plane::XMin | Plane::XMax => {
                let c = if matches!(pl, Plane::XMin) { 0.0 } else { 1.0 };
                let t = (c - u.x) / (v.x - u.x);
                Point2::new(c, snap(u.y + t * (v.y - u.y)))
            }
            Plane::YMin | Plane::YMax => {
                let c = if matches!(pl, Plane::YMin) { 0.0 } else { 1.0 };
                let t = (c - u.y) / (v.y - u.y);
                Point2::new(snap(u.x + t * (v.x - u.x)), c)
            }
        }
    };

    let mut current = poly.to_vec();
    for pl in [Plane::XMin, Plane::XMax, Plane::YMin, Plane::YMax] {
        let mut next = Vec::with_capacity(current.len() + 2);
        for i in 0..current.len() {
            let p = current[i];
            let q = current[(i + 1) % current.len()];
            let (pi, qi) = (inside(pl, p), inside(pl, q));
            if pi {
                next.push(p);
            }
            if pi != qi {
                next.push(cut(pl, p, q));
            }
        }
        current = next;
        if current.is_empty() {
            return None;
        }
    }
    // Drop zero-length edges created by cuts landing on existing vertices.
    let mut dedup: Vec<Point2> = Vec::with_capacity(current.len());
    for p in current {
        if dedup.last().map_or(true, |&q| q != p) {
            dedup.push(p);
        }
    }
    if dedup.len() > 1 && dedup[0] == *dedup.last().unwrap() {
        dedup.pop();
    }
    if dedup.len() < 3 {
        None
    } else {
        Some(dedup)
    }
}

fn on_boundary(p: Point2) -> bool {
    p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0
}

/// HEXA with interior vertices displaced by a deterministic pseudo-random
/// offset. Offsets are capped at 0.3 * side (below the 0.25 h bound, h
/// being the cell diameter of two sides) so cells stay simple; the cap
/// exceeds half the vertex-to-neighbor-chord distance, so non-convex
/// hexagons do occur.
fn webm_mesh(n: u32, seed: u64) -> PolygonalMesh {
    let mut mesh = hexa_mesh(n);
    let sqrt3 = 3.0_f64.sqrt();
    let side = 1.0 / (2.0 * n as f64 * sqrt3);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets = vec![(0.0, 0.0); mesh.points.len()];
    for (i, p) in mesh.points.iter().enumerate() {
        // Draw for every vertex so offsets do not depend on boundary layout.
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let radius = rng.random::<f64>() * 0.3 * side;
        if !on_boundary(*p) {
            offsets[i] = (radius * angle.cos(), radius * angle.sin());
        }
    }

    // Shrink offending offsets until every cell is simple and CCW.
    for _attempt in 0..32 {
        let moved: Vec<Point2> = mesh
            .points
            .iter()
            .zip(&offsets)
            .map(|(p, o)| Point2::new(p.x + o.0, p.y + o.1))
            .collect();
        let mut bad_vertices: Vec<usize> = Vec::new();
        for cell in &mesh.cells {
            let pts: Vec<Point2> = cell.vertices.iter().map(|&v| moved[v]).collect();
            let ok = polygon_geometry(&pts).map(|g| g.area > 0.0).unwrap_or(false)
                && super::cell_is_simple(&pts);
            if !ok {
                bad_vertices.extend_from_slice(&cell.vertices);
            }
        }
        if bad_vertices.is_empty() {
            mesh.points = moved;
            return mesh;
        }
        for v in bad_vertices {
            offsets[v].0 *= 0.5;
            offsets[v].1 *= 0.5;
        }
    }
    // Offsets collapse to zero in the limit, so this is unreachable for any
    // valid HEXA input; fall back to the unperturbed mesh.
    mesh
}

/// Insert a midpoint vertex on every edge; interior hexagons become 12-gons.
fn insert_edge_midpoints(mesh: PolygonalMesh) -> PolygonalMesh {
    let mut points = mesh.points.clone();
    let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cells = Vec::with_capacity(mesh.cells.len());
    for cell in &mesh.cells {
        let m = cell.len();
        let mut verts = Vec::with_capacity(2 * m);
        for e in 0..m {
            let (va, vb) = cell.edge(e);
            let key = (va.min(vb), va.max(vb));
            let mid = *midpoint_of.entry(key).or_insert_with(|| {
                points.push(points[va].midpoint(points[vb]));
                points.len() - 1
            });
            verts.push(cell.vertices[e]);
            verts.push(mid);
        }
        cells.push(Polygon::new(verts));
    }
    finish(points, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;
    use approx::assert_relative_eq;

    fn total_area(mesh: &PolygonalMesh) -> f64 {
        (0..mesh.cells.len()).map(|c| mesh.cell_geometry(c).unwrap().area).sum()
    }

    #[test]
    fn quad_n2_structure() {
        let mesh = generate_mesh(MeshFamily::Quad, 2).unwrap();
        assert_eq!(mesh.cells.len(), 4);
        assert_eq!(mesh.points.len(), 9);
        for c in 0..4 {
            let g = mesh.cell_geometry(c).unwrap();
            assert_relative_eq!(g.area, 0.25);
            assert_relative_eq!(g.diameter, 0.5 * 2.0_f64.sqrt());
        }
    }

    #[test]
    fn zero_refinement_rejected() {
        assert!(matches!(generate_mesh(MeshFamily::Quad, 0), Err(MeshGenError::ZeroRefinement)));
    }

    #[test]
    fn all_families_tile_and_validate() {
        for family in MeshFamily::ALL {
            for n in [1, 2, 3, 4, 7] {
                let mesh = generate_mesh(family, n).unwrap();
                assert!(
                    (total_area(&mesh) - 1.0).abs() < 1e-12,
                    "{family:?} N={n}: area {}",
                    total_area(&mesh)
                );
                assert!(validate_mesh(&mesh).is_empty(), "{family:?} N={n}");
            }
        }
    }

    #[test]
    fn refinement_shrinks_mesh_size() {
        for family in MeshFamily::ALL {
            for n in [1, 2, 4, 8] {
                let coarse = generate_mesh(family, n).unwrap().mesh_size();
                let fine = generate_mesh(family, 2 * n).unwrap().mesh_size();
                assert!(fine < coarse, "{family:?}: h({}) = {fine} !< h({n}) = {coarse}", 2 * n);
            }
        }
    }

    #[test]
    fn hexa_interior_cells_are_regular_hexagons() {
        let mesh = generate_mesh(MeshFamily::Hexa, 4).unwrap();
        let boundary_cells: std::collections::HashSet<usize> =
            mesh.boundary_edges.iter().map(|b| b.cell).collect();
        let mut interior = 0;
        for c in 0..mesh.cells.len() {
            let pts = mesh.cell_points(c);
            if boundary_cells.contains(&c) || pts.iter().any(|p| on_boundary(*p)) {
                continue;
            }
            interior += 1;
            assert_eq!(pts.len(), 6, "cell {c}");
            let side0 = pts[0].distance(pts[1]);
            for e in 0..6 {
                assert_relative_eq!(pts[e].distance(pts[(e + 1) % 6]), side0, max_relative = 1e-12);
            }
        }
        assert!(interior > 0);
    }

    #[test]
    fn dode_interior_cells_have_12_vertices() {
        for n in [2, 4] {
            let mesh = generate_mesh(MeshFamily::Dode, n).unwrap();
            let mut interior = 0;
            for c in 0..mesh.cells.len() {
                let pts = mesh.cell_points(c);
                if pts.iter().any(|p| on_boundary(*p)) {
                    continue;
                }
                interior += 1;
                assert_eq!(pts.len(), 12, "cell {c} of DODE N={n}");
            }
            assert!(interior > 0, "DODE N={n} has no interior cells");
        }
    }

    #[test]
    fn webm_is_deterministic_and_contains_nonconvex_cell() {
        let a = generate_mesh_seeded(MeshFamily::Webm, 4, 42).unwrap();
        let b = generate_mesh_seeded(MeshFamily::Webm, 4, 42).unwrap();
        assert_eq!(a.points, b.points);
        let c = generate_mesh_seeded(MeshFamily::Webm, 4, 43).unwrap();
        assert_ne!(a.points, c.points);

        let nonconvex = (0..a.cells.len()).any(|ci| {
            let pts = a.cell_points(ci);
            let m = pts.len();
            (0..m).any(|i| {
                let p = pts[(i + m - 1) % m];
                let q = pts[i];
                let r = pts[(i + 1) % m];
                (q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y) < 0.0
            })
        });
        assert!(nonconvex, "expected at least one non-convex WEBM cell");
    }

    #[test]
    fn cell_counts_grow_quadratically() {
        for family in MeshFamily::ALL {
            let c4 = generate_mesh(family, 4).unwrap().cells.len() as f64;
            let c8 = generate_mesh(family, 8).unwrap().cells.len() as f64;
            let ratio = c8 / c4;
            assert!((3.0..5.5).contains(&ratio), "{family:?}: ratio {ratio}");
        }
    }
}
