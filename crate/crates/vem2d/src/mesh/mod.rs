//! Polygonal meshes of the unit square.
//!
//! A mesh is a list of points, a list of counter-clockwise polygonal cells
//! referencing them, and the list of edges that lie on the domain boundary.
//! Meshes are immutable after construction and safe to share across threads.
//!
//! Five structured families are provided (see [`generate::generate_mesh`]):
//! regular quadrilaterals (QUAD), row-sheared quadrilaterals (RHOM), regular
//! hexagons clipped to the square (HEXA), randomly perturbed hexagons (WEBM)
//! and hexagons with edge midpoints inserted so interior cells become
//! 12-gons (DODE).

mod generate;
mod io;

pub use generate::{generate_mesh, generate_mesh_seeded, MeshFamily, MeshGenError, DEFAULT_SEED};
pub use io::{mesh_from_document, mesh_from_json, mesh_to_document, mesh_to_json, MeshDocument};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the plane. Coordinates are dimensionless domain units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// A polygonal cell: counter-clockwise vertex indices into the mesh points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<usize>,
}

impl Polygon {
    pub fn new(vertices: Vec<usize>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Local edge e runs from vertex e to vertex (e + 1) mod m.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        let m = self.vertices.len();
        (self.vertices[e], self.vertices[(e + 1) % m])
    }
}

/// An edge of a cell lying on the domain boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub cell: usize,
    pub local_edge: usize,
}

/// A polygonal tiling of the unit square (0,1)^2.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalMesh {
    pub family: MeshFamily,
    pub refinement: u32,
    pub seed: u64,
    pub points: Vec<Point2>,
    pub cells: Vec<Polygon>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate polygon (area {area:.3e} <= 1e-14)")]
    DegeneratePolygon { area: f64 },
    #[error("zero-length edge {edge} (length {length:.3e})")]
    ZeroLengthEdge { edge: usize, length: f64 },
    #[error("polygon has {count} vertices, need at least 3")]
    TooFewVertices { count: usize },
}

/// Area, centroid and diameter of a simple CCW polygon.
#[derive(Clone, Copy, Debug)]
pub struct PolygonGeometry {
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
}

/// Shoelace area (signed), area-weighted centroid and max vertex distance.
pub fn polygon_geometry(points: &[Point2]) -> Result<PolygonGeometry, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewVertices { count: points.len() });
    }
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..points.len() {
        let p = points[i];
        let q = points[(i + 1) % points.len()];
        let w = p.x * q.y - q.x * p.y;
        area2 += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    let area = 0.5 * area2;
    if area <= 1e-14 {
        return Err(GeometryError::DegeneratePolygon { area });
    }
    let centroid = Point2::new(cx / (6.0 * area), cy / (6.0 * area));
    let mut diameter: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            diameter = diameter.max(points[i].distance(points[j]));
        }
    }
    Ok(PolygonGeometry { area, centroid, diameter })
}

/// Unit outward normal of a local edge of a CCW polygon (tangent rotated by
/// -90 degrees).
pub fn edge_normal(points: &[Point2], edge: usize) -> Result<(f64, f64), GeometryError> {
    let p = points[edge];
    let q = points[(edge + 1) % points.len()];
    let (tx, ty) = (q.x - p.x, q.y - p.y);
    let len = tx.hypot(ty);
    if len < 1e-14 {
        return Err(GeometryError::ZeroLengthEdge { edge, length: len });
    }
    Ok((ty / len, -tx / len))
}

impl PolygonalMesh {
    /// Coordinates of a cell's vertices, in CCW order.
    pub fn cell_points(&self, cell: usize) -> Vec<Point2> {
        self.cells[cell].vertices.iter().map(|&v| self.points[v]).collect()
    }

    pub fn cell_geometry(&self, cell: usize) -> Result<PolygonGeometry, GeometryError> {
        polygon_geometry(&self.cell_points(cell))
    }

    /// Largest cell diameter; the mesh-size parameter h.
    pub fn mesh_size(&self) -> f64 {
        (0..self.cells.len())
            .filter_map(|c| self.cell_geometry(c).ok())
            .map(|g| g.diameter)
            .fold(0.0, f64::max)
    }

    /// Every undirected edge with the cells using it: (cell, local edge,
    /// oriented as stored).
    fn edge_incidence(&self) -> std::collections::HashMap<(usize, usize), Vec<(usize, usize, bool)>> {
        let mut map: std::collections::HashMap<(usize, usize), Vec<(usize, usize, bool)>> =
            std::collections::HashMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for e in 0..cell.len() {
                let (a, b) = cell.edge(e);
                let key = (a.min(b), a.max(b));
                map.entry(key).or_default().push((c, e, a < b));
            }
        }
        map
    }
}

/// A single invariant violation found by [`validate_mesh`].
#[derive(Clone, Debug, PartialEq)]
pub enum MeshViolation {
    /// Cell is degenerate, has fewer than 3 vertices, or is wrongly oriented.
    BadCell { cell: usize, reason: String },
    /// Cell boundary self-intersects.
    NotSimple { cell: usize },
    /// Sum of cell areas does not match the domain area.
    AreaMismatch { total: f64 },
    /// An edge is shared by a number of cells other than 1 or 2, or by 2
    /// cells with the same orientation.
    BadEdgeIncidence { edge: (usize, usize), count: usize, reason: String },
    /// A boundary-edge endpoint does not lie on the boundary of (0,1)^2.
    BoundaryEdgeOffDomain { cell: usize, local_edge: usize },
    /// boundary_edges disagrees with the edges incident to exactly one cell.
    BoundaryListMismatch { missing: usize, spurious: usize },
    /// A point coordinate is not finite.
    NonFinitePoint { point: usize },
}

impl std::fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshViolation::BadCell { cell, reason } => write!(f, "cell {cell}: {reason}"),
            MeshViolation::NotSimple { cell } => write!(f, "cell {cell}: self-intersecting"),
            MeshViolation::AreaMismatch { total } => {
                write!(f, "cell areas sum to {total}, expected 1")
            }
            MeshViolation::BadEdgeIncidence { edge, count, reason } => {
                write!(f, "edge {edge:?} used by {count} cells: {reason}")
            }
            MeshViolation::BoundaryEdgeOffDomain { cell, local_edge } => {
                write!(f, "boundary edge (cell {cell}, edge {local_edge}) not on domain boundary")
            }
            MeshViolation::BoundaryListMismatch { missing, spurious } => {
                write!(f, "boundary edge list: {missing} missing, {spurious} spurious")
            }
            MeshViolation::NonFinitePoint { point } => write!(f, "point {point} is not finite"),
        }
    }
}

fn on_unit_square_boundary(p: Point2, tol: f64) -> bool {
    let near = |v: f64, t: f64| (v - t).abs() <= tol;
    ((near(p.x, 0.0) || near(p.x, 1.0)) && p.y >= -tol && p.y <= 1.0 + tol)
        || ((near(p.y, 0.0) || near(p.y, 1.0)) && p.x >= -tol && p.x <= 1.0 + tol)
}

fn segments_properly_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y);
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub(crate) fn cell_is_simple(points: &[Point2]) -> bool {
    let m = points.len();
    for i in 0..m {
        let (a, b) = (points[i], points[(i + 1) % m]);
        for j in (i + 1)..m {
            // Skip adjacent edges; they share an endpoint by construction.
            if j == i || (j + 1) % m == i || (i + 1) % m == j {
                continue;
            }
            let (c, d) = (points[j], points[(j + 1) % m]);
            if segments_properly_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Check every mesh invariant; an empty report means the mesh is valid.
/// Violations are data, not failures.
pub fn validate_mesh(mesh: &PolygonalMesh) -> Vec<MeshViolation> {
    let mut report = Vec::new();

    for (i, p) in mesh.points.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() {
            report.push(MeshViolation::NonFinitePoint { point: i });
        }
    }

    let mut total_area = 0.0;
    for (c, cell) in mesh.cells.iter().enumerate() {
        if cell.len() < 3 {
            report.push(MeshViolation::BadCell {
                cell: c,
                reason: format!("{} vertices", cell.len()),
            });
            continue;
        }
        if cell.vertices.iter().any(|&v| v >= mesh.points.len()) {
            report.push(MeshViolation::BadCell { cell: c, reason: "vertex index out of range".into() });
            continue;
        }
        let pts = mesh.cell_points(c);
        match polygon_geometry(&pts) {
            Ok(g) => total_area += g.area,
            Err(e) => {
                report.push(MeshViolation::BadCell { cell: c, reason: e.to_string() });
                continue;
            }
        }
        if !cell_is_simple(&pts) {
            report.push(MeshViolation::NotSimple { cell: c });
        }
    }

    if !mesh.cells.is_empty() && (total_area - 1.0).abs() > 1e-12 {
        report.push(MeshViolation::AreaMismatch { total: total_area });
    }
    if mesh.cells.is_empty() {
        report.push(MeshViolation::AreaMismatch { total: 0.0 });
    }

    let incidence = mesh.edge_incidence();
    let mut boundary_from_incidence = std::collections::HashSet::new();
    for (edge, uses) in &incidence {
        match uses.len() {
            1 => {
                boundary_from_incidence.insert((uses[0].0, uses[0].1));
            }
            2 => {
                if uses[0].2 == uses[1].2 {
                    report.push(MeshViolation::BadEdgeIncidence {
                        edge: *edge,
                        count: 2,
                        reason: "same orientation on both sides".into(),
                    });
                }
            }
            n => {
                report.push(MeshViolation::BadEdgeIncidence {
                    edge: *edge,
                    count: n,
                    reason: "expected 1 or 2 incident cells".into(),
                });
            }
        }
    }

    let listed: std::collections::HashSet<(usize, usize)> =
        mesh.boundary_edges.iter().map(|b| (b.cell, b.local_edge)).collect();
    let missing = boundary_from_incidence.difference(&listed).count();
    let spurious = listed.difference(&boundary_from_incidence).count();
    if missing > 0 || spurious > 0 {
        report.push(MeshViolation::BoundaryListMismatch { missing, spurious });
    }

    let tol = 1e-12;
    for be in &mesh.boundary_edges {
        if be.cell >= mesh.cells.len() || be.local_edge >= mesh.cells[be.cell].len() {
            report.push(MeshViolation::BoundaryEdgeOffDomain { cell: be.cell, local_edge: be.local_edge });
            continue;
        }
        let (a, b) = mesh.cells[be.cell].edge(be.local_edge);
        if !(on_unit_square_boundary(mesh.points[a], tol) && on_unit_square_boundary(mesh.points[b], tol)) {
            report.push(MeshViolation::BoundaryEdgeOffDomain { cell: be.cell, local_edge: be.local_edge });
        }
    }

    report
}

/// Recompute the boundary-edge list from edge incidence.
pub(crate) fn boundary_edges_from_incidence(
    cells: &[Polygon],
) -> Vec<BoundaryEdge> {
    let mut map: std::collections::HashMap<(usize, usize), Vec<(usize, usize)>> =
        std::collections::HashMap::new();
    for (c, cell) in cells.iter().enumerate() {
        for e in 0..cell.len() {
            let (a, b) = cell.edge(e);
            map.entry((a.min(b), a.max(b))).or_default().push((c, e));
        }
    }
    let mut edges: Vec<BoundaryEdge> = map
        .into_iter()
        .filter(|(_, uses)| uses.len() == 1)
        .map(|(_, uses)| BoundaryEdge { cell: uses[0].0, local_edge: uses[0].1 })
        .collect();
    edges.sort_by_key(|b| (b.cell, b.local_edge));
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_geometry() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let g = polygon_geometry(&sq).unwrap();
        assert_relative_eq!(g.area, 1.0);
        assert_relative_eq!(g.centroid.x, 0.5);
        assert_relative_eq!(g.centroid.y, 0.5);
        assert_relative_eq!(g.diameter, 2.0_f64.sqrt());
    }

    #[test]
    fn triangle_geometry() {
        let tri = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let g = polygon_geometry(&tri).unwrap();
        assert_relative_eq!(g.area, 0.5);
        assert_relative_eq!(g.centroid.x, 1.0 / 3.0);
        assert_relative_eq!(g.centroid.y, 1.0 / 3.0);
    }

    #[test]
    fn lshape_area_by_hand() {
        let l = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert_relative_eq!(polygon_geometry(&l).unwrap().area, 0.75);
    }

    #[test]
    fn degenerate_polygon_rejected() {
        let line = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        assert!(matches!(polygon_geometry(&line), Err(GeometryError::DegeneratePolygon { .. })));
    }

    #[test]
    fn unit_square_edge_normals() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(edge_normal(&sq, 0).unwrap(), (0.0, -1.0));
        assert_eq!(edge_normal(&sq, 1).unwrap(), (1.0, 0.0));
        assert_eq!(edge_normal(&sq, 2).unwrap(), (0.0, 1.0));
        assert_eq!(edge_normal(&sq, 3).unwrap(), (-1.0, 0.0));
    }

    #[test]
    fn diagonal_edge_normal() {
        let tri = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
        let (nx, ny) = edge_normal(&tri, 0).unwrap();
        let s = 0.5_f64.sqrt();
        assert_relative_eq!(nx, s, epsilon = 1e-15);
        assert_relative_eq!(ny, -s, epsilon = 1e-15);
    }

    #[test]
    fn zero_length_edge_is_error() {
        let bad = [Point2::new(0.0, 0.0), Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)];
        assert!(matches!(edge_normal(&bad, 0), Err(GeometryError::ZeroLengthEdge { .. })));
    }

    #[test]
    fn closed_polygon_normals_sum_to_zero() {
        // For every cell of a generated mesh: sum over edges of n * length = 0.
        let mesh = generate_mesh(MeshFamily::Hexa, 3).unwrap();
        for c in 0..mesh.cells.len() {
            let pts = mesh.cell_points(c);
            let (mut sx, mut sy) = (0.0, 0.0);
            for e in 0..pts.len() {
                let (nx, ny) = edge_normal(&pts, e).unwrap();
                let len = pts[e].distance(pts[(e + 1) % pts.len()]);
                sx += nx * len;
                sy += ny * len;
            }
            assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13, "cell {c}: ({sx}, {sy})");
        }
    }

    #[test]
    fn validation_flags_reversed_cell() {
        let mut mesh = generate_mesh(MeshFamily::Quad, 4).unwrap();
        assert!(validate_mesh(&mesh).is_empty());
        mesh.cells[5].vertices.reverse();
        let report = validate_mesh(&mesh);
        assert!(report.iter().any(|v| matches!(v, MeshViolation::BadCell { cell: 5, .. })));
    }

    #[test]
    fn validation_flags_duplicated_cell() {
        let mut mesh = generate_mesh(MeshFamily::Quad, 2).unwrap();
        mesh.cells.push(mesh.cells[0].clone());
        let report = validate_mesh(&mesh);
        assert!(report.iter().any(|v| matches!(v, MeshViolation::AreaMismatch { .. })));
        assert!(report.iter().any(|v| matches!(v, MeshViolation::BadEdgeIncidence { .. })));
    }
}
