//! Mesh document format.
//!
//! A mesh is serialized as a UTF-8 JSON document with LF line endings and
//! the fixed field names below:
//!
//! ```text
//! {
//!   "family": "QUAD",          // one of QUAD RHOM HEXA WEBM DODE
//!   "refinement": 4,
//!   "seed": 42,
//!   "points": [[x, y], ...],
//!   "cells": [[v0, v1, ...], ...],          // CCW vertex indices
//!   "boundary_edges": [[cell, local_edge], ...]
//! }
//! ```
//!
//! Round-tripping is bit-exact: indices are integers and coordinates use
//! shortest round-trip float formatting.

use super::{BoundaryEdge, MeshFamily, Point2, Polygon, PolygonalMesh};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Serialized form of a [`PolygonalMesh`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshDocument {
    pub family: MeshFamily,
    pub refinement: u32,
    pub seed: u64,
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    pub boundary_edges: Vec<[usize; 2]>,
}

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("malformed mesh document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cell {cell} references vertex {index} but there are only {points} points")]
    VertexOutOfRange { cell: usize, index: usize, points: usize },
    #[error("boundary edge {entry} references cell {cell} out of range")]
    BoundaryCellOutOfRange { entry: usize, cell: usize },
    #[error("boundary edge {entry} references local edge {local_edge} of cell {cell} with {len} edges")]
    BoundaryEdgeOutOfRange { entry: usize, cell: usize, local_edge: usize, len: usize },
    #[error("document has an empty cell list")]
    EmptyCells,
}

pub fn mesh_to_document(mesh: &PolygonalMesh) -> MeshDocument {
    MeshDocument {
        family: mesh.family,
        refinement: mesh.refinement,
        seed: mesh.seed,
        points: mesh.points.iter().map(|p| [p.x, p.y]).collect(),
        cells: mesh.cells.iter().map(|c| c.vertices.clone()).collect(),
        boundary_edges: mesh.boundary_edges.iter().map(|b| [b.cell, b.local_edge]).collect(),
    }
}

pub fn mesh_from_document(doc: MeshDocument) -> Result<PolygonalMesh, MeshIoError> {
    if doc.cells.is_empty() {
        return Err(MeshIoError::EmptyCells);
    }
    for (c, cell) in doc.cells.iter().enumerate() {
        if let Some(&index) = cell.iter().find(|&&v| v >= doc.points.len()) {
            return Err(MeshIoError::VertexOutOfRange { cell: c, index, points: doc.points.len() });
        }
    }
    for (entry, be) in doc.boundary_edges.iter().enumerate() {
        let [cell, local_edge] = *be;
        if cell >= doc.cells.len() {
            return Err(MeshIoError::BoundaryCellOutOfRange { entry, cell });
        }
        if local_edge >= doc.cells[cell].len() {
            return Err(MeshIoError::BoundaryEdgeOutOfRange {
                entry,
                cell,
                local_edge,
                len: doc.cells[cell].len(),
            });
        }
    }
    Ok(PolygonalMesh {
        family: doc.family,
        refinement: doc.refinement,
        seed: doc.seed,
        points: doc.points.iter().map(|&[x, y]| Point2::new(x, y)).collect(),
        cells: doc.cells.into_iter().map(Polygon::new).collect(),
        boundary_edges: doc
            .boundary_edges
            .into_iter()
            .map(|[cell, local_edge]| BoundaryEdge { cell, local_edge })
            .collect(),
    })
}

/// Serialize to the JSON document text (LF line endings).
pub fn mesh_to_json(mesh: &PolygonalMesh) -> String {
    let mut s = serde_json::to_string_pretty(&mesh_to_document(mesh))
        .expect("mesh serialization cannot fail");
    s.push('\n');
    s
}

/// Parse a JSON document; parse errors carry line/column information.
pub fn mesh_from_json(text: &str) -> Result<PolygonalMesh, MeshIoError> {
    let doc: MeshDocument = serde_json::from_str(text)?;
    mesh_from_document(doc)
}

#[cfg(test)]
mod tests {
    use super::super::generate_mesh;
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        for family in MeshFamily::ALL {
            let mesh = generate_mesh(family, 2).unwrap();
            let back = mesh_from_json(&mesh_to_json(&mesh)).unwrap();
            assert_eq!(mesh, back, "{family:?}");
        }
    }

    #[test]
    fn out_of_range_vertex_is_error() {
        let mesh = generate_mesh(MeshFamily::Quad, 2).unwrap();
        let mut doc = mesh_to_document(&mesh);
        doc.cells[0][0] = 999;
        assert!(matches!(
            mesh_from_document(doc),
            Err(MeshIoError::VertexOutOfRange { cell: 0, index: 999, .. })
        ));
    }

    #[test]
    fn empty_cell_list_is_error() {
        let mesh = generate_mesh(MeshFamily::Quad, 2).unwrap();
        let mut doc = mesh_to_document(&mesh);
        doc.cells.clear();
        assert!(matches!(mesh_from_document(doc), Err(MeshIoError::EmptyCells)));
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = mesh_from_json("{\"family\": \"QUAD\",\n  broken").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "no location in: {msg}");
    }
}
