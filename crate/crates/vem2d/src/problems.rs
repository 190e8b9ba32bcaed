//! Manufactured solutions on the unit square and the relative energy error.
//!
//! Two exact displacement fields are provided. Load case A is a degree-6
//! polynomial whose stress is self-equilibrated (zero body force) for the
//! reference material E = 2.5, nu = 0.25 in plane stress. Load case B is the
//! trigonometric field (x sin(pi x) sin(pi y), y sin(pi x) sin(pi y)); its
//! body force is derived analytically from the material, so the same field
//! also serves the nearly incompressible plane-strain tests.
//!
//! The error measure is the classical relative energy norm
//! ||e|| = (sum_E 1/2 int (eP - eEX)^T C (eP - eEX) dA)^(1/2) / ||eEX||.

use crate::element::{ElementMatrices, Material, Model};
use crate::mesh::{Point2, PolygonalMesh};
use crate::quadrature::{polygon_quadrature, TriangleRule};
use nalgebra::{DVector, Matrix3, Vector2, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadCase {
    /// Polynomial field, zero distributed volume forces.
    A,
    /// Trigonometric field, non-null distributed volume forces.
    B,
}

impl LoadCase {
    pub fn tag(&self) -> &'static str {
        match self {
            LoadCase::A => "a",
            LoadCase::B => "b",
        }
    }
}

impl std::str::FromStr for LoadCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(LoadCase::A),
            "b" => Ok(LoadCase::B),
            other => Err(format!("unknown load case '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("load case A requires nu = 0.25 in plane stress; equilibrium residual {residual:.3e} at {at:?}")]
    CaseAOutOfEquilibrium { residual: f64, at: (f64, f64) },
    #[error(transparent)]
    Element(#[from] crate::element::ElementError),
}

/// An exact displacement field with its strain, body force and material.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub case: LoadCase,
    pub material: Material,
    c: Matrix3<f64>,
}

/// Load case A with its hard-paired material (E = 2.5, nu = 0.25, plane
/// stress). The zero body force is material-dependent.
pub fn load_case_a() -> ManufacturedProblem {
    let material = Material::new(2.5, 0.25, Model::PlaneStress).expect("reference material");
    load_case_a_with_material(material).expect("reference material is in equilibrium")
}

/// Load case A with an override material; rejected unless the printed field
/// stays in equilibrium with b = 0 (any E works, nu must remain 0.25 in
/// plane stress).
pub fn load_case_a_with_material(material: Material) -> Result<ManufacturedProblem, ProblemError> {
    let problem =
        ManufacturedProblem { case: LoadCase::A, material, c: material.elasticity() };
    let mut worst = (0.0_f64, (0.0, 0.0));
    for &(x, y) in &[(0.21, 0.37), (0.83, 0.52), (0.46, 0.91), (0.68, 0.17), (0.95, 0.74)] {
        let r = problem.equilibrium_residual(Point2::new(x, y)).norm();
        if r > worst.0 {
            worst = (r, (x, y));
        }
    }
    if worst.0 > 1e-6 {
        return Err(ProblemError::CaseAOutOfEquilibrium { residual: worst.0, at: worst.1 });
    }
    Ok(problem)
}

/// Load case B for an arbitrary material; the body force is derived from
/// the elasticity matrix analytically.
pub fn load_case_b(material: Material) -> ManufacturedProblem {
    ManufacturedProblem { case: LoadCase::B, material, c: material.elasticity() }
}

impl ManufacturedProblem {
    pub fn elasticity(&self) -> &Matrix3<f64> {
        &self.c
    }

    pub fn displacement(&self, p: Point2) -> Vector2<f64> {
        let (x, y) = (p.x, p.y);
        match self.case {
            LoadCase::A => Vector2::new(
                -x.powi(6) / 80.0 + x.powi(4) * y * y / 2.0 - 13.0 / 16.0 * x * x * y.powi(4)
                    + 3.0 / 40.0 * y.powi(6),
                x * y.powi(5) / 4.0 - 5.0 / 12.0 * x.powi(3) * y.powi(3),
            ),
            LoadCase::B => {
                let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
                Vector2::new(x * sx * sy, y * sx * sy)
            }
        }
    }

    /// Exact strain by analytic differentiation of the displacement.
    pub fn strain(&self, p: Point2) -> Vector3<f64> {
        let (x, y) = (p.x, p.y);
        match self.case {
            LoadCase::A => {
                let exx = -6.0 / 80.0 * x.powi(5) + 2.0 * x.powi(3) * y * y
                    - 13.0 / 8.0 * x * y.powi(4);
                let eyy = 5.0 / 4.0 * x * y.powi(4) - 5.0 / 4.0 * x.powi(3) * y * y;
                let gxy = x.powi(4) * y - 4.5 * x * x * y.powi(3) + 0.7 * y.powi(5);
                Vector3::new(exx, eyy, gxy)
            }
            LoadCase::B => {
                let (sx, cx) = ((PI * x).sin(), (PI * x).cos());
                let (sy, cy) = ((PI * y).sin(), (PI * y).cos());
                Vector3::new(
                    sx * sy + PI * x * cx * sy,
                    sx * sy + PI * y * sx * cy,
                    PI * x * sx * cy + PI * y * cx * sy,
                )
            }
        }
    }

    pub fn stress(&self, p: Point2) -> Vector3<f64> {
        self.c * self.strain(p)
    }

    /// Distributed volume force b = -L^T (C eps).
    pub fn body_force(&self, p: Point2) -> Vector2<f64> {
        match self.case {
            LoadCase::A => Vector2::zeros(),
            LoadCase::B => {
                let (c11, c12, c33) = (self.c[(0, 0)], self.c[(0, 1)], self.c[(2, 2)]);
                let (x, y) = (p.x, p.y);
                let (sx, cx) = ((PI * x).sin(), (PI * x).cos());
                let (sy, cy) = ((PI * y).sin(), (PI * y).cos());
                let pi2 = PI * PI;
                let exx_x = 2.0 * PI * cx * sy - pi2 * x * sx * sy;
                let eyy_x = PI * cx * sy + pi2 * y * cx * cy;
                let gxy_y = -pi2 * x * sx * sy + PI * cx * sy + pi2 * y * cx * cy;
                let gxy_x = PI * sx * cy + pi2 * x * cx * cy - pi2 * y * sx * sy;
                let exx_y = PI * sx * cy + pi2 * x * cx * cy;
                let eyy_y = 2.0 * PI * sx * cy - pi2 * y * sx * sy;
                Vector2::new(
                    -(c11 * exx_x + c12 * eyy_x + c33 * gxy_y),
                    -(c33 * gxy_x + c12 * exx_y + c11 * eyy_y),
                )
            }
        }
    }

    /// Equilibrium residual L^T (C eps) + b, with the stress divergence
    /// taken by central finite differences (step 1e-5); an independent check
    /// of the printed fields.
    pub fn equilibrium_residual(&self, p: Point2) -> Vector2<f64> {
        let h = 1e-5;
        let sxx_x =
            (self.stress(Point2::new(p.x + h, p.y))[0] - self.stress(Point2::new(p.x - h, p.y))[0])
                / (2.0 * h);
        let txy_y =
            (self.stress(Point2::new(p.x, p.y + h))[2] - self.stress(Point2::new(p.x, p.y - h))[2])
                / (2.0 * h);
        let txy_x =
            (self.stress(Point2::new(p.x + h, p.y))[2] - self.stress(Point2::new(p.x - h, p.y))[2])
                / (2.0 * h);
        let syy_y =
            (self.stress(Point2::new(p.x, p.y + h))[1] - self.stress(Point2::new(p.x, p.y - h))[1])
                / (2.0 * h);
        let b = self.body_force(p);
        Vector2::new(sxx_x + txy_y + b[0], txy_x + syy_y + b[1])
    }

    /// Mean stress (sigma_xx + sigma_yy + sigma_zz)/3 with the plane-strain
    /// out-of-plane stress sigma_zz = nu (sigma_xx + sigma_yy); sigma_zz = 0
    /// in plane stress.
    pub fn pressure_from_stress(&self, sigma: &Vector3<f64>) -> f64 {
        let in_plane = sigma[0] + sigma[1];
        let szz = match self.material.model {
            Model::PlaneStrain => self.material.nu * in_plane,
            Model::PlaneStress => 0.0,
        };
        (in_plane + szz) / 3.0
    }
}

/// Energy error of a solved field against the exact one.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    /// Relative energy error ||e||.
    pub error: f64,
    /// Per-element squared (un-normalized) contributions.
    pub per_element: Vec<f64>,
    /// Energy norm of the exact strain over the whole domain.
    pub exact_norm: f64,
}

/// Quadrature settings for the error integrals: a collapsed Gauss rule that
/// is exact for polynomial integrands to degree 2q - 2, plus optional
/// uniform triangle subdivisions for non-polynomial integrands.
#[derive(Clone, Copy, Debug)]
pub struct ErrorQuadrature {
    pub order: usize,
    pub subdivisions: usize,
}

impl Default for ErrorQuadrature {
    fn default() -> Self {
        // Exact for load case A (integrand degree 10) without subdivision.
        Self { order: 6, subdivisions: 0 }
    }
}

/// Relative energy error of the recovered projected strains.
pub fn energy_error(
    mesh: &PolygonalMesh,
    elements: &[ElementMatrices],
    strain_coeffs: &[DVector<f64>],
    problem: &ManufacturedProblem,
    quad: ErrorQuadrature,
) -> ErrorReport {
    let c = problem.elasticity();
    let mut per_element = Vec::with_capacity(elements.len());
    let mut total = 0.0;
    for (el, coeffs) in elements.iter().zip(strain_coeffs) {
        let qps =
            polygon_quadrature(&el.geom.points, TriangleRule::Collapsed(quad.order), quad.subdivisions);
        let mut cell = 0.0;
        for qp in &qps {
            let diff = el.strain_at(coeffs, qp.point) - problem.strain(qp.point);
            cell += 0.5 * qp.weight * (diff.transpose() * c * diff)[(0, 0)];
        }
        per_element.push(cell);
        total += cell;
    }
    let exact_norm = exact_energy_norm(mesh, problem);
    ErrorReport { error: total.max(0.0).sqrt() / exact_norm, per_element, exact_norm }
}

/// Energy norm of the exact strain over the whole domain, refined until it
/// is converged to 1e-8 relative.
pub fn exact_energy_norm(mesh: &PolygonalMesh, problem: &ManufacturedProblem) -> f64 {
    let c = problem.elasticity();
    let integral = |subdiv: usize| -> f64 {
        let mut total = 0.0;
        for cell in 0..mesh.cells.len() {
            let pts = mesh.cell_points(cell);
            for qp in polygon_quadrature(&pts, TriangleRule::Collapsed(6), subdiv) {
                let eps = problem.strain(qp.point);
                total += 0.5 * qp.weight * (eps.transpose() * c * eps)[(0, 0)];
            }
        }
        total
    };
    let mut prev = integral(0);
    for level in 1..=4 {
        let next = integral(level);
        if (next - prev).abs() <= 1e-8 * next.abs() {
            return next.sqrt();
        }
        prev = next;
    }
    prev.sqrt()
}

/// One sampled pressure value.
#[derive(Clone, Copy, Debug)]
pub struct PressureSample {
    pub x: f64,
    pub y: f64,
    pub pressure: f64,
    /// Set when the sample point was not inside any cell and the nearest
    /// cell was used instead.
    pub extrapolated: bool,
}

fn point_in_polygon(p: Point2, pts: &[Point2]) -> bool {
    // Ray casting with an on-edge tolerance; boundary points count inside.
    let m = pts.len();
    let eps = 1e-12;
    let mut inside = false;
    for i in 0..m {
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        // On-segment test.
        let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        let dot = (p.x - a.x) * (p.x - b.x) + (p.y - a.y) * (p.y - b.y);
        if cross.abs() <= eps && dot <= eps {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            if a.x + t * (b.x - a.x) > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Sample the mean stress of the solved field on an n x n grid of cell
/// centers over the unit square.
pub fn pressure_field(
    mesh: &PolygonalMesh,
    elements: &[ElementMatrices],
    strain_coeffs: &[DVector<f64>],
    problem: &ManufacturedProblem,
    grid: usize,
) -> Vec<PressureSample> {
    sample_grid(grid, |p| {
        let cell = locate_cell(mesh, p);
        let (ci, extrapolated) = cell;
        let sigma = elements[ci].stress_at(&strain_coeffs[ci], p);
        (problem.pressure_from_stress(&sigma), extrapolated)
    })
}

/// Sample the exact-solution pressure on the same grid.
pub fn exact_pressure_field(problem: &ManufacturedProblem, grid: usize) -> Vec<PressureSample> {
    sample_grid(grid, |p| (problem.pressure_from_stress(&problem.stress(p)), false))
}

fn sample_grid(
    grid: usize,
    mut f: impl FnMut(Point2) -> (f64, bool),
) -> Vec<PressureSample> {
    let mut out = Vec::with_capacity(grid * grid);
    for j in 0..grid {
        for i in 0..grid {
            let p = Point2::new((i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64);
            let (pressure, extrapolated) = f(p);
            out.push(PressureSample { x: p.x, y: p.y, pressure, extrapolated });
        }
    }
    out
}

fn locate_cell(mesh: &PolygonalMesh, p: Point2) -> (usize, bool) {
    for c in 0..mesh.cells.len() {
        if point_in_polygon(p, &mesh.cell_points(c)) {
            return (c, false);
        }
    }
    // Nearest centroid fallback, flagged.
    let mut best = (0, f64::MAX);
    for c in 0..mesh.cells.len() {
        let g = mesh.cell_geometry(c).expect("valid cell");
        let d = g.centroid.distance(p);
        if d < best.1 {
            best = (c, d);
        }
    }
    (best.0, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn case_a_point_values() {
        let p = load_case_a();
        let v0 = p.displacement(Point2::new(0.0, 0.0));
        assert_eq!(v0, Vector2::zeros());
        let v11 = p.displacement(Point2::new(1.0, 1.0));
        assert_relative_eq!(v11[0], -0.25, epsilon = 1e-15);
        assert_eq!(p.body_force(Point2::new(0.3, 0.7)), Vector2::zeros());
    }

    #[test]
    fn case_a_material_is_hard_paired() {
        assert!(load_case_a_with_material(
            Material::new(5.0, 0.25, Model::PlaneStress).unwrap()
        )
        .is_ok());
        assert!(load_case_a_with_material(
            Material::new(2.5, 0.3, Model::PlaneStress).unwrap()
        )
        .is_err());
        assert!(load_case_a_with_material(
            Material::new(2.5, 0.25, Model::PlaneStrain).unwrap()
        )
        .is_err());
    }

    #[test]
    fn case_b_point_values() {
        let p = load_case_b(Material::new(2.5, 0.25, Model::PlaneStress).unwrap());
        let mid = p.displacement(Point2::new(0.5, 0.5));
        assert_relative_eq!(mid[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(mid[1], 0.5, epsilon = 1e-15);
        // Vanishes on the whole boundary.
        for t in [0.0, 0.3, 0.77, 1.0] {
            for edge_pt in
                [Point2::new(t, 0.0), Point2::new(t, 1.0), Point2::new(0.0, t), Point2::new(1.0, t)]
            {
                assert!(p.displacement(edge_pt).norm() < 1e-15);
            }
        }
        let b = p.body_force(Point2::new(0.5, 0.5));
        assert_relative_eq!(b[0], 11.0 / 3.0 * PI * PI * 0.5, epsilon = 1e-12);
        assert_relative_eq!(b[1], 11.0 / 3.0 * PI * PI * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn strain_matches_finite_differences() {
        let problems = [
            load_case_a(),
            load_case_b(Material::new(2.5, 0.25, Model::PlaneStress).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for problem in &problems {
            for _ in 0..100 {
                let x = 0.05 + 0.9 * rng.random::<f64>();
                let y = 0.05 + 0.9 * rng.random::<f64>();
                let du_dx = (problem.displacement(Point2::new(x + h, y))
                    - problem.displacement(Point2::new(x - h, y)))
                    / (2.0 * h);
                let du_dy = (problem.displacement(Point2::new(x, y + h))
                    - problem.displacement(Point2::new(x, y - h)))
                    / (2.0 * h);
                let eps = problem.strain(Point2::new(x, y));
                assert!((eps[0] - du_dx[0]).abs() < 1e-7, "{:?} exx", problem.case);
                assert!((eps[1] - du_dy[1]).abs() < 1e-7, "{:?} eyy", problem.case);
                assert!((eps[2] - (du_dx[1] + du_dy[0])).abs() < 1e-7, "{:?} gxy", problem.case);
            }
        }
    }

    #[test]
    fn equilibrium_residual_small_at_random_points() {
        let problems = [
            load_case_a(),
            load_case_b(Material::new(2.5, 0.25, Model::PlaneStress).unwrap()),
            load_case_b(Material::new(2.5, 0.49995, Model::PlaneStrain).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for problem in &problems {
            for _ in 0..100 {
                let p = Point2::new(0.05 + 0.9 * rng.random::<f64>(), 0.05 + 0.9 * rng.random::<f64>());
                let r = problem.equilibrium_residual(p).norm();
                let scale = problem.body_force(p).norm().max(problem.stress(p).norm()).max(1.0);
                assert!(r < 1e-6 * scale.max(1.0), "{:?}: residual {r} at {p:?}", problem.case);
            }
        }
    }

    #[test]
    fn exact_pressure_map_is_swap_symmetric_for_case_b() {
        let p = load_case_b(Material::new(2.5, 0.49995, Model::PlaneStrain).unwrap());
        let n = 16;
        let samples = exact_pressure_field(&p, n);
        for j in 0..n {
            for i in 0..n {
                let a = samples[j * n + i].pressure;
                let b = samples[i * n + j].pressure;
                assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn error_normalization_invariant_under_youngs_modulus_scaling() {
        // The relative error of the zero solution is exactly 1, for any E.
        use crate::element::{ElementSpec, Method};
        use crate::mesh::{generate_mesh, MeshFamily};
        let mesh = generate_mesh(MeshFamily::Quad, 2).unwrap();
        for e_mod in [2.5, 250.0] {
            let material = Material::new(e_mod, 0.25, Model::PlaneStress).unwrap();
            let problem = load_case_a_with_material(material).unwrap();
            let spec = ElementSpec::new(Method::Vem, 1);
            let elements: Vec<_> = (0..mesh.cells.len())
                .map(|c| {
                    crate::element::build_element(mesh.cell_points(c), &spec, &material, None)
                        .unwrap()
                })
                .collect();
            let coeffs: Vec<_> =
                elements.iter().map(|el| DVector::zeros(el.basis.modes())).collect();
            let report = energy_error(&mesh, &elements, &coeffs, &problem, ErrorQuadrature::default());
            assert_relative_eq!(report.error, 1.0, epsilon = 1e-9);
        }
    }
}
