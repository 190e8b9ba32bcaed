//! Per-element operators: projector matrices, consistent and stabilization
//! stiffness, load vector and static condensation.
//!
//! The projected strain minimizes the distance to the (unknown) virtual
//! strain either in the L2 norm (standard VEM, strain representation N) or
//! in the energy norm (enhanced VEM, stress representation N_breve = C N).
//! One code path covers both: the norm selects the Gram weight, the
//! boundary traction always uses the stored columns, and the strain
//! recovery applies C^-1 for the stress representation.
//!
//! Element degrees of freedom are ordered boundary first, internal last:
//! vertex values (x, y per node), then edge-midpoint values for k = 2, then
//! the internal moments. Internal moments are normalized,
//! (1/|E|) int v m_alpha dA with scaled monomials m_alpha, ordered per
//! degree level with the x component before the y component.

use crate::mesh::{polygon_geometry, GeometryError, Point2};
use crate::polyspace::{
    apply_equilibrium_operator, build_dfp_basis, build_hyp_basis, build_standard_basis,
    build_ucp_basis, monomial_count, monomials_up_to, MonomialIntegrals, Monomial2, Poly2,
    PolyVec2, ScaledFrame, StrainBasis,
};
use crate::quadrature::{gauss_legendre_unit, polygon_quadrature, TriangleRule};
use nalgebra::{DMatrix, DVector, Matrix3};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    PlaneStress,
    PlaneStrain,
}

/// Isotropic linear elastic material.
#[derive(Clone, Copy, Debug)]
pub struct Material {
    pub e: f64,
    pub nu: f64,
    pub model: Model,
}

#[derive(Debug, Error)]
pub enum ElementError {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid element configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("projector Gram matrix is numerically singular (condition {cond:.3e})")]
    IllConditionedG { cond: f64 },
    #[error("stabilization matrix D is rank deficient (degenerate geometry)")]
    RankDeficientD,
    #[error("internal dof block is singular (under-stabilized configuration)")]
    SingularInternalBlock,
}

impl Material {
    pub fn new(e: f64, nu: f64, model: Model) -> Result<Self, ElementError> {
        if !(e > 0.0) {
            return Err(ElementError::InvalidMaterial(format!("E = {e} must be positive")));
        }
        if !(-1.0 < nu && nu < 0.5) {
            return Err(ElementError::InvalidMaterial(format!("nu = {nu} outside (-1, 0.5)")));
        }
        Ok(Self { e, nu, model })
    }

    pub fn elasticity(&self) -> Matrix3<f64> {
        elasticity_matrix(self.e, self.nu, self.model)
    }

    /// Spectral condition number of C; grows without bound as nu -> 0.5 in
    /// plane strain (the nearly incompressible regime).
    pub fn condition_number(&self) -> f64 {
        let c = self.elasticity();
        let ev = c.symmetric_eigenvalues();
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for i in 0..3 {
            lo = lo.min(ev[i]);
            hi = hi.max(ev[i]);
        }
        hi / lo
    }
}

/// The 3x3 elasticity matrix C for plane stress or plane strain.
pub fn elasticity_matrix(e: f64, nu: f64, model: Model) -> Matrix3<f64> {
    match model {
        Model::PlaneStress => {
            let f = e / (1.0 - nu * nu);
            Matrix3::new(f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, f * (1.0 - nu) / 2.0)
        }
        Model::PlaneStrain => {
            let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
            Matrix3::new(
                f * (1.0 - nu),
                f * nu,
                0.0,
                f * nu,
                f * (1.0 - nu),
                0.0,
                0.0,
                0.0,
                f * (1.0 - 2.0 * nu) / 2.0,
            )
        }
    }
}

/// Strain representation kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Standard displacement-based VEM: p = k - 1, L2 norm, s = k.
    Vem,
    /// Uncoupled polynomial representation of degree p.
    Ucp,
    /// Divergence-free polynomial representation (no internal dofs).
    Dfp,
    /// Uncoupled part to degree k - 1 plus divergence-free modes (k = 2).
    Hyp,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Vem => "vem",
            Method::Ucp => "ucp",
            Method::Dfp => "dfp",
            Method::Hyp => "hyp",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vem" => Ok(Method::Vem),
            "ucp" => Ok(Method::Ucp),
            "dfp" => Ok(Method::Dfp),
            "hyp" => Ok(Method::Hyp),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L2,
    Energy,
}

/// Fully resolved per-element configuration.
#[derive(Clone, Copy, Debug)]
pub struct ElementConfig {
    pub k: u32,
    pub method: Method,
    pub p: u32,
    pub norm: Norm,
    pub tau: f64,
    /// Stabilization order; `None` means the element is self-stabilized and
    /// no stabilization term is assembled.
    pub stab: Option<u32>,
}

/// User-facing element request; `resolve` fixes p and the stabilization
/// order for a concrete vertex count.
#[derive(Clone, Copy, Debug)]
pub struct ElementSpec {
    pub method: Method,
    pub k: u32,
    /// None selects the smallest p satisfying the mode-count condition.
    pub p: Option<u32>,
    pub norm: Option<Norm>,
    pub tau: f64,
}

impl ElementSpec {
    pub fn new(method: Method, k: u32) -> Self {
        Self { method, k, p: None, norm: None, tau: 0.5 }
    }

    pub fn with_p(mut self, p: u32) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = Some(norm);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn resolve(&self, m: usize) -> Result<ElementConfig, ElementError> {
        if !(1..=2).contains(&self.k) {
            return Err(ElementError::InvalidConfig(format!("k = {} not in {{1, 2}}", self.k)));
        }
        if self.method == Method::Hyp && self.k != 2 {
            return Err(ElementError::InvalidConfig("HYP requires k = 2".into()));
        }
        let norm = match (self.method, self.norm) {
            (Method::Vem, None | Some(Norm::L2)) => Norm::L2,
            (Method::Vem, Some(Norm::Energy)) => {
                return Err(ElementError::InvalidConfig("standard VEM uses the L2 norm".into()))
            }
            (Method::Ucp, n) => n.unwrap_or(Norm::Energy),
            (Method::Dfp | Method::Hyp, None | Some(Norm::Energy)) => Norm::Energy,
            (Method::Dfp | Method::Hyp, Some(Norm::L2)) => {
                return Err(ElementError::InvalidConfig(
                    "DFP/HYP require the energy norm".into(),
                ))
            }
        };
        let (auto_p, auto_s) = choose_p(m, self.k, self.method);
        let (p, stab) = match self.p {
            None => (auto_p, auto_s),
            Some(p) => {
                let range = p_range(self.method, self.k);
                if !range.contains(&p) {
                    return Err(ElementError::InvalidConfig(format!(
                        "p = {p} out of range {range:?} for {:?} k = {}",
                        self.method, self.k
                    )));
                }
                let n = dof_layout(m, self.k, self.method, p).n();
                if self.method == Method::Vem {
                    (p, Some(self.k))
                } else if mode_count(self.method, self.k, p) >= n.saturating_sub(3) {
                    (p, None)
                } else if p == auto_p {
                    (p, auto_s)
                } else {
                    // Below the self-stabilizing order: fall back to the
                    // standard stabilization order s = k, shrunk until D can
                    // have full column rank.
                    let mut s = self.k;
                    while ((s + 1) * (s + 2)) as usize > n && s > 1 {
                        s -= 1;
                    }
                    (p, Some(s))
                }
            }
        };
        Ok(ElementConfig { k: self.k, method: self.method, p, norm, tau: self.tau, stab })
    }
}

fn p_range(method: Method, k: u32) -> std::ops::RangeInclusive<u32> {
    match method {
        Method::Vem => (k - 1)..=(k - 1),
        Method::Ucp | Method::Dfp => 1..=4,
        Method::Hyp => 3..=4,
    }
}

/// Number of modes M of a representation basis.
pub fn mode_count(method: Method, k: u32, p: u32) -> usize {
    match method {
        Method::Vem => 3 * monomial_count(k - 1),
        Method::Ucp => 3 * monomial_count(p),
        Method::Dfp => ((p + 3) * (p + 4) / 2 - 3) as usize,
        Method::Hyp => 9 + ((p + 3) * (p + 4) / 2 - 3 - 7) as usize,
    }
}

/// Element dof bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub m: usize,
    pub k: u32,
    /// 2 m k boundary dofs.
    pub boundary: usize,
    pub internal: usize,
    /// Maximum degree of the internal moment monomials, if any.
    pub moment_degree: Option<u32>,
}

impl DofLayout {
    pub fn n(&self) -> usize {
        self.boundary + self.internal
    }
}

/// Dof counts for a configuration: n = 2mk + p(p+1) for VEM/UCP, 2mk for
/// DFP and 2mk + (k-1)k for HYP.
pub fn dof_layout(m: usize, k: u32, method: Method, p: u32) -> DofLayout {
    let boundary = 2 * m * k as usize;
    let (internal, moment_degree) = match method {
        Method::Vem | Method::Ucp => {
            let count = (p * (p + 1)) as usize;
            (count, if count > 0 { Some(p - 1) } else { None })
        }
        Method::Dfp => (0, None),
        Method::Hyp => (((k - 1) * k) as usize, Some(k - 2)),
    };
    DofLayout { m, k, boundary, internal, moment_degree }
}

/// Internal dof functionals in order: per degree level, x moments then y
/// moments against the scaled monomials of that degree.
pub fn internal_dof_monomials(layout: &DofLayout) -> Vec<(usize, Monomial2)> {
    let Some(max_deg) = layout.moment_degree else { return Vec::new() };
    let mut out = Vec::with_capacity(layout.internal);
    for d in 0..=max_deg {
        for comp in 0..2 {
            for b in 0..=d {
                out.push((comp, Monomial2::new(d - b, b)));
            }
        }
    }
    debug_assert_eq!(out.len(), layout.internal);
    out
}

/// The smallest p (within the per-k cap) whose mode count reaches n - 3,
/// with no stabilization; otherwise the cap with the suggested
/// stabilization order.
pub fn choose_p(m: usize, k: u32, method: Method) -> (u32, Option<u32>) {
    match method {
        Method::Vem => (k - 1, Some(k)),
        Method::Hyp => {
            debug_assert_eq!(k, 2);
            choose_enhanced_p(m, k, method, 3, 4, 3)
        }
        Method::Ucp => choose_enhanced_p(m, k, method, 1, k + 2, 4),
        Method::Dfp => choose_enhanced_p(m, k, method, 1, k + 2, if k == 1 { 2 } else { 3 }),
    }
}

fn choose_enhanced_p(
    m: usize,
    k: u32,
    method: Method,
    p_min: u32,
    p_cap: u32,
    fallback_s: u32,
) -> (u32, Option<u32>) {
    for p in p_min..=p_cap {
        let n = dof_layout(m, k, method, p).n();
        if mode_count(method, k, p) >= n.saturating_sub(3) {
            return (p, None);
        }
    }
    (p_cap, Some(fallback_s))
}

/// Geometry of one cell plus its scaled frame.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub points: Vec<Point2>,
    pub area: f64,
    pub frame: ScaledFrame,
    pub diameter: f64,
}

impl ElementGeometry {
    pub fn from_points(points: Vec<Point2>) -> Result<Self, ElementError> {
        let g = polygon_geometry(&points)?;
        Ok(Self {
            points,
            area: g.area,
            frame: ScaledFrame { center: g.centroid, scale: g.diameter },
            diameter: g.diameter,
        })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    /// Node positions carrying the boundary dofs: vertices, then edge
    /// midpoints for k = 2 (node m + e belongs to edge e).
    pub fn boundary_nodes(&self, k: u32) -> Vec<Point2> {
        let mut nodes = self.points.clone();
        if k == 2 {
            let m = self.points.len();
            for e in 0..m {
                nodes.push(self.points[e].midpoint(self.points[(e + 1) % m]));
            }
        }
        nodes
    }
}

fn build_basis(config: &ElementConfig) -> StrainBasis {
    match config.method {
        Method::Vem => build_standard_basis(config.k).expect("validated k"),
        Method::Ucp => build_ucp_basis(config.p).expect("validated p"),
        Method::Dfp => build_dfp_basis(config.p).expect("validated p"),
        Method::Hyp => build_hyp_basis(2, config.p).expect("validated p"),
    }
}

/// Gram matrix of the basis columns with a constant 3x3 weight.
pub fn weighted_gram(
    basis: &StrainBasis,
    table: &MonomialIntegrals,
    weight: &Matrix3<f64>,
) -> DMatrix<f64> {
    let m = basis.modes();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut v = 0.0;
            for r in 0..3 {
                for s in 0..3 {
                    let w = weight[(r, s)];
                    if w != 0.0 {
                        v += w * table.integrate(&basis.cols[i][r].mul(&basis.cols[j][s]));
                    }
                }
            }
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    gram
}

/// Projector metric G: int N^T N dA in the L2 norm, int N^T C^-1 N dA for
/// the stress representation of the energy norm.
pub fn compute_g(
    basis: &StrainBasis,
    table: &MonomialIntegrals,
    c: &Matrix3<f64>,
    norm: Norm,
) -> Result<DMatrix<f64>, ElementError> {
    let weight = match norm {
        Norm::L2 => Matrix3::identity(),
        Norm::Energy => c.try_inverse().ok_or(ElementError::InvalidMaterial(
            "elasticity matrix is singular".into(),
        ))?,
    };
    let g = weighted_gram(basis, table, &weight);
    // Cheap SPD conditioning estimate from the Cholesky pivots.
    let chol = nalgebra::Cholesky::new(g.clone())
        .ok_or(ElementError::IllConditionedG { cond: f64::INFINITY })?;
    let diag = chol.l_dirty();
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for i in 0..g.nrows() {
        let d = diag[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let cond = (hi / lo).powi(2);
    if cond > 1e14 {
        return Err(ElementError::IllConditionedG { cond });
    }
    Ok(g)
}

/// Boundary shape functions of one edge at parameter t in [0, 1]:
/// (local node index, value). Nodes are (a, b) for k = 1 and (a, b, mid)
/// for k = 2.
fn edge_shapes(k: u32, t: f64) -> Vec<f64> {
    match k {
        1 => vec![1.0 - t, t],
        2 => vec![(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)],
        _ => unreachable!(),
    }
}

/// Boundary operator B~: traction work of every mode against every boundary
/// shape function, integrated per edge with Gauss-Legendre of exact order.
pub fn compute_b_tilde(
    basis: &StrainBasis,
    geom: &ElementGeometry,
    k: u32,
) -> DMatrix<f64> {
    let m = geom.m();
    let n_modes = basis.modes();
    let mut b = DMatrix::zeros(n_modes, 2 * m * k as usize);
    let p_deg = basis.degree() as usize;
    let n_gauss = (p_deg + k as usize + 1).div_ceil(2) + 1;
    let gl = gauss_legendre_unit(n_gauss);

    for e in 0..m {
        let pa = geom.points[e];
        let pb = geom.points[(e + 1) % m];
        let len = pa.distance(pb);
        // Outward normal of the CCW polygon: tangent rotated by -90 degrees.
        let nx = (pb.y - pa.y) / len;
        let ny = -(pb.x - pa.x) / len;
        // Local nodes (as node ids) supporting this edge.
        let nodes: Vec<usize> = match k {
            1 => vec![e, (e + 1) % m],
            _ => vec![e, (e + 1) % m, m + e],
        };
        for &(t, w) in &gl {
            let pt = Point2::new(pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y));
            let (xi, eta) = geom.frame.local(pt);
            let vals = basis.eval(xi, eta);
            let shapes = edge_shapes(k, t);
            for j in 0..n_modes {
                // Traction of mode j on this edge.
                let tx = vals[(0, j)] * nx + vals[(2, j)] * ny;
                let ty = vals[(2, j)] * nx + vals[(1, j)] * ny;
                for (local, &node) in nodes.iter().enumerate() {
                    let shape = shapes[local];
                    b[(j, 2 * node)] += w * len * shape * tx;
                    b[(j, 2 * node + 1)] += w * len * shape * ty;
                }
            }
        }
    }
    b
}

/// Internal operator B^: minus the coefficients of the equilibrium operator
/// applied to each mode, expanded in the internal moment monomials and
/// scaled by the area (the moments are normalized by 1/|E|). Width 0 for
/// divergence-free bases.
pub fn compute_b_hat(
    basis: &StrainBasis,
    geom: &ElementGeometry,
    layout: &DofLayout,
) -> DMatrix<f64> {
    let dofs = internal_dof_monomials(layout);
    let mut b = DMatrix::zeros(basis.modes(), dofs.len());
    for (j, col) in basis.cols.iter().enumerate() {
        let PolyVec2(div) = apply_equilibrium_operator(col, geom.frame.scale);
        for (idx, (comp, mono)) in dofs.iter().enumerate() {
            let c = div[*comp].coeff(mono.a, mono.b);
            if c != 0.0 {
                b[(j, idx)] = -geom.area * c;
            }
        }
    }
    b
}

/// Consistent stiffness K_c = B^T G^-T H G^-1 B with B = [B~ B^]. Under the
/// energy norm H = G and this reduces to B^T G^-1 B.
pub fn compute_kc(
    g: &DMatrix<f64>,
    b_tilde: &DMatrix<f64>,
    b_hat: &DMatrix<f64>,
    h: &DMatrix<f64>,
    norm: Norm,
) -> Result<DMatrix<f64>, ElementError> {
    let modes = g.nrows();
    let n = b_tilde.ncols() + b_hat.ncols();
    let mut b = DMatrix::zeros(modes, n);
    b.view_mut((0, 0), (modes, b_tilde.ncols())).copy_from(b_tilde);
    b.view_mut((0, b_tilde.ncols()), (modes, b_hat.ncols())).copy_from(b_hat);

    let chol = nalgebra::Cholesky::new(g.clone())
        .ok_or(ElementError::IllConditionedG { cond: f64::INFINITY })?;
    let y = chol.solve(&b); // G^-1 B
    let mut kc = match norm {
        Norm::Energy => b.transpose() * &y,
        Norm::L2 => y.transpose() * h * &y,
    };
    // Symmetrize away the solve roundoff.
    kc = 0.5 * (&kc + kc.transpose());
    Ok(kc)
}

/// Dof-evaluation matrix D of the vector monomials of degree <= s: boundary
/// dofs evaluate at node positions, internal dofs take normalized moments.
pub fn compute_d(
    layout: &DofLayout,
    s: u32,
    geom: &ElementGeometry,
    table: &MonomialIntegrals,
) -> DMatrix<f64> {
    let monos = monomials_up_to(s);
    let cols: Vec<(usize, Monomial2)> = {
        // Same degree-major, component-minor order as the internal dofs.
        let mut out = Vec::new();
        for d in 0..=s {
            for comp in 0..2 {
                for b in 0..=d {
                    out.push((comp, Monomial2::new(d - b, b)));
                }
            }
        }
        out
    };
    debug_assert_eq!(cols.len(), 2 * monos.len());

    let nodes = geom.boundary_nodes(layout.k);
    let internal = internal_dof_monomials(layout);
    let mut d_mat = DMatrix::zeros(layout.n(), cols.len());
    for (col_idx, (comp, mono)) in cols.iter().enumerate() {
        for (node_idx, node) in nodes.iter().enumerate() {
            let (xi, eta) = geom.frame.local(*node);
            d_mat[(2 * node_idx + comp, col_idx)] = xi.powi(mono.a as i32) * eta.powi(mono.b as i32);
        }
        for (i, (mcomp, mmono)) in internal.iter().enumerate() {
            if mcomp == comp {
                d_mat[(layout.boundary + i, col_idx)] =
                    table.get(mono.a + mmono.a, mono.b + mmono.b) / geom.area;
            }
        }
    }
    d_mat
}

/// Stabilization K_s = tau tr(K_c) [I - D (D^T D)^-1 D^T].
///
/// The orthogonal projector onto range(D) is formed from a Householder QR
/// of D rather than the normal equations, which would square the condition
/// number of D and leak noticeable roundoff into patch tests on many-sided
/// cells.
pub fn compute_ks(
    kc: &DMatrix<f64>,
    d: &DMatrix<f64>,
    tau: f64,
) -> Result<DMatrix<f64>, ElementError> {
    let n = kc.nrows();
    let qr = d.clone().qr();
    let r = qr.r();
    let rdiag: Vec<f64> = (0..d.ncols().min(n)).map(|i| r[(i, i)].abs()).collect();
    let rmax = rdiag.iter().cloned().fold(0.0, f64::max);
    if d.ncols() > n || rdiag.iter().any(|&v| v <= 1e-12 * rmax) {
        return Err(ElementError::RankDeficientD);
    }
    let q = qr.q();
    let proj = DMatrix::identity(n, n) - &q * q.transpose();
    let mut ks = tau * kc.trace() * proj;
    ks = 0.5 * (&ks + ks.transpose());
    Ok(ks)
}

/// Volume-load vector.
///
/// Elements with internal moment dofs receive the whole load through them,
/// as the work of the L2 projection of b onto the moment space (for the
/// constant moments this is the element average of the load). Elements
/// without internal dofs use the vertex rule for k = 1 and no volume
/// contribution otherwise.
pub fn load_vector(
    body_force: &dyn Fn(Point2) -> [f64; 2],
    layout: &DofLayout,
    geom: &ElementGeometry,
    table: &MonomialIntegrals,
) -> DVector<f64> {
    let mut f = DVector::zeros(layout.n());
    if layout.internal > 0 {
        let deg = layout.moment_degree.expect("internal dofs have moments");
        let monos = monomials_up_to(deg);
        // Moments of b per component, by sub-triangulation quadrature.
        let qps = polygon_quadrature(&geom.points, TriangleRule::Degree5, 0);
        let mut moments = [DVector::zeros(monos.len()), DVector::zeros(monos.len())];
        for qp in &qps {
            let b = body_force(qp.point);
            let (xi, eta) = geom.frame.local(qp.point);
            for (i, mono) in monos.iter().enumerate() {
                let val = qp.weight * xi.powi(mono.a as i32) * eta.powi(mono.b as i32);
                moments[0][i] += val * b[0];
                moments[1][i] += val * b[1];
            }
        }
        // Scalar monomial Gram, shared by both components.
        let mut gram = DMatrix::zeros(monos.len(), monos.len());
        for (i, mi) in monos.iter().enumerate() {
            for (j, mj) in monos.iter().enumerate() {
                gram[(i, j)] = table.get(mi.a + mj.a, mi.b + mj.b);
            }
        }
        let chol = nalgebra::Cholesky::new(gram).expect("moment Gram is SPD");
        let coeffs = [chol.solve(&moments[0]), chol.solve(&moments[1])];
        let mono_index =
            |m: &Monomial2| monos.iter().position(|q| q == m).expect("moment monomial");
        for (i, (comp, mono)) in internal_dof_monomials(layout).iter().enumerate() {
            f[layout.boundary + i] = geom.area * coeffs[*comp][mono_index(mono)];
        }
    } else if layout.k == 1 {
        let w = geom.area / layout.m as f64;
        for (v, point) in geom.points.iter().enumerate() {
            let b = body_force(*point);
            f[2 * v] = w * b[0];
            f[2 * v + 1] = w * b[1];
        }
    }
    f
}

/// Result of Guyan condensation of the internal dofs.
#[derive(Clone, Debug)]
pub struct Condensed {
    pub k_star: DMatrix<f64>,
    pub f_star: DVector<f64>,
    /// Internal recovery V^ = recover_mat * V~ + recover_vec.
    pub recover_mat: DMatrix<f64>,
    pub recover_vec: DVector<f64>,
}

/// Static condensation K* = K_bb - K_bi K_ii^-1 K_ib on the boundary dofs;
/// the identity when there are no internal dofs.
pub fn static_condensation(
    k: &DMatrix<f64>,
    f: &DVector<f64>,
    layout: &DofLayout,
) -> Result<Condensed, ElementError> {
    let nb = layout.boundary;
    let ni = layout.internal;
    if ni == 0 {
        return Ok(Condensed {
            k_star: k.clone(),
            f_star: f.clone(),
            recover_mat: DMatrix::zeros(0, nb),
            recover_vec: DVector::zeros(0),
        });
    }
    let k_bb = k.view((0, 0), (nb, nb));
    let k_bi = k.view((0, nb), (nb, ni));
    let k_ib = k.view((nb, 0), (ni, nb));
    let k_ii = k.view((nb, nb), (ni, ni)).into_owned();
    let f_b = f.rows(0, nb);
    let f_i = f.rows(nb, ni).into_owned();

    let lu = k_ii.full_piv_lu();
    if !lu.is_invertible() {
        return Err(ElementError::SingularInternalBlock);
    }
    let k_ii_inv_k_ib = lu.solve(&k_ib.into_owned()).ok_or(ElementError::SingularInternalBlock)?;
    let k_ii_inv_f_i = lu.solve(&f_i).ok_or(ElementError::SingularInternalBlock)?;

    let mut k_star = k_bb.into_owned();
    k_star -= k_bi * &k_ii_inv_k_ib;
    k_star = 0.5 * (&k_star + k_star.transpose());
    let f_star = f_b.into_owned() - k_bi * &k_ii_inv_f_i;
    Ok(Condensed {
        k_star,
        f_star,
        recover_mat: -k_ii_inv_k_ib,
        recover_vec: k_ii_inv_f_i,
    })
}

/// Numeric self-stabilization test: rank(K_c) == n - 3 with singular values
/// below 1e-10 sigma_max counted as zero.
pub fn self_stabilization_check(kc: &DMatrix<f64>, n: usize) -> bool {
    numeric_rank(kc) == n.saturating_sub(3)
}

pub(crate) fn numeric_rank(mat: &DMatrix<f64>) -> usize {
    let svd = mat.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > 1e-10 * sigma_max).count()
}

/// All per-element operators plus the pieces needed for assembly and strain
/// recovery.
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    pub config: ElementConfig,
    pub layout: DofLayout,
    pub geom: ElementGeometry,
    pub basis: StrainBasis,
    pub c: Matrix3<f64>,
    pub c_inv: Matrix3<f64>,
    pub g: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub kc: DMatrix<f64>,
    pub ks: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub f: DVector<f64>,
    pub condensed: Condensed,
}

impl ElementMatrices {
    /// Projected-strain coefficients from the element dof vector.
    pub fn strain_coefficients(&self, v_tilde: &DVector<f64>, v_hat: &DVector<f64>) -> DVector<f64> {
        let rhs = &self.b_tilde * v_tilde + &self.b_hat * v_hat;
        nalgebra::Cholesky::new(self.g.clone())
            .expect("G validated during construction")
            .solve(&rhs)
    }

    /// Recover the internal dofs from the boundary dofs (exact for the
    /// condensed solve).
    pub fn recover_internal(&self, v_tilde: &DVector<f64>) -> DVector<f64> {
        &self.condensed.recover_mat * v_tilde + &self.condensed.recover_vec
    }

    /// Evaluate the projected strain at a physical point.
    pub fn strain_at(&self, coeffs: &DVector<f64>, point: Point2) -> nalgebra::Vector3<f64> {
        let (xi, eta) = self.geom.frame.local(point);
        let vals = self.basis.eval(xi, eta);
        let mut rep = nalgebra::Vector3::zeros();
        for j in 0..self.basis.modes() {
            for r in 0..3 {
                rep[r] += vals[(r, j)] * coeffs[j];
            }
        }
        match self.config.norm {
            Norm::L2 => rep,
            Norm::Energy => self.c_inv * rep,
        }
    }

    /// Evaluate the projected stress at a physical point.
    pub fn stress_at(&self, coeffs: &DVector<f64>, point: Point2) -> nalgebra::Vector3<f64> {
        self.c * self.strain_at(coeffs, point)
    }
}

/// Assemble every per-element operator for one polygonal cell.
pub fn build_element(
    points: Vec<Point2>,
    spec: &ElementSpec,
    material: &Material,
    body_force: Option<&dyn Fn(Point2) -> [f64; 2]>,
) -> Result<ElementMatrices, ElementError> {
    let geom = ElementGeometry::from_points(points)?;
    let config = spec.resolve(geom.m())?;
    let layout = dof_layout(geom.m(), config.k, config.method, config.p);
    let basis = build_basis(&config);
    debug_assert_eq!(basis.modes(), mode_count(config.method, config.k, config.p));

    let c = material.elasticity();
    let c_inv = c.try_inverse().ok_or_else(|| {
        ElementError::InvalidMaterial("elasticity matrix is singular".into())
    })?;

    let mut table_deg = 2 * basis.degree();
    if let Some(md) = layout.moment_degree {
        table_deg = table_deg.max(2 * md);
        if let Some(s) = config.stab {
            table_deg = table_deg.max(s + md);
        }
    }
    let table = MonomialIntegrals::compute(&geom.points, &geom.frame, table_deg);

    let g = compute_g(&basis, &table, &c, config.norm)?;
    let h = match config.norm {
        Norm::L2 => weighted_gram(&basis, &table, &c),
        Norm::Energy => g.clone(),
    };
    let b_tilde = compute_b_tilde(&basis, &geom, config.k);
    let b_hat = compute_b_hat(&basis, &geom, &layout);
    let kc = compute_kc(&g, &b_tilde, &b_hat, &h, config.norm)?;

    let ks = match config.stab {
        Some(s) if config.tau != 0.0 => {
            let d = compute_d(&layout, s, &geom, &table);
            compute_ks(&kc, &d, config.tau)?
        }
        _ => DMatrix::zeros(layout.n(), layout.n()),
    };
    let k = &kc + &ks;

    let f = match body_force {
        Some(b) => load_vector(b, &layout, &geom, &table),
        None => DVector::zeros(layout.n()),
    };
    let condensed = static_condensation(&k, &f, &layout)?;

    Ok(ElementMatrices {
        config,
        layout,
        geom,
        basis,
        c,
        c_inv,
        g,
        b_tilde,
        b_hat,
        kc,
        ks,
        k,
        f,
        condensed,
    })
}

/// Dof vectors of the three rigid-body motions (two translations and one
/// rotation about the cell centroid).
pub fn rigid_body_vectors(
    layout: &DofLayout,
    geom: &ElementGeometry,
    table: &MonomialIntegrals,
) -> [DVector<f64>; 3] {
    // Rotation (-(y - yc), (x - xc)) expressed in the scaled frame.
    let h = geom.frame.scale;
    let rot = [
        Poly2::from_terms(&[(-h, 0, 1)]),
        Poly2::from_terms(&[(h, 1, 0)]),
    ];
    let tx = [Poly2::from_terms(&[(1.0, 0, 0)]), Poly2::zero()];
    let ty = [Poly2::zero(), Poly2::from_terms(&[(1.0, 0, 0)])];
    [
        dof_vector_from_polynomial(&tx, layout, geom, table),
        dof_vector_from_polynomial(&ty, layout, geom, table),
        dof_vector_from_polynomial(&rot, layout, geom, table),
    ]
}

/// Sample every dof functional on a polynomial displacement given in the
/// scaled frame: node evaluations plus normalized internal moments.
pub fn dof_vector_from_polynomial(
    disp: &[Poly2; 2],
    layout: &DofLayout,
    geom: &ElementGeometry,
    table: &MonomialIntegrals,
) -> DVector<f64> {
    let mut v = DVector::zeros(layout.n());
    for (i, node) in geom.boundary_nodes(layout.k).iter().enumerate() {
        let (xi, eta) = geom.frame.local(*node);
        v[2 * i] = disp[0].eval(xi, eta);
        v[2 * i + 1] = disp[1].eval(xi, eta);
    }
    for (i, (comp, mono)) in internal_dof_monomials(layout).iter().enumerate() {
        let integrand = disp[*comp].mul(&Poly2::monomial(*mono, 1.0));
        v[layout.boundary + i] = table.integrate(&integrand) / geom.area;
    }
    v
}
