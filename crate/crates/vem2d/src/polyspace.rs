//! Polynomial strain/stress representation bases and exact integration of
//! polynomials over polygons.
//!
//! All polynomials are expressed in a scaled cell frame xi = (x - xc)/h,
//! eta = (y - yc)/h (centroid and diameter of the cell) for conditioning.
//! Isotropic scaling preserves divergence-freeness, so the divergence-free
//! bases stay divergence-free in every frame.
//!
//! Four basis kinds are provided:
//! - `Standard(k)`: uncoupled monomials per component, complete to p = k - 1;
//! - `Ucp(p)`: the same layout extended to degree p, decoupled from k;
//! - `Dfp(p)`: divergence-free modes from an Airy function of degree p + 2;
//! - `Hyp(p)`: uncoupled modes to degree 1 plus divergence-free modes of
//!   degree >= 2 (used for k = 2 with body forces).

use crate::mesh::{polygon_geometry, GeometryError, Point2};
use crate::quadrature::gauss_legendre_unit;

/// A bivariate monomial xi^a eta^b.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Monomial2 {
    pub a: u32,
    pub b: u32,
}

impl Monomial2 {
    pub fn new(a: u32, b: u32) -> Self {
        Self { a, b }
    }

    pub fn degree(&self) -> u32 {
        self.a + self.b
    }
}

/// Number of monomials of degree <= d.
pub fn monomial_count(d: u32) -> usize {
    ((d + 1) * (d + 2) / 2) as usize
}

/// Monomials of degree <= d in graded order, x-powers first within a degree:
/// 1; x, y; x^2, xy, y^2; ...
pub fn monomials_up_to(d: u32) -> Vec<Monomial2> {
    let mut out = Vec::with_capacity(monomial_count(d));
    for deg in 0..=d {
        for b in 0..=deg {
            out.push(Monomial2::new(deg - b, b));
        }
    }
    out
}

fn monomial_index(a: u32, b: u32) -> usize {
    let d = a + b;
    (d * (d + 1) / 2 + b) as usize
}

/// Local scaled coordinates of a cell: xi = (x - center)/scale.
#[derive(Clone, Copy, Debug)]
pub struct ScaledFrame {
    pub center: Point2,
    pub scale: f64,
}

impl ScaledFrame {
    /// Identity frame; scaled coordinates coincide with physical ones.
    pub fn identity() -> Self {
        Self { center: Point2::new(0.0, 0.0), scale: 1.0 }
    }

    pub fn local(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.center.x) / self.scale, (p.y - self.center.y) / self.scale)
    }
}

/// Dense bivariate polynomial over the graded monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn monomial(mono: Monomial2, coeff: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(coeff, mono.a, mono.b);
        p
    }

    pub fn from_terms(terms: &[(f64, u32, u32)]) -> Self {
        let mut p = Self::zero();
        for &(c, a, b) in terms {
            p.add_term(c, a, b);
        }
        p
    }

    pub fn add_term(&mut self, c: f64, a: u32, b: u32) {
        let idx = monomial_index(a, b);
        if self.coeffs.len() <= idx {
            self.coeffs.resize(idx + 1, 0.0);
        }
        self.coeffs[idx] += c;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn coeff(&self, a: u32, b: u32) -> f64 {
        self.coeffs.get(monomial_index(a, b)).copied().unwrap_or(0.0)
    }

    /// Terms with nonzero coefficient as (coeff, monomial).
    pub fn terms(&self) -> Vec<(f64, Monomial2)> {
        let mut out = Vec::new();
        let mut idx = 0usize;
        'outer: for deg in 0u32.. {
            for b in 0..=deg {
                if idx >= self.coeffs.len() {
                    break 'outer;
                }
                if self.coeffs[idx] != 0.0 {
                    out.push((self.coeffs[idx], Monomial2::new(deg - b, b)));
                }
                idx += 1;
            }
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms().iter().map(|(_, m)| m.degree()).max().unwrap_or(0)
    }

    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        let mut sum = 0.0;
        for (c, m) in self.terms() {
            sum += c * xi.powi(m.a as i32) * eta.powi(m.b as i32);
        }
        sum
    }

    /// Partial derivative with respect to the first scaled coordinate.
    pub fn dxi(&self) -> Poly2 {
        let mut out = Poly2::zero();
        for (c, m) in self.terms() {
            if m.a > 0 {
                out.add_term(c * m.a as f64, m.a - 1, m.b);
            }
        }
        out
    }

    /// Partial derivative with respect to the second scaled coordinate.
    pub fn deta(&self) -> Poly2 {
        let mut out = Poly2::zero();
        for (c, m) in self.terms() {
            if m.b > 0 {
                out.add_term(c * m.b as f64, m.a, m.b - 1);
            }
        }
        out
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (c1, m1) in self.terms() {
            for (c2, m2) in other.terms() {
                out.add_term(c1 * c2, m1.a + m2.a, m1.b + m2.b);
            }
        }
        out
    }

    pub fn add_scaled(&mut self, c: f64, other: &Poly2) {
        for (c2, m) in other.terms() {
            self.add_term(c * c2, m.a, m.b);
        }
    }
}

/// A 3-component polynomial vector: one strain/stress representation mode.
pub type StrainMode = [Poly2; 3];

/// A 2-component polynomial vector, e.g. the result of the equilibrium
/// operator applied to a mode.
#[derive(Clone, Debug)]
pub struct PolyVec2(pub [Poly2; 2]);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Standard { k: u32 },
    Ucp { p: u32 },
    Dfp { p: u32 },
    Hyp { p: u32 },
}

/// A strain (or stress) representation basis: a 3 x M matrix of bivariate
/// polynomials in the scaled frame, stored column-wise.
#[derive(Clone, Debug)]
pub struct StrainBasis {
    pub kind: BasisKind,
    pub cols: Vec<StrainMode>,
}

impl StrainBasis {
    /// Number of modes M.
    pub fn modes(&self) -> usize {
        self.cols.len()
    }

    /// Maximum polynomial degree over all columns.
    pub fn degree(&self) -> u32 {
        self.cols
            .iter()
            .flat_map(|col| col.iter().map(|p| p.degree()))
            .max()
            .unwrap_or(0)
    }

    /// Evaluate all modes at a scaled point, as a 3 x M matrix in
    /// column-major mode order.
    pub fn eval(&self, xi: f64, eta: f64) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(3, self.cols.len());
        for (j, col) in self.cols.iter().enumerate() {
            for r in 0..3 {
                m[(r, j)] = col[r].eval(xi, eta);
            }
        }
        m
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BasisError {
    #[error("unsupported boundary order k = {0}; only k = 1, 2")]
    UnsupportedK(u32),
    #[error("polynomial degree p = {0} out of range {1}..={2}")]
    UnsupportedP(u32, u32, u32),
}

/// Uncoupled component-wise monomial columns complete to degree p
/// ((m,0,0), (0,m,0), (0,0,m) for each monomial m in graded order).
fn uncoupled_columns(p: u32) -> Vec<StrainMode> {
    let mut cols = Vec::with_capacity(3 * monomial_count(p));
    for m in monomials_up_to(p) {
        for comp in 0..3 {
            let mut col = [Poly2::zero(), Poly2::zero(), Poly2::zero()];
            col[comp] = Poly2::monomial(m, 1.0);
            cols.push(col);
        }
    }
    cols
}

type Terms = &'static [(f64, u32, u32)];

fn mode(s1: Terms, s2: Terms, s3: Terms) -> StrainMode {
    [Poly2::from_terms(s1), Poly2::from_terms(s2), Poly2::from_terms(s3)]
}

/// The divergence-free columns shared by p = 1 bases: columns 1-7.
fn dfp_columns_p1() -> Vec<StrainMode> {
    vec![
        mode(&[(1.0, 0, 0)], &[], &[]),
        mode(&[], &[(1.0, 0, 0)], &[]),
        mode(&[], &[], &[(1.0, 0, 0)]),
        mode(&[(1.0, 0, 1)], &[], &[]),
        mode(&[], &[(1.0, 1, 0)], &[]),
        mode(&[(1.0, 1, 0)], &[], &[(-1.0, 0, 1)]),
        mode(&[], &[(1.0, 0, 1)], &[(-1.0, 1, 0)]),
    ]
}

/// Degree-2 block in the p = 2 printed order: columns 8-12.
fn dfp_columns_deg2_p2() -> Vec<StrainMode> {
    vec![
        mode(&[(2.0, 1, 1)], &[], &[(-1.0, 0, 2)]),
        mode(&[], &[(2.0, 1, 1)], &[(-1.0, 2, 0)]),
        mode(&[(1.0, 2, 0)], &[(1.0, 0, 2)], &[(-2.0, 1, 1)]),
        mode(&[(1.0, 0, 2)], &[], &[]),
        mode(&[], &[(1.0, 2, 0)], &[]),
    ]
}

/// Degree-2 block in the p = 3/4 printed order: columns 8-12.
fn dfp_columns_deg2_p3() -> Vec<StrainMode> {
    vec![
        mode(&[(1.0, 2, 0)], &[(1.0, 0, 2)], &[(-2.0, 1, 1)]),
        mode(&[(1.0, 0, 2)], &[], &[]),
        mode(&[], &[(1.0, 2, 0)], &[]),
        mode(&[], &[(-2.0, 1, 1)], &[(1.0, 2, 0)]),
        mode(&[(-2.0, 1, 1)], &[], &[(1.0, 0, 2)]),
    ]
}

/// Degree-3 block: columns 13-18.
fn dfp_columns_deg3() -> Vec<StrainMode> {
    vec![
        mode(&[(1.0, 3, 0)], &[(3.0, 1, 2)], &[(-3.0, 2, 1)]),
        mode(&[(1.0, 0, 3)], &[], &[]),
        mode(&[], &[(1.0, 3, 0)], &[]),
        mode(&[(3.0, 2, 1)], &[(1.0, 0, 3)], &[(-3.0, 1, 2)]),
        mode(&[], &[(-3.0, 2, 1)], &[(1.0, 3, 0)]),
        mode(&[(-3.0, 1, 2)], &[], &[(1.0, 0, 3)]),
    ]
}

/// Degree-4 block: columns 19-25.
fn dfp_columns_deg4() -> Vec<StrainMode> {
    vec![
        mode(&[(1.0, 0, 4)], &[], &[]),
        mode(&[], &[(1.0, 4, 0)], &[]),
        mode(&[(-4.0, 1, 3)], &[], &[(1.0, 0, 4)]),
        mode(&[], &[(-4.0, 3, 1)], &[(1.0, 4, 0)]),
        mode(&[(2.0, 3, 1)], &[(2.0, 1, 3)], &[(-3.0, 2, 2)]),
        mode(&[(1.0, 4, 0)], &[(6.0, 2, 2)], &[(-4.0, 3, 1)]),
        mode(&[(6.0, 2, 2)], &[(1.0, 0, 4)], &[(-4.0, 1, 3)]),
    ]
}

/// Divergence-free columns of degree >= 2 in the printed order for p >= 3.
fn dfp_high_order_columns(p: u32) -> Vec<StrainMode> {
    let mut cols = dfp_columns_deg2_p3();
    cols.extend(dfp_columns_deg3());
    if p >= 4 {
        cols.extend(dfp_columns_deg4());
    }
    cols
}

/// Standard displacement-based VEM basis: uncoupled monomials to p = k - 1.
pub fn build_standard_basis(k: u32) -> Result<StrainBasis, BasisError> {
    if !(1..=2).contains(&k) {
        return Err(BasisError::UnsupportedK(k));
    }
    Ok(StrainBasis { kind: BasisKind::Standard { k }, cols: uncoupled_columns(k - 1) })
}

/// Uncoupled polynomial representation of degree p (3 (p+1)(p+2)/2 modes).
pub fn build_ucp_basis(p: u32) -> Result<StrainBasis, BasisError> {
    if !(1..=4).contains(&p) {
        return Err(BasisError::UnsupportedP(p, 1, 4));
    }
    Ok(StrainBasis { kind: BasisKind::Ucp { p }, cols: uncoupled_columns(p) })
}

/// Divergence-free polynomial representation of degree p, built from a
/// complete Airy polynomial of degree p + 2 ((p+3)(p+4)/2 - 3 modes).
pub fn build_dfp_basis(p: u32) -> Result<StrainBasis, BasisError> {
    if !(1..=4).contains(&p) {
        return Err(BasisError::UnsupportedP(p, 1, 4));
    }
    let mut cols = dfp_columns_p1();
    match p {
        1 => {}
        2 => cols.extend(dfp_columns_deg2_p2()),
        _ => cols.extend(dfp_high_order_columns(p)),
    }
    Ok(StrainBasis { kind: BasisKind::Dfp { p }, cols })
}

/// Hybrid representation for k = 2 with body forces: uncoupled monomials to
/// degree 1 followed by the divergence-free modes of degree >= 2.
pub fn build_hyp_basis(k: u32, p: u32) -> Result<StrainBasis, BasisError> {
    if k != 2 {
        return Err(BasisError::UnsupportedK(k));
    }
    if !(3..=4).contains(&p) {
        return Err(BasisError::UnsupportedP(p, 3, 4));
    }
    let mut cols = uncoupled_columns(1);
    cols.extend(dfp_high_order_columns(p));
    Ok(StrainBasis { kind: BasisKind::Hyp { p }, cols })
}

/// Apply the equilibrium operator to a mode (s1, s2, s3):
/// (d s1/dx + d s3/dy, d s3/dx + d s2/dy), as polynomials in the scaled
/// frame with the 1/scale chain-rule factor applied.
pub fn apply_equilibrium_operator(col: &StrainMode, scale: f64) -> PolyVec2 {
    let inv = 1.0 / scale;
    let mut first = Poly2::zero();
    first.add_scaled(inv, &col[0].dxi());
    first.add_scaled(inv, &col[2].deta());
    let mut second = Poly2::zero();
    second.add_scaled(inv, &col[2].dxi());
    second.add_scaled(inv, &col[1].deta());
    PolyVec2([first, second])
}

/// Exact integral of a scaled monomial over a simple polygon by the
/// divergence theorem, reduced to per-edge Gauss-Legendre of exact order.
/// Works for convex and concave polygons alike; exact to round-off for
/// total degree <= 12.
pub fn integrate_monomial(
    points: &[Point2],
    mono: Monomial2,
    frame: &ScaledFrame,
) -> Result<f64, GeometryError> {
    polygon_geometry(points)?;
    Ok(integrate_monomial_unchecked(points, mono, frame))
}

pub(crate) fn integrate_monomial_unchecked(
    points: &[Point2],
    mono: Monomial2,
    frame: &ScaledFrame,
) -> f64 {
    debug_assert!(mono.degree() <= 12, "monomial degree above supported bound");
    // F = (scale * xi^(a+1) eta^b / (a+1), 0) has divergence xi^a eta^b.
    let a = mono.a as i32;
    let b = mono.b as i32;
    let n_gauss = ((mono.degree() as usize + 2) + 1) / 2; // ceil((deg+2)/2)
    let gl = gauss_legendre_unit(n_gauss.max(1));
    let factor = frame.scale / (a as f64 + 1.0);

    let mut total = 0.0;
    let m = points.len();
    for i in 0..m {
        let p = points[i];
        let q = points[(i + 1) % m];
        // Outward normal times edge length: (dy, -dx).
        let nx_len = q.y - p.y;
        if nx_len == 0.0 {
            continue;
        }
        let (xi_p, eta_p) = frame.local(p);
        let (xi_q, eta_q) = frame.local(q);
        let mut edge_sum = 0.0;
        for &(t, w) in &gl {
            let xi = xi_p + t * (xi_q - xi_p);
            let eta = eta_p + t * (eta_q - eta_p);
            edge_sum += w * xi.powi(a + 1) * eta.powi(b);
        }
        total += factor * nx_len * edge_sum;
    }
    total
}

/// Table of integrals of all scaled monomials up to a degree over one cell.
pub struct MonomialIntegrals {
    max_deg: u32,
    values: Vec<f64>,
}

impl MonomialIntegrals {
    pub fn compute(points: &[Point2], frame: &ScaledFrame, max_deg: u32) -> Self {
        let values = monomials_up_to(max_deg)
            .into_iter()
            .map(|m| integrate_monomial_unchecked(points, m, frame))
            .collect();
        Self { max_deg, values }
    }

    pub fn get(&self, a: u32, b: u32) -> f64 {
        debug_assert!(a + b <= self.max_deg);
        self.values[monomial_index(a, b)]
    }

    /// Integral of a polynomial in the same frame.
    pub fn integrate(&self, poly: &Poly2) -> f64 {
        poly.terms().iter().map(|(c, m)| c * self.get(m.a, m.b)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{polygon_quadrature, TriangleRule};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn standard_basis_layout() {
        let b1 = build_standard_basis(1).unwrap();
        assert_eq!(b1.modes(), 3);
        assert!(b1.cols[0][0].coeff(0, 0) == 1.0 && b1.cols[0][1].is_zero() && b1.cols[0][2].is_zero());
        assert!(b1.cols[1][1].coeff(0, 0) == 1.0);
        assert!(b1.cols[2][2].coeff(0, 0) == 1.0);

        let b2 = build_standard_basis(2).unwrap();
        assert_eq!(b2.modes(), 9);
        assert_eq!(b2.degree(), 1);
        // Column 4 (1-based) is (x, 0, 0).
        assert!(b2.cols[3][0].coeff(1, 0) == 1.0 && b2.cols[3][1].is_zero() && b2.cols[3][2].is_zero());

        assert!(build_standard_basis(3).is_err());
    }

    #[test]
    fn mode_counts_match_formulas() {
        for (p, want) in [(1, 9), (2, 18), (3, 30), (4, 45)] {
            assert_eq!(build_ucp_basis(p).unwrap().modes(), want);
        }
        for (p, want) in [(1, 7), (2, 12), (3, 18), (4, 25)] {
            assert_eq!(build_dfp_basis(p).unwrap().modes(), want);
        }
        for (p, want) in [(3, 20), (4, 27)] {
            assert_eq!(build_hyp_basis(2, p).unwrap().modes(), want);
        }
        assert!(build_ucp_basis(5).is_err());
        assert!(build_dfp_basis(0).is_err());
        assert!(build_hyp_basis(1, 3).is_err());
        assert!(build_hyp_basis(2, 2).is_err());
    }

    #[test]
    fn dfp_printed_columns() {
        let p1 = build_dfp_basis(1).unwrap();
        // Column 6 (1-based) is (x, 0, -y).
        assert_eq!(p1.cols[5][0].coeff(1, 0), 1.0);
        assert!(p1.cols[5][1].is_zero());
        assert_eq!(p1.cols[5][2].coeff(0, 1), -1.0);

        let p2 = build_dfp_basis(2).unwrap();
        // Column 8 (1-based) is (2xy, 0, -y^2).
        assert_eq!(p2.cols[7][0].coeff(1, 1), 2.0);
        assert!(p2.cols[7][1].is_zero());
        assert_eq!(p2.cols[7][2].coeff(0, 2), -1.0);
    }

    #[test]
    fn dfp_and_hyp_high_order_columns_are_divergence_free() {
        for p in 1..=4 {
            let basis = build_dfp_basis(p).unwrap();
            for (j, col) in basis.cols.iter().enumerate() {
                let PolyVec2([f, g]) = apply_equilibrium_operator(col, 1.0);
                assert!(f.is_zero() && g.is_zero(), "DFP p={p} column {j} not divergence-free");
            }
        }
        for p in 3..=4 {
            let basis = build_hyp_basis(2, p).unwrap();
            for (j, col) in basis.cols.iter().enumerate().skip(9) {
                let PolyVec2([f, g]) = apply_equilibrium_operator(col, 1.0);
                assert!(f.is_zero() && g.is_zero(), "HYP p={p} column {j} not divergence-free");
            }
        }
    }

    #[test]
    fn divergence_free_in_any_scaled_frame() {
        // Symbolic zero regardless of frame scale.
        let basis = build_dfp_basis(4).unwrap();
        for scale in [0.125, 1.0, 3.5] {
            for col in &basis.cols {
                let PolyVec2([f, g]) = apply_equilibrium_operator(col, scale);
                assert!(f.is_zero() && g.is_zero());
            }
        }
    }

    #[test]
    fn equilibrium_of_uncoupled_column() {
        // (x, 0, 0) -> (1, 0) in the identity frame.
        let col = mode(&[(1.0, 1, 0)], &[], &[]);
        let PolyVec2([f, g]) = apply_equilibrium_operator(&col, 1.0);
        assert_eq!(f.coeff(0, 0), 1.0);
        assert!(g.is_zero());
        // With scale h the chain rule gives 1/h.
        let PolyVec2([fh, _]) = apply_equilibrium_operator(&col, 0.25);
        assert_eq!(fh.coeff(0, 0), 4.0);
    }

    #[test]
    fn integrate_monomial_examples() {
        let frame = ScaledFrame::identity();
        let sq = unit_square();
        assert_relative_eq!(
            integrate_monomial(&sq, Monomial2::new(1, 0), &frame).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            integrate_monomial(&sq, Monomial2::new(2, 2), &frame).unwrap(),
            1.0 / 9.0,
            epsilon = 1e-15
        );
        let lshape = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert_relative_eq!(
            integrate_monomial(&lshape, Monomial2::new(0, 0), &frame).unwrap(),
            0.75,
            epsilon = 1e-15
        );
    }

    #[test]
    fn integrate_monomial_rejects_degenerate() {
        let line = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        assert!(integrate_monomial(&line, Monomial2::new(0, 0), &ScaledFrame::identity()).is_err());
    }

    /// Random star-shaped polygon around the origin; often concave.
    fn random_polygon(rng: &mut ChaCha8Rng) -> Vec<Point2> {
        let n = rng.random_range(5..12);
        let mut angles: Vec<f64> =
            (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        angles
            .iter()
            .map(|&t| {
                let r = 0.3 + 0.7 * rng.random::<f64>();
                Point2::new(0.4 + 0.3 * r * t.cos(), 0.5 + 0.3 * r * t.sin())
            })
            .collect()
    }

    #[test]
    fn greens_theorem_agrees_with_subtriangulation() {
        // Independent oracle: ear clipping plus a polynomially exact
        // collapsed Gauss rule, on random simple polygons, degrees <= 8.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..20 {
            let poly = random_polygon(&mut rng);
            if poly.len() < 4 {
                continue;
            }
            let g = polygon_geometry(&poly).unwrap();
            let frame = ScaledFrame { center: g.centroid, scale: g.diameter };
            let qps = polygon_quadrature(&poly, TriangleRule::Collapsed(5), 0);
            for mono in monomials_up_to(8) {
                let exact = integrate_monomial(&poly, mono, &frame).unwrap();
                let quad: f64 = qps
                    .iter()
                    .map(|qp| {
                        let (xi, eta) = frame.local(qp.point);
                        qp.weight * xi.powi(mono.a as i32) * eta.powi(mono.b as i32)
                    })
                    .sum();
                let scale = g.area.max(exact.abs());
                assert!(
                    (exact - quad).abs() <= 1e-12 * scale,
                    "case {case}, monomial ({}, {}): {exact} vs {quad}",
                    mono.a,
                    mono.b
                );
            }
        }
    }

    #[test]
    fn gram_matrices_are_positive_definite() {
        // Linear independence of every basis on a non-trivial polygon.
        let poly = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.8, 0.1),
            Point2::new(1.0, 0.6),
            Point2::new(0.5, 0.65),
            Point2::new(0.45, 1.0),
            Point2::new(-0.1, 0.7),
        ];
        let g = polygon_geometry(&poly).unwrap();
        let frame = ScaledFrame { center: g.centroid, scale: g.diameter };
        let table = MonomialIntegrals::compute(&poly, &frame, 8);
        let bases = [
            build_standard_basis(2).unwrap(),
            build_ucp_basis(4).unwrap(),
            build_dfp_basis(4).unwrap(),
            build_hyp_basis(2, 4).unwrap(),
        ];
        for basis in &bases {
            let m = basis.modes();
            let mut gram = nalgebra::DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let mut v = 0.0;
                    for r in 0..3 {
                        v += table.integrate(&basis.cols[i][r].mul(&basis.cols[j][r]));
                    }
                    gram[(i, j)] = v;
                    gram[(j, i)] = v;
                }
            }
            assert!(
                nalgebra::Cholesky::new(gram).is_some(),
                "{:?} Gram matrix not SPD",
                basis.kind
            );
        }
    }
}
