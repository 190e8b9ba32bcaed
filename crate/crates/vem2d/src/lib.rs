//! Virtual element method for plane linear elasticity on polygonal meshes.
//!
//! The crate implements the displacement-based VEM on arbitrary polygonal
//! cells together with three enhanced strain representations that decouple
//! the strain degree p from the boundary interpolation order k:
//!
//! - `ucp`: uncoupled component-wise polynomials of degree p;
//! - `dfp`: divergence-free (self-equilibrated) stress modes derived from an
//!   Airy polynomial, with no internal dofs;
//! - `hyp`: uncoupled modes to degree k - 1 plus divergence-free modes, for
//!   k = 2 with body forces.
//!
//! Choosing p so the mode count reaches n - 3 makes the consistency
//! stiffness rank-sufficient and the stabilization term unnecessary.
//!
//! The crate ships mesh generators for five structured families of the unit
//! square, two manufactured solutions with their energy-norm error, and a
//! CLI (`vem2d`) that reproduces the convergence studies, p sweeps and
//! nearly incompressible pressure maps.

pub mod element;
pub mod mesh;
pub mod polyspace;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod study;
