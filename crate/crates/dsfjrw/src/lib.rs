//! Exact-arithmetic engine for scalar Lax hierarchies and their tau functions.
//!
//! The crate is organized in layers:
//!
//! * [`ring`] — sparse differential polynomials over arbitrary-precision
//!   rationals, with total `x`-derivative, formal integration and the
//!   dispersion-symbol bookkeeping used by the hierarchy rescaling.
//! * [`pdo`] — pseudo-differential operators over that ring: composition,
//!   residues, integer powers and `h`-th roots.
//! * [`model`] / [`lax`] — the concrete models (`a1`, `a3`, `d4`, `b3`, `g2`,
//!   generic `dn`) and the hierarchy engine: flows, Hamiltonian densities,
//!   two-point functions, normal coordinates, foldings.
//! * [`frobenius`] — flat metric, structure constants and potential extracted
//!   from one-variable superpotentials by residue calculus.
//! * [`principal`] — calibration, genus-zero two-point functions, topological
//!   solution and the genus-zero free energy.
//! * [`taugen`] — the tau-function expansion and invariant extraction.
//! * [`virasoro`] — Virasoro operators and constraint residuals.
//! * [`liefold`] — the matrix-level construction: affine algebra elements,
//!   dressing, and the diagram-automorphism data used by the B3/G2 foldings.
//! * [`verify`] — golden-table verification suites driven by the CLI.
//!
//! All values are immutable and all operations are pure functions; everything
//! is exact rational arithmetic (no floating point anywhere).

pub mod fixtures;
pub mod frobenius;
pub mod lax;
pub mod liefold;
pub mod model;
pub mod pdo;
pub mod principal;
pub mod ring;
pub mod taugen;
pub mod tpoly;
pub mod verify;
pub mod virasoro;


pub use ring::{DiffPoly, JetVar, Rat};
