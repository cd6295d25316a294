//! Symbolic–numeric engine for Kontsevich star products on R^d.
//!
//! Coefficients are exact rationals throughout the algebraic layers
//! ([`poly`], [`multivector`], [`multidiff`], [`graphs`], [`star`]);
//! only the configuration-space integrals in [`weights`] are floating point.

pub mod error;
pub mod graphs;
pub mod linalg;
pub mod multidiff;
pub mod multivector;
pub mod parse;
pub mod poly;
pub mod series;
pub mod star;
pub mod weights;

pub use error::{Error, Result};
pub use multidiff::{
    compose_i, gerstenhaber, hkr_u1, hochschild_d, mc_residual, op_apply, u1_defect, GaugeOp, MultiDiffOp, StarProduct,
};
pub use multivector::{jacobiator, mv_wedge, parse_multivector, poisson_bracket, schouten, MultiVectorField};
pub use parse::parse_poly;
pub use poly::{MultiIndex, Poly, Rational};
pub use series::{series_mul, EpsSeries};
