//! Exact-arithmetic toolkit for p-adic valuation combinatorics and
//! integral-dependence certificates on desk-scale model rings.
//!
//! The library has five layers:
//!
//! * [`padic`] — base-p digits, the tau function, and exact valuations of
//!   factorials and binomial coefficients, each with an independent oracle.
//! * [`poly`] — sparse multivariate polynomials over exact rationals, with
//!   valuation queries standing in for fractional-power ideal tests.
//! * [`dvr`] / [`membership`] — linear solving over Z_(p) with
//!   valuation-pivoted elimination, and bounded-degree ideal membership.
//! * [`transforms`] — the four coefficient transforms (root shift,
//!   completion, degree lift, index shift) with exact verifiers.
//! * [`engine`] — the certificate recursions (general, cyclic, simplified),
//!   stabilization detection, and independent certificate verification.
//!
//! All arithmetic is exact; no floating point anywhere.

pub mod dvr;
pub mod engine;
pub mod membership;
pub mod padic;
pub mod poly;
pub mod sweeps;
pub mod transforms;

pub use padic::{PrimeBase, Valuation};
pub use poly::{Monomial, Polynomial, Var};
