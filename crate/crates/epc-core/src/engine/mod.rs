//! Recursive construction and independent verification of closure
//! certificates.
//!
//! A certificate for a relation p^N·z = c·x + d·y is a monic polynomial
//! f(T) = T^{p^L} + Σ_{j≥1} a_j·x^j·T^{p^L−j} whose coefficients satisfy two
//! families of constraints: valuation floors v(a_j) ≥ K − τ(j), and the
//! condition sums Σ_j C(p^L−j, k−j)·a_j·z^{k−j}·x^j landing in y^k·R[p^{−1}]
//! for every k up to the degree. Such an f witnesses that a fixed fractional
//! p-power multiple of z is integral over (x, y).
//!
//! Three constructors are provided. [`run_general`] grows the degree ladder
//! L_i step by step, paying for each step with a membership witness over the
//! module Q_i* = (x^i, y^i, (xy)^{i−1}z_1, …, xy·z_{i−1}); it terminates when
//! the step index catches the ladder (i = p^{L_i}). [`run_cyclic`] keeps L =
//! K + N fixed and decomposes each kernel element over the three generators
//! x^i, y^i, (xy)^{i−1}z. [`run_simplified`] is the N = 1 shortcut with all
//! τ thresholds flattened to zero. All three emit a [`Certificate`] that
//! [`verify_certificate`] re-checks from scratch, with no trust in the run.
//!
//! Scaling convention: the recursion's kernel elements z_i carry a scale
//! p^{−E_i} with E_i = K − τ(i) + τ(2), which is an irrational number
//! whenever E_i is not an integer. The engine therefore never materializes
//! z_i itself; it stores ζ_i = p^{E_i}·z_i, which is always a rational
//! polynomial, and shifts every valuation floor by the appropriate E-offset
//! instead. Membership calls receive those offsets per generator.

mod certificate;
mod cyclic;
mod general;
mod instance;
mod member;

pub use certificate::{
    verify_certificate, Certificate, CertificateMode, CoefficientMargin, StepRecord,
    TerminationStatus, VerificationReport,
};
pub use cyclic::{run_cyclic, run_simplified};
pub use general::{
    compute_zeta, detect_stabilization, find_d, init_step, run_general, step_general, DWitness,
    InitOutcome, RunFailure, StabilizationReport, StepDims, StepOutcome, StepPolicy, StepState,
    ZetaOutcome,
};
pub use instance::{coefficient_floor, zeta_scale, GeneratorTriple, ImageCache, RelationInstance};
pub use member::{floored_ideal_member, minimal_power_member, FlooredGenerator, FlooredWitness};

use thiserror::Error;

/// Engine failures. Step-level variants carry the coordinates of the check
/// that failed so aborts are reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("instance rejected: {0}")]
    BadInstance(String),

    #[error("parse failure: {0}")]
    Parse(String),

    #[error("step {i}: term j = {j} of the scaled kernel element falls below the floor {floor}")]
    RingExit { i: u64, j: u64, floor: String },

    #[error("step {i}: no D <= {cap} puts p^D times the kernel element in the step module")]
    StepCapExceeded { i: u64, cap: u32 },

    #[error("step {i}: exponent ladder would exceed the policy cap {max_l}")]
    LadderCapExceeded { i: u64, max_l: u32 },

    #[error("step limit {max_steps} reached with the ladder at L = {l}")]
    StepLimit { max_steps: u64, l: u32 },

    #[error("step {i}: check '{what}' failed at j = {j}, n = {n}")]
    ConditionFailed { i: u64, j: u64, n: u64, what: String },

    #[error("step {i}: kernel element does not decompose over the cyclic generators (instance not cyclic-representable)")]
    NotCyclic { i: u64 },

    #[error("step {i}: divisor audit failed: {detail}")]
    DivisorAudit { i: u64, detail: String },

    #[error("simplified mode requires N = 1, instance has N = {n}")]
    NotSimplifiable { n: u32 },

    #[error("certificate malformed: {0}")]
    BadCertificate(String),

    #[error("exponent out of range: {0}")]
    Range(String),
}

pub(crate) fn prime_power_u64(p: crate::padic::PrimeBase, e: u32) -> Result<u64, EngineError> {
    p.get()
        .checked_pow(e)
        .ok_or_else(|| EngineError::Range(format!("{p}^{e} overflows the step index range")))
}
