//! Coefficient transforms for monic polynomials f(T) = Σ a_i T^{n−i}.
//!
//! Four constructions, each with an exact verifier:
//!
//! * root shift: the companion sequence b_i whose polynomial g has roots
//!   z − x·w for the roots w of f;
//! * completion: extend a partial sequence by the unique next coefficient
//!   that keeps the y-power conditions alive;
//! * degree lift: rescale a sequence from degree p^L to degree p^M > p^L,
//!   extracting the unit parts of the lift factors;
//! * index shift: reindex a sequence upward by d with compensating binomial
//!   ratios, preserving all conditions below i.
//!
//! Everything here is exact rational arithmetic on sparse polynomials; no
//! roots are ever constructed. The verifiers check closed-form polynomial
//! identities and monomial divisibility instead.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::padic::PrimeBase;
use crate::poly::{binomial_big, monomial_ideal_member, Polynomial, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("coefficient sequence must start with a_0 = 1")]
    NotMonic,
    #[error("sequence has {have} entries, needs at least {need}")]
    TooShort { need: usize, have: usize },
    #[error("context requires a nonzero y")]
    ZeroY,
    #[error("root-shift identity requires a nonzero x")]
    ZeroX,
    #[error("context polynomials must not involve the indeterminate T")]
    ReservedVariable,
    #[error("z does not match the supplied decomposition over (x, y)")]
    BadDecomposition,
    #[error("index bounds violated: {0}")]
    Range(String),
    #[error("membership tests need a single-term y")]
    CompositeY,
    #[error("condition {index} failed its y-power membership")]
    ConditionFailed { index: usize },
}

/// A coefficient list a_0..a_k for f(T) = Σ a_j T^{n−j}, together with the
/// degree-style parameter n (p^L throughout the recursion) and the ambient
/// prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientSequence {
    pub n: u64,
    pub entries: Vec<Polynomial>,
    pub p: PrimeBase,
}

impl CoefficientSequence {
    /// A sequence under the monic convention a_0 = 1.
    pub fn monic(
        n: u64,
        entries: Vec<Polynomial>,
        p: PrimeBase,
    ) -> Result<CoefficientSequence, TransformError> {
        if entries.first().map(|a0| *a0 == Polynomial::one()) != Some(true) {
            return Err(TransformError::NotMonic);
        }
        Ok(CoefficientSequence { n, entries, p })
    }

    /// A sequence without the monic check; index shifts produce leading
    /// zeros by construction.
    pub fn raw(n: u64, entries: Vec<Polynomial>, p: PrimeBase) -> CoefficientSequence {
        CoefficientSequence { n, entries, p }
    }

    pub fn is_monic(&self) -> bool {
        self.entries.first() == Some(&Polynomial::one())
    }

    /// The polynomial Σ a_j T^{n−j} over the stored entries.
    pub fn to_polynomial(&self) -> Polynomial {
        let mut f = Polynomial::zero();
        for (j, a) in self.entries.iter().enumerate() {
            let e = u16::try_from(self.n - j as u64).expect("degree fits a monomial exponent");
            f = f.add(&a.mul(&Polynomial::var(Var::T).pow(e as u32)));
        }
        f
    }
}

/// The post-substitution parameter triple: conditions are statements about
/// sums of a_j z^{k−j} x^j landing in powers of y.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftContext {
    pub x: Polynomial,
    pub y: Polynomial,
    pub z: Polynomial,
}

impl ShiftContext {
    pub fn new(x: Polynomial, y: Polynomial, z: Polynomial) -> Result<ShiftContext, TransformError> {
        if y.is_zero() {
            return Err(TransformError::ZeroY);
        }
        if [&x, &y, &z].iter().any(|f| f.degree_in(Var::T) > 0) {
            return Err(TransformError::ReservedVariable);
        }
        Ok(ShiftContext { x, y, z })
    }
}

/// The decomposition z = a_bar·x + b_bar·y backing coefficient completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZDecomposition {
    pub a_bar: Polynomial,
    pub b_bar: Polynomial,
}

impl ZDecomposition {
    pub fn matches(&self, ctx: &ShiftContext) -> bool {
        self.a_bar.mul(&ctx.x).add(&self.b_bar.mul(&ctx.y)) == ctx.z
    }
}

fn prime_power(p: PrimeBase, e: u32) -> BigInt {
    BigInt::from(p.get()).pow(e)
}

/// Σ_{j=0}^{k} C(n−j, k−j)·a_j·z^{k−j}·x^j with entries beyond the stored
/// range treated as zero. This is the k-th condition sum; the conditions
/// themselves ask it to land in y^k.
pub fn condition_sum(
    entries: &[Polynomial],
    n: &BigInt,
    k: usize,
    ctx: &ShiftContext,
) -> Polynomial {
    let mut zpow = vec![Polynomial::one()];
    let mut xpow = vec![Polynomial::one()];
    for e in 1..=k {
        zpow.push(zpow[e - 1].mul(&ctx.z));
        xpow.push(xpow[e - 1].mul(&ctx.x));
    }
    let mut sum = Polynomial::zero();
    for (j, a) in entries.iter().enumerate().take(k + 1) {
        if a.is_zero() {
            continue;
        }
        let c = binomial_big(&(n - BigInt::from(j)), (k - j) as u64);
        sum = sum.add(&a.mul(&zpow[k - j]).mul(&xpow[j]).scale(&c));
    }
    sum
}

/// Is f a multiple of the k-th power of y, term by term? The scalar part of
/// y is irrelevant to divisibility and ignored.
pub fn y_power_membership(
    f: &Polynomial,
    y: &Polynomial,
    k: usize,
) -> Result<bool, TransformError> {
    if k == 0 || f.is_zero() {
        return Ok(true);
    }
    if y.num_terms() != 1 {
        return Err(TransformError::CompositeY);
    }
    let (m, _) = y.terms().next().expect("single term");
    let e = u16::try_from(k).map_err(|_| TransformError::Range(format!("power {k} too large")))?;
    Ok(monomial_ideal_member(f, &[m.pow(e)]))
}

/// b_i = (−1)^i Σ_{j=0}^i C(n−j, i−j)·a_j·z^{i−j}·x^j for i = 0..n.
///
/// If f has roots w, the polynomial with these coefficients has roots
/// z − x·w; the sign soaks up the reversal.
pub fn build_b_coefficients(
    a: &CoefficientSequence,
    ctx: &ShiftContext,
    n: u64,
) -> Result<CoefficientSequence, TransformError> {
    if !a.is_monic() {
        return Err(TransformError::NotMonic);
    }
    let need = (n + 1) as usize;
    if a.entries.len() != need {
        return Err(TransformError::TooShort { need, have: a.entries.len() });
    }
    let nn = BigInt::from(n);
    let mut b = Vec::with_capacity(need);
    for i in 0..need {
        let s = condition_sum(&a.entries, &nn, i, ctx);
        b.push(if i % 2 == 0 { s } else { s.neg() });
    }
    Ok(CoefficientSequence::raw(n, b, a.p))
}

/// Checks the closed form g(T) = (−1)^n·x^n·f((z−T)/x) with x^n cleared:
/// Σ b_i T^{n−i} must equal (−1)^n Σ a_j (z−T)^{n−j} x^j exactly.
pub fn verify_root_shift_identity(
    a: &CoefficientSequence,
    ctx: &ShiftContext,
    n: u64,
) -> Result<bool, TransformError> {
    if ctx.x.is_zero() {
        return Err(TransformError::ZeroX);
    }
    let b = build_b_coefficients(a, ctx, n)?;
    let g = b.to_polynomial();

    let z_minus_t = ctx.z.sub(&Polynomial::var(Var::T));
    let mut rhs = Polynomial::zero();
    let mut xpow = Polynomial::one();
    let mut shifted_pow = vec![Polynomial::one()];
    for e in 1..=n as usize {
        shifted_pow.push(shifted_pow[e - 1].mul(&z_minus_t));
    }
    for (j, aj) in a.entries.iter().enumerate() {
        rhs = rhs.add(&aj.mul(&shifted_pow[(n as usize) - j]).mul(&xpow));
        if (j as u64) < n {
            xpow = xpow.mul(&ctx.x);
        }
    }
    if n % 2 == 1 {
        rhs = rhs.neg();
    }
    Ok(g == rhs)
}

/// The unique a_k making the k-th condition sum vanish in the reduced
/// z = a_bar·x picture: a_k = −Σ_{j<k} C(n−j, k−j)·a_j·a_bar^{k−j}.
///
/// The k-th condition for the full z is then checked (it follows from the
/// reduced one whenever the earlier conditions held, and failing it means
/// the precondition was violated).
pub fn complete_next_coefficient(
    a: &CoefficientSequence,
    split: &ZDecomposition,
    ctx: &ShiftContext,
    n: u64,
) -> Result<Polynomial, TransformError> {
    if !a.is_monic() {
        return Err(TransformError::NotMonic);
    }
    let k = a.entries.len();
    if k as u64 > n {
        return Err(TransformError::Range(format!("completion index {k} exceeds degree {n}")));
    }
    if !split.matches(ctx) {
        return Err(TransformError::BadDecomposition);
    }

    let mut abar_pow = vec![Polynomial::one()];
    for e in 1..=k {
        abar_pow.push(abar_pow[e - 1].mul(&split.a_bar));
    }
    let nn = BigInt::from(n);
    let mut a_k = Polynomial::zero();
    for (j, aj) in a.entries.iter().enumerate() {
        let c = binomial_big(&(&nn - BigInt::from(j)), (k - j) as u64);
        a_k = a_k.add(&aj.mul(&abar_pow[k - j]).scale(&c));
    }
    a_k = a_k.neg();

    let mut completed = a.entries.clone();
    completed.push(a_k.clone());
    let s = condition_sum(&completed, &nn, k, ctx);
    if !y_power_membership(&s, &ctx.y, k)? {
        return Err(TransformError::ConditionFailed { index: k });
    }
    Ok(a_k)
}

/// The j-th lift factor ∏_{m=0}^{j−1}(p^M−m)/(p^L−m) and its unit part
/// factor/p^{M−L}. For j ≥ 1 the unit part has p-valuation 0.
pub fn lift_factor(p: PrimeBase, l_exp: u32, m_exp: u32, j: u64) -> (BigRational, BigRational) {
    let pl = prime_power(p, l_exp);
    let pm = prime_power(p, m_exp);
    let mut factor = BigRational::one();
    for m in 0..j {
        factor *= BigRational::new(&pm - BigInt::from(m), &pl - BigInt::from(m));
    }
    let scale = BigRational::from_integer(prime_power(p, m_exp - l_exp));
    let unit = &factor / &scale;
    (factor, unit)
}

#[derive(Debug, Clone)]
pub struct LiftOutcome {
    pub lifted: CoefficientSequence,
    /// One unit per index; index 0 carries no lift and stores 1.
    pub units: Vec<BigRational>,
}

/// Rescale a degree-p^L sequence to degree p^M: ã_j = (∏_{m<j}(p^M−m)/(p^L−m))·a_j.
///
/// Each factor is exactly p^{M−L} times a unit; the units are returned for
/// the ledger.
pub fn lift_degree(
    a: &CoefficientSequence,
    l_exp: u32,
    m_exp: u32,
) -> Result<LiftOutcome, TransformError> {
    if m_exp <= l_exp {
        return Err(TransformError::Range(format!("lift needs M > L, got L={l_exp}, M={m_exp}")));
    }
    let p = a.p;
    let pl = prime_power(p, l_exp);
    let pm = prime_power(p, m_exp);
    if BigInt::from(a.n) != pl {
        return Err(TransformError::Range(format!("sequence degree {} is not p^L", a.n)));
    }
    if BigInt::from(a.entries.len()) > pl {
        return Err(TransformError::Range(format!(
            "top index {} must stay below p^L = {pl}",
            a.entries.len() - 1
        )));
    }
    let new_n = u64::try_from(&pm)
        .map_err(|_| TransformError::Range(format!("p^M = {pm} out of range")))?;

    let mut entries = Vec::with_capacity(a.entries.len());
    let mut units = Vec::with_capacity(a.entries.len());
    for (j, aj) in a.entries.iter().enumerate() {
        let (factor, unit) = lift_factor(p, l_exp, m_exp, j as u64);
        entries.push(aj.scale(&factor));
        if j == 0 {
            units.push(BigRational::one());
        } else {
            debug_assert_eq!(crate::padic::big_rational_valuation(&unit, p), crate::padic::Valuation::Finite(0));
            units.push(unit);
        }
    }
    Ok(LiftOutcome { lifted: CoefficientSequence::raw(new_n, entries, p), units })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftReport {
    /// Per i ≤ k_max: lifted condition sum equals the lift factor times the
    /// original condition sum.
    pub identities: Vec<bool>,
    /// Per i ≤ k_max: the lifted condition sum still lands in y^i.
    pub memberships: Vec<bool>,
}

impl LiftReport {
    pub fn all_hold(&self) -> bool {
        self.identities.iter().chain(&self.memberships).all(|&f| f)
    }
}

/// Check, for every i ≤ k_max, the identity
/// Σ C(p^M−j, i−j)·ã_j·z^{i−j}·x^j = factor_i·Σ C(p^L−j, i−j)·a_j·z^{i−j}·x^j
/// and the persistence of the y^i membership. factor_i is the i-th lift
/// factor (1 at i = 0, p^{M−L}·q_i beyond).
pub fn verify_lift(
    a: &CoefficientSequence,
    lifted: &CoefficientSequence,
    l_exp: u32,
    m_exp: u32,
    ctx: &ShiftContext,
    k_max: usize,
) -> Result<LiftReport, TransformError> {
    if m_exp <= l_exp {
        return Err(TransformError::Range(format!("lift needs M > L, got L={l_exp}, M={m_exp}")));
    }
    let p = a.p;
    let pl = prime_power(p, l_exp);
    let pm = prime_power(p, m_exp);
    for (seq, expected, tag) in [(a, &pl, "source"), (lifted, &pm, "lifted")] {
        if BigInt::from(seq.n) != *expected {
            return Err(TransformError::Range(format!("{tag} degree {} mismatches", seq.n)));
        }
        if seq.entries.len() <= k_max {
            return Err(TransformError::TooShort { need: k_max + 1, have: seq.entries.len() });
        }
    }

    let mut identities = Vec::with_capacity(k_max + 1);
    let mut memberships = Vec::with_capacity(k_max + 1);
    for i in 0..=k_max {
        let lhs = condition_sum(&lifted.entries, &pm, i, ctx);
        let (factor, _) = lift_factor(p, l_exp, m_exp, i as u64);
        let rhs = condition_sum(&a.entries, &pl, i, ctx).scale(&factor);
        identities.push(lhs == rhs);
        memberships.push(y_power_membership(&lhs, &ctx.y, i)?);
    }
    Ok(LiftReport { identities, memberships })
}

fn check_shift_ranges(
    p: PrimeBase,
    d: u64,
    i: u64,
    l_exp: u32,
    m_exp: u32,
) -> Result<(BigInt, BigInt), TransformError> {
    if m_exp < l_exp {
        return Err(TransformError::Range(format!("shift needs M >= L, got L={l_exp}, M={m_exp}")));
    }
    let pl = prime_power(p, l_exp);
    let pm = prime_power(p, m_exp);
    if !(0 < d && d < i && BigInt::from(i) <= pl) {
        return Err(TransformError::Range(format!(
            "shift needs 0 < d < i <= p^L, got d={d}, i={i}, p^L={pl}"
        )));
    }
    Ok((pl, pm))
}

/// Reindex upward by d: ã_j = 0 for j < d and
/// ã_j = y^d·C(p^L−j+d, i−j)·a_{j−d} / C(p^M−j, i−j) for d ≤ j ≤ i−1.
///
/// The divisions are exact in the fraction field; the denominators are
/// nonzero throughout the admitted ranges.
pub fn shift_transform(
    a: &CoefficientSequence,
    d: u64,
    i: u64,
    l_exp: u32,
    m_exp: u32,
    ctx: &ShiftContext,
) -> Result<CoefficientSequence, TransformError> {
    let p = a.p;
    let (pl, pm) = check_shift_ranges(p, d, i, l_exp, m_exp)?;
    if BigInt::from(a.n) != pl {
        return Err(TransformError::Range(format!("sequence degree {} is not p^L", a.n)));
    }
    let need = (i - d) as usize;
    if a.entries.len() < need {
        return Err(TransformError::TooShort { need, have: a.entries.len() });
    }
    let y_d = ctx.y.pow(u32::try_from(d).expect("small shift"));
    let new_n = u64::try_from(&pm)
        .map_err(|_| TransformError::Range(format!("p^M = {pm} out of range")))?;

    let mut entries = vec![Polynomial::zero(); d as usize];
    for j in d..i {
        let top = binomial_big(&(&pl - BigInt::from(j - d)), (i - j) as u64);
        let bottom = binomial_big(&(&pm - BigInt::from(j)), (i - j) as u64);
        assert!(!bottom.is_zero(), "denominator binomial vanished inside admitted range");
        let scale = top / bottom;
        entries.push(a.entries[(j - d) as usize].mul(&y_d).scale(&scale));
    }
    Ok(CoefficientSequence::raw(new_n, entries, p))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftReport {
    /// Per k < i: the shifted condition sum lands in y^k.
    pub memberships: Vec<bool>,
    /// The binomial ratio C(p^M−m−d, k−m−d)·C(p^L−m, i−m−d)/C(p^M−m−d, i−m−d)
    /// factors as C(p^L−m, k−d−m)·q with one q per k, independent of m.
    pub q_independent: bool,
}

impl ShiftReport {
    pub fn all_hold(&self) -> bool {
        self.q_independent && self.memberships.iter().all(|&f| f)
    }
}

/// Check the shifted sequence's conditions below i, and the m-independence
/// of the ratio q that makes the shift work. q is computed at m = 0 and
/// cross-checked at every other m.
pub fn verify_shift(
    a: &CoefficientSequence,
    shifted: &CoefficientSequence,
    d: u64,
    i: u64,
    l_exp: u32,
    m_exp: u32,
    ctx: &ShiftContext,
) -> Result<ShiftReport, TransformError> {
    let p = a.p;
    let (pl, pm) = check_shift_ranges(p, d, i, l_exp, m_exp)?;

    let mut memberships = Vec::with_capacity(i as usize);
    for k in 0..i {
        let s = condition_sum(&shifted.entries, &pm, k as usize, ctx);
        memberships.push(y_power_membership(&s, &ctx.y, k as usize)?);
    }

    let mut q_independent = true;
    for k in d..i {
        let mut q_at_zero: Option<BigRational> = None;
        for m in 0..=(k - d) {
            let md = BigInt::from(m + d);
            let ratio = binomial_big(&(&pm - &md), k - m - d)
                * binomial_big(&(&pl - BigInt::from(m)), i - m - d)
                / binomial_big(&(&pm - &md), i - m - d);
            let base = binomial_big(&(&pl - BigInt::from(m)), k - d - m);
            assert!(!base.is_zero(), "base binomial vanished inside admitted range");
            let q = ratio / base;
            match &q_at_zero {
                None => q_at_zero = Some(q),
                Some(q0) => {
                    if q != *q0 {
                        q_independent = false;
                    }
                }
            }
        }
    }
    Ok(ShiftReport { memberships, q_independent })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> PrimeBase {
        PrimeBase::new(2).unwrap()
    }

    fn p3() -> PrimeBase {
        PrimeBase::new(3).unwrap()
    }

    fn poly(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn symbolic_ctx() -> ShiftContext {
        ShiftContext::new(poly("x"), poly("y"), poly("z")).unwrap()
    }

    #[test]
    fn b_for_linear_polynomial() {
        // n=1, f(T) = T − c with x=1: g(T) = T − (z − c).
        let a = CoefficientSequence::monic(1, vec![poly("1"), poly("-3")], p2()).unwrap();
        let ctx = ShiftContext::new(poly("1"), poly("y"), poly("z")).unwrap();
        let b = build_b_coefficients(&a, &ctx, 1).unwrap();
        assert_eq!(b.entries[0], poly("1"));
        assert_eq!(b.entries[1], poly("-z + 3"));
    }

    #[test]
    fn b_for_pure_power_with_zero_z() {
        let a = CoefficientSequence::monic(
            3,
            vec![poly("1"), poly("0"), poly("0"), poly("0")],
            p2(),
        )
        .unwrap();
        let ctx = ShiftContext::new(poly("x"), poly("y"), Polynomial::zero()).unwrap();
        let b = build_b_coefficients(&a, &ctx, 3).unwrap();
        assert_eq!(b.entries[0], poly("1"));
        for i in 1..=3 {
            assert!(b.entries[i].is_zero(), "b_{i} should vanish");
        }
        assert_eq!(b.to_polynomial(), poly("T^3"));
    }

    #[test]
    fn b_for_square_at_unit_point() {
        // n=2, f(T) = T^2, x=z=1: g(T) = (T−1)^2.
        let a =
            CoefficientSequence::monic(2, vec![poly("1"), poly("0"), poly("0")], p2()).unwrap();
        let ctx = ShiftContext::new(poly("1"), poly("y"), poly("1")).unwrap();
        let b = build_b_coefficients(&a, &ctx, 2).unwrap();
        assert_eq!(b.entries[0], poly("1"));
        assert_eq!(b.entries[1], poly("-2"));
        assert_eq!(b.entries[2], poly("1"));
    }

    #[test]
    fn root_shift_identity_on_symbolic_triples() {
        for entries in [
            vec![poly("1"), poly("x + y")],
            vec![poly("1"), poly("2*x"), poly("1/2*y^2")],
            vec![poly("1"), poly("0"), poly("z"), poly("x*y - 1")],
        ] {
            let n = entries.len() as u64 - 1;
            let a = CoefficientSequence::monic(n, entries, p2()).unwrap();
            assert!(verify_root_shift_identity(&a, &symbolic_ctx(), n).unwrap());
        }
    }

    #[test]
    fn root_shift_with_zero_z_is_sign_flip() {
        // x=1, z=0: g(T) = (−1)^n f(−T).
        let a = CoefficientSequence::monic(
            3,
            vec![poly("1"), poly("5"), poly("-1/3"), poly("7")],
            p2(),
        )
        .unwrap();
        let ctx = ShiftContext::new(poly("1"), poly("y"), Polynomial::zero()).unwrap();
        assert!(verify_root_shift_identity(&a, &ctx, 3).unwrap());
        let b = build_b_coefficients(&a, &ctx, 3).unwrap();
        // (−1)^n f(−T) = T^3 − 5T^2 − (1/3)T − 7 at n=3.
        assert_eq!(b.entries[1], poly("-5"));
        assert_eq!(b.entries[2], poly("-1/3"));
        assert_eq!(b.entries[3], poly("-7"));
    }

    #[test]
    fn root_shift_rejects_zero_x() {
        let a = CoefficientSequence::monic(1, vec![poly("1"), poly("1")], p2()).unwrap();
        let ctx = ShiftContext::new(Polynomial::zero(), poly("y"), poly("z")).unwrap();
        assert_eq!(verify_root_shift_identity(&a, &ctx, 1), Err(TransformError::ZeroX));
    }

    #[test]
    fn completion_first_step_is_minus_n_abar() {
        let split = ZDecomposition { a_bar: poly("1/2"), b_bar: poly("1/2") };
        let ctx = ShiftContext::new(poly("x"), poly("y"), poly("1/2*x + 1/2*y")).unwrap();
        for n in [2u64, 4, 8] {
            let a = CoefficientSequence::monic(n, vec![poly("1")], p2()).unwrap();
            let a1 = complete_next_coefficient(&a, &split, &ctx, n).unwrap();
            assert_eq!(a1, Polynomial::constant(rat(-(n as i64), 2)));
        }
    }

    #[test]
    fn completion_with_z_in_y_gives_zeros() {
        let split = ZDecomposition { a_bar: Polynomial::zero(), b_bar: poly("3") };
        let ctx = ShiftContext::new(poly("x"), poly("y"), poly("3*y")).unwrap();
        let mut a = CoefficientSequence::monic(4, vec![poly("1")], p2()).unwrap();
        for _ in 0..3 {
            let next = complete_next_coefficient(&a, &split, &ctx, 4).unwrap();
            assert!(next.is_zero());
            a.entries.push(next);
        }
    }

    #[test]
    fn completion_squares_at_n_two() {
        // n=2, z = a_bar·x: a_1 = −2·a_bar, then a_2 = a_bar².
        let split = ZDecomposition { a_bar: poly("1/2"), b_bar: poly("1/2") };
        let ctx = ShiftContext::new(poly("x"), poly("y"), poly("1/2*x + 1/2*y")).unwrap();
        let mut a = CoefficientSequence::monic(2, vec![poly("1")], p2()).unwrap();
        let a1 = complete_next_coefficient(&a, &split, &ctx, 2).unwrap();
        assert_eq!(a1, poly("-1"));
        a.entries.push(a1);
        let a2 = complete_next_coefficient(&a, &split, &ctx, 2).unwrap();
        assert_eq!(a2, poly("1/4"));
    }

    #[test]
    fn completion_rejects_wrong_decomposition() {
        let split = ZDecomposition { a_bar: poly("1"), b_bar: poly("1") };
        let ctx = ShiftContext::new(poly("x"), poly("y"), poly("x + 2*y")).unwrap();
        let a = CoefficientSequence::monic(2, vec![poly("1")], p2()).unwrap();
        assert_eq!(
            complete_next_coefficient(&a, &split, &ctx, 2),
            Err(TransformError::BadDecomposition)
        );
    }

    #[test]
    fn lift_factors_small_cases() {
        // L=1, M=2, p=2: factor_1 = 4/2 = 2, factor_2 = (4/2)(3/1) = 6.
        let (f1, q1) = lift_factor(p2(), 1, 2, 1);
        assert_eq!(f1, rat(2, 1));
        assert_eq!(q1, rat(1, 1));
        let (f2, q2) = lift_factor(p2(), 1, 2, 2);
        assert_eq!(f2, rat(6, 1));
        assert_eq!(q2, rat(3, 1));
        let (f0, _) = lift_factor(p2(), 1, 2, 0);
        assert_eq!(f0, rat(1, 1));
    }

    #[test]
    fn lift_rejects_non_increase() {
        let a = CoefficientSequence::monic(2, vec![poly("1"), poly("x")], p2()).unwrap();
        assert!(matches!(lift_degree(&a, 1, 1), Err(TransformError::Range(_))));
    }

    #[test]
    fn lift_and_verify_after_completion_p2() {
        let split = ZDecomposition { a_bar: poly("1/2"), b_bar: poly("1/2") };
        let ctx = ShiftContext::new(poly("x"), poly("y"), poly("1/2*x + 1/2*y")).unwrap();
        let mut a = CoefficientSequence::monic(2, vec![poly("1")], p2()).unwrap();
        let a1 = complete_next_coefficient(&a, &split, &ctx, 2).unwrap();
        a.entries.push(a1);

        let out = lift_degree(&a, 1, 2).unwrap();
        assert_eq!(out.lifted.n, 4);
        assert_eq!(out.lifted.entries[1], a.entries[1].scale(&rat(2, 1)));
        assert!(verify_lift(&a, &out.lifted, 1, 2, &ctx, 1).unwrap().all_hold());
    }

    #[test]
    fn lift_and_verify_after_completion_p3() {
        let split = ZDecomposition { a_bar: poly("1/3"), b_bar: poly("2/3") };
        let ctx = ShiftContext::new(poly("x"), poly("y"), poly("1/3*x + 2/3*y")).unwrap();
        let mut a = CoefficientSequence::monic(3, vec![poly("1")], p3()).unwrap();
        for _ in 0..2 {
            let next = complete_next_coefficient(&a, &split, &ctx, 3).unwrap();
            a.entries.push(next);
        }
        let out = lift_degree(&a, 1, 3).unwrap();
        assert_eq!(out.lifted.n, 27);
        for q in &out.units[1..] {
            assert_eq!(crate::padic::big_rational_valuation(q, p3()), crate::padic::Valuation::Finite(0));
        }
        assert!(verify_lift(&a, &out.lifted, 1, 3, &ctx, 2).unwrap().all_hold());
    }

    #[test]
    fn shift_leading_entries_vanish() {
        let a = CoefficientSequence::monic(4, vec![poly("1"), poly("x")], p2()).unwrap();
        let shifted = shift_transform(&a, 1, 3, 2, 2, &symbolic_ctx()).unwrap();
        assert!(shifted.entries[0].is_zero());
        assert_eq!(shifted.entries.len(), 3);
    }

    #[test]
    fn shift_formula_small_case() {
        // p=2, L=M=2, i=3, d=1: ã_1 = y·C(4,2)/C(3,2) = 2y, ã_2 = (3/2)·y·a_1.
        let a = CoefficientSequence::monic(4, vec![poly("1"), poly("x")], p2()).unwrap();
        let shifted = shift_transform(&a, 1, 3, 2, 2, &symbolic_ctx()).unwrap();
        assert_eq!(shifted.entries[1], poly("2*y"));
        assert_eq!(shifted.entries[2], poly("3/2*x*y"));
    }

    #[test]
    fn shift_top_entry_matches_closed_form() {
        // d = i−1, j = i−1: ã_{i−1} = y^{i−1}·C(p^L, 1)/C(p^M−i+1, 1).
        let a = CoefficientSequence::monic(8, vec![poly("1")], p2()).unwrap();
        let i = 4u64;
        let shifted = shift_transform(&a, i - 1, i, 3, 4, &symbolic_ctx()).unwrap();
        let expect = poly("y^3").scale(&rat(8, 13));
        assert_eq!(shifted.entries[(i - 1) as usize], expect);
    }

    #[test]
    fn shift_rejects_boundary_violations() {
        let a = CoefficientSequence::monic(4, vec![poly("1"), poly("x")], p2()).unwrap();
        let ctx = symbolic_ctx();
        for (d, i, l, m) in [(0u64, 3u64, 2u32, 2u32), (3, 3, 2, 2), (1, 5, 2, 2), (1, 3, 2, 1)] {
            assert!(
                matches!(shift_transform(&a, d, i, l, m, &ctx), Err(TransformError::Range(_))),
                "d={d} i={i} L={l} M={m} should be rejected"
            );
        }
    }

    #[test]
    fn shift_verification_on_completed_sequence() {
        // Build a_0, a_1 satisfying the first condition, then shift by d=1
        // into i=3 and confirm the conclusion plus q-independence.
        let split = ZDecomposition { a_bar: poly("1/2"), b_bar: poly("1/2") };
        let ctx = ShiftContext::new(poly("x"), poly("y"), poly("1/2*x + 1/2*y")).unwrap();
        let mut a = CoefficientSequence::monic(4, vec![poly("1")], p2()).unwrap();
        let a1 = complete_next_coefficient(&a, &split, &ctx, 4).unwrap();
        a.entries.push(a1);

        let shifted = shift_transform(&a, 1, 3, 2, 2, &ctx).unwrap();
        let report = verify_shift(&a, &shifted, 1, 3, 2, 2, &ctx).unwrap();
        assert!(report.all_hold(), "{report:?}");
        assert_eq!(report.memberships.len(), 3);
    }

    #[test]
    fn shift_q_independence_across_lifts() {
        let a = CoefficientSequence::monic(
            8,
            vec![poly("1"), poly("x"), poly("y")],
            p2(),
        )
        .unwrap();
        let ctx = symbolic_ctx();
        for (d, i) in [(1u64, 4u64), (2, 4), (1, 3), (3, 5)] {
            let shifted = shift_transform(&a, d, i, 3, 5, &ctx).unwrap();
            let report = verify_shift(&a, &shifted, d, i, 3, 5, &ctx).unwrap();
            assert!(report.q_independent, "d={d} i={i}");
        }
    }

    #[test]
    fn degenerate_single_entry_shift() {
        // a = [1]: the shifted sequence has one nonzero entry carrying y^d.
        let a = CoefficientSequence::monic(4, vec![poly("1")], p2()).unwrap();
        let ctx = symbolic_ctx();
        let shifted = shift_transform(&a, 1, 2, 2, 2, &ctx).unwrap();
        assert!(shifted.entries[0].is_zero());
        assert!(!shifted.entries[1].is_zero());
        let report = verify_shift(&a, &shifted, 1, 2, 2, 2, &ctx).unwrap();
        assert!(report.all_hold());
    }

    #[test]
    fn context_rejects_bad_shapes() {
        assert_eq!(
            ShiftContext::new(poly("x"), Polynomial::zero(), poly("z")),
            Err(TransformError::ZeroY)
        );
        assert_eq!(
            ShiftContext::new(poly("T"), poly("y"), poly("z")),
            Err(TransformError::ReservedVariable)
        );
    }

    #[test]
    fn y_membership_needs_single_term() {
        assert!(y_power_membership(&poly("x*y^2"), &poly("y"), 2).unwrap());
        assert!(!y_power_membership(&poly("x*y^2 + x"), &poly("y"), 1).unwrap());
        assert_eq!(
            y_power_membership(&poly("x"), &poly("y + x"), 1),
            Err(TransformError::CompositeY)
        );
        assert!(y_power_membership(&poly("x"), &poly("y"), 0).unwrap());
    }
}
