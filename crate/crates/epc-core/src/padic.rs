//! Base-p digit arithmetic, the tau function, and exact p-adic valuations.
//!
//! Everything here is exact integer/rational arithmetic. The two valuation
//! routines ([`legendre_factorial_valuation`] and
//! [`binomial_valuation_digitwise`]) are independent of each other and are
//! cross-checked in the test suite; the digit-comparison form is the one the
//! rest of the crate builds on.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};
use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PadicError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("tau is undefined at 0")]
    TauAtZero,
    #[error("parameter out of range: {0}")]
    Range(String),
}

/// A prime integer p >= 2, validated by deterministic trial division.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeBase(u64);

impl PrimeBase {
    pub fn new(p: u64) -> Result<Self, PadicError> {
        if p < 2 {
            return Err(PadicError::NotPrime(p));
        }
        let mut d = 2u64;
        while d * d <= p {
            if p % d == 0 {
                return Err(PadicError::NotPrime(p));
            }
            d += 1;
        }
        Ok(PrimeBase(p))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// p - 1, the denominator of every tau value at this base.
    pub fn tau_denominator(self) -> u64 {
        self.0 - 1
    }

    /// p^e as a u64; panics on overflow (desk-scale exponents only).
    pub fn pow(self, e: u32) -> u64 {
        self.0.checked_pow(e).expect("prime power overflows u64")
    }
}

impl fmt::Display for PrimeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Base-p expansion, least-significant digit first, no trailing zeros.
/// Zero is the empty sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitVector {
    pub digits: Vec<u32>,
    pub base: PrimeBase,
}

impl DigitVector {
    /// Reassembles the integer; inverse of [`digits_base_p`].
    pub fn value(&self) -> u64 {
        let mut acc = 0u64;
        for &d in self.digits.iter().rev() {
            acc = acc * self.base.get() + u64::from(d);
        }
        acc
    }

    pub fn digit_sum(&self) -> u64 {
        self.digits.iter().map(|&d| u64::from(d)).sum()
    }
}

pub fn digits_base_p(mut n: u64, p: PrimeBase) -> DigitVector {
    let mut digits = Vec::new();
    while n > 0 {
        digits.push((n % p.get()) as u32);
        n /= p.get();
    }
    DigitVector { digits, base: p }
}

/// An exact p-adic valuation: an integer, or +infinity for the zero element.
/// Infinity is absorbing under addition and greatest in the ordering, so zero
/// coefficients pass every threshold vacuously.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn is_finite(self) -> bool {
        matches!(self, Valuation::Finite(_))
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }

    pub fn min(self, other: Valuation) -> Valuation {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a.min(b)),
            (Valuation::Finite(a), _) | (_, Valuation::Finite(a)) => Valuation::Finite(a),
            _ => Valuation::Infinity,
        }
    }

    /// Exact comparison against a rational threshold; infinity clears any bar.
    pub fn at_least(self, threshold: Rational64) -> bool {
        match self {
            Valuation::Infinity => true,
            Valuation::Finite(v) => Rational64::from_integer(v) >= threshold,
        }
    }
}

impl std::ops::Add for Valuation {
    type Output = Valuation;
    fn add(self, rhs: Valuation) -> Valuation {
        match (self, rhs) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinity,
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
            (Valuation::Finite(_), Valuation::Infinity) => std::cmp::Ordering::Less,
            (Valuation::Infinity, Valuation::Finite(_)) => std::cmp::Ordering::Greater,
            (Valuation::Infinity, Valuation::Infinity) => std::cmp::Ordering::Equal,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => write!(f, "inf"),
        }
    }
}

/// tau(n) = (base-p digit sum of n-1)/(p-1), stored exactly as the pair
/// (digit sum, p-1). tau(1) = 0; tau(n) <= n-1 always.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tau {
    /// The digit sum of n-1 in base p, the unnormalized numerator.
    pub bar: u64,
    /// p - 1.
    pub den: u64,
}

impl Tau {
    pub fn value(self) -> Rational64 {
        Rational64::new(self.bar as i64, self.den as i64)
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.bar, self.den)
    }
}

/// tau(n) for n >= 1; the digit sum is taken of n-1.
pub fn tau(n: u64, p: PrimeBase) -> Tau {
    assert!(n >= 1, "tau is undefined at 0");
    Tau {
        bar: digits_base_p(n - 1, p).digit_sum(),
        den: p.tau_denominator(),
    }
}

/// The unshifted variant: sigma(m) = tau(m+1), i.e. the digit sum of m itself
/// over p-1. Exposed for convenience; every internal formula uses tau.
pub fn sigma(m: u64, p: PrimeBase) -> Tau {
    tau(m + 1, p)
}

/// v_p(n!) by the floor-sum formula. Serves as the independent oracle for the
/// digit-comparison route below.
pub fn legendre_factorial_valuation(n: u64, p: PrimeBase) -> Valuation {
    let mut total = 0i64;
    let mut q = p.get();
    loop {
        total += (n / q) as i64;
        match q.checked_mul(p.get()) {
            Some(next) if next <= n => q = next,
            _ => break,
        }
    }
    // one more level may still contribute 0; the loop exits once q > n
    Valuation::Finite(total)
}

/// v_p(C(i+j, i)) by digitwise comparison: with a, b, c the base-p digits of
/// i, j and n = i+j, the valuation is the number of positions where
/// a_k + b_k > c_k.
pub fn binomial_valuation_digitwise(i: u64, j: u64, p: PrimeBase) -> Valuation {
    let n = i.checked_add(j).expect("binomial index overflows u64");
    let a = digits_base_p(i, p);
    let b = digits_base_p(j, p);
    let c = digits_base_p(n, p);
    let mut d = 0i64;
    for k in 0..c.digits.len() {
        let ak = a.digits.get(k).copied().unwrap_or(0);
        let bk = b.digits.get(k).copied().unwrap_or(0);
        let ck = c.digits[k];
        if ak + bk > ck {
            d += 1;
        }
    }
    Valuation::Finite(d)
}

/// v_p(C(n, k)) for k <= n, in the (top, lower) indexing.
pub fn binomial_valuation(n: u64, k: u64, p: PrimeBase) -> Valuation {
    assert!(k <= n, "binomial index out of range");
    binomial_valuation_digitwise(k, n - k, p)
}

/// The three binomial/tau identities relating a binomial valuation to a tau
/// combination, named by the shape of the binomial they cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauIdentity {
    /// v_p(C(i-1, j-1)) = tau(j) + tau(i-j+1) - tau(i), for 0 < j < i.
    PascalEntry,
    /// v_p(C(p^L - j, i-j)) = tau(j) + tau(i-j+1) - tau(i), for 0 < j < i < p^L.
    PrimePowerShift,
    /// v_p(C(p^L, i)) = L + tau(i+1) - tau(i) - tau(2), for 0 < i < p^L.
    PrimePowerTop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauIdentityReport {
    pub lhs: Valuation,
    pub rhs: Rational64,
    pub rhs_is_integer: bool,
    pub equal: bool,
}

/// Evaluates one of the three identities at a concrete point. The left side
/// is computed by digit comparison, the right by exact tau arithmetic; the
/// report also records whether the tau combination collapsed to an integer
/// (it must).
pub fn binomial_tau_identity(
    variant: TauIdentity,
    i: u64,
    j: u64,
    l: u32,
    p: PrimeBase,
) -> Result<TauIdentityReport, PadicError> {
    let (lhs, rhs) = match variant {
        TauIdentity::PascalEntry => {
            if !(0 < j && j < i) {
                return Err(PadicError::Range(format!("need 0 < j < i, got i={i} j={j}")));
            }
            let lhs = binomial_valuation(i - 1, j - 1, p);
            let rhs = tau(j, p).value() + tau(i - j + 1, p).value() - tau(i, p).value();
            (lhs, rhs)
        }
        TauIdentity::PrimePowerShift => {
            let pl = p.pow(l);
            if !(0 < j && j < i && i < pl) {
                return Err(PadicError::Range(format!(
                    "need 0 < j < i < p^L, got i={i} j={j} p^L={pl}"
                )));
            }
            let lhs = binomial_valuation(pl - j, i - j, p);
            let rhs = tau(j, p).value() + tau(i - j + 1, p).value() - tau(i, p).value();
            (lhs, rhs)
        }
        TauIdentity::PrimePowerTop => {
            let pl = p.pow(l);
            if !(0 < i && i < pl) {
                return Err(PadicError::Range(format!(
                    "need 0 < i < p^L, got i={i} p^L={pl}"
                )));
            }
            let lhs = binomial_valuation(pl, i, p);
            let rhs = Rational64::from_integer(i64::from(l)) + tau(i + 1, p).value()
                - tau(i, p).value()
                - tau(2, p).value();
            (lhs, rhs)
        }
    };
    let rhs_is_integer = rhs.is_integer();
    let equal = match lhs {
        Valuation::Finite(v) => rhs_is_integer && rhs.to_integer() == v,
        Valuation::Infinity => false,
    };
    Ok(TauIdentityReport { lhs, rhs, rhs_is_integer, equal })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauBudgetReport {
    /// Points (i, margin) where i/p^(K+1) + K - tau(i) dipped below zero.
    /// Must be empty.
    pub violations: Vec<(u64, Rational64)>,
    pub checked: u64,
}

/// Checks the budget inequality i/p^(K+1) + K - tau(i) >= 0 for all
/// 1 <= i <= i_max, exactly. K = -1 is allowed (then e = 1).
pub fn check_tau_budget(k: i64, i_max: u64, p: PrimeBase) -> Result<TauBudgetReport, PadicError> {
    if k < -1 {
        return Err(PadicError::Range(format!("need K >= -1, got {k}")));
    }
    let e_den = p
        .get()
        .checked_pow((k + 1) as u32)
        .ok_or_else(|| PadicError::Range(format!("p^(K+1) overflows for K={k}")))?;
    let mut violations = Vec::new();
    for i in 1..=i_max {
        let margin = budget_margin(i, k, e_den, p);
        if margin < Rational64::zero() {
            violations.push((i, margin));
        }
    }
    Ok(TauBudgetReport { violations, checked: i_max })
}

fn budget_margin(i: u64, k: i64, e_den: u64, p: PrimeBase) -> Rational64 {
    Rational64::new(i as i64, e_den as i64) + Rational64::from_integer(k) - tau(i, p).value()
}

/// A valuation that may be a non-integral rational (thresholds like K - tau(j)
/// live on the (p-1)-denominator lattice), or +infinity for zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatVal {
    Finite(Rational64),
    Infinity,
}

impl RatVal {
    pub fn at_least(self, threshold: Rational64) -> bool {
        match self {
            RatVal::Infinity => true,
            RatVal::Finite(v) => v >= threshold,
        }
    }
}

impl From<Valuation> for RatVal {
    fn from(v: Valuation) -> Self {
        match v {
            Valuation::Finite(x) => RatVal::Finite(Rational64::from_integer(x)),
            Valuation::Infinity => RatVal::Infinity,
        }
    }
}

impl fmt::Display for RatVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatVal::Finite(v) => write!(f, "{v}"),
            RatVal::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginEntry {
    pub index: u64,
    /// v(a_i) + i/p^(K+1), or infinity for a zero coefficient.
    pub margin: RatVal,
    /// Whether v(a_i) >= K - tau(i) held (the hypothesis side).
    pub hypothesis: bool,
    /// hypothesis implies margin >= 0; false only on a genuine failure.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginReport {
    pub entries: Vec<MarginEntry>,
    pub all_ok: bool,
}

/// The exponent ledger: given the coefficient valuations v(a_1)..v(a_n) of a
/// candidate certificate, confirms that wherever the threshold
/// v(a_i) >= K - tau(i) holds, the integrality margin v(a_i) + i/p^(K+1) is
/// nonnegative, and reports each margin exactly.
pub fn coefficient_margins(k: i64, a_valuations: &[RatVal], p: PrimeBase) -> MarginReport {
    let e_den = p.pow((k + 1).max(0) as u32);
    let mut entries = Vec::with_capacity(a_valuations.len());
    let mut all_ok = true;
    for (idx, &v) in a_valuations.iter().enumerate() {
        let i = (idx + 1) as u64;
        let threshold = Rational64::from_integer(k) - tau(i, p).value();
        let hypothesis = v.at_least(threshold);
        let (margin, ok) = match v {
            RatVal::Infinity => (RatVal::Infinity, true),
            RatVal::Finite(val) => {
                let m = val + Rational64::new(i as i64, e_den as i64);
                (RatVal::Finite(m), !hypothesis || m >= Rational64::zero())
            }
        };
        if !ok {
            all_ok = false;
        }
        entries.push(MarginEntry { index: i, margin, hypothesis, ok });
    }
    MarginReport { entries, all_ok }
}

/// v_p of an exact big rational; infinity for zero.
pub fn big_rational_valuation(q: &BigRational, p: PrimeBase) -> Valuation {
    if q.is_zero() {
        return Valuation::Infinity;
    }
    let pb = BigInt::from(p.get());
    Valuation::Finite(big_int_valuation(&q.numer().abs(), &pb) - big_int_valuation(&q.denom().abs(), &pb))
}

fn big_int_valuation(n: &BigInt, p: &BigInt) -> i64 {
    debug_assert!(!n.is_zero());
    let mut v = 0i64;
    let mut m = n.clone();
    loop {
        let (q, r) = num_integer::Integer::div_rem(&m, p);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        m = q;
    }
}
