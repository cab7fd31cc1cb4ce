//! Sparse multivariate polynomials in x, y, z, T over exact big rationals.
//!
//! The variable universe is fixed: x, y are the parameter pair, z the colon
//! element, T the certificate indeterminate. Monomials order by total degree
//! then lexicographically, and that order is the canonical one everywhere
//! (display, serialization, linear-system assembly), which is what makes
//! reruns bit-identical.

use crate::padic::{big_rational_valuation, PrimeBase, Valuation};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    Z,
    T,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::Z, Var::T];

    fn index(self) -> usize {
        match self {
            Var::X => 0,
            Var::Y => 1,
            Var::Z => 2,
            Var::T => 3,
        }
    }

    fn symbol(self) -> char {
        match self {
            Var::X => 'x',
            Var::Y => 'y',
            Var::Z => 'z',
            Var::T => 'T',
        }
    }

    fn from_symbol(c: char) -> Option<Var> {
        match c {
            'x' => Some(Var::X),
            'y' => Some(Var::Y),
            'z' => Some(Var::Z),
            'T' => Some(Var::T),
            _ => None,
        }
    }
}

/// Exponent vector over (x, y, z, T). No hidden state: the zero vector is the
/// constant monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Monomial(pub [u16; 4]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; 4]);

    pub fn var(v: Var, e: u16) -> Monomial {
        let mut m = [0u16; 4];
        m[v.index()] = e;
        Monomial(m)
    }

    pub fn exponent(&self, v: Var) -> u16 {
        self.0[v.index()]
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| u32::from(e)).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = [0u16; 4];
        for k in 0..4 {
            m[k] = self.0[k].checked_add(other.0[k]).expect("monomial exponent overflow");
        }
        Monomial(m)
    }

    pub fn pow(&self, e: u16) -> Monomial {
        let mut m = [0u16; 4];
        for k in 0..4 {
            m[k] = self.0[k].checked_mul(e).expect("monomial exponent overflow");
        }
        Monomial(m)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        (0..4).all(|k| self.0[k] <= other.0[k])
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // ascending total degree; within a degree, higher x-power first so
        // displays read x^2, x*y, y^2
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.total_degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for v in Var::ALL {
            let e = self.exponent(v);
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{}", v.symbol())?;
            } else {
                write!(f, "{}^{}", v.symbol(), e)?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial; invariant: no stored zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial { terms: BTreeMap::new() }
    }

    pub fn one() -> Polynomial {
        Polynomial::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Polynomial {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::ONE, c);
        }
        Polynomial { terms }
    }

    pub fn from_integer(n: i64) -> Polynomial {
        Polynomial::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn var(v: Var) -> Polynomial {
        Polynomial::term(Monomial::var(v, 1), BigRational::one())
    }

    pub fn term(m: Monomial, c: BigRational) -> Polynomial {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Polynomial { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Total degree; 0 for the zero polynomial by convention.
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: Var) -> u16 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    /// The common total degree of all terms, or None if the polynomial mixes
    /// degrees or is zero.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(Monomial::total_degree);
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn add_term(&mut self, m: Monomial, c: &BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial { terms: self.terms.iter().map(|(m, a)| (*m, a * c)).collect() }
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial { terms: self.terms.iter().map(|(m, a)| (*m, -a)).collect() }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, &(-c));
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), &(c1 * c2));
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial { terms: self.terms.iter().map(|(k, a)| (k.mul(m), a * c)).collect() }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Substitutes var := num/den (scalar denominator, division always exact
    /// over the rationals). This is the canonical-substitution workhorse,
    /// e.g. z := (c*x + d*y)/p^N.
    pub fn substitute(&self, v: Var, num: &Polynomial, den: &BigRational) -> Polynomial {
        assert!(!den.is_zero(), "zero denominator in substitution");
        let max_e = self.degree_in(v);
        // num^e cached for e = 0..max_e
        let mut powers = Vec::with_capacity(usize::from(max_e) + 1);
        powers.push(Polynomial::one());
        for _ in 0..max_e {
            let next = powers.last().unwrap().mul(num);
            powers.push(next);
        }
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            let mut rest = *m;
            rest.0[v.index()] = 0;
            let scale = c / den.pow(i32::from(e));
            for (mm, cc) in &powers[usize::from(e)].terms {
                out.add_term(rest.mul(mm), &(cc * &scale));
            }
        }
        out
    }

    /// Minimum p-valuation over the coefficients; +infinity for zero.
    pub fn min_p_valuation(&self, p: PrimeBase) -> Valuation {
        self.terms
            .values()
            .map(|c| big_rational_valuation(c, p))
            .fold(Valuation::Infinity, Valuation::min)
    }

    /// True iff every coefficient lies in Z_(p) (denominator coprime to p).
    pub fn has_integral_coefficients(&self, p: PrimeBase) -> bool {
        self.min_p_valuation(p) >= Valuation::Finite(0)
    }
}

impl FromStr for Polynomial {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_polynomial(s)
    }
}

/// Per-coefficient valuation ledger for one polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PValuationProfile {
    pub per_term: Vec<(Monomial, Valuation)>,
    pub min: Valuation,
}

pub fn p_valuation_profile(f: &Polynomial, p: PrimeBase) -> PValuationProfile {
    let per_term: Vec<_> =
        f.terms().map(|(m, c)| (*m, big_rational_valuation(c, p))).collect();
    let min = per_term.iter().map(|&(_, v)| v).fold(Valuation::Infinity, Valuation::min);
    PValuationProfile { per_term, min }
}

/// True iff every term of f is divisible by some generator monomial.
/// Realizes the "in y^k R[1/p]" and "in (x^i, y^i)R[1/p]" tests.
pub fn monomial_ideal_member(f: &Polynomial, generators: &[Monomial]) -> bool {
    f.terms().all(|(m, _)| generators.iter().any(|g| g.divides(m)))
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let unit_coeff = mag.is_one();
            let constant = m.total_degree() == 0;
            if constant {
                write!(f, "{mag}")?;
            } else if unit_coeff {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

fn parse_polynomial(s: &str) -> Result<Polynomial, String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err("empty polynomial".into());
    }
    let mut out = Polynomial::zero();
    let bytes = compact.as_bytes();
    let mut pos = 0usize;
    let mut sign = BigRational::one();
    // leading sign
    if bytes[0] == b'+' {
        pos = 1;
    } else if bytes[0] == b'-' {
        sign = -sign;
        pos = 1;
    }
    if pos == bytes.len() {
        return Err("dangling sign at end of input".into());
    }
    while pos < bytes.len() {
        let start = pos;
        while pos < bytes.len() && bytes[pos] != b'+' && bytes[pos] != b'-' {
            pos += 1;
        }
        let term = &compact[start..pos];
        if term.is_empty() {
            return Err(format!("dangling sign at position {start}"));
        }
        let (m, c) = parse_term(term)?;
        out.add_term(m, &(c * &sign));
        if pos < bytes.len() {
            sign = if bytes[pos] == b'-' { -BigRational::one() } else { BigRational::one() };
            pos += 1;
            if pos == bytes.len() {
                return Err("dangling sign at end of input".into());
            }
        }
    }
    Ok(out)
}

fn parse_term(term: &str) -> Result<(Monomial, BigRational), String> {
    let mut coeff = BigRational::one();
    let mut exps = [0u16; 4];
    // '*' separators are optional: "1/2*x^2*y" and "1/2 x^2 y" both work.
    for factor in term.split('*') {
        if factor.is_empty() {
            return Err(format!("empty factor in term '{term}'"));
        }
        let bytes = factor.as_bytes();
        let mut pos = 0usize;
        while pos < bytes.len() {
            let ch = bytes[pos] as char;
            if let Some(v) = Var::from_symbol(ch) {
                pos += 1;
                let e: u16 = if pos < bytes.len() && bytes[pos] == b'^' {
                    pos += 1;
                    let start = pos;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                    factor[start..pos]
                        .parse()
                        .map_err(|_| format!("bad exponent in '{factor}'"))?
                } else {
                    1
                };
                exps[v.index()] = exps[v.index()]
                    .checked_add(e)
                    .ok_or_else(|| format!("exponent overflow in '{term}'"))?;
            } else if ch.is_ascii_digit() {
                let start = pos;
                while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'/') {
                    pos += 1;
                }
                coeff *= parse_rational(&factor[start..pos])?;
            } else {
                return Err(format!("unexpected character '{ch}' in '{factor}'"));
            }
        }
    }
    Ok((Monomial(exps), coeff))
}

fn parse_rational(s: &str) -> Result<BigRational, String> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n = BigInt::from_str(num).map_err(|_| format!("bad integer '{num}'"))?;
    let d = BigInt::from_str(den).map_err(|_| format!("bad integer '{den}'"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in '{s}'"));
    }
    Ok(BigRational::new(n, d))
}

/// C(n, k) as an exact big rational, with n an arbitrary integer (the rising
/// pattern C(p^L - j, i - j) needs large n but small k).
pub fn binomial_big(n: &BigInt, k: u64) -> BigRational {
    let mut acc = BigRational::one();
    for t in 0..k {
        let factor = BigRational::new(n - BigInt::from(t), BigInt::from(t + 1));
        acc *= factor;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn parse(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    #[test]
    fn arithmetic_basics() {
        let x = Polynomial::var(Var::X);
        let y = Polynomial::var(Var::Y);
        assert_eq!(x.add(&y).sub(&x), y);
        assert_eq!(x.add(&x.neg()), Polynomial::zero());
        let sq = x.add(&y).pow(2);
        assert_eq!(sq, parse("x^2 + 2*x*y + y^2"));
        assert_eq!(x.mul(&Polynomial::zero()), Polynomial::zero());
    }

    #[test]
    fn no_zero_terms_stored() {
        let f = parse("x + y").sub(&parse("x"));
        assert_eq!(f.num_terms(), 1);
        let g = parse("x").sub(&parse("x"));
        assert!(g.is_zero());
        assert_eq!(g.total_degree(), 0);
    }

    #[test]
    fn substitution_kills_defining_relation() {
        // 2z - x - y with z := (x+y)/2 vanishes
        let rel = parse("2*z - x - y");
        let img = rel.substitute(Var::Z, &parse("x + y"), &q(2, 1));
        assert!(img.is_zero());
    }

    #[test]
    fn substitution_with_denominator() {
        let f = parse("z^2");
        let img = f.substitute(Var::Z, &parse("x + y"), &q(2, 1));
        assert_eq!(img, parse("1/4*x^2 + 1/2*x*y + 1/4*y^2"));
    }

    #[test]
    fn valuation_queries() {
        let p2 = PrimeBase::new(2).unwrap();
        assert_eq!(parse("4*x + 2*y").min_p_valuation(p2), Valuation::Finite(1));
        assert_eq!(Polynomial::zero().min_p_valuation(p2), Valuation::Infinity);
        assert_eq!(parse("3/2*x").min_p_valuation(p2), Valuation::Finite(-1));
        assert!(parse("3*x + y").has_integral_coefficients(p2));
        assert!(!parse("1/2*x").has_integral_coefficients(p2));
    }

    #[test]
    fn profile_matches_terms() {
        let p2 = PrimeBase::new(2).unwrap();
        let prof = p_valuation_profile(&parse("4*x + 1/2*y"), p2);
        assert_eq!(prof.min, Valuation::Finite(-1));
        assert_eq!(prof.per_term.len(), 2);
    }

    #[test]
    fn monomial_membership() {
        let y2 = Monomial::var(Var::Y, 2);
        assert!(monomial_ideal_member(&parse("y^3*x + y^2"), &[y2]));
        let gens = [Monomial::var(Var::X, 2), Monomial::var(Var::Y, 2)];
        assert!(!monomial_ideal_member(&parse("x + y"), &gens));
        assert!(monomial_ideal_member(&Polynomial::zero(), &gens));
    }

    #[test]
    fn display_roundtrip() {
        for s in [
            "0",
            "1",
            "-1/2",
            "x",
            "x - y",
            "3*x^2*y - 1/2*z + 7",
            "x*y*z*T",
            "-x + 2/3*y^5",
        ] {
            let f = parse(s);
            let again = parse(&f.to_string());
            assert_eq!(f, again, "roundtrip failed for {s}");
        }
    }

    #[test]
    fn display_canonical_order() {
        // degree-then-lex, so the constant prints first, then x, then x^2...
        let f = parse("x^2 + 1 + x");
        assert_eq!(f.to_string(), "1 + x + x^2");
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!("".parse::<Polynomial>().is_err());
        assert!("x +".parse::<Polynomial>().is_err());
        assert!("q".parse::<Polynomial>().is_err());
        assert!("x^".parse::<Polynomial>().is_err());
        assert!("1/0".parse::<Polynomial>().is_err());
    }

    #[test]
    fn big_binomials() {
        assert_eq!(binomial_big(&BigInt::from(4), 2), q(6, 1));
        assert_eq!(binomial_big(&BigInt::from(7), 0), q(1, 1));
        // C(2^5 - 1, 3) = C(31,3) = 4495
        assert_eq!(binomial_big(&BigInt::from(31), 3), q(4495, 1));
        // negative upper index: C(-1, 2) = 1
        assert_eq!(binomial_big(&BigInt::from(-1), 2), q(1, 1));
    }

    #[test]
    fn monomial_order_graded() {
        let m1 = Monomial::var(Var::Y, 1);
        let m2 = Monomial::var(Var::X, 2);
        // degree 1 < degree 2 regardless of lex position
        assert!(m1 < m2);
        // same degree: exponent tuples compare lexicographically, x before y
        assert!(!(Monomial::var(Var::Y, 1) < Monomial::var(Var::X, 1)));
        assert!(Monomial::var(Var::X, 1) < Monomial::var(Var::Y, 1));
    }
}
