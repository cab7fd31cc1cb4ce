//! Relation instances and the substitution they induce.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::Zero;

use crate::padic::{tau, PrimeBase};
use crate::poly::{Polynomial, Var};
use crate::transforms::{ShiftContext, ZDecomposition};

use super::EngineError;

/// A concrete relation p^N·z = c·x + d·y over Z_(p).
///
/// The model ring is the image of Z_(p)[x, y, z] in Q[x, y] under
/// z ↦ (c·x + d·y)/p^N, which realizes the generic instance of the
/// hypothesis "some p-power multiple of z lies in (x, y)". K fixes the
/// coefficient-floor offset; the certified exponent is e = 1/p^{K+1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationInstance {
    pub p: PrimeBase,
    pub n: u32,
    pub k: u32,
    pub c: Polynomial,
    pub d: Polynomial,
}

impl RelationInstance {
    pub fn new(p: u64, n: u32, k: u32, c: Polynomial, d: Polynomial) -> Result<Self, EngineError> {
        let p = PrimeBase::new(p).map_err(|e| EngineError::BadInstance(e.to_string()))?;
        if n == 0 {
            return Err(EngineError::BadInstance("N must be positive".into()));
        }
        for (name, f) in [("c", &c), ("d", &d)] {
            if f.degree_in(Var::Z) > 0 || f.degree_in(Var::T) > 0 {
                return Err(EngineError::BadInstance(format!(
                    "{name} must be a polynomial in x and y only"
                )));
            }
            if !f.has_integral_coefficients(p) {
                return Err(EngineError::BadInstance(format!(
                    "{name} must have p-integral coefficients"
                )));
            }
        }
        Ok(RelationInstance { p, n, k, c, d })
    }

    /// p^N as an exact rational.
    pub fn p_to_n(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.p.get()).pow(self.n))
    }

    /// The image of z: (c·x + d·y)/p^N.
    pub fn z_image(&self) -> Polynomial {
        let num = self
            .c
            .mul(&Polynomial::var(Var::X))
            .add(&self.d.mul(&Polynomial::var(Var::Y)));
        num.scale(&self.p_to_n().recip())
    }

    /// The certified exponent e = 1/p^{K+1}.
    pub fn closure_exponent(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.p.get()).pow(self.k + 1)).recip()
    }

    /// Context with x, y as themselves and z replaced by its image;
    /// condition sums are evaluated against this.
    pub fn image_context(&self) -> ShiftContext {
        ShiftContext::new(Polynomial::var(Var::X), Polynomial::var(Var::Y), self.z_image())
            .expect("x, y, z-image form a valid context")
    }

    /// The split z = (c/p^N)·x + (d/p^N)·y feeding coefficient completion.
    pub fn decomposition(&self) -> ZDecomposition {
        let inv = self.p_to_n().recip();
        ZDecomposition { a_bar: self.c.scale(&inv), b_bar: self.d.scale(&inv) }
    }

    /// The generator (z, −c, −d) of the relation p^N·z + a·x + b·y = 0.
    pub fn koszul_triple(&self) -> GeneratorTriple {
        GeneratorTriple { a: self.c.neg(), b: self.d.neg() }
    }
}

/// Canonical key = value text; `parse` inverts it.
impl fmt::Display for RelationInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "N = {}", self.n)?;
        writeln!(f, "K = {}", self.k)?;
        writeln!(f, "c = {}", self.c)?;
        writeln!(f, "d = {}", self.d)
    }
}

impl FromStr for RelationInstance {
    type Err = EngineError;

    fn from_str(text: &str) -> Result<Self, EngineError> {
        let mut fields: [Option<String>; 5] = Default::default();
        const KEYS: [&str; 5] = ["p", "N", "K", "c", "d"];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| EngineError::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| EngineError::Parse(format!("unknown key '{key}'")))?;
            if fields[slot].is_some() {
                return Err(EngineError::Parse(format!("duplicate key '{key}'")));
            }
            fields[slot] = Some(value.trim().to_string());
        }
        let take = |slot: usize| {
            fields[slot]
                .clone()
                .ok_or_else(|| EngineError::Parse(format!("missing key '{}'", KEYS[slot])))
        };
        let int = |slot: usize| -> Result<u64, EngineError> {
            take(slot)?
                .parse::<u64>()
                .map_err(|e| EngineError::Parse(format!("{}: {e}", KEYS[slot])))
        };
        let poly = |slot: usize| -> Result<Polynomial, EngineError> {
            take(slot)?
                .parse::<Polynomial>()
                .map_err(|e| EngineError::Parse(format!("{}: {e}", KEYS[slot])))
        };
        let p = int(0)?;
        let n = u32::try_from(int(1)?).map_err(|_| EngineError::Parse("N out of range".into()))?;
        let k = u32::try_from(int(2)?).map_err(|_| EngineError::Parse("K out of range".into()))?;
        RelationInstance::new(p, n, k, poly(3)?, poly(4)?)
    }
}

/// A generator (z, a, b) of the relation module: p^N·z + a·x + b·y must map
/// to zero under the substitution. The Koszul ambiguity a ↦ a + y·h,
/// b ↦ b − x·h is allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorTriple {
    pub a: Polynomial,
    pub b: Polynomial,
}

impl GeneratorTriple {
    pub fn validate(&self, instance: &RelationInstance) -> Result<(), EngineError> {
        for (name, f) in [("a", &self.a), ("b", &self.b)] {
            if f.degree_in(Var::T) > 0 {
                return Err(EngineError::BadInstance(format!("triple entry {name} uses T")));
            }
            if !f.has_integral_coefficients(instance.p) {
                return Err(EngineError::BadInstance(format!(
                    "triple entry {name} must have p-integral coefficients"
                )));
            }
        }
        let mut cache = ImageCache::new(instance);
        let relation = instance
            .z_image()
            .scale(&instance.p_to_n())
            .add(&cache.image(&self.a).mul(&Polynomial::var(Var::X)))
            .add(&cache.image(&self.b).mul(&Polynomial::var(Var::Y)));
        if !relation.is_zero() {
            return Err(EngineError::BadInstance(
                "triple does not annihilate p^N z + a x + b y".into(),
            ));
        }
        Ok(())
    }
}

/// K − τ(j), the valuation floor for the j-th certificate coefficient.
pub fn coefficient_floor(k: u32, j: u64, p: PrimeBase) -> Rational64 {
    Rational64::from_integer(i64::from(k)) - tau(j, p).value()
}

/// E_i = K − τ(i) + τ(2), the scale carried by the i-th kernel element
/// ζ_i = p^{E_i}·z_i. Index 1 is z itself and carries no scale.
pub fn zeta_scale(k: u32, i: u64, p: PrimeBase) -> Rational64 {
    if i <= 1 {
        return Rational64::zero();
    }
    Rational64::from_integer(i64::from(k)) - tau(i, p).value() + tau(2, p).value()
}

/// Substitution z ↦ (c·x + d·y)/p^N with image powers cached across calls.
#[derive(Debug, Clone)]
pub struct ImageCache {
    powers: Vec<Polynomial>,
}

impl ImageCache {
    pub fn new(instance: &RelationInstance) -> ImageCache {
        ImageCache { powers: vec![Polynomial::one(), instance.z_image()] }
    }

    fn power(&mut self, e: usize) -> &Polynomial {
        while self.powers.len() <= e {
            let next = self.powers.last().expect("nonempty").mul(&self.powers[1]);
            self.powers.push(next);
        }
        &self.powers[e]
    }

    /// Replace every z-power in f by the cached image power.
    pub fn image(&mut self, f: &Polynomial) -> Polynomial {
        if f.degree_in(Var::Z) == 0 {
            return f.clone();
        }
        let terms: Vec<_> = f.terms().map(|(m, c)| (*m, c.clone())).collect();
        let mut out = Polynomial::zero();
        for (m, c) in terms {
            let e = m.exponent(Var::Z) as usize;
            let mut rest = m;
            rest.0[Var::Z as usize] = 0;
            out = out.add(&self.power(e).mul_monomial(&rest, &c));
        }
        out
    }
}
