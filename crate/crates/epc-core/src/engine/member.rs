//! Ideal membership over the model ring, with per-generator valuation floors.
//!
//! The step recursion never asks "is f in (g_1, ..., g_r)?" in the plain
//! polynomial sense. Multipliers must come from the model ring, i.e. be
//! images of p-integral polynomials in x, y, z, and every generator carries
//! a rational floor t_g: a witness only counts when the multiplier in front
//! of g is p^{t_g} times a ring element. In the scaled bookkeeping the
//! floors are E-offsets between kernel elements, so they may be fractional
//! or negative.
//!
//! Both constraints reduce to the plain DVR search:
//! - Ring multipliers: each generator is expanded by z-image powers, so the
//!   multiplier monomial basis is x^a y^b z^g. The witness is folded back
//!   into a polynomial in x, y, z whose coefficients are the solved scalars;
//!   that representative has p-integral coefficients by construction.
//! - Floors: coefficient valuations of the representative are integers, so
//!   v >= t_g is equivalent to v >= ceil(t_g); the floor is imposed exactly
//!   by scaling the expanded columns by p^{ceil(t_g)}.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::One;

use crate::membership::ideal_member_capped;
use crate::padic::PrimeBase;
use crate::poly::{Monomial, Polynomial, Var};

/// A generator image together with the valuation floor its multiplier must
/// meet.
#[derive(Debug, Clone)]
pub struct FlooredGenerator {
    pub generator: Polynomial,
    pub floor: Rational64,
}

impl FlooredGenerator {
    pub fn new(generator: Polynomial, floor: Rational64) -> FlooredGenerator {
        FlooredGenerator { generator, floor }
    }

    /// p^{ceil(floor)} as an exact rational; negative floors divide.
    fn shift(&self, p: PrimeBase) -> BigRational {
        let s = self.floor.ceil().to_integer();
        let power = BigRational::from_integer(BigInt::from(p.get()).pow(s.unsigned_abs() as u32));
        if s >= 0 {
            power
        } else {
            power.recip()
        }
    }
}

/// A successful floored membership. Multipliers are representatives in
/// x, y, z (coefficient valuations >= the floor, z-degree bounded by the
/// search cap); substituting z's image and summing against the generator
/// images reproduces the target exactly.
#[derive(Debug, Clone)]
pub struct FlooredWitness {
    pub multipliers: Vec<Polynomial>,
    /// Number of z-expanded generator columns the search was given: the
    /// desk-scale presentation size of the module at this step.
    pub expanded_generators: usize,
}

/// Decide target ∈ Σ p^{t_g}·g·(model ring), with z-image `zbar` generating
/// the multiplier algebra and all multiplier-by-generator products capped at
/// total degree `product_cap`.
pub fn floored_ideal_member(
    target: &Polynomial,
    generators: &[FlooredGenerator],
    zbar: &Polynomial,
    p: PrimeBase,
    product_cap: u32,
) -> Option<FlooredWitness> {
    // Expanded column set: p^{ceil(t_g)}·g·zbar^e for every z-power whose
    // product can still reach the cap.
    let mut columns = Vec::new();
    let mut origin = Vec::new();
    let zdeg = zbar.total_degree();
    for (gi, g) in generators.iter().enumerate() {
        let shifted = g.generator.scale(&g.shift(p));
        if shifted.is_zero() {
            continue;
        }
        let gdeg = shifted.total_degree();
        if gdeg > product_cap {
            continue;
        }
        let mut expanded = shifted;
        let mut e: u16 = 0;
        loop {
            columns.push(expanded.clone());
            origin.push((gi, e));
            if zbar.is_zero() || zdeg == 0 {
                break;
            }
            e += 1;
            if gdeg + u32::from(e) * zdeg > product_cap {
                break;
            }
            expanded = expanded.mul(zbar);
        }
    }
    let expanded_generators = columns.len();
    let raw = ideal_member_capped(target, &columns, p, product_cap, Some(product_cap))?;

    // Fold z-power columns back into one representative per generator.
    let mut multipliers = vec![Polynomial::zero(); generators.len()];
    for (m, (gi, e)) in raw.iter().zip(&origin) {
        if m.is_zero() {
            continue;
        }
        let with_z = m.mul_monomial(&Monomial::var(Var::Z, *e), &BigRational::one());
        multipliers[*gi] = multipliers[*gi].add(&with_z.scale(&generators[*gi].shift(p)));
    }
    for (m, g) in multipliers.iter().zip(generators) {
        debug_assert!(
            m.min_p_valuation(p).at_least(g.floor),
            "shifted multiplier dropped below its floor"
        );
    }
    Some(FlooredWitness { multipliers, expanded_generators })
}

/// Smallest s in 0..=max_exponent with p^s·target ∈ Σ p^{t_g}·g·(ring), if
/// any. Feasibility is monotone in s (multiply a witness by p and every
/// valuation rises), so the first ascending hit is the minimum.
pub fn minimal_power_member(
    target: &Polynomial,
    generators: &[FlooredGenerator],
    zbar: &Polynomial,
    p: PrimeBase,
    max_exponent: u32,
    product_cap: u32,
) -> Option<(u32, FlooredWitness)> {
    let p_big = BigRational::from_integer(BigInt::from(p.get()));
    let mut scaled_target = target.clone();
    for s in 0..=max_exponent {
        if let Some(witness) =
            floored_ideal_member(&scaled_target, generators, zbar, p, product_cap)
        {
            return Some((s, witness));
        }
        scaled_target = scaled_target.scale(&p_big);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn p2() -> PrimeBase {
        PrimeBase::new(2).unwrap()
    }

    fn poly(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    /// Substitute zbar for z and sum multipliers against generator images.
    fn rebuild(
        witness: &FlooredWitness,
        generators: &[FlooredGenerator],
        zbar: &Polynomial,
    ) -> Polynomial {
        let den = BigRational::one();
        let mut sum = Polynomial::zero();
        for (m, g) in witness.multipliers.iter().zip(generators) {
            let image = m.substitute(Var::Z, zbar, &den);
            sum = sum.add(&image.mul(&g.generator));
        }
        sum
    }

    #[test]
    fn positive_floor_blocks_a_unit_multiplier() {
        // x ∈ (x) trivially, but with floor 1 the multiplier must be even.
        let zbar = Polynomial::zero();
        let gens = [FlooredGenerator::new(poly("x"), Rational64::new(1, 1))];
        assert!(floored_ideal_member(&poly("x"), &gens, &zbar, p2(), 4).is_none());
        let hit = floored_ideal_member(&poly("2 x"), &gens, &zbar, p2(), 4).unwrap();
        assert_eq!(hit.multipliers[0], poly("2"));
    }

    #[test]
    fn negative_floor_admits_half_multipliers() {
        let zbar = Polynomial::zero();
        let gens = [FlooredGenerator::new(poly("x"), Rational64::new(-1, 1))];
        let hit = floored_ideal_member(&poly("1/2 x"), &gens, &zbar, p2(), 4).unwrap();
        assert_eq!(hit.multipliers[0], poly("1/2"));
    }

    #[test]
    fn fractional_floor_rounds_up() {
        // floor 1/2 at p = 3 forces v >= 1, so a unit multiplier fails.
        let p3 = PrimeBase::new(3).unwrap();
        let zbar = Polynomial::zero();
        let gens = [FlooredGenerator::new(poly("y"), Rational64::new(1, 2))];
        assert!(floored_ideal_member(&poly("y"), &gens, &zbar, p3, 4).is_none());
        let hit = floored_ideal_member(&poly("3 y"), &gens, &zbar, p3, 4).unwrap();
        assert_eq!(hit.multipliers[0], poly("3"));
    }

    #[test]
    fn ring_multipliers_can_dip_below_integral() {
        // With zbar = (x+y)/2 the ring contains elements of negative
        // valuation, so x·zbar ∈ (x) even though its coefficients are halves.
        let zbar = poly("1/2 x + 1/2 y");
        let target = zbar.mul(&poly("x"));
        let gens = [FlooredGenerator::new(poly("x"), Rational64::zero())];
        let hit = floored_ideal_member(&target, &gens, &zbar, p2(), 4).unwrap();
        // The representative is z itself: integral in xyz-form.
        assert_eq!(hit.multipliers[0], poly("z"));
        assert!(hit.multipliers[0].has_integral_coefficients(p2()));
        assert_eq!(rebuild(&hit, &gens, &zbar), target);
    }

    #[test]
    fn plain_polynomial_multipliers_still_found() {
        let zbar = poly("1/2 x + 1/2 y");
        let gens = [
            FlooredGenerator::new(poly("x^2"), Rational64::zero()),
            FlooredGenerator::new(poly("y^2"), Rational64::zero()),
        ];
        let target = poly("x^3 + 3 y^2");
        let hit = floored_ideal_member(&target, &gens, &zbar, p2(), 4).unwrap();
        assert_eq!(rebuild(&hit, &gens, &zbar), target);
        assert!(hit.expanded_generators > 2, "z-power columns were enumerated");
    }

    #[test]
    fn minimal_power_finds_the_first_feasible_scale() {
        // (x+y)/2 needs one doubling to land in (x, y) over Z_(2).
        let zbar = poly("1/2 x + 1/2 y");
        let gens = [
            FlooredGenerator::new(poly("x"), Rational64::zero()),
            FlooredGenerator::new(poly("y"), Rational64::zero()),
        ];
        let (s, witness) = minimal_power_member(&zbar, &gens, &zbar, p2(), 3, 4).unwrap();
        assert_eq!(s, 1);
        assert_eq!(witness.multipliers[0], poly("1"));
        assert_eq!(witness.multipliers[1], poly("1"));
    }

    #[test]
    fn minimal_power_exhausts_the_range() {
        let zbar = Polynomial::zero();
        let gens = [FlooredGenerator::new(poly("x"), Rational64::zero())];
        assert!(minimal_power_member(&poly("1/16 x"), &gens, &zbar, p2(), 3, 2).is_none());
        let (s, _) = minimal_power_member(&poly("1/16 x"), &gens, &zbar, p2(), 4, 2).unwrap();
        assert_eq!(s, 4);
    }

    #[test]
    fn product_cap_prunes_oversized_generators() {
        let zbar = poly("1/2 x + 1/2 y");
        let gens = [
            FlooredGenerator::new(poly("x^5"), Rational64::zero()),
            FlooredGenerator::new(poly("x"), Rational64::zero()),
        ];
        let hit = floored_ideal_member(&poly("x^2"), &gens, &zbar, p2(), 3).unwrap();
        assert!(hit.multipliers[0].is_zero());
        assert_eq!(rebuild(&hit, &gens, &zbar), poly("x^2"));
    }
}
