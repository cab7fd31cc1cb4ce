//! The fixed-ladder recursion for cyclic relation modules.
//!
//! When the relation module on (p^N, x, y) is generated by a single triple
//! (z, a, b), the ladder never climbs: L = K + N from the start, and each
//! kernel element decomposes over just three blocks, x^i, y^i and
//! (xy)^{i−1}z. Each step then fixes two table rows: a_i kills the x^i
//! part and a y^{i−1}-multiple added to a_{i−1} kills the z block.
//!
//! The simplified variant is the N = 1, K = 0 instance of the same loop
//! with all τ thresholds replaced by plain integrality.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};

use crate::padic::tau;
use crate::poly::{binomial_big, Monomial, Polynomial, Var};
use crate::transforms::{condition_sum, y_power_membership};

use super::certificate::{Certificate, CertificateMode, StepRecord, TerminationStatus};
use super::instance::{GeneratorTriple, ImageCache, RelationInstance};
use super::member::{floored_ideal_member, FlooredGenerator};
use super::EngineError;

fn var_power(v: Var, e: u64) -> Polynomial {
    let e = u16::try_from(e).expect("exponent fits a monomial");
    Polynomial::one().mul_monomial(&Monomial::var(v, e), &num_traits::One::one())
}

fn int_valuation(q: &BigInt, p: u64) -> i64 {
    let mut v = 0;
    let mut rest = q.abs();
    let pb = BigInt::from(p);
    while !rest.is_zero() && (&rest % &pb).is_zero() {
        rest /= &pb;
        v += 1;
    }
    v
}

/// Run the fixed-ladder recursion at base exponent `k`. The triple supplies
/// the starting coefficient a_1 = p^k·a; each later step is admitted only
/// if its kernel element lies over the three cyclic blocks, otherwise the
/// instance is not cyclic-representable and the run reports that index.
pub fn run_cyclic(
    instance: &RelationInstance,
    triple: &GeneratorTriple,
    k: u32,
) -> Result<Certificate, EngineError> {
    cyclic_core(instance, triple, k, false, CertificateMode::Cyclic)
}

/// The N = 1 shortcut: K = 0, L = 1, and every τ threshold collapsed to
/// plain integrality. Produces a degree-p certificate from the instance's
/// own Koszul triple.
pub fn run_simplified(instance: &RelationInstance) -> Result<Certificate, EngineError> {
    if instance.n != 1 {
        return Err(EngineError::NotSimplifiable { n: instance.n });
    }
    let triple = instance.koszul_triple();
    cyclic_core(instance, &triple, 0, true, CertificateMode::Simplified)
}

fn cyclic_core(
    instance: &RelationInstance,
    triple: &GeneratorTriple,
    k: u32,
    dispense_tau: bool,
    mode: CertificateMode,
) -> Result<Certificate, EngineError> {
    triple.validate(instance)?;
    let p = instance.p;
    let l = k + instance.n;
    let degree = super::prime_power_u64(p, l)?;
    if degree > u64::from(u16::MAX) {
        return Err(EngineError::Range(format!(
            "certificate degree p^{l} = {degree} exceeds the monomial exponent range"
        )));
    }
    let pl = BigInt::from(p.get());
    let pl = pl.pow(l);
    let zbar = instance.z_image();
    let zdeg = zbar.total_degree();
    let ctx = instance.image_context();
    let mut cache = ImageCache::new(instance);

    let row_floor = |j: u64| -> Rational64 {
        if dispense_tau {
            Rational64::zero()
        } else {
            Rational64::from_integer(i64::from(k)) - tau(j, p).value()
        }
    };
    let scale_for = |i: u64| -> Rational64 {
        if dispense_tau {
            Rational64::zero()
        } else {
            Rational64::from_integer(i64::from(k)) - tau(i, p).value() + tau(2, p).value()
        }
    };

    // a_1 = p^k·a; its floor k − τ(1) = k is the triple's integrality.
    let a1 = triple
        .a
        .scale(&BigRational::from_integer(BigInt::from(p.get()).pow(k)));
    if !a1.min_p_valuation(p).at_least(row_floor(1)) {
        return Err(EngineError::ConditionFailed { i: 1, j: 1, n: 0, what: "row valuation".into() });
    }
    let mut table = vec![Polynomial::one(), a1];

    // First condition: p^L·z + a_1·x lands in y·R[1/p] because L = k+N
    // makes the z terms cancel against the triple relation exactly.
    let images: Vec<Polynomial> = table.iter().map(|a| cache.image(a)).collect();
    let s1 = condition_sum(&images, &pl, 1, &ctx);
    if !y_power_membership(&s1, &ctx.y, 1).map_err(|e| EngineError::Range(e.to_string()))? {
        return Err(EngineError::ConditionFailed { i: 1, j: 1, n: 0, what: "condition".into() });
    }
    let mut records = vec![StepRecord {
        i: 1,
        l,
        d: None,
        colon_exponent: None,
        colon_within_n: true,
        checks: vec![("condition.1".to_string(), true)],
    }];

    for i in 2..=degree {
        let scale = scale_for(i);

        // Kernel element from the current table, at the fixed ladder.
        let mut zeta = Polynomial::zero();
        for (j, a) in table.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let c = binomial_big(&(&pl - BigInt::from(j)), i - j as u64);
            let mono = Monomial::var(Var::Z, (i - j as u64) as u16)
                .mul(&Monomial::var(Var::X, j as u16));
            let term = a.mul_monomial(&mono, &c);
            if !term.min_p_valuation(p).at_least(scale) {
                return Err(EngineError::RingExit { i, j: j as u64, floor: scale.to_string() });
            }
            zeta = zeta.add(&term);
        }
        let image = cache.image(&zeta);

        // The cyclic hypothesis: this image must decompose over exactly
        // x^i, y^i and (xy)^{i−1}·z, all at the kernel element's scale.
        let z_block = var_power(Var::X, i - 1).mul(&var_power(Var::Y, i - 1)).mul(&zbar);
        let gens = [
            FlooredGenerator::new(var_power(Var::X, i), scale),
            FlooredGenerator::new(var_power(Var::Y, i), scale),
            FlooredGenerator::new(z_block.clone(), scale),
        ];
        let cap = image
            .total_degree()
            .max(z_block.total_degree())
            .max(u32::try_from(i).unwrap_or(u32::MAX).saturating_mul(zdeg))
            + zdeg;
        let witness = floored_ideal_member(&image, &gens, &zbar, p, cap)
            .ok_or(EngineError::NotCyclic { i })?;
        let [c1, _c2, c3] = <[Polynomial; 3]>::try_from(witness.multipliers)
            .expect("three generators give three multipliers");

        // Divisor p^L − (i−1): its p-part is exactly the p-part of i−1,
        // which the τ chain prices as τ(i−1) + τ(2) − τ(i).
        let divisor = &pl - BigInt::from(i - 1);
        let div_val = int_valuation(&divisor, p.get());
        if div_val != int_valuation(&BigInt::from(i - 1), p.get()) {
            return Err(EngineError::DivisorAudit {
                i,
                detail: format!("v(p^L−(i−1)) = {div_val} differs from v(i−1)"),
            });
        }
        if !dispense_tau {
            let priced = tau(i - 1, p).value() + tau(2, p).value() - tau(i, p).value();
            if Rational64::from_integer(div_val) != priced {
                return Err(EngineError::DivisorAudit {
                    i,
                    detail: format!("carry price {priced} differs from v(i−1) = {div_val}"),
                });
            }
        }

        // Fix the two rows.
        let correction = c3
            .mul(&var_power(Var::Y, i - 1))
            .scale(&(-BigRational::from_integer(BigInt::from(1)) / BigRational::from_integer(divisor)));
        let prev_floor = row_floor(i - 1);
        if !correction.min_p_valuation(p).at_least(prev_floor) {
            return Err(EngineError::ConditionFailed {
                i,
                j: i - 1,
                n: 0,
                what: "row valuation".into(),
            });
        }
        table[(i - 1) as usize] = table[(i - 1) as usize].add(&correction);
        if !table[(i - 1) as usize].min_p_valuation(p).at_least(prev_floor) {
            return Err(EngineError::ConditionFailed {
                i,
                j: i - 1,
                n: 0,
                what: "row valuation".into(),
            });
        }
        let a_i = c1.neg();
        if !a_i.min_p_valuation(p).at_least(row_floor(i)) {
            return Err(EngineError::ConditionFailed { i, j: i, n: 0, what: "row valuation".into() });
        }
        table.push(a_i);

        // Only rows i−1 and i moved, so only those two conditions need
        // rechecking; the correction keeps the lower one a y^{i−1} multiple.
        let images: Vec<Polynomial> = table.iter().map(|a| cache.image(a)).collect();
        let mut checks = vec![("rows".to_string(), true), ("divisor".to_string(), true)];
        for cond_k in [i - 1, i] {
            let s = condition_sum(&images, &pl, cond_k as usize, &ctx);
            let ok = y_power_membership(&s, &ctx.y, cond_k as usize)
                .map_err(|e| EngineError::Range(e.to_string()))?;
            if !ok {
                return Err(EngineError::ConditionFailed {
                    i,
                    j: cond_k,
                    n: 0,
                    what: "condition".into(),
                });
            }
            checks.push((format!("condition.{cond_k}"), true));
        }
        records.push(StepRecord {
            i,
            l,
            d: None,
            colon_exponent: None,
            colon_within_n: true,
            checks,
        });
    }

    let coefficients = table[1..].to_vec();
    Certificate::assemble(
        mode,
        instance.clone(),
        k,
        l,
        degree,
        coefficients,
        records,
        TerminationStatus::Complete,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::verify_certificate;
    use crate::padic::Valuation;
    use num_rational::Rational64;

    fn relation(p: u64, n: u32, k: u32, c: i64, d: i64) -> RelationInstance {
        RelationInstance::new(
            p,
            n,
            k,
            Polynomial::from_integer(c),
            Polynomial::from_integer(d),
        )
        .expect("valid instance")
    }

    fn consts(values: &[i64]) -> Vec<Polynomial> {
        values.iter().map(|&v| Polynomial::from_integer(v)).collect()
    }

    #[test]
    fn simplified_run_certifies_an_integral_image() {
        let instance = relation(2, 1, 0, 2, 4);
        let cert = run_simplified(&instance).expect("decomposable instance");
        assert_eq!(cert.mode, CertificateMode::Simplified);
        assert_eq!((cert.l_final, cert.i_final), (1, 2));
        assert_eq!(cert.termination, TerminationStatus::Complete);
        assert_eq!(cert.coefficients, consts(&[-2, 1]));
        assert!(verify_certificate(&cert, &instance).accepted());
    }

    #[test]
    fn simplified_run_handles_odd_primes() {
        let instance = relation(3, 1, 0, 3, 6);
        let cert = run_simplified(&instance).expect("decomposable instance");
        assert_eq!((cert.l_final, cert.i_final), (1, 3));
        // (T - 1)^3: the recursion finds the binomial certificate.
        assert_eq!(cert.coefficients, consts(&[-3, 3, -1]));
        assert!(verify_certificate(&cert, &instance).accepted());
    }

    #[test]
    fn simplified_run_requires_n_one() {
        let err = run_simplified(&relation(3, 2, 0, 3, 6)).unwrap_err();
        assert_eq!(err, EngineError::NotSimplifiable { n: 2 });
    }

    #[test]
    fn non_integral_image_is_rejected_at_the_first_block() {
        // 2z = x + y: the degree-2 kernel element needs a 1/4 on the
        // x^2 block, so no decomposition over the three blocks exists.
        let err = run_simplified(&relation(2, 1, 0, 1, 1)).unwrap_err();
        assert_eq!(err, EngineError::NotCyclic { i: 2 });
        let err = run_simplified(&relation(3, 1, 0, 1, 2)).unwrap_err();
        assert_eq!(err, EngineError::NotCyclic { i: 2 });
    }

    #[test]
    fn cyclic_run_prices_rows_against_tau() {
        let instance = relation(2, 1, 1, 2, 4);
        let triple = instance.koszul_triple();
        let cert = run_cyclic(&instance, &triple, 1).expect("decomposable instance");
        assert_eq!(cert.mode, CertificateMode::Cyclic);
        assert_eq!((cert.l_final, cert.i_final), (2, 4));
        assert_eq!(cert.coefficients, consts(&[-4, 6, -4, 1]));
        let vals: Vec<_> = cert.margins.iter().map(|m| m.valuation).collect();
        assert_eq!(vals, vec![
            Valuation::Finite(2),
            Valuation::Finite(1),
            Valuation::Finite(2),
            Valuation::Finite(0),
        ]);
        let floors: Vec<_> = cert.margins.iter().map(|m| m.floor).collect();
        assert_eq!(floors, vec![
            Rational64::from_integer(1),
            Rational64::from_integer(0),
            Rational64::from_integer(0),
            Rational64::from_integer(-1),
        ]);
        assert!(verify_certificate(&cert, &instance).accepted());
    }

    #[test]
    fn zero_budget_cyclic_run_matches_the_simplified_one() {
        let instance = relation(3, 1, 0, 3, 6);
        let triple = instance.koszul_triple();
        let cyclic = run_cyclic(&instance, &triple, 0).expect("decomposable instance");
        let simplified = run_simplified(&instance).expect("decomposable instance");
        assert_eq!(cyclic.coefficients, simplified.coefficients);
        assert_eq!(cyclic.mode, CertificateMode::Cyclic);
        assert!(verify_certificate(&cyclic, &instance).accepted());
    }
}
