//! Bounded-degree ideal membership over Z_(p).
//!
//! `bounded_ideal_member` searches for multiplier polynomials f_m with
//! p-valuation-nonnegative coefficients and degree at most `degree_bound`
//! such that target = Σ f_m·g_m, by assembling one linear system over the
//! monomial basis and handing it to the DVR solver. Sound always; complete
//! only up to the bound, so a `None` means "no witness within the bound",
//! never "not in the ideal".

use num_rational::BigRational;
use num_traits::Zero;

use crate::dvr::{dvr_solve, DvrOutcome, DvrSystem};
use crate::padic::PrimeBase;
use crate::poly::{Monomial, Polynomial, Var};

/// Default search bound: deg(target) + max generator degree + 2.
pub fn default_degree_bound(target: &Polynomial, generators: &[Polynomial]) -> u32 {
    let gmax = generators.iter().map(Polynomial::total_degree).max().unwrap_or(0);
    target.total_degree() + gmax + 2
}

/// Membership with multipliers of degree at most `degree_bound`.
///
/// Returns one multiplier per generator (zero for unused generators), with
/// the exact reconstruction Σ f_m·g_m = target guaranteed on success.
pub fn bounded_ideal_member(
    target: &Polynomial,
    generators: &[Polynomial],
    p: PrimeBase,
    degree_bound: u32,
) -> Option<Vec<Polynomial>> {
    ideal_member_capped(target, generators, p, degree_bound, None)
}

/// Default-bound search with two ×2 escalations before giving up.
///
/// Returns the witness together with the bound that produced it.
pub fn member_with_escalation(
    target: &Polynomial,
    generators: &[Polynomial],
    p: PrimeBase,
) -> Option<(Vec<Polynomial>, u32)> {
    let mut bound = default_degree_bound(target, generators);
    for _ in 0..3 {
        if let Some(witness) = bounded_ideal_member(target, generators, p, bound) {
            return Some((witness, bound));
        }
        bound *= 2;
    }
    None
}

/// As `bounded_ideal_member`, with an optional cap on the total degree of
/// each product f_m·g_m. The cap prunes columns whose products overshoot the
/// target degree by more than the caller cares to cancel; callers that know
/// their witnesses are low-degree (the step recursion does) use it to keep
/// systems small.
pub fn ideal_member_capped(
    target: &Polynomial,
    generators: &[Polynomial],
    p: PrimeBase,
    degree_bound: u32,
    product_cap: Option<u32>,
) -> Option<Vec<Polynomial>> {
    if target.is_zero() {
        return Some(vec![Polynomial::zero(); generators.len()]);
    }
    if generators.iter().all(Polynomial::is_zero) {
        return None;
    }
    let vars = present_variables(target, generators);

    let graded = generators
        .iter()
        .filter(|g| !g.is_zero())
        .map(|g| g.homogeneous_degree())
        .collect::<Option<Vec<_>>>()
        .is_some();

    let witness = if graded {
        graded_search(target, generators, p, degree_bound, product_cap, &vars)?
    } else {
        dense_search(target, generators, p, degree_bound, product_cap, &vars)?
    };

    // Reconstruction is an invariant of the solver, not a hope.
    let mut rebuilt = Polynomial::zero();
    for (f, g) in witness.iter().zip(generators) {
        rebuilt = rebuilt.add(&f.mul(g));
    }
    assert!(rebuilt.sub(target).is_zero(), "membership witness failed to reconstruct target");
    Some(witness)
}

fn present_variables(target: &Polynomial, generators: &[Polynomial]) -> Vec<Var> {
    Var::ALL
        .into_iter()
        .filter(|&v| {
            target.degree_in(v) > 0 || generators.iter().any(|g| g.degree_in(v) > 0)
        })
        .collect()
}

/// All monomials in `vars` of exact total degree `deg`, in ascending order.
fn monomials_of_degree(vars: &[Var], deg: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut current = Monomial::ONE;
    fill(vars, deg, &mut current, &mut out);
    out.sort();
    return out;

    fn fill(vars: &[Var], remaining: u32, current: &mut Monomial, out: &mut Vec<Monomial>) {
        match vars {
            [] => {
                if remaining == 0 {
                    out.push(*current);
                }
            }
            [v, rest @ ..] => {
                for e in 0..=remaining.min(u16::MAX as u32) {
                    let mut next = *current;
                    next = next.mul(&Monomial::var(*v, e as u16));
                    fill(rest, remaining - e, &mut next, out);
                }
            }
        }
    }
}

struct Column {
    generator: usize,
    multiplier: Monomial,
    product: Polynomial,
}

fn columns_to_witness(
    columns: &[Column],
    values: &[BigRational],
    generator_count: usize,
) -> Vec<Polynomial> {
    let mut witness = vec![Polynomial::zero(); generator_count];
    for (col, v) in columns.iter().zip(values) {
        if !v.is_zero() {
            witness[col.generator].add_term(col.multiplier, v);
        }
    }
    witness
}

fn solve_columns(
    target: &Polynomial,
    columns: &[Column],
    p: PrimeBase,
) -> Option<Vec<BigRational>> {
    let mut rows: Vec<Monomial> = target.terms().map(|(m, _)| *m).collect();
    for col in columns {
        rows.extend(col.product.terms().map(|(m, _)| *m));
    }
    rows.sort();
    rows.dedup();

    let mut matrix = vec![vec![BigRational::zero(); columns.len()]; rows.len()];
    let row_index = |m: &Monomial| rows.binary_search(m).expect("row built from supports");
    for (j, col) in columns.iter().enumerate() {
        for (m, c) in col.product.terms() {
            matrix[row_index(m)][j] = c.clone();
        }
    }
    let rhs: Vec<BigRational> = rows.iter().map(|m| target.coefficient(m)).collect();

    let system = DvrSystem { matrix, rhs, p };
    match dvr_solve(&system).expect("membership system dimensions are consistent") {
        DvrOutcome::Solved(sol) => Some(sol.values),
        DvrOutcome::Infeasible(_) => None,
    }
}

/// Full search: every multiplier monomial up to the bound, every generator.
fn dense_search(
    target: &Polynomial,
    generators: &[Polynomial],
    p: PrimeBase,
    degree_bound: u32,
    product_cap: Option<u32>,
    vars: &[Var],
) -> Option<Vec<Polynomial>> {
    let mut columns = Vec::new();
    for (gi, g) in generators.iter().enumerate() {
        if g.is_zero() {
            continue;
        }
        let gdeg = g.total_degree();
        let mbound = match product_cap {
            Some(cap) if cap < gdeg => continue,
            Some(cap) => degree_bound.min(cap - gdeg),
            None => degree_bound,
        };
        for d in 0..=mbound {
            for m in monomials_of_degree(vars, d) {
                columns.push(Column {
                    generator: gi,
                    multiplier: m,
                    product: g.mul_monomial(&m, &BigRational::from_integer(1.into())),
                });
            }
        }
    }
    if columns.is_empty() {
        return None;
    }
    let values = solve_columns(target, &columns, p)?;
    Some(columns_to_witness(&columns, &values, generators.len()))
}

/// Graded search: with homogeneous generators the ideal is graded, so each
/// homogeneous component of the target is solved independently with
/// multipliers of the one matching degree.
fn graded_search(
    target: &Polynomial,
    generators: &[Polynomial],
    p: PrimeBase,
    degree_bound: u32,
    product_cap: Option<u32>,
    vars: &[Var],
) -> Option<Vec<Polynomial>> {
    let mut components: std::collections::BTreeMap<u32, Polynomial> = Default::default();
    for (m, c) in target.terms() {
        components.entry(m.total_degree()).or_insert_with(Polynomial::zero).add_term(*m, c);
    }

    let mut witness = vec![Polynomial::zero(); generators.len()];
    for (k, component) in &components {
        if product_cap.is_some_and(|cap| *k > cap) {
            return None;
        }
        let mut columns = Vec::new();
        for (gi, g) in generators.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            let gdeg = g.total_degree();
            if gdeg > *k || k - gdeg > degree_bound {
                continue;
            }
            for m in monomials_of_degree(vars, k - gdeg) {
                columns.push(Column {
                    generator: gi,
                    multiplier: m,
                    product: g.mul_monomial(&m, &BigRational::from_integer(1.into())),
                });
            }
        }
        if columns.is_empty() {
            return None;
        }
        let values = solve_columns(component, &columns, p)?;
        for (f, part) in witness.iter_mut().zip(columns_to_witness(
            &columns,
            &values,
            generators.len(),
        )) {
            *f = f.add(&part);
        }
    }
    Some(witness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::monomial_ideal_member;

    fn p2() -> PrimeBase {
        PrimeBase::new(2).unwrap()
    }

    fn poly(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    fn reconstructs(witness: &[Polynomial], generators: &[Polynomial], target: &Polynomial) {
        let mut sum = Polynomial::zero();
        for (f, g) in witness.iter().zip(generators) {
            sum = sum.add(&f.mul(g));
        }
        assert!(sum.sub(target).is_zero());
    }

    #[test]
    fn cube_in_square_ideal() {
        let target = poly("x^3");
        let gens = [poly("x^2"), poly("y^2")];
        let witness = bounded_ideal_member(&target, &gens, p2(), 1).unwrap();
        assert_eq!(witness[0], poly("x"));
        assert!(witness[1].is_zero());
    }

    #[test]
    fn half_coefficient_blocks_membership() {
        let target = poly("1/2*x + y");
        let gens = [poly("x"), poly("y")];
        assert!(bounded_ideal_member(&target, &gens, p2(), 4).is_none());
        let doubled = target.scale(&BigRational::from_integer(2.into()));
        assert!(bounded_ideal_member(&doubled, &gens, p2(), 4).is_some());
    }

    #[test]
    fn zero_target_gives_zero_witness() {
        let gens = [poly("x^2"), poly("y")];
        let witness = bounded_ideal_member(&Polynomial::zero(), &gens, p2(), 3).unwrap();
        assert!(witness.iter().all(Polynomial::is_zero));
    }

    #[test]
    fn degree_blocked_target() {
        // x has no degree-1 company in (x^2): graded path prunes to an empty
        // column set.
        assert!(bounded_ideal_member(&poly("x"), &[poly("x^2")], p2(), 6).is_none());
    }

    #[test]
    fn inhomogeneous_generators_dense_path() {
        // x^2 + x = (x)·(x + 1)
        let target = poly("x^2 + x");
        let gens = [poly("x + 1")];
        let witness = bounded_ideal_member(&target, &gens, p2(), 2).unwrap();
        assert_eq!(witness[0], poly("x"));
    }

    #[test]
    fn cancellation_across_generators() {
        // y·(x + y) − y·x = y^2 needs both multipliers.
        let target = poly("y^2");
        let gens = [poly("x + y"), poly("x")];
        let witness = bounded_ideal_member(&target, &gens, p2(), 3).unwrap();
        reconstructs(&witness, &gens, &target);
    }

    #[test]
    fn agrees_with_monomial_membership() {
        let gens = [poly("y^2")];
        let gen_monomials = [Monomial::var(Var::Y, 2)];
        for target in [poly("x*y^3 + y^2"), poly("y^2 + 2*y^4"), poly("x*y^2")] {
            assert!(monomial_ideal_member(&target, &gen_monomials));
            let witness = bounded_ideal_member(&target, &gens, p2(), 4).unwrap();
            reconstructs(&witness, &gens, &target);
        }
        let outside = poly("x + y");
        assert!(!monomial_ideal_member(&outside, &gen_monomials));
        assert!(bounded_ideal_member(&outside, &gens, p2(), 4).is_none());
    }

    #[test]
    fn relation_image_needs_one_doubling() {
        // z-image of 2z = x + y: (x+y)/2 is not in (x,y) over Z_(2), but its
        // double is.
        let zbar = poly("1/2*x + 1/2*y");
        let gens = [poly("x"), poly("y")];
        assert!(bounded_ideal_member(&zbar, &gens, p2(), 4).is_none());
        let doubled = zbar.scale(&BigRational::from_integer(2.into()));
        let witness = bounded_ideal_member(&doubled, &gens, p2(), 4).unwrap();
        reconstructs(&witness, &gens, &doubled);
        for f in &witness {
            assert!(f.has_integral_coefficients(p2()));
        }
    }

    #[test]
    fn product_cap_prunes_but_preserves_hits() {
        let target = poly("x^3");
        let gens = [poly("x^2"), poly("y^2")];
        let capped = ideal_member_capped(&target, &gens, p2(), 6, Some(3)).unwrap();
        assert_eq!(capped[0], poly("x"));
        // A cap below the target degree can only fail.
        assert!(ideal_member_capped(&target, &gens, p2(), 6, Some(2)).is_none());
    }

    #[test]
    fn escalation_reports_bound_used() {
        let target = poly("x^3");
        let gens = [poly("x^2"), poly("y^2")];
        let (witness, bound) = member_with_escalation(&target, &gens, p2()).unwrap();
        assert_eq!(bound, default_degree_bound(&target, &gens));
        reconstructs(&witness, &gens, &target);
    }

    #[test]
    fn graded_and_dense_agree_on_feasibility() {
        let vars = [Var::X, Var::Y];
        let gens = [poly("x^2 + x*y"), poly("y^3")];
        for target in [poly("x^3 + x^2*y"), poly("x^2*y^3"), poly("x^2"), poly("x*y^2")] {
            let graded = graded_search(&target, &gens, p2(), 8, None, &vars);
            let dense = dense_search(&target, &gens, p2(), 8, None, &vars);
            assert_eq!(graded.is_some(), dense.is_some(), "target {target}");
            if let Some(w) = graded {
                reconstructs(&w, &gens, &target);
            }
            if let Some(w) = dense {
                reconstructs(&w, &gens, &target);
            }
        }
    }

    #[test]
    fn constant_only_systems() {
        let gens = [poly("2")];
        assert!(bounded_ideal_member(&poly("6"), &gens, p2(), 0).is_some());
        assert!(bounded_ideal_member(&poly("1"), &gens, p2(), 0).is_none());
    }

    #[test]
    fn zero_generators_are_skipped() {
        let gens = [Polynomial::zero(), poly("x")];
        let witness = bounded_ideal_member(&poly("x^2"), &gens, p2(), 2).unwrap();
        assert!(witness[0].is_zero());
        assert_eq!(witness[1], poly("x"));
        assert!(bounded_ideal_member(&poly("x"), &[Polynomial::zero()], p2(), 2).is_none());
    }
}
