//! Sweep drivers: exhaustive identity grids and seeded randomized batches.
//!
//! Every sweep is a pure function from its parameters to a `SweepReport`.
//! Randomized sweeps derive one independent ChaCha stream per case from
//! (seed, index), so the outcome does not depend on scheduling; failures are
//! collected in case-index order. Rerunning with the same inputs reproduces
//! the report bit for bit under either driver.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::Zero;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::padic::{
    big_rational_valuation, binomial_tau_identity, binomial_valuation, check_tau_budget,
    legendre_factorial_valuation, tau, PrimeBase, TauIdentity, Valuation,
};
use crate::poly::{Monomial, Polynomial, Var};
use crate::transforms::{
    complete_next_coefficient, condition_sum, lift_degree, shift_transform,
    verify_lift, verify_root_shift_identity, verify_shift, y_power_membership,
    CoefficientSequence, ShiftContext, ZDecomposition,
};

/// How the independent cases of a sweep are scheduled. The outcome is
/// identical either way; only wall-clock time differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Driver {
    fn default() -> Driver {
        #[cfg(feature = "parallel")]
        {
            Driver::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Driver::Sequential
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepReport {
    pub name: String,
    /// None for exhaustive grids; recorded for replay on randomized batches.
    pub seed: Option<u64>,
    pub cases: u64,
    /// One message per failing case, in case-index order. Must be empty.
    pub failures: Vec<String>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sweep = {}", self.name)?;
        match self.seed {
            Some(s) => writeln!(f, "seed = {s}")?,
            None => writeln!(f, "seed = none")?,
        }
        writeln!(f, "cases = {}", self.cases)?;
        writeln!(f, "failures = {}", self.failures.len())?;
        for (k, msg) in self.failures.iter().enumerate() {
            writeln!(f, "failure.{:04} = {msg}", k + 1)?;
        }
        Ok(())
    }
}

/// Runs `check` over case indices 0..count and returns the failure messages
/// in index order.
pub fn run_cases_sequential<F>(count: u64, check: F) -> Vec<String>
where
    F: Fn(u64) -> Option<String>,
{
    (0..count).filter_map(check).collect()
}

/// Same contract as the sequential driver; cases run on the rayon pool and
/// are reassembled in index order before returning.
#[cfg(feature = "parallel")]
pub fn run_cases_parallel<F>(count: u64, check: F) -> Vec<String>
where
    F: Fn(u64) -> Option<String> + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(check)
        .collect::<Vec<Option<String>>>()
        .into_iter()
        .flatten()
        .collect()
}

fn run_cases<F>(driver: Driver, count: u64, check: F) -> Vec<String>
where
    F: Fn(u64) -> Option<String> + Sync + Send,
{
    match driver {
        Driver::Sequential => run_cases_sequential(count, check),
        #[cfg(feature = "parallel")]
        Driver::Parallel => run_cases_parallel(count, check),
    }
}

/// Independent per-case stream: a splitmix64 finalizer decorrelates nearby
/// indices before seeding ChaCha.
fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut s = seed ^ (index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    s ^= s >> 30;
    s = s.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    s ^= s >> 27;
    s = s.wrapping_mul(0x94D0_49BB_1331_11EB);
    s ^= s >> 31;
    ChaCha8Rng::seed_from_u64(s)
}

fn small_nonzero(rng: &mut ChaCha8Rng) -> i64 {
    let v = (rng.next_u32() % 18) as i64 - 9;
    if v >= 0 {
        v + 1
    } else {
        v
    }
}

fn random_poly(rng: &mut ChaCha8Rng, vars: &[Var], terms: u32, max_exp: u16) -> Polynomial {
    let mut f = Polynomial::zero();
    for _ in 0..terms {
        let mut m = Monomial::ONE;
        for &v in vars {
            let e = (rng.next_u32() % u32::from(max_exp + 1)) as u16;
            m = m.mul(&Monomial::var(v, e));
        }
        let c = BigRational::from_integer(BigInt::from(small_nonzero(rng)));
        f = f.add(&Polynomial::term(m, c));
    }
    f
}

fn random_nonzero_poly(rng: &mut ChaCha8Rng, vars: &[Var], terms: u32, max_exp: u16) -> Polynomial {
    loop {
        let f = random_poly(rng, vars, terms, max_exp);
        if !f.is_zero() {
            return f;
        }
    }
}

/// Digit-comparison valuation against the factorial-difference oracle for
/// all 0 <= i <= n <= n_max over the given primes.
pub fn valuation_agreement(n_max: u64, primes: &[PrimeBase], driver: Driver) -> SweepReport {
    let per_prime = n_max + 1;
    let count = primes.len() as u64 * per_prime;
    let failures = run_cases(driver, count, |idx| {
        let p = primes[(idx / per_prime) as usize];
        let n = idx % per_prime;
        for i in 0..=n {
            let digitwise = binomial_valuation(n, i, p);
            let legendre = match (
                legendre_factorial_valuation(n, p),
                legendre_factorial_valuation(i, p),
                legendre_factorial_valuation(n - i, p),
            ) {
                (Valuation::Finite(a), Valuation::Finite(b), Valuation::Finite(c)) => {
                    Valuation::Finite(a - b - c)
                }
                _ => unreachable!("factorial valuations are finite"),
            };
            if digitwise != legendre {
                return Some(format!(
                    "p = {}, n = {n}, i = {i}: digitwise {digitwise} vs legendre {legendre}",
                    p.get()
                ));
            }
        }
        None
    });
    SweepReport { name: "valuation-agreement".into(), seed: None, cases: count, failures }
}

/// The three binomial/tau collapses over every admissible (i, j, L): small
/// primes to ladder height 5, larger ones to height 3. Each right-hand side
/// must be an integer and equal the digit-computed valuation exactly.
pub fn binomial_identities(driver: Driver) -> SweepReport {
    let plan: [(u64, u32); 4] = [(2, 5), (3, 5), (5, 3), (7, 3)];
    // case = one (p, L, i) cell; offsets index the flattened grid
    let mut cells: Vec<(PrimeBase, u32, u64)> = Vec::new();
    for (p_raw, l_max) in plan {
        let p = PrimeBase::new(p_raw).expect("plan primes are prime");
        for l in 1..=l_max {
            cells.push((p, l, p.pow(l) - 1));
        }
    }
    let offsets: Vec<u64> = cells
        .iter()
        .scan(0u64, |acc, &(_, _, n)| {
            let start = *acc;
            *acc += n;
            Some(start)
        })
        .collect();
    let count = offsets.last().copied().unwrap_or(0) + cells.last().map_or(0, |c| c.2);

    let failures = run_cases(driver, count, |idx| {
        let cell = offsets.iter().rposition(|&o| o <= idx).expect("offset table covers range");
        let (p, l, _) = cells[cell];
        let i = idx - offsets[cell] + 1;
        let mut probes: Vec<(TauIdentity, u64)> = vec![(TauIdentity::PrimePowerTop, 0)];
        for j in 1..i {
            probes.push((TauIdentity::PascalEntry, j));
            probes.push((TauIdentity::PrimePowerShift, j));
        }
        for (variant, j) in probes {
            let report = match binomial_tau_identity(variant, i, j, l, p) {
                Ok(r) => r,
                Err(e) => {
                    return Some(format!(
                        "p = {}, L = {l}, i = {i}, j = {j}: {variant:?} rejected: {e}",
                        p.get()
                    ))
                }
            };
            if !report.equal || !report.rhs_is_integer {
                return Some(format!(
                    "p = {}, L = {l}, i = {i}, j = {j}: {variant:?} lhs {} vs rhs {}",
                    p.get(),
                    report.lhs,
                    report.rhs
                ));
            }
        }
        None
    });
    SweepReport { name: "binomial-identities".into(), seed: None, cases: count, failures }
}

/// The budget inequality i/p^(K+1) + K - tau(i) >= 0 over K in -1..=4,
/// p in {2,3,5}, i up to p^(K+4).
pub fn tau_budget(driver: Driver) -> SweepReport {
    let ks: [i64; 6] = [-1, 0, 1, 2, 3, 4];
    let primes: [u64; 3] = [2, 3, 5];
    let count = (ks.len() * primes.len()) as u64;
    let failures = run_cases(driver, count, |idx| {
        let k = ks[(idx as usize) / primes.len()];
        let p = PrimeBase::new(primes[(idx as usize) % primes.len()]).expect("prime");
        let i_max = p.pow((k + 4) as u32);
        match check_tau_budget(k, i_max, p) {
            Ok(report) => report.violations.first().map(|(i, margin)| {
                format!("p = {}, K = {k}, i = {i}: margin {margin} below zero", p.get())
            }),
            Err(e) => Some(format!("p = {}, K = {k}: {e}", p.get())),
        }
    });
    SweepReport { name: "tau-budget".into(), seed: None, cases: count, failures }
}

/// The four step-exponent identities behind the ladder recursion, swept over
/// 1 <= j < i <= i_max, 1 < n < i, p in {2,3,5}, at several base exponents K.
/// Everything is exact Rational64 arithmetic on tau values.
pub fn exponent_identities(i_max: u64, driver: Driver) -> SweepReport {
    let primes: [u64; 3] = [2, 3, 5];
    let ks: [i64; 3] = [0, 1, 4];
    let i_count = i_max.saturating_sub(1);
    let count = primes.len() as u64 * ks.len() as u64 * i_count;
    let failures = run_cases(driver, count, |idx| {
        let per_prime = ks.len() as u64 * i_count;
        let p = PrimeBase::new(primes[(idx / per_prime) as usize]).expect("prime");
        let rem = idx % per_prime;
        let k = Rational64::from_integer(ks[(rem / i_count) as usize]);
        let i = 2 + rem % i_count;
        let t = |n: u64| tau(n, p).value();
        let two = t(2);

        // (a) the correction price telescopes to the row floor
        let e_i = k - t(i) + two;
        let price = t(i - 1) + two - t(i);
        if e_i - price != k - t(i - 1) {
            return Some(format!(
                "p = {}, K = {k}, i = {i}: correction price {} misses floor {}",
                p.get(),
                e_i - price,
                k - t(i - 1)
            ));
        }

        for j in 1..i {
            // (b) the first-branch slack collapses to tau(i-j+1) - tau(2)
            let lhs = (-k + t(i) - two) + (t(j) + t(i - j + 1) - t(i)) + (k - t(j));
            let slack = t(i - j + 1) - two;
            if lhs != slack || lhs < Rational64::zero() {
                return Some(format!(
                    "p = {}, K = {k}, i = {i}, j = {j}: branch slack {lhs} vs {slack}",
                    p.get()
                ));
            }
        }

        for n in 2..i {
            // (c) the deep-branch bound holds with equality when j+n-i > 0
            for j in (i - n + 1)..i {
                let lhs = (k - t(i) + two) - (k - t(n) + two)
                    + t(j + n - i)
                    + t(i - j + 1)
                    - t(n)
                    + (k - t(j + n - i))
                    - (t(j) + t(i - j + 1) - t(i));
                if lhs != k - t(j) {
                    return Some(format!(
                        "p = {}, K = {k}, i = {i}, j = {j}, n = {n}: deep branch {lhs} vs {}",
                        p.get(),
                        k - t(j)
                    ));
                }
            }
            // (d) the j+n-i = 0 branch reduces to L >= K + tau(2), cleared
            // by the minimal admissible ladder L = K+1
            let j = i - n;
            let l = k + Rational64::from_integer(1);
            let lhs = (k - t(i) + two) - (k - t(n) + two) + (l - t(i - j) + t(i - j + 1) - two)
                - (t(j) + t(i - j + 1) - t(i));
            let reduced = t(n) + l - two - t(i - j) - k;
            if lhs - (k - t(j)) != reduced
                || reduced != l - k - two
                || reduced < Rational64::zero()
            {
                return Some(format!(
                    "p = {}, K = {k}, i = {i}, n = {n}: boundary branch {} vs reduced {reduced}",
                    p.get(),
                    lhs - (k - t(j))
                ));
            }
        }
        None
    });
    SweepReport { name: "exponent-identities".into(), seed: None, cases: count, failures }
}

/// Seeded batch of root-shift closed-form checks: random monic sequences and
/// substitution contexts, degree up to 8, per prime in {2,3}.
pub fn root_shift_batch(seed: u64, cases_per_prime: u64, driver: Driver) -> SweepReport {
    let primes: [u64; 2] = [2, 3];
    let count = primes.len() as u64 * cases_per_prime;
    let all_vars = [Var::X, Var::Y, Var::Z];
    let failures = run_cases(driver, count, |idx| {
        let p = PrimeBase::new(primes[(idx / cases_per_prime) as usize]).expect("prime");
        let mut rng = case_rng(seed, idx);
        let n = 1 + u64::from(rng.next_u32() % 8);
        let mut entries = vec![Polynomial::one()];
        for _ in 1..=n {
            let terms = 1 + rng.next_u32() % 3;
            entries.push(random_poly(&mut rng, &all_vars, terms, 2));
        }
        let x_terms = 1 + rng.next_u32() % 2;
        let x = random_nonzero_poly(&mut rng, &all_vars, x_terms, 2);
        let z_terms = 1 + rng.next_u32() % 2;
        let z = random_poly(&mut rng, &all_vars, z_terms, 2);
        let ctx = match ShiftContext::new(x, Polynomial::var(Var::Y), z) {
            Ok(c) => c,
            Err(e) => return Some(format!("case {idx}: context rejected: {e}")),
        };
        let a = match CoefficientSequence::monic(n, entries, p) {
            Ok(a) => a,
            Err(e) => return Some(format!("case {idx}: sequence rejected: {e}")),
        };
        match verify_root_shift_identity(&a, &ctx, n) {
            Ok(true) => None,
            Ok(false) => Some(format!("case {idx}: p = {}, n = {n}: closed form mismatch", p.get())),
            Err(e) => Some(format!("case {idx}: {e}")),
        }
    });
    SweepReport { name: "root-shift-batch".into(), seed: Some(seed), cases: count, failures }
}

/// Seeded batch of coefficient completions: from a random split z = ā·x + b̄·y,
/// iterate the forced next-coefficient choice to full degree and re-verify
/// every condition from scratch.
pub fn completion_batch(seed: u64, cases: u64, driver: Driver) -> SweepReport {
    let failures = run_cases(driver, cases, |idx| {
        let mut rng = case_rng(seed, idx);
        let p = PrimeBase::new(if rng.next_u32() % 2 == 0 { 2 } else { 3 }).expect("prime");
        let n = 1 + u64::from(rng.next_u32() % 8);
        let (split, ctx) = split_and_context(&mut rng);
        let mut entries = vec![Polynomial::one()];
        for k in 1..=n {
            let seq = CoefficientSequence::raw(n, entries.clone(), p);
            match complete_next_coefficient(&seq, &split, &ctx, n) {
                Ok(a_k) => entries.push(a_k),
                Err(e) => return Some(format!("case {idx}: completion at k = {k} failed: {e}")),
            }
        }
        let nn = BigInt::from(n);
        for k in 0..=(n as usize) {
            let s = condition_sum(&entries, &nn, k, &ctx);
            match y_power_membership(&s, &ctx.y, k) {
                Ok(true) => {}
                Ok(false) => return Some(format!("case {idx}: condition {k} escaped y^{k}")),
                Err(e) => return Some(format!("case {idx}: condition {k}: {e}")),
            }
        }
        None
    });
    SweepReport { name: "completion-batch".into(), seed: Some(seed), cases, failures }
}

fn split_and_context(rng: &mut ChaCha8Rng) -> (ZDecomposition, ShiftContext) {
    let xy = [Var::X, Var::Y];
    let a_terms = 1 + rng.next_u32() % 2;
    let a_bar = random_poly(rng, &xy, a_terms, 1);
    let b_terms = 1 + rng.next_u32() % 2;
    let b_bar = random_poly(rng, &xy, b_terms, 1);
    let x = Polynomial::var(Var::X);
    let y = Polynomial::var(Var::Y);
    let z = a_bar.mul(&x).add(&b_bar.mul(&y));
    let ctx = ShiftContext::new(x, y, z).expect("y is nonzero");
    (ZDecomposition { a_bar, b_bar }, ctx)
}

/// Seeded batch of degree lifts p^L -> p^M on condition-satisfying sequences:
/// every lift unit must be an exact p-unit and every condition must transport.
pub fn lift_batch(seed: u64, cases: u64, driver: Driver) -> SweepReport {
    let failures = run_cases(driver, cases, |idx| {
        let mut rng = case_rng(seed, idx);
        let p = PrimeBase::new(if rng.next_u32() % 2 == 0 { 2 } else { 3 }).expect("prime");
        let l = 1 + rng.next_u32() % 2;
        let m = l + 1 + rng.next_u32() % 2;
        let pl = p.pow(l);
        let k_top = (1 + u64::from(rng.next_u32() % 4)).min(pl - 1);
        let (split, ctx) = split_and_context(&mut rng);
        let mut entries = vec![Polynomial::one()];
        for k in 1..=k_top {
            let seq = CoefficientSequence::raw(pl, entries.clone(), p);
            match complete_next_coefficient(&seq, &split, &ctx, pl) {
                Ok(a_k) => entries.push(a_k),
                Err(e) => return Some(format!("case {idx}: completion at k = {k} failed: {e}")),
            }
        }
        let a = CoefficientSequence::raw(pl, entries, p);
        let outcome = match lift_degree(&a, l, m) {
            Ok(o) => o,
            Err(e) => return Some(format!("case {idx}: lift rejected: {e}")),
        };
        for (j, unit) in outcome.units.iter().enumerate() {
            if big_rational_valuation(unit, p) != Valuation::Finite(0) {
                return Some(format!("case {idx}: lift unit q_{j} = {unit} is not a p-unit"));
            }
        }
        match verify_lift(&a, &outcome.lifted, l, m, &ctx, k_top as usize) {
            Ok(report) if report.all_hold() => None,
            Ok(_) => Some(format!("case {idx}: lifted conditions broke (L = {l}, M = {m})")),
            Err(e) => Some(format!("case {idx}: {e}")),
        }
    });
    SweepReport { name: "lift-batch".into(), seed: Some(seed), cases, failures }
}

/// Seeded batch of index shifts: reindex a condition-satisfying sequence
/// upward by d and check the below-i conditions plus the m-independence of
/// the correction unit q.
pub fn shift_batch(seed: u64, cases: u64, driver: Driver) -> SweepReport {
    let failures = run_cases(driver, cases, |idx| {
        let mut rng = case_rng(seed, idx);
        let p = PrimeBase::new(if rng.next_u32() % 2 == 0 { 2 } else { 3 }).expect("prime");
        let l = 1 + rng.next_u32() % 2;
        let m = l + rng.next_u32() % 2;
        let pl = p.pow(l);
        let i = 2 + u64::from(rng.next_u32()) % (pl - 1);
        let d = 1 + u64::from(rng.next_u32()) % (i - 1);
        let (split, ctx) = split_and_context(&mut rng);
        let mut entries = vec![Polynomial::one()];
        for k in 1..(i - d) {
            let seq = CoefficientSequence::raw(pl, entries.clone(), p);
            match complete_next_coefficient(&seq, &split, &ctx, pl) {
                Ok(a_k) => entries.push(a_k),
                Err(e) => return Some(format!("case {idx}: completion at k = {k} failed: {e}")),
            }
        }
        let a = CoefficientSequence::raw(pl, entries, p);
        let shifted = match shift_transform(&a, d, i, l, m, &ctx) {
            Ok(s) => s,
            Err(e) => return Some(format!("case {idx}: shift rejected: {e}")),
        };
        match verify_shift(&a, &shifted, d, i, l, m, &ctx) {
            Ok(report) if report.all_hold() => None,
            Ok(report) => Some(format!(
                "case {idx}: d = {d}, i = {i}: memberships {:?}, q independent {}",
                report.memberships, report.q_independent
            )),
            Err(e) => Some(format!("case {idx}: {e}")),
        }
    });
    SweepReport { name: "shift-batch".into(), seed: Some(seed), cases, failures }
}
