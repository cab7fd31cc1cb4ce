//! The general ladder recursion.
//!
//! Starting from the defining relation, the run maintains a monic
//! coefficient table a_0..a_i and a ladder exponent L_i. Each step computes
//! the next kernel element, measures the least p-power D_i pulling it back
//! into the current target block module, lifts the table from degree
//! p^{L_{i-1}} to p^{L_i}, and folds the witness into new rows. The run
//! ends when the index reaches p^{L_i}; the table is then a complete
//! certificate.
//!
//! All table entries are kept in x,y,z-form. Valuation floors are checked
//! on these representatives; membership statements are checked on their
//! images under z ↦ (c·x + d·y)/p^N.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};

use crate::padic::{big_rational_valuation, tau, Valuation};
use crate::poly::{binomial_big, Monomial, Polynomial, Var};
use crate::transforms::{
    condition_sum, lift_factor, shift_transform, verify_lift, verify_shift,
    y_power_membership, CoefficientSequence,
};

use super::certificate::{Certificate, CertificateMode, StepRecord, TerminationStatus};
use super::instance::{coefficient_floor, zeta_scale, ImageCache, RelationInstance};
use super::member::{minimal_power_member, FlooredGenerator};
use super::EngineError;

/// Caps and search budgets for a run. The caps are artifact choices: the
/// ladder has no a-priori bound on model instances, so runs that keep
/// climbing are cut off and reported rather than looped forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepPolicy {
    /// Hard cap on the step index i.
    pub max_steps: u64,
    /// Hard cap on the ladder exponent L.
    pub max_l: u32,
    /// Cap for the per-step D search; None means 2N.
    pub d_cap: Option<u32>,
    /// Cap for the colon measurement; None means 2N.
    pub colon_cap: Option<u32>,
    /// Extra degree headroom for the membership searches.
    pub extra_degree: u32,
}

impl Default for StepPolicy {
    fn default() -> StepPolicy {
        StepPolicy { max_steps: 64, max_l: 24, d_cap: None, colon_cap: None, extra_degree: 0 }
    }
}

impl StepPolicy {
    fn d_cap_for(&self, n: u32) -> u32 {
        self.d_cap.unwrap_or(2 * n)
    }

    fn colon_cap_for(&self, n: u32) -> u32 {
        self.colon_cap.unwrap_or(2 * n)
    }
}

/// Desk-scale size of one step's search: how many target blocks there were,
/// how many z-expanded columns the solver saw, and how many terms the
/// target carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDims {
    pub i: u64,
    pub base_generators: usize,
    pub expanded_generators: usize,
    pub target_terms: usize,
}

/// The run state after completing step i.
#[derive(Debug, Clone)]
pub struct StepState {
    pub i: u64,
    pub l: u32,
    /// Scale E_i carried by the latest kernel element.
    pub e_i: Rational64,
    /// Unit part of the latest ladder lift.
    pub u: BigRational,
    /// Kernel elements in x,y,z-form; entry m−1 holds the m-th, scaled by
    /// p^{E_m}. The first is z itself.
    pub zetas: Vec<Polynomial>,
    pub d_list: Vec<u32>,
    pub l_list: Vec<u32>,
    /// Target blocks of the latest minimality search, x,y,z-form.
    pub q_star_generators: Vec<Polynomial>,
    /// tables[m−1] holds the coefficient row a_0..a_m after step m.
    pub tables: Vec<Vec<Polynomial>>,
    pub dims: Vec<StepDims>,
    pub records: Vec<StepRecord>,
}

impl StepState {
    /// The current coefficient table a_0..a_i.
    pub fn a_table(&self) -> &[Polynomial] {
        self.tables.last().expect("state always holds the first table")
    }
}

/// What the first step found.
#[derive(Debug, Clone)]
pub enum InitOutcome {
    /// z already lies in (x, y) over the ring; no ladder is needed and the
    /// witness z = w_x·x + w_y·y certifies directly.
    Trivial { x_multiplier: Polynomial, y_multiplier: Polynomial, dims: StepDims },
    Started(StepState),
}

/// The next kernel element, its image, and the colon measurement.
#[derive(Debug, Clone)]
pub struct ZetaOutcome {
    pub index: u64,
    /// p^{E_i}·z_i in x,y,z-form.
    pub zeta: Polynomial,
    pub image: Polynomial,
    /// E_i = K − τ(i) + τ(2).
    pub scale: Rational64,
    /// Least m with p^m·z_i back in (x^i, y^i) over the ring, if any within
    /// the cap. Exceeding N is recorded, not fatal.
    pub colon_exponent: Option<u32>,
    pub colon_within_n: bool,
}

/// Minimal D with p^D·ζ_i in the target block module, plus the witness of
/// p^D·ζ_i + ĉ·x^i + Σ_n ĉ_n·(xy)^{i−n}·ζ_n = b̂·y^i.
///
/// The parts are scaled multipliers: ĉ = p^{E_i}·c for a ring element c,
/// and ĉ_n carries the offset E_i − E_n. The downstream row formulas
/// consume exactly these scaled forms.
#[derive(Debug, Clone)]
pub struct DWitness {
    pub d: u32,
    pub x_part: Polynomial,
    pub y_part: Polynomial,
    pub z_parts: Vec<Polynomial>,
    pub dims: StepDims,
}

/// One step's result: the successor state, flagged when the index reached
/// p^L and the table is complete.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Advanced(StepState),
    Terminated(StepState),
}

/// Profile of a bounded run: how far it got and where the ladder stopped
/// moving.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizationReport {
    pub i_max_requested: u64,
    pub i_reached: u64,
    pub d_profile: Vec<(u64, u32)>,
    /// Smallest observed n with D_i = 0 for every recorded i > n. None when
    /// the last recorded step still moved the ladder, or the run aborted.
    pub stabilized_at: Option<u64>,
    pub terminated: bool,
    pub aborted_at: Option<u64>,
    pub dims: Vec<StepDims>,
}

/// A run that did not reach a certificate: the error, plus the profile of
/// everything that happened before it.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: EngineError,
    pub report: StabilizationReport,
}

fn pow_u128(p: u64, e: u32) -> Option<u128> {
    u128::from(p).checked_pow(e)
}

fn p_rational(p: u64, e: u32) -> BigRational {
    BigRational::from_integer(BigInt::from(p).pow(e))
}

fn var_power(v: Var, e: u64) -> Polynomial {
    let e = u16::try_from(e).expect("exponent fits a monomial");
    Polynomial::one().mul_monomial(&Monomial::var(v, e), &BigRational::one())
}

/// Search degree cap for step i, mirroring the target and block degrees.
fn search_cap(target: &Polynomial, i: u64, zdeg: u32, extra: u32) -> u32 {
    let blocks = u32::try_from(i).unwrap_or(u32::MAX).saturating_mul(zdeg);
    target.total_degree().max(blocks) + zdeg + extra
}

/// First step: measure D_1, the least exponent with p^{D_1}·z ∈ (x, y) over
/// the ring, and seed the table with a_1 = −p^K·w_x.
///
/// D_1 = 0 short-circuits: the theorem is vacuous for such instances and
/// the witness itself certifies (the ladder inequalities assume D_1 ≥ 1).
pub fn init_step(
    instance: &RelationInstance,
    policy: &StepPolicy,
) -> Result<InitOutcome, EngineError> {
    let p = instance.p;
    let zbar = instance.z_image();
    let cap = 2 * zbar.total_degree() + 2 + policy.extra_degree;
    let gens = [
        FlooredGenerator::new(Polynomial::var(Var::X), Rational64::zero()),
        FlooredGenerator::new(Polynomial::var(Var::Y), Rational64::zero()),
    ];
    // The defining relation is itself a witness at exponent N, so the
    // search cannot come back empty.
    let (d1, witness) = minimal_power_member(&zbar, &gens, &zbar, p, instance.n, cap)
        .ok_or_else(|| {
            EngineError::BadInstance("the defining relation failed its own membership".into())
        })?;
    let dims = StepDims {
        i: 1,
        base_generators: 2,
        expanded_generators: witness.expanded_generators,
        target_terms: zbar.num_terms(),
    };
    if d1 == 0 {
        return Ok(InitOutcome::Trivial {
            x_multiplier: witness.multipliers[0].clone(),
            y_multiplier: witness.multipliers[1].clone(),
            dims,
        });
    }
    let l1 = instance.k + d1;
    if l1 > policy.max_l {
        return Err(EngineError::LadderCapExceeded { i: 1, max_l: policy.max_l });
    }
    let a1 = witness.multipliers[0].scale(&p_rational(p.get(), instance.k)).neg();
    let table = vec![Polynomial::one(), a1];

    // p^{L_1}·z + a_1·x must land in y times the p-inverted ring.
    let ctx = instance.image_context();
    let mut cache = ImageCache::new(instance);
    let images: Vec<Polynomial> = table.iter().map(|a| cache.image(a)).collect();
    let pl1 = BigInt::from(p.get()).pow(l1);
    let s1 = condition_sum(&images, &pl1, 1, &ctx);
    let cond = y_power_membership(&s1, &ctx.y, 1)
        .map_err(|e| EngineError::Range(e.to_string()))?;
    if !cond {
        return Err(EngineError::ConditionFailed { i: 1, j: 1, n: 0, what: "condition".into() });
    }

    let record = StepRecord {
        i: 1,
        l: l1,
        d: Some(d1),
        colon_exponent: Some(d1),
        colon_within_n: d1 <= instance.n,
        checks: vec![("condition.1".to_string(), true)],
    };
    Ok(InitOutcome::Started(StepState {
        i: 1,
        l: l1,
        e_i: Rational64::zero(),
        u: BigRational::one(),
        zetas: vec![Polynomial::var(Var::Z)],
        d_list: vec![d1],
        l_list: vec![l1],
        q_star_generators: vec![Polynomial::var(Var::X), Polynomial::var(Var::Y)],
        tables: vec![table],
        dims: vec![dims],
        records: vec![record],
    }))
}

/// The next kernel element, scaled:
/// ζ_i = Σ_{j=0}^{i−1} C(p^{L_{i−1}}−j, i−j)·a_{j,i−1}·z^{i−j}·x^j.
///
/// Every term must keep coefficient valuations ≥ E_i; a term below the
/// floor means the element left the scaled ring and falsifies the run.
/// The colon exponent of the unscaled element against (x^i, y^i) is
/// measured afterwards and recorded (values above N are the model-ring
/// discrepancy flag).
pub fn compute_zeta(
    state: &StepState,
    instance: &RelationInstance,
    policy: &StepPolicy,
) -> Result<ZetaOutcome, EngineError> {
    let p = instance.p;
    let i = state.i + 1;
    let scale = zeta_scale(instance.k, i, p);
    let pl = BigInt::from(p.get()).pow(state.l);
    let tau2 = tau(2, p).value();

    let mut zeta = Polynomial::zero();
    for (j, a) in state.a_table().iter().enumerate() {
        let j64 = j as u64;
        if j64 >= i || a.is_zero() {
            continue;
        }
        let c = binomial_big(&(&pl - BigInt::from(j)), i - j64);
        let mono = Monomial::var(Var::Z, (i - j64) as u16).mul(&Monomial::var(Var::X, j as u16));
        let term = a.mul_monomial(&mono, &c);
        if !term.min_p_valuation(p).at_least(scale) {
            return Err(EngineError::RingExit { i, j: j64, floor: scale.to_string() });
        }
        if j64 > 0 {
            // The term's slack is τ(i−j+1) − τ(2), nonnegative always.
            let slack = tau(i - j64 + 1, p).value() - tau2;
            if slack < Rational64::zero() {
                return Err(EngineError::Range(format!(
                    "negative slack {slack} at i={i}, j={j}"
                )));
            }
        }
        zeta = zeta.add(&term);
    }
    // j = 0 rests on the ladder staying above K; D_1 ≥ 1 guarantees it.
    debug_assert!(state.l >= instance.k + 1);

    let mut cache = ImageCache::new(instance);
    let image = cache.image(&zeta);
    let zbar = instance.z_image();
    let cap = search_cap(&image, i, zbar.total_degree(), policy.extra_degree);
    let colon_gens = [
        FlooredGenerator::new(var_power(Var::X, i), scale),
        FlooredGenerator::new(var_power(Var::Y, i), scale),
    ];
    let colon = minimal_power_member(
        &image,
        &colon_gens,
        &zbar,
        p,
        policy.colon_cap_for(instance.n),
        cap,
    );
    let (colon_exponent, colon_within_n) = match colon {
        Some((m, _)) => (Some(m), m <= instance.n),
        None => (None, false),
    };
    Ok(ZetaOutcome { index: i, zeta, image, scale, colon_exponent, colon_within_n })
}

/// Least D with p^D·ζ_i in the block module
/// (x^i, y^i, (xy)^{i−1}ζ_1, ..., (xy)ζ_{i−1}), floors shifted by the
/// E-offsets. The search ascends from 0, so the returned D is minimal.
/// The cap is the policy cap, raised to the measured colon exponent when
/// that came out higher.
pub fn find_d(
    state: &StepState,
    instance: &RelationInstance,
    zeta: &ZetaOutcome,
    policy: &StepPolicy,
) -> Result<DWitness, EngineError> {
    let p = instance.p;
    let i = zeta.index;
    let mut cache = ImageCache::new(instance);
    let mut gens = vec![
        FlooredGenerator::new(var_power(Var::X, i), zeta.scale),
        FlooredGenerator::new(var_power(Var::Y, i), zeta.scale),
    ];
    for n in 1..i {
        let xy = var_power(Var::X, i - n).mul(&var_power(Var::Y, i - n));
        let block = xy.mul(&cache.image(&state.zetas[(n - 1) as usize]));
        gens.push(FlooredGenerator::new(block, zeta.scale - zeta_scale(instance.k, n, p)));
    }
    let zbar = instance.z_image();
    let cap = search_cap(&zeta.image, i, zbar.total_degree(), policy.extra_degree);
    let d_max = policy.d_cap_for(instance.n).max(zeta.colon_exponent.unwrap_or(0));
    let (d, witness) = minimal_power_member(&zeta.image, &gens, &zbar, p, d_max, cap)
        .ok_or(EngineError::StepCapExceeded { i, cap: d_max })?;
    let dims = StepDims {
        i,
        base_generators: gens.len(),
        expanded_generators: witness.expanded_generators,
        target_terms: zeta.image.num_terms(),
    };
    let mut parts = witness.multipliers;
    let y_part = parts.remove(1);
    let x_part = parts.remove(0).neg();
    let z_parts = parts.into_iter().map(|m| m.neg()).collect();
    Ok(DWitness { d, x_part, y_part, z_parts, dims })
}

/// One full step: kernel element, minimal D, ladder lift, witness rows,
/// and the whole battery of checks. Row-floor or combined-condition
/// failures abort; per-branch conditions and the shift cross-check are
/// recorded flags.
pub fn step_general(
    state: &StepState,
    instance: &RelationInstance,
    policy: &StepPolicy,
) -> Result<StepOutcome, EngineError> {
    let p = instance.p;
    let i = state.i + 1;
    if i > u64::from(u16::MAX) {
        return Err(EngineError::Range(format!("step index {i} exceeds the monomial exponent range")));
    }
    let zeta_out = compute_zeta(state, instance, policy)?;
    let dwit = find_d(state, instance, &zeta_out, policy)?;
    let l_prev = state.l;
    let l_new = l_prev + dwit.d;
    if l_new > policy.max_l {
        return Err(EngineError::LadderCapExceeded { i, max_l: policy.max_l });
    }

    // Ladder unit: the full i-th lift factor is p^D times a unit.
    let (factor_i, _) = lift_factor(p, l_prev, l_new, i);
    let u = factor_i / p_rational(p.get(), dwit.d);
    if big_rational_valuation(&u, p) != Valuation::Finite(0) {
        return Err(EngineError::DivisorAudit {
            i,
            detail: format!("ladder ratio {u} is not a unit"),
        });
    }

    let table = state.a_table();
    let mut checks: Vec<(String, bool)> = Vec::new();
    let ctx = instance.image_context();
    let mut cache = ImageCache::new(instance);
    let pl_new = BigInt::from(p.get()).pow(l_new);

    // Lift rows: a_{j,i,0} = (∏_{m<j}(p^{L_i}−m)/(p^{L_{i−1}}−m))·a_{j,i−1}.
    let mut lift_rows: Vec<Polynomial> = Vec::with_capacity(table.len());
    for (j, a) in table.iter().enumerate() {
        let (factor_j, _) = lift_factor(p, l_prev, l_new, j as u64);
        lift_rows.push(a.scale(&factor_j));
    }
    if dwit.d > 0 {
        let prev_images: Vec<Polynomial> = table.iter().map(|a| cache.image(a)).collect();
        let lift_images: Vec<Polynomial> = lift_rows.iter().map(|a| cache.image(a)).collect();
        let pl_prev_u64 = super::prime_power_u64(p, l_prev)?;
        let pl_new_u64 = super::prime_power_u64(p, l_new)?;
        let source = CoefficientSequence::monic(pl_prev_u64, prev_images, p)
            .map_err(|e| EngineError::Range(e.to_string()))?;
        let lifted = CoefficientSequence::monic(pl_new_u64, lift_images, p)
            .map_err(|e| EngineError::Range(e.to_string()))?;
        let report = verify_lift(&source, &lifted, l_prev, l_new, &ctx, (i - 1) as usize)
            .map_err(|e| EngineError::Range(e.to_string()))?;
        checks.push(("lift".to_string(), report.all_hold()));
    } else {
        checks.push(("lift".to_string(), true));
    }

    // Witness rows, one branch per n with ĉ_n ≠ 0.
    let mut branch_total: Vec<Polynomial> = vec![Polynomial::zero(); i as usize];
    for n in 1..i {
        let c_n = &dwit.z_parts[(n - 1) as usize];
        if c_n.is_zero() {
            continue;
        }
        let mut branch: Vec<Polynomial> = vec![Polynomial::zero(); i as usize];
        if n == 1 {
            // Single row at j = i−1, divided by C(p^{L_i}−(i−1), 1).
            let denom = &pl_new - BigInt::from(i - 1);
            let row = c_n
                .mul(&var_power(Var::Y, i - 1))
                .scale(&(&u / BigRational::from_integer(denom)));
            branch[(i - 1) as usize] = row;
        } else {
            let l_n1 = state.l_list[(n - 2) as usize];
            let pl_n1 = BigInt::from(p.get()).pow(l_n1);
            let prev_table = &state.tables[(n - 2) as usize];
            let d_shift = i - n;
            for j in d_shift..i {
                let m = j - d_shift;
                let prev = &prev_table[m as usize];
                if prev.is_zero() {
                    continue;
                }
                let num = binomial_big(&(&pl_n1 - BigInt::from(m)), n - m);
                let den = binomial_big(&(&pl_new - BigInt::from(j)), i - j);
                if den.is_zero() {
                    return Err(EngineError::DivisorAudit {
                        i,
                        detail: format!("vanishing divisor at j={j}, n={n}"),
                    });
                }
                let row = c_n
                    .mul(&var_power(Var::Y, d_shift))
                    .mul(prev)
                    .scale(&(&u * num / den));
                branch[j as usize] = branch[j as usize].add(&row);
            }
        }

        // Exact reassembly: the branch's own i-th sum is u·ĉ_n·(xy)^{i−n}·ζ_n.
        let mut reassembled = Polynomial::zero();
        for (j, row) in branch.iter().enumerate() {
            if row.is_zero() {
                continue;
            }
            let c = binomial_big(&(&pl_new - BigInt::from(j)), i - j as u64);
            let mono = Monomial::var(Var::Z, (i - j as u64) as u16)
                .mul(&Monomial::var(Var::X, j as u16));
            reassembled = reassembled.add(&row.mul_monomial(&mono, &c));
        }
        let expected = c_n
            .mul(&var_power(Var::X, i - n))
            .mul(&var_power(Var::Y, i - n))
            .mul(&state.zetas[(n - 1) as usize])
            .scale(&u);
        if reassembled != expected {
            return Err(EngineError::ConditionFailed {
                i,
                j: 0,
                n,
                what: "branch reassembly".into(),
            });
        }

        // Branch conditions below i, on images.
        let branch_images: Vec<Polynomial> = branch.iter().map(|a| cache.image(a)).collect();
        let mut branch_ok = true;
        for k in 1..i as usize {
            let s = condition_sum(&branch_images, &pl_new, k, &ctx);
            branch_ok &= y_power_membership(&s, &ctx.y, k)
                .map_err(|e| EngineError::Range(e.to_string()))?;
        }
        checks.push((format!("branch.{n}"), branch_ok));

        // Cross-check through the index-shift transform when its range
        // guard admits this branch (the recursion also needs it beyond
        // that range, where the rows above stand on their own checks).
        if n > 1 {
            let l_n1 = state.l_list[(n - 2) as usize];
            let pl_n1_u64 = super::prime_power_u64(p, l_n1)?;
            if i <= pl_n1_u64 {
                let prev_images: Vec<Polynomial> = state.tables[(n - 2) as usize]
                    .iter()
                    .map(|a| cache.image(a))
                    .collect();
                let source = CoefficientSequence::monic(pl_n1_u64, prev_images, p)
                    .map_err(|e| EngineError::Range(e.to_string()))?;
                let shifted = shift_transform(&source, i - n, i, l_n1, l_new, &ctx)
                    .map_err(|e| EngineError::Range(e.to_string()))?;
                let report = verify_shift(&source, &shifted, i - n, i, l_n1, l_new, &ctx)
                    .map_err(|e| EngineError::Range(e.to_string()))?;
                let scale_cn = cache.image(c_n).scale(&u);
                let rows_match = branch_images
                    .iter()
                    .zip(shifted.entries.iter())
                    .all(|(row, t)| *row == t.mul(&scale_cn));
                checks.push((format!("shift.{n}"), report.all_hold() && rows_match));
            }
        }

        for (j, row) in branch.iter().enumerate() {
            branch_total[j] = branch_total[j].add(row);
        }
    }

    // Combine; the leading entry is u·ĉ.
    let mut new_table: Vec<Polynomial> = Vec::with_capacity(i as usize + 1);
    for j in 0..i as usize {
        new_table.push(lift_rows[j].add(&branch_total[j]));
    }
    new_table.push(dwit.x_part.scale(&u));

    // Row floors: every entry must clear K − τ(j) on its representative.
    for (j, a) in new_table.iter().enumerate().skip(1) {
        let floor = coefficient_floor(instance.k, j as u64, p);
        if !a.min_p_valuation(p).at_least(floor) {
            return Err(EngineError::ConditionFailed {
                i,
                j: j as u64,
                n: 0,
                what: "row valuation".into(),
            });
        }
    }
    checks.push(("rows".to_string(), true));

    // The i-th sum reassembles to u·(p^D·ζ_i + ĉ·x^i + Σ ĉ_n·(xy)^{i−n}·ζ_n)
    // exactly, and its image is u·b̂·y^i by the witness relation.
    let mut total = Polynomial::zero();
    for (j, a) in new_table.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let c = binomial_big(&(&pl_new - BigInt::from(j)), i - j as u64);
        let mono =
            Monomial::var(Var::Z, (i - j as u64) as u16).mul(&Monomial::var(Var::X, j as u16));
        total = total.add(&a.mul_monomial(&mono, &c));
    }
    let mut expected = zeta_out.zeta.scale(&p_rational(p.get(), dwit.d));
    expected = expected.add(&dwit.x_part.mul(&var_power(Var::X, i)));
    for n in 1..i {
        let c_n = &dwit.z_parts[(n - 1) as usize];
        if c_n.is_zero() {
            continue;
        }
        let xy = var_power(Var::X, i - n).mul(&var_power(Var::Y, i - n));
        expected = expected.add(&c_n.mul(&xy).mul(&state.zetas[(n - 1) as usize]));
    }
    expected = expected.scale(&u);
    if total != expected {
        return Err(EngineError::ConditionFailed { i, j: 0, n: 0, what: "step identity".into() });
    }
    let total_image = cache.image(&total);
    let rhs_image = cache.image(&dwit.y_part).mul(&var_power(Var::Y, i)).scale(&u);
    let final_cond = total_image == rhs_image
        && y_power_membership(&total_image, &ctx.y, i as usize)
            .map_err(|e| EngineError::Range(e.to_string()))?;
    if !final_cond {
        return Err(EngineError::ConditionFailed { i, j: i, n: 0, what: "condition".into() });
    }

    // Conditions below i on the combined table.
    let new_images: Vec<Polynomial> = new_table.iter().map(|a| cache.image(a)).collect();
    for k in 1..i as usize {
        let s = condition_sum(&new_images, &pl_new, k, &ctx);
        let ok = y_power_membership(&s, &ctx.y, k)
            .map_err(|e| EngineError::Range(e.to_string()))?;
        if !ok {
            return Err(EngineError::ConditionFailed {
                i,
                j: k as u64,
                n: 0,
                what: "condition".into(),
            });
        }
        checks.push((format!("condition.{k}"), true));
    }
    checks.push((format!("condition.{i}"), true));

    // Successor state.
    let mut q_star = vec![var_power(Var::X, i), var_power(Var::Y, i)];
    for n in 1..i {
        let xy = var_power(Var::X, i - n).mul(&var_power(Var::Y, i - n));
        q_star.push(xy.mul(&state.zetas[(n - 1) as usize]));
    }
    let mut next = state.clone();
    next.i = i;
    next.l = l_new;
    next.e_i = zeta_out.scale;
    next.u = u;
    next.zetas.push(zeta_out.zeta.clone());
    next.d_list.push(dwit.d);
    next.l_list.push(l_new);
    next.q_star_generators = q_star;
    next.tables.push(new_table);
    next.dims.push(dwit.dims);
    next.records.push(StepRecord {
        i,
        l: l_new,
        d: Some(dwit.d),
        colon_exponent: zeta_out.colon_exponent,
        colon_within_n: zeta_out.colon_within_n,
        checks,
    });

    let done = pow_u128(p.get(), l_new).is_some_and(|pl| u128::from(i) == pl);
    Ok(if done { StepOutcome::Terminated(next) } else { StepOutcome::Advanced(next) })
}

enum DriveEnd {
    Trivial { x_multiplier: Polynomial, y_multiplier: Polynomial, dims: StepDims },
    Terminated(StepState),
    ReachedCap(StepState),
    Failed { state: Option<StepState>, at: u64, error: EngineError },
}

/// Run the step loop until termination, an error, or the index cap.
fn drive(instance: &RelationInstance, policy: &StepPolicy, i_cap: Option<u64>) -> DriveEnd {
    let mut state = match init_step(instance, policy) {
        Err(error) => return DriveEnd::Failed { state: None, at: 1, error },
        Ok(InitOutcome::Trivial { x_multiplier, y_multiplier, dims }) => {
            return DriveEnd::Trivial { x_multiplier, y_multiplier, dims }
        }
        Ok(InitOutcome::Started(state)) => state,
    };
    loop {
        if i_cap.is_some_and(|cap| state.i >= cap) {
            return DriveEnd::ReachedCap(state);
        }
        if state.i >= policy.max_steps {
            let error = EngineError::StepLimit { max_steps: policy.max_steps, l: state.l };
            let at = state.i + 1;
            return DriveEnd::Failed { state: Some(state), at, error };
        }
        match step_general(&state, instance, policy) {
            Err(error) => {
                let at = state.i + 1;
                return DriveEnd::Failed { state: Some(state), at, error };
            }
            Ok(StepOutcome::Advanced(next)) => state = next,
            Ok(StepOutcome::Terminated(next)) => return DriveEnd::Terminated(next),
        }
    }
}

fn stabilization_index(d_profile: &[(u64, u32)], aborted: bool) -> Option<u64> {
    if aborted || d_profile.len() < 2 {
        return None;
    }
    let (last_i, last_d) = *d_profile.last().expect("nonempty");
    if last_d != 0 && last_i >= 2 {
        return None;
    }
    Some(
        d_profile
            .iter()
            .skip(1)
            .rev()
            .find(|(_, d)| *d != 0)
            .map(|(i, _)| *i)
            .unwrap_or(1),
    )
}

fn report_from(
    state: Option<&StepState>,
    i_max_requested: u64,
    terminated: bool,
    aborted_at: Option<u64>,
) -> StabilizationReport {
    let d_profile: Vec<(u64, u32)> = state
        .map(|s| (1..).zip(s.d_list.iter().copied()).collect())
        .unwrap_or_default();
    let stabilized_at = stabilization_index(&d_profile, aborted_at.is_some());
    StabilizationReport {
        i_max_requested,
        i_reached: state.map(|s| s.i).unwrap_or(0),
        d_profile,
        stabilized_at,
        terminated,
        aborted_at,
        dims: state.map(|s| s.dims.clone()).unwrap_or_default(),
    }
}

/// The certificate of a trivial instance: z = w_x·x + w_y·y directly, so
/// f(T) = (T − w_x·x)^{p^K} works with a_j = C(p^K, j)·(−w_x)^j. The k-th
/// condition sum collapses to C(p^K, k)·(w_y·y)^k exactly.
fn trivial_certificate(
    instance: &RelationInstance,
    x_multiplier: &Polynomial,
    y_multiplier: &Polynomial,
) -> Result<Certificate, EngineError> {
    let p = instance.p;
    let k_exp = instance.k;
    let n_final = super::prime_power_u64(p, k_exp)?;
    let pk = BigInt::from(p.get()).pow(k_exp);
    let neg_wx = x_multiplier.neg();

    let mut coefficients = Vec::with_capacity(n_final as usize);
    let mut power = Polynomial::one();
    for j in 1..=n_final {
        power = power.mul(&neg_wx);
        coefficients.push(power.scale(&binomial_big(&pk, j)));
    }

    // Conditions: each sum must equal C(p^K, k)·(w_y·y)^k.
    let ctx = instance.image_context();
    let mut cache = ImageCache::new(instance);
    let mut entries = vec![Polynomial::one()];
    entries.extend(coefficients.iter().map(|a| cache.image(a)));
    let wy_y = cache.image(y_multiplier).mul(&Polynomial::var(Var::Y));
    let mut conditions_ok = true;
    let mut wy_pow = Polynomial::one();
    for k in 1..=n_final as usize {
        wy_pow = wy_pow.mul(&wy_y);
        let s = condition_sum(&entries, &BigInt::from(n_final), k, &ctx);
        conditions_ok &= s == wy_pow.scale(&binomial_big(&pk, k as u64));
        conditions_ok &= y_power_membership(&s, &ctx.y, k)
            .map_err(|e| EngineError::Range(e.to_string()))?;
    }
    if !conditions_ok {
        return Err(EngineError::ConditionFailed {
            i: 1,
            j: 0,
            n: 0,
            what: "trivial conditions".into(),
        });
    }

    let record = StepRecord {
        i: 1,
        l: k_exp,
        d: Some(0),
        colon_exponent: Some(0),
        colon_within_n: true,
        checks: vec![("conditions".to_string(), true)],
    };
    Certificate::assemble(
        CertificateMode::General,
        instance.clone(),
        instance.k,
        k_exp,
        n_final,
        coefficients,
        vec![record],
        TerminationStatus::Trivial,
    )
}

/// Run the ladder to completion and package the table as a certificate.
pub fn run_general(
    instance: &RelationInstance,
    policy: &StepPolicy,
) -> Result<Certificate, RunFailure> {
    match drive(instance, policy, None) {
        DriveEnd::Trivial { x_multiplier, y_multiplier, .. } => {
            trivial_certificate(instance, &x_multiplier, &y_multiplier).map_err(|error| {
                RunFailure { error, report: report_from(None, 0, false, Some(1)) }
            })
        }
        DriveEnd::Terminated(state) => {
            let coefficients = state.a_table()[1..].to_vec();
            Certificate::assemble(
                CertificateMode::General,
                instance.clone(),
                instance.k,
                state.l,
                state.i,
                coefficients,
                state.records.clone(),
                TerminationStatus::Complete,
            )
            .map_err(|error| {
                let report = report_from(Some(&state), 0, true, None);
                RunFailure { error, report }
            })
        }
        DriveEnd::ReachedCap(_) => unreachable!("uncapped drive cannot stop at a cap"),
        DriveEnd::Failed { state, at, error } => {
            let report = report_from(state.as_ref(), 0, false, Some(at));
            Err(RunFailure { error, report })
        }
    }
}

/// Run at most `i_max` steps and profile the ladder instead of demanding a
/// certificate. Never errors: aborts and cap hits are data.
pub fn detect_stabilization(
    instance: &RelationInstance,
    i_max: u64,
    policy: &StepPolicy,
) -> StabilizationReport {
    match drive(instance, policy, Some(i_max)) {
        DriveEnd::Trivial { dims, .. } => StabilizationReport {
            i_max_requested: i_max,
            i_reached: 1,
            d_profile: vec![(1, 0)],
            stabilized_at: Some(1),
            terminated: true,
            aborted_at: None,
            dims: vec![dims],
        },
        DriveEnd::Terminated(state) => {
            let mut report = report_from(Some(&state), i_max, true, None);
            report.i_max_requested = i_max;
            report
        }
        DriveEnd::ReachedCap(state) => report_from(Some(&state), i_max, false, None),
        DriveEnd::Failed { state, at, error: _ } => {
            report_from(state.as_ref(), i_max, false, Some(at))
        }
    }
}
