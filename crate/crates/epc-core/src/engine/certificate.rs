//! Certificates and their independent verification.
//!
//! A certificate is the full coefficient table of a monic polynomial
//! f(T) = T^{p^L} + Σ a_j·T^{p^L−j} together with the per-step run records
//! and a valuation ledger. The text form is line-oriented `key = value`,
//! emitted in a fixed order so identical certificates serialize to
//! identical bytes.
//!
//! Verification never trusts the producing run: float-free recomputation
//! of every coefficient valuation, every membership condition, and the
//! exponent ledger, with each failure itemized.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::Zero;

use crate::padic::{check_tau_budget, coefficient_margins, PrimeBase, RatVal, Valuation};
use crate::poly::Polynomial;
use crate::transforms::{build_b_coefficients, y_power_membership, CoefficientSequence};

use super::instance::{coefficient_floor, ImageCache, RelationInstance};
use super::EngineError;

const FORMAT_TAG: &str = "epc-certificate-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateMode {
    General,
    Cyclic,
    Simplified,
}

impl fmt::Display for CertificateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateMode::General => "general",
            CertificateMode::Cyclic => "cyclic",
            CertificateMode::Simplified => "simplified",
        })
    }
}

impl FromStr for CertificateMode {
    type Err = EngineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(CertificateMode::General),
            "cyclic" => Ok(CertificateMode::Cyclic),
            "simplified" => Ok(CertificateMode::Simplified),
            other => Err(EngineError::BadCertificate(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationStatus {
    /// The run walked the ladder to i = p^L.
    Complete,
    /// z was already in (x, y) over the ring; the table is the degenerate
    /// (T − w_x·x)^{p^K} witness.
    Trivial,
}

impl fmt::Display for TerminationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationStatus::Complete => "complete",
            TerminationStatus::Trivial => "trivial",
        })
    }
}

impl FromStr for TerminationStatus {
    type Err = EngineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complete" => Ok(TerminationStatus::Complete),
            "trivial" => Ok(TerminationStatus::Trivial),
            other => Err(EngineError::BadCertificate(format!("unknown termination {other:?}"))),
        }
    }
}

/// Ledger row for one coefficient: claimed valuation against its floor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientMargin {
    pub j: u64,
    pub valuation: Valuation,
    pub floor: Rational64,
    pub ok: bool,
}

/// Diagnostics for one run step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub i: u64,
    pub l: u32,
    /// Ladder increment; absent for fixed-ladder runs.
    pub d: Option<u32>,
    /// Measured colon exponent of the kernel element against (x^i, y^i);
    /// absent when the measurement exceeded its cap.
    pub colon_exponent: Option<u32>,
    /// Whether the colon exponent stayed within the instance's N.
    pub colon_within_n: bool,
    pub checks: Vec<(String, bool)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub mode: CertificateMode,
    pub instance: RelationInstance,
    /// Effective base exponent of the run; equals the instance's K for
    /// general runs but is a free choice for fixed-ladder ones.
    pub k: u32,
    pub l_final: u32,
    pub i_final: u64,
    /// a_1..a_{i_final} in x,y,z-form; a_0 = 1 is implicit.
    pub coefficients: Vec<Polynomial>,
    pub margins: Vec<CoefficientMargin>,
    pub steps: Vec<StepRecord>,
    pub termination: TerminationStatus,
}

fn mode_floor(mode: CertificateMode, k: u32, j: u64, p: PrimeBase) -> Rational64 {
    match mode {
        CertificateMode::Simplified => Rational64::zero(),
        CertificateMode::General | CertificateMode::Cyclic => coefficient_floor(k, j, p),
    }
}

impl Certificate {
    /// Build a certificate from a finished run, computing the margin
    /// ledger. A coefficient below its floor is refused: runs must not
    /// emit invalid certificates (verification of doctored text is a
    /// separate path).
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        mode: CertificateMode,
        instance: RelationInstance,
        k: u32,
        l_final: u32,
        i_final: u64,
        coefficients: Vec<Polynomial>,
        steps: Vec<StepRecord>,
        termination: TerminationStatus,
    ) -> Result<Certificate, EngineError> {
        if coefficients.len() as u64 != i_final {
            return Err(EngineError::BadCertificate(format!(
                "{} coefficients for final index {i_final}",
                coefficients.len()
            )));
        }
        if super::prime_power_u64(instance.p, l_final)? != i_final {
            return Err(EngineError::BadCertificate(format!(
                "final index {i_final} is not p^{l_final}"
            )));
        }
        let mut margins = Vec::with_capacity(coefficients.len());
        for (idx, a) in coefficients.iter().enumerate() {
            let j = idx as u64 + 1;
            let valuation = a.min_p_valuation(instance.p);
            let floor = mode_floor(mode, k, j, instance.p);
            let ok = valuation.at_least(floor);
            if !ok {
                return Err(EngineError::BadCertificate(format!(
                    "coefficient {j} has valuation {valuation} below floor {floor}"
                )));
            }
            margins.push(CoefficientMargin { j, valuation, floor, ok });
        }
        Ok(Certificate {
            mode,
            instance,
            k,
            l_final,
            i_final,
            coefficients,
            margins,
            steps,
            termination,
        })
    }
}

fn opt_u32(v: Option<u32>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "format = {FORMAT_TAG}")?;
        writeln!(f, "mode = {}", self.mode)?;
        writeln!(f, "p = {}", self.instance.p.get())?;
        writeln!(f, "N = {}", self.instance.n)?;
        writeln!(f, "K = {}", self.instance.k)?;
        writeln!(f, "c = {}", self.instance.c)?;
        writeln!(f, "d = {}", self.instance.d)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "L = {}", self.l_final)?;
        writeln!(f, "i_final = {}", self.i_final)?;
        writeln!(f, "termination = {}", self.termination)?;
        for (idx, a) in self.coefficients.iter().enumerate() {
            writeln!(f, "coeff.{:04} = {}", idx + 1, a)?;
        }
        for m in &self.margins {
            writeln!(f, "margin.{:04}.v = {}", m.j, m.valuation)?;
            writeln!(f, "margin.{:04}.floor = {}", m.j, m.floor)?;
            writeln!(f, "margin.{:04}.ok = {}", m.j, m.ok)?;
        }
        for (idx, s) in self.steps.iter().enumerate() {
            let n = idx + 1;
            writeln!(f, "step.{n:04}.i = {}", s.i)?;
            writeln!(f, "step.{n:04}.L = {}", s.l)?;
            writeln!(f, "step.{n:04}.D = {}", opt_u32(s.d))?;
            writeln!(f, "step.{n:04}.colon = {}", opt_u32(s.colon_exponent))?;
            writeln!(f, "step.{n:04}.colon_within_N = {}", s.colon_within_n)?;
            for (name, ok) in &s.checks {
                writeln!(f, "step.{n:04}.check.{name} = {ok}")?;
            }
        }
        Ok(())
    }
}

fn bad(msg: impl Into<String>) -> EngineError {
    EngineError::BadCertificate(msg.into())
}

fn parse_bool(v: &str) -> Result<bool, EngineError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(format!("expected true/false, got {other:?}"))),
    }
}

fn parse_opt_u32(v: &str) -> Result<Option<u32>, EngineError> {
    if v == "none" {
        return Ok(None);
    }
    v.parse::<u32>().map(Some).map_err(|e| bad(format!("bad integer {v:?}: {e}")))
}

fn parse_valuation(v: &str) -> Result<Valuation, EngineError> {
    if v == "inf" {
        return Ok(Valuation::Infinity);
    }
    v.parse::<i64>().map(Valuation::Finite).map_err(|e| bad(format!("bad valuation {v:?}: {e}")))
}

fn parse_rational(v: &str) -> Result<Rational64, EngineError> {
    v.parse::<Rational64>().map_err(|e| bad(format!("bad rational {v:?}: {e}")))
}

fn parse_num<T: FromStr>(v: &str) -> Result<T, EngineError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(format!("bad number {v:?}: {e}")))
}

#[derive(Default)]
struct MarginDraft {
    v: Option<Valuation>,
    floor: Option<Rational64>,
    ok: Option<bool>,
}

#[derive(Default)]
struct StepDraft {
    i: Option<u64>,
    l: Option<u32>,
    d: Option<Option<u32>>,
    colon: Option<Option<u32>>,
    within: Option<bool>,
    checks: Vec<(String, bool)>,
}

impl FromStr for Certificate {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut scalars: BTreeMap<&str, &str> = BTreeMap::new();
        let mut coeffs: BTreeMap<u64, Polynomial> = BTreeMap::new();
        let mut margins: BTreeMap<u64, MarginDraft> = BTreeMap::new();
        let mut steps: BTreeMap<u64, StepDraft> = BTreeMap::new();

        for raw in s.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once(" = ").ok_or_else(|| bad(format!("missing ' = ' in {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(rest) = key.strip_prefix("coeff.") {
                let j: u64 = parse_num(rest)?;
                let poly = value.parse::<Polynomial>().map_err(bad)?;
                if coeffs.insert(j, poly).is_some() {
                    return Err(bad(format!("duplicate coefficient {j}")));
                }
            } else if let Some(rest) = key.strip_prefix("margin.") {
                let (idx, field) =
                    rest.split_once('.').ok_or_else(|| bad(format!("bad margin key {key:?}")))?;
                let j: u64 = parse_num(idx)?;
                let draft = margins.entry(j).or_default();
                match field {
                    "v" => draft.v = Some(parse_valuation(value)?),
                    "floor" => draft.floor = Some(parse_rational(value)?),
                    "ok" => draft.ok = Some(parse_bool(value)?),
                    other => return Err(bad(format!("unknown margin field {other:?}"))),
                }
            } else if let Some(rest) = key.strip_prefix("step.") {
                let (idx, field) =
                    rest.split_once('.').ok_or_else(|| bad(format!("bad step key {key:?}")))?;
                let n: u64 = parse_num(idx)?;
                let draft = steps.entry(n).or_default();
                if let Some(name) = field.strip_prefix("check.") {
                    draft.checks.push((name.to_string(), parse_bool(value)?));
                } else {
                    match field {
                        "i" => draft.i = Some(parse_num(value)?),
                        "L" => draft.l = Some(parse_num(value)?),
                        "D" => draft.d = Some(parse_opt_u32(value)?),
                        "colon" => draft.colon = Some(parse_opt_u32(value)?),
                        "colon_within_N" => draft.within = Some(parse_bool(value)?),
                        other => return Err(bad(format!("unknown step field {other:?}"))),
                    }
                }
            } else if scalars.insert(key, value).is_some() {
                return Err(bad(format!("duplicate key {key:?}")));
            }
        }

        let take = |name: &str| -> Result<&str, EngineError> {
            scalars.get(name).copied().ok_or_else(|| bad(format!("missing key {name:?}")))
        };
        let format = take("format")?;
        if format != FORMAT_TAG {
            return Err(bad(format!("unsupported format {format:?}")));
        }
        let mode: CertificateMode = take("mode")?.parse()?;
        let p: u64 = parse_num(take("p")?)?;
        let n: u32 = parse_num(take("N")?)?;
        let k_instance: u32 = parse_num(take("K")?)?;
        let c = take("c")?.parse::<Polynomial>().map_err(bad)?;
        let d = take("d")?.parse::<Polynomial>().map_err(bad)?;
        let k: u32 = parse_num(take("k")?)?;
        let l_final: u32 = parse_num(take("L")?)?;
        let i_final: u64 = parse_num(take("i_final")?)?;
        let termination: TerminationStatus = take("termination")?.parse()?;
        for key in scalars.keys() {
            if !matches!(
                *key,
                "format" | "mode" | "p" | "N" | "K" | "c" | "d" | "k" | "L" | "i_final"
                    | "termination"
            ) {
                return Err(bad(format!("unknown key {key:?}")));
            }
        }
        let instance = RelationInstance::new(p, n, k_instance, c, d)?;

        let mut coefficients = Vec::with_capacity(i_final as usize);
        for j in 1..=i_final {
            coefficients
                .push(coeffs.remove(&j).ok_or_else(|| bad(format!("missing coefficient {j}")))?);
        }
        if let Some((&j, _)) = coeffs.iter().next() {
            return Err(bad(format!("coefficient index {j} out of range")));
        }

        let mut margin_list = Vec::with_capacity(i_final as usize);
        for j in 1..=i_final {
            let draft = margins.remove(&j).ok_or_else(|| bad(format!("missing margin {j}")))?;
            margin_list.push(CoefficientMargin {
                j,
                valuation: draft.v.ok_or_else(|| bad(format!("margin {j} lacks v")))?,
                floor: draft.floor.ok_or_else(|| bad(format!("margin {j} lacks floor")))?,
                ok: draft.ok.ok_or_else(|| bad(format!("margin {j} lacks ok")))?,
            });
        }
        if let Some((&j, _)) = margins.iter().next() {
            return Err(bad(format!("margin index {j} out of range")));
        }

        let step_count = steps.len() as u64;
        let mut step_list = Vec::with_capacity(steps.len());
        for idx in 1..=step_count {
            let draft =
                steps.remove(&idx).ok_or_else(|| bad(format!("missing step block {idx}")))?;
            step_list.push(StepRecord {
                i: draft.i.ok_or_else(|| bad(format!("step {idx} lacks i")))?,
                l: draft.l.ok_or_else(|| bad(format!("step {idx} lacks L")))?,
                d: draft.d.ok_or_else(|| bad(format!("step {idx} lacks D")))?,
                colon_exponent: draft.colon.ok_or_else(|| bad(format!("step {idx} lacks colon")))?,
                colon_within_n: draft
                    .within
                    .ok_or_else(|| bad(format!("step {idx} lacks colon_within_N")))?,
                checks: draft.checks,
            });
        }

        Ok(Certificate {
            mode,
            instance,
            k,
            l_final,
            i_final,
            coefficients,
            margins: margin_list,
            steps: step_list,
            termination,
        })
    }
}

/// The outcome of an independent re-check. `failures` is the authoritative
/// verdict; the per-item vectors carry the full picture for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub instance_match: bool,
    pub shape_ok: bool,
    /// (j, recomputed valuation ≥ floor) per coefficient.
    pub floor_checks: Vec<(u64, bool)>,
    /// (j, stored margin row matches recomputation) per coefficient.
    pub claim_checks: Vec<(u64, bool)>,
    /// (k, k-th condition sum lands in y^k·R[p^{−1}]) per condition.
    pub membership_checks: Vec<(u64, bool)>,
    pub ledger_ok: bool,
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn accepted(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-check a certificate from scratch against an instance: shape,
/// coefficient floors, the stored ledger's honesty, every membership
/// condition, and the global exponent budget. Nothing from the producing
/// run is trusted; every quantity is recomputed exactly.
pub fn verify_certificate(
    cert: &Certificate,
    instance: &RelationInstance,
) -> VerificationReport {
    let mut failures = Vec::new();

    let instance_match = cert.instance == *instance;
    if !instance_match {
        failures.push("certificate was issued for a different instance".to_string());
    }
    let p = cert.instance.p;

    let mut shape_ok = true;
    let mut shape_fail = |failures: &mut Vec<String>, msg: String| {
        shape_ok = false;
        failures.push(msg);
    };
    match super::prime_power_u64(p, cert.l_final) {
        Ok(expected) if expected == cert.i_final => {}
        Ok(expected) => shape_fail(
            &mut failures,
            format!("final index {} is not p^L = {expected}", cert.i_final),
        ),
        Err(e) => shape_fail(&mut failures, format!("ladder exponent out of range: {e}")),
    }
    if cert.coefficients.len() as u64 != cert.i_final {
        shape_fail(
            &mut failures,
            format!("{} coefficients for final index {}", cert.coefficients.len(), cert.i_final),
        );
    }
    if cert.margins.len() != cert.coefficients.len() {
        shape_fail(&mut failures, "margin ledger length differs from coefficient count".into());
    }
    match cert.mode {
        CertificateMode::Simplified => {
            if cert.instance.n != 1 || cert.k != 0 || cert.l_final != 1 {
                shape_fail(&mut failures, "simplified certificates require N=1, k=0, L=1".into());
            }
        }
        CertificateMode::Cyclic => {
            if cert.l_final != cert.k + cert.instance.n {
                shape_fail(&mut failures, "fixed-ladder certificates require L = k + N".into());
            }
        }
        CertificateMode::General => {
            if cert.k != cert.instance.k {
                shape_fail(&mut failures, "general certificates run at the instance's K".into());
            }
        }
    }

    let mut floor_checks = Vec::with_capacity(cert.coefficients.len());
    let mut claim_checks = Vec::with_capacity(cert.coefficients.len());
    for (idx, a) in cert.coefficients.iter().enumerate() {
        let j = idx as u64 + 1;
        let valuation = a.min_p_valuation(p);
        let floor = mode_floor(cert.mode, cert.k, j, p);
        let ok = valuation.at_least(floor);
        floor_checks.push((j, ok));
        if !ok {
            failures.push(format!("coefficient {j} has valuation {valuation} below floor {floor}"));
        }
        let claim_ok = match cert.margins.get(idx) {
            Some(m) => m.j == j && m.valuation == valuation && m.floor == floor && m.ok == ok,
            None => false,
        };
        claim_checks.push((j, claim_ok));
        if !claim_ok {
            failures.push(format!("margin ledger row {j} does not match recomputation"));
        }
    }

    // Membership conditions on the whole table, from scratch: alternating
    // condition sums must each land in the matching y-power.
    let mut membership_checks = Vec::new();
    if cert.coefficients.len() as u64 == cert.i_final {
        let ctx = cert.instance.image_context();
        let mut cache = ImageCache::new(&cert.instance);
        let mut entries = vec![Polynomial::one()];
        entries.extend(cert.coefficients.iter().map(|a| cache.image(a)));
        match CoefficientSequence::monic(cert.i_final, entries, p)
            .and_then(|seq| build_b_coefficients(&seq, &ctx, cert.i_final))
        {
            Ok(b) => {
                for k in 1..=cert.i_final {
                    let ok = y_power_membership(&b.entries[k as usize], &ctx.y, k as usize)
                        .unwrap_or(false);
                    membership_checks.push((k, ok));
                    if !ok {
                        failures.push(format!("condition {k} failed its y^{k} membership"));
                    }
                }
            }
            Err(e) => failures.push(format!("condition sums could not be built: {e}")),
        }
    }

    // Exponent ledger: margins against the closure budget, and the budget
    // inequality itself across the whole index range.
    let vals: Vec<RatVal> =
        cert.coefficients.iter().map(|a| RatVal::from(a.min_p_valuation(p))).collect();
    let margin_report = coefficient_margins(i64::from(cert.k), &vals, p);
    let mut ledger_ok = margin_report.all_ok;
    match check_tau_budget(i64::from(cert.k), cert.i_final, p) {
        Ok(budget) => ledger_ok &= budget.violations.is_empty(),
        Err(e) => {
            ledger_ok = false;
            failures.push(format!("budget sweep failed: {e}"));
        }
    }
    if !ledger_ok {
        failures.push("exponent ledger violates the closure budget".to_string());
    }

    // Recorded run diagnostics must not themselves report a failure.
    for (idx, step) in cert.steps.iter().enumerate() {
        for (name, ok) in &step.checks {
            if !ok {
                failures.push(format!("step record {} reports failed check {name}", idx + 1));
            }
        }
    }

    VerificationReport {
        instance_match,
        shape_ok,
        floor_checks,
        claim_checks,
        membership_checks,
        ledger_ok,
        failures,
    }
}
