//! End-to-end exercises of the public engine surface: the forced ladder on
//! 2z = x + y, the fixed cyclic tables, certificate text round trips, and
//! doctored certificates failing at exactly the perturbed check.

use epc_core::engine::{
    detect_stabilization, run_cyclic, run_general, run_simplified, verify_certificate,
    Certificate, EngineError, RelationInstance, StepPolicy,
};
use epc_core::Polynomial;
use num_rational::BigRational;

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

fn coeff_strings(cert: &Certificate) -> Vec<String> {
    cert.coefficients.iter().map(Polynomial::to_string).collect()
}

#[test]
fn forced_ladder_aborts_with_the_recorded_profile() {
    let instance = relation(2, 1, 0, 1, 1);
    let failure = run_general(&instance, &StepPolicy::default()).expect_err("step 8 aborts");
    assert_eq!(failure.error, EngineError::StepCapExceeded { i: 8, cap: 2 });
    assert_eq!(
        failure.report.d_profile,
        vec![(1, 1), (2, 2), (3, 0), (4, 2), (5, 0), (6, 1), (7, 0)]
    );
    assert_eq!(failure.report.aborted_at, Some(8));
    assert_eq!(failure.report.stabilized_at, None);
    assert!(!failure.report.terminated);
}

#[test]
fn stabilization_detector_sees_the_window() {
    let instance = relation(2, 1, 0, 1, 1);
    let report = detect_stabilization(&instance, 5, &StepPolicy::default());
    assert_eq!(report.stabilized_at, Some(4));
    assert_eq!(report.i_reached, 5);
}

#[test]
fn cyclic_tables_match_the_fixed_points() {
    let even = relation(2, 1, 1, 2, 4);
    let cert = run_cyclic(&even, &even.koszul_triple(), 1).expect("cyclic run succeeds");
    assert_eq!(coeff_strings(&cert), ["-4", "6", "-4", "1"]);
    assert_eq!((cert.l_final, cert.i_final), (2, 4));
    assert!(verify_certificate(&cert, &even).accepted());

    let triple = relation(3, 1, 0, 3, 6);
    let simplified = run_simplified(&triple).expect("simplified run succeeds");
    assert_eq!(coeff_strings(&simplified), ["-3", "3", "-1"]);
    let cyclic = run_cyclic(&triple, &triple.koszul_triple(), 0).expect("cyclic run succeeds");
    assert_eq!(cyclic.coefficients, simplified.coefficients);
    assert!(verify_certificate(&cyclic, &triple).accepted());
}

#[test]
fn certificate_text_round_trips_bit_identically() {
    let even = relation(2, 1, 1, 2, 4);
    let cert = run_cyclic(&even, &even.koszul_triple(), 1).expect("cyclic run succeeds");
    let text = cert.to_string();
    let reparsed: Certificate = text.parse().expect("own output parses");
    assert_eq!(reparsed.to_string(), text);
    assert!(verify_certificate(&reparsed, &even).accepted());
}

#[test]
fn doctored_floor_fails_only_at_the_perturbed_index() {
    let even = relation(2, 1, 1, 2, 4);
    let cert = run_cyclic(&even, &even.koszul_triple(), 1).expect("cyclic run succeeds");

    let mut doctored = cert.clone();
    let quarter = BigRational::new(1.into(), 4.into());
    doctored.coefficients[0] = doctored.coefficients[0].scale(&quarter);
    let verdict = verify_certificate(&doctored, &even);
    assert!(!verdict.accepted());
    assert!(verdict.floor_checks.contains(&(1, false)));
    assert!(verdict.floor_checks.iter().all(|&(j, ok)| ok || j == 1));
    assert!(verdict.instance_match && verdict.shape_ok);
}

#[test]
fn doctored_membership_fails_only_at_the_perturbed_condition() {
    let even = relation(2, 1, 1, 2, 4);
    let cert = run_cyclic(&even, &even.koszul_triple(), 1).expect("cyclic run succeeds");

    let mut coefficients = cert.coefficients.clone();
    coefficients[0] = coefficients[0].add(&Polynomial::from_integer(2));
    let rebuilt = Certificate::assemble(
        cert.mode,
        cert.instance.clone(),
        cert.k,
        cert.l_final,
        cert.i_final,
        coefficients,
        cert.steps.clone(),
        cert.termination,
    )
    .expect("shape is still valid");
    let verdict = verify_certificate(&rebuilt, &even);
    assert!(!verdict.accepted());
    assert_eq!(verdict.membership_checks.first(), Some(&(1, false)));
    assert!(verdict.floor_checks.iter().all(|&(_, ok)| ok));
}

#[test]
fn certificate_pins_its_instance() {
    let even = relation(2, 1, 1, 2, 4);
    let cert = run_cyclic(&even, &even.koszul_triple(), 1).expect("cyclic run succeeds");
    let other = relation(2, 1, 2, 2, 4);
    let verdict = verify_certificate(&cert, &other);
    assert!(!verdict.instance_match);
    assert!(!verdict.accepted());
}

#[test]
fn doctored_text_is_rejected_or_fails_verification() {
    let even = relation(2, 1, 1, 2, 4);
    let cert = run_cyclic(&even, &even.koszul_triple(), 1).expect("cyclic run succeeds");
    let text = cert.to_string();

    // a coefficient edit that keeps the schema intact must fail verification
    let edited = text.replace("coeff.0002 = 6", "coeff.0002 = 7");
    assert_ne!(edited, text);
    let parsed: Certificate = edited.parse().expect("schema still well-formed");
    assert!(!verify_certificate(&parsed, &even).accepted());

    // a schema edit must not parse at all
    let truncated = text.replace("coeff.0003 = -4\n", "");
    assert!(truncated.parse::<Certificate>().is_err());
}

#[test]
fn instance_text_round_trips() {
    let even = relation(2, 1, 1, 2, 4);
    let text = even.to_string();
    let reparsed: RelationInstance = text.parse().expect("own output parses");
    assert_eq!(reparsed, even);
    assert_eq!(reparsed.to_string(), text);

    // separators in c and d are optional on input; output stays canonical
    let spaced = "p = 3\nN = 1\nK = 0\nc = 2 x + y\nd = 3 y\n";
    let parsed: RelationInstance = spaced.parse().expect("juxtaposed factors parse");
    assert_eq!(parsed.to_string(), "p = 3\nN = 1\nK = 0\nc = 2*x + y\nd = 3*y\n");
}
