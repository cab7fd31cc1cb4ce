//! Batch front end for the identity sweeps, certificate runs, and
//! certificate verification.
//!
//! Every command writes one plain-text `key = value` report with a fixed
//! line order into the output directory and echoes it on stdout. Wall-clock
//! timing goes to stderr only, so report files are byte-identical across
//! reruns with the same configuration and seed. Exit code 0 means every
//! check passed, 1 means some check failed, 2 means the invocation or its
//! files were unusable.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use epc_core::engine::{
    run_cyclic, run_general, run_simplified, verify_certificate, Certificate, RelationInstance,
    RunFailure, StepPolicy, VerificationReport,
};
use epc_core::padic::{binomial_tau_identity, TauIdentity, Valuation};
use epc_core::sweeps::{
    binomial_identities, completion_batch, exponent_identities, lift_batch, root_shift_batch,
    shift_batch, tau_budget, valuation_agreement, Driver, SweepReport,
};
use epc_core::PrimeBase;

#[derive(Parser)]
#[command(name = "epc", version, about = "Closure-certificate engine harness")]
struct Cli {
    /// Directory for report and certificate files
    /// (default ".", or the EPC_OUTPUT_DIR environment variable)
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every identity grid and seeded transform batch
    VerifyLemmas(LemmaArgs),
    /// Build a certificate for one instance file and verify it
    RunInstance(RunArgs),
    /// Re-verify an existing certificate against an instance
    VerifyCertificate(VerifyArgs),
    /// Run one named sweep
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepConfig {
    /// Top index bound for the valuation grid
    #[arg(long, default_value_t = 1000)]
    n_max: u64,
    /// Step index bound for the exponent grid
    #[arg(long, default_value_t = 64)]
    i_max: u64,
    /// Primes for the valuation grid (comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = [2u64, 3, 5])]
    primes: Vec<u64>,
    /// Seed for the randomized batches
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Cases per randomized batch
    #[arg(long, default_value_t = 200)]
    cases: u64,
    /// Run cases on one thread
    #[arg(long)]
    sequential: bool,
}

impl SweepConfig {
    fn driver(&self) -> Driver {
        if self.sequential {
            Driver::Sequential
        } else {
            Driver::default()
        }
    }

    fn driver_name(&self) -> &'static str {
        match self.driver() {
            Driver::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Driver::Parallel => "parallel",
        }
    }

    fn prime_bases(&self) -> Result<Vec<PrimeBase>, String> {
        self.primes
            .iter()
            .map(|&p| PrimeBase::new(p).map_err(|e| e.to_string()))
            .collect()
    }

    fn echo(&self, out: &mut String) {
        let primes: Vec<String> = self.primes.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "config.n_max = {}", self.n_max);
        let _ = writeln!(out, "config.i_max = {}", self.i_max);
        let _ = writeln!(out, "config.primes = {}", primes.join(","));
        let _ = writeln!(out, "config.seed = {}", self.seed);
        let _ = writeln!(out, "config.cases = {}", self.cases);
        let _ = writeln!(out, "config.driver = {}", self.driver_name());
    }
}

#[derive(Args)]
struct LemmaArgs {
    #[command(flatten)]
    sweep: SweepConfig,
    /// Deliberately shift one identity comparison to prove the harness
    /// notices (test hook)
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<LemmaFault>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LemmaFault {
    TauOffByOne,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    General,
    Cyclic,
    Simplified,
}

impl ModeArg {
    fn name(self) -> &'static str {
        match self {
            ModeArg::General => "general",
            ModeArg::Cyclic => "cyclic",
            ModeArg::Simplified => "simplified",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Instance file (lines p, N, K, c, d as `key = value`)
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::General)]
    mode: ModeArg,
    /// Base exponent for the fixed-ladder mode (default: the instance's K)
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, default_value_t = 64)]
    max_steps: u64,
    #[arg(long, default_value_t = 24)]
    max_l: u32,
    /// Per-step D search cap (default 2N)
    #[arg(long)]
    d_cap: Option<u32>,
    /// Colon exponent search cap (default 2N)
    #[arg(long)]
    colon_cap: Option<u32>,
    #[arg(long, default_value_t = 0)]
    extra_degree: u32,
    /// Certificate output path (default: <instance stem>.cert in the
    /// output directory)
    #[arg(long)]
    certificate_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Certificate file to re-check
    #[arg(long)]
    certificate: PathBuf,
    /// Instance file the certificate must match
    #[arg(long)]
    instance: PathBuf,
    /// Scale the first coefficient down before verifying, to prove the
    /// verifier notices (test hook)
    #[arg(long, hide = true)]
    inject_fault: Option<CertFault>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CertFault {
    CoefficientScale,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepName {
    ValuationAgreement,
    BinomialIdentities,
    TauBudget,
    ExponentIdentities,
    RootShiftBatch,
    CompletionBatch,
    LiftBatch,
    ShiftBatch,
}

#[derive(Args)]
struct SweepArgs {
    /// Which sweep to run
    #[arg(long, value_enum)]
    which: SweepName,
    #[command(flatten)]
    sweep: SweepConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli
        .output_dir
        .or_else(|| std::env::var_os("EPC_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let start = Instant::now();
    let code = match cli.command {
        Command::VerifyLemmas(args) => cmd_verify_lemmas(&out_dir, &args),
        Command::RunInstance(args) => cmd_run_instance(&out_dir, &args),
        Command::VerifyCertificate(args) => cmd_verify_certificate(&out_dir, &args),
        Command::Sweep(args) => cmd_sweep(&out_dir, &args),
    };
    eprintln!("elapsed: {:.3?}", start.elapsed());
    code
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn emit_report(out_dir: &Path, file: &str, text: &str) -> Result<(), String> {
    fs::create_dir_all(out_dir).map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let path = out_dir.join(file);
    fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    print!("{text}");
    Ok(())
}

fn result_code(all_passed: bool) -> ExitCode {
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Rerun one Pascal-entry identity with its digit-computed side shifted by
/// one. The comparison must now fail; its message lands in the report.
fn injected_tau_failure() -> String {
    let p = PrimeBase::new(2).expect("2 is prime");
    let r = binomial_tau_identity(TauIdentity::PascalEntry, 6, 2, 1, p).expect("in range");
    let shifted = match r.lhs {
        Valuation::Finite(v) => v + 1,
        Valuation::Infinity => unreachable!("binomial valuations are finite"),
    };
    if r.rhs_is_integer && r.rhs.to_integer() == shifted {
        "injected shift went unnoticed".into()
    } else {
        format!(
            "injected: i = 6, j = 2: digitwise valuation shifted to {shifted} \
             no longer matches tau combination {}",
            r.rhs
        )
    }
}

fn cmd_verify_lemmas(out_dir: &Path, args: &LemmaArgs) -> ExitCode {
    let primes = match args.sweep.prime_bases() {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let cfg = &args.sweep;
    let driver = cfg.driver();
    let mut reports = vec![
        valuation_agreement(cfg.n_max, &primes, driver),
        binomial_identities(driver),
        tau_budget(driver),
        exponent_identities(cfg.i_max, driver),
        root_shift_batch(cfg.seed, cfg.cases, driver),
        completion_batch(cfg.seed, cfg.cases, driver),
        lift_batch(cfg.seed, cfg.cases, driver),
        shift_batch(cfg.seed, cfg.cases, driver),
    ];
    if args.inject_fault == Some(LemmaFault::TauOffByOne) {
        let target = reports
            .iter_mut()
            .find(|r| r.name == "binomial-identities")
            .expect("sweep list contains the binomial grid");
        target.failures.push(injected_tau_failure());
    }

    let mut text = String::new();
    let _ = writeln!(text, "command = verify-lemmas");
    cfg.echo(&mut text);
    let _ = writeln!(
        text,
        "config.inject_fault = {}",
        if args.inject_fault.is_some() { "tau-off-by-one" } else { "none" }
    );
    for r in &reports {
        let _ = writeln!(text, "check.{} = {}", r.name, if r.passed() { "pass" } else { "fail" });
    }
    for r in &reports {
        let _ = writeln!(text, "cases.{} = {}", r.name, r.cases);
    }
    let mut idx = 0usize;
    for r in &reports {
        for f in &r.failures {
            idx += 1;
            let _ = writeln!(text, "counterexample.{idx:04} = {}: {f}", r.name);
        }
    }
    let all_passed = reports.iter().all(SweepReport::passed);
    let _ = writeln!(text, "result = {}", if all_passed { "pass" } else { "fail" });

    if let Err(e) = emit_report(out_dir, "verify-lemmas.report", &text) {
        return usage_error(&e);
    }
    result_code(all_passed)
}

fn read_instance(path: &Path) -> Result<RelationInstance, String> {
    let raw = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    raw.parse::<RelationInstance>()
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn echo_instance(out: &mut String, instance: &RelationInstance) {
    for line in instance.to_string().lines() {
        let _ = writeln!(out, "instance.{line}");
    }
}

fn verification_lines(out: &mut String, v: &VerificationReport) {
    let all = |checks: &[(u64, bool)]| checks.iter().all(|&(_, ok)| ok);
    let flag = |ok: bool| if ok { "pass" } else { "fail" };
    let _ = writeln!(out, "check.instance = {}", flag(v.instance_match));
    let _ = writeln!(out, "check.shape = {}", flag(v.shape_ok));
    let _ = writeln!(out, "check.floors = {}", flag(all(&v.floor_checks)));
    let _ = writeln!(out, "check.claims = {}", flag(all(&v.claim_checks)));
    let _ = writeln!(out, "check.memberships = {}", flag(all(&v.membership_checks)));
    let _ = writeln!(out, "check.ledger = {}", flag(v.ledger_ok));
    for (k, f) in v.failures.iter().enumerate() {
        let _ = writeln!(out, "failure.{:04} = {f}", k + 1);
    }
    let _ = writeln!(out, "result = {}", flag(v.accepted()));
}

fn certificate_summary(out: &mut String, cert: &Certificate) {
    let _ = writeln!(out, "certificate.mode = {}", cert.mode);
    let _ = writeln!(out, "certificate.k = {}", cert.k);
    let _ = writeln!(out, "certificate.l_final = {}", cert.l_final);
    let _ = writeln!(out, "certificate.i_final = {}", cert.i_final);
    let _ = writeln!(out, "certificate.termination = {}", cert.termination);
}

fn general_failure_lines(out: &mut String, failure: &RunFailure) {
    let _ = writeln!(out, "run.error = {}", failure.error);
    let r = &failure.report;
    let _ = writeln!(out, "run.i_reached = {}", r.i_reached);
    match r.aborted_at {
        Some(i) => {
            let _ = writeln!(out, "run.aborted_at = {i}");
        }
        None => {
            let _ = writeln!(out, "run.aborted_at = none");
        }
    }
    for (k, (i, d)) in r.d_profile.iter().enumerate() {
        let _ = writeln!(out, "profile.{:04} = {i},{d}", k + 1);
    }
}

fn cmd_run_instance(out_dir: &Path, args: &RunArgs) -> ExitCode {
    let instance = match read_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return usage_error(&e),
    };
    let policy = StepPolicy {
        max_steps: args.max_steps,
        max_l: args.max_l,
        d_cap: args.d_cap,
        colon_cap: args.colon_cap,
        extra_degree: args.extra_degree,
    };
    let k = args.k.unwrap_or(instance.k);

    let mut text = String::new();
    let _ = writeln!(text, "command = run-instance");
    let _ = writeln!(text, "config.instance = {}", args.instance.display());
    let _ = writeln!(text, "config.mode = {}", args.mode.name());
    let _ = writeln!(text, "config.k = {k}");
    let _ = writeln!(text, "config.max_steps = {}", policy.max_steps);
    let _ = writeln!(text, "config.max_l = {}", policy.max_l);
    let _ = writeln!(text, "config.d_cap = {}", opt(policy.d_cap));
    let _ = writeln!(text, "config.colon_cap = {}", opt(policy.colon_cap));
    let _ = writeln!(text, "config.extra_degree = {}", policy.extra_degree);
    echo_instance(&mut text, &instance);

    let outcome: Result<Certificate, String> = match args.mode {
        ModeArg::General => run_general(&instance, &policy).map_err(|failure| {
            let mut s = String::new();
            general_failure_lines(&mut s, &failure);
            s
        }),
        ModeArg::Cyclic => {
            let triple = instance.koszul_triple();
            run_cyclic(&instance, &triple, k)
                .map_err(|e| format!("run.error = {e}\n"))
        }
        ModeArg::Simplified => {
            run_simplified(&instance).map_err(|e| format!("run.error = {e}\n"))
        }
    };

    match outcome {
        Ok(cert) => {
            let _ = writeln!(text, "run.outcome = certificate");
            certificate_summary(&mut text, &cert);
            let cert_path = args.certificate_out.clone().unwrap_or_else(|| {
                let stem = args
                    .instance
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "instance".into());
                out_dir.join(format!("{stem}.cert"))
            });
            if let Some(parent) = cert_path.parent() {
                if !parent.as_os_str().is_empty() {
                    if let Err(e) = fs::create_dir_all(parent) {
                        return usage_error(&format!("cannot create {}: {e}", parent.display()));
                    }
                }
            }
            if let Err(e) = fs::write(&cert_path, cert.to_string()) {
                return usage_error(&format!("cannot write {}: {e}", cert_path.display()));
            }
            let _ = writeln!(text, "certificate.file = {}", cert_path.display());
            let verdict = verify_certificate(&cert, &instance);
            verification_lines(&mut text, &verdict);
            if let Err(e) = emit_report(out_dir, "run-instance.report", &text) {
                return usage_error(&e);
            }
            result_code(verdict.accepted())
        }
        Err(lines) => {
            let _ = writeln!(text, "run.outcome = failed");
            text.push_str(&lines);
            let _ = writeln!(text, "result = fail");
            if let Err(e) = emit_report(out_dir, "run-instance.report", &text) {
                return usage_error(&e);
            }
            ExitCode::FAILURE
        }
    }
}

fn opt(v: Option<u32>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "none".into(),
    }
}

fn cmd_verify_certificate(out_dir: &Path, args: &VerifyArgs) -> ExitCode {
    let instance = match read_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return usage_error(&e),
    };
    let raw = match fs::read_to_string(&args.certificate) {
        Ok(r) => r,
        Err(e) => return usage_error(&format!("cannot read {}: {e}", args.certificate.display())),
    };
    let mut cert: Certificate = match raw.parse() {
        Ok(c) => c,
        Err(e) => return usage_error(&format!("{}: {e}", args.certificate.display())),
    };

    let mut text = String::new();
    let _ = writeln!(text, "command = verify-certificate");
    let _ = writeln!(text, "config.certificate = {}", args.certificate.display());
    let _ = writeln!(text, "config.instance = {}", args.instance.display());
    let injected = matches!(args.inject_fault, Some(CertFault::CoefficientScale));
    let _ = writeln!(
        text,
        "config.inject_fault = {}",
        if injected { "coefficient-scale" } else { "none" }
    );
    if injected {
        // push a_1 strictly below its recorded valuation floor; the floor
        // recomputation must object whatever the original margin was
        let m = &cert.margins[0];
        let v = match m.valuation {
            Valuation::Finite(v) => v,
            Valuation::Infinity => 0,
        };
        let slack = (num_rational::Rational64::from_integer(v) - m.floor)
            .floor()
            .to_integer()
            + 1;
        let p_pow = (cert.instance.p.get() as i64).pow(slack.max(1) as u32);
        let inverse = num_rational::BigRational::new(1.into(), p_pow.into());
        cert.coefficients[0] = cert.coefficients[0].scale(&inverse);
    }
    echo_instance(&mut text, &instance);
    certificate_summary(&mut text, &cert);
    let verdict = verify_certificate(&cert, &instance);
    verification_lines(&mut text, &verdict);
    if let Err(e) = emit_report(out_dir, "verify-certificate.report", &text) {
        return usage_error(&e);
    }
    result_code(verdict.accepted())
}

fn cmd_sweep(out_dir: &Path, args: &SweepArgs) -> ExitCode {
    let cfg = &args.sweep;
    let primes = match cfg.prime_bases() {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let driver = cfg.driver();
    let report = match args.which {
        SweepName::ValuationAgreement => valuation_agreement(cfg.n_max, &primes, driver),
        SweepName::BinomialIdentities => binomial_identities(driver),
        SweepName::TauBudget => tau_budget(driver),
        SweepName::ExponentIdentities => exponent_identities(cfg.i_max, driver),
        SweepName::RootShiftBatch => root_shift_batch(cfg.seed, cfg.cases, driver),
        SweepName::CompletionBatch => completion_batch(cfg.seed, cfg.cases, driver),
        SweepName::LiftBatch => lift_batch(cfg.seed, cfg.cases, driver),
        SweepName::ShiftBatch => shift_batch(cfg.seed, cfg.cases, driver),
    };

    let mut text = String::new();
    let _ = writeln!(text, "command = sweep");
    cfg.echo(&mut text);
    text.push_str(&report.to_string());
    let _ = writeln!(text, "result = {}", if report.passed() { "pass" } else { "fail" });
    let file = format!("sweep-{}.report", report.name);
    if let Err(e) = emit_report(out_dir, &file, &text) {
        return usage_error(&e);
    }
    result_code(report.passed())
}
