//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any criterion fails.

use alhier::hydro::{self, CompareOptions, ModuliPoint, SlowProfile};
use alhier::lattice::{self, Boundary, Flow, LatticeState};
use alhier::report::{CheckResult, SuiteReport};
use alhier::suite::{self, Scope, VerifyReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::time::{Duration, Instant};

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(report: &VerifyReport, name: &str) -> CheckResult {
    report
        .suites
        .iter()
        .find_map(|s| s.get(name).cloned())
        .unwrap_or_else(|| CheckResult::errored(name, 0, f64::NAN, "check missing from report"))
}

fn record<'a>(report: &'a VerifyReport, suite: &str, key: &str) -> Option<&'a str> {
    report.suites.iter().find(|s: &&SuiteReport| s.suite == suite)?.records.get(key).map(String::as_str)
}

/// All named checks must pass with at least `min_points` points each.
fn checks(report: &VerifyReport, names: &[&str], min_points: usize) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in names {
        let c = check(report, n);
        let ok = c.pass && c.points_tested >= min_points;
        pass &= ok;
        let rel = match c.relation {
            alhier::report::Relation::Below => "<",
            alhier::report::Relation::Above => ">",
        };
        parts.push(format!("{n} {:.3e} {rel} {:.0e} ({} pts){}", c.max_residual, c.tolerance, c.points_tested, if ok { "" } else { " FAILED" }));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn both(a: Outcome, b: Outcome) -> Outcome {
    Outcome { pass: a.pass && b.pass, detail: format!("{}; {}", a.detail, b.detail) }
}

fn criterion_factorization_timed() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (res, el) = timed(|| {
        let mut m: f64 = 0.0;
        for _ in 0..20 {
            let len = rng.gen_range(16..=40);
            let s = LatticeState::random(&mut rng, len, 0.6, Boundary::Window { buffer: 4 });
            let (r1, r2) = lattice::factorization_residuals(&s, 4).expect("factorization");
            m = m.max(r1).max(r2);
        }
        m
    });
    Outcome { pass: res < 1e-12 && el < Duration::from_secs(1), detail: format!("direct run {res:.3e} < 1e-12 in {el:.2?} (< 1 s)") }
}

fn criterion_conservation_timed() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let s = LatticeState::random(&mut rng, 64, 0.5, Boundary::Periodic);
    let monitor: Vec<(u8, usize)> = (1..=2u8).flat_map(|k| (1..=4).map(move |i| (k, i))).collect();
    let (traj, el) = timed(|| lattice::integrate(&s, Flow::Al, 1.0, 1e-3, &monitor));
    match traj {
        Ok(t) => {
            let d = t.relative_drift().into_iter().fold(0.0, f64::max);
            Outcome {
                pass: d < 1e-8 && el < Duration::from_secs(10) && t.times.len() == 1001,
                detail: format!("Periodic(64), every step of 1000: max drift {d:.3e} < 1e-8 in {el:.2?} (< 10 s)"),
            }
        }
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn criterion_density_points() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut m: f64 = 0.0;
    for _ in 0..50 {
        let p = ModuliPoint::real_vw(rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..-0.05));
        for fam in 1..=2u8 {
            for n in 1..=8 {
                let a = hydro::density_residue(fam, n, &p).expect("residue");
                let b = hydro::density_closed(fam, n, &p).expect("closed");
                m = m.max((a - b).norm());
            }
        }
    }
    Outcome { pass: m < 1e-12, detail: format!("direct run {m:.3e} < 1e-12") }
}

fn criterion_continuum_timed() -> Outcome {
    let (r, el) = timed(|| hydro::continuum_sweep(&SlowProfile::default(), &[0.1, 0.05], &CompareOptions::default()));
    match r {
        Ok(r) => {
            let ratio = r[1].sup_error / r[0].sup_error;
            Outcome {
                pass: ratio <= 0.6 && el < Duration::from_secs(60),
                detail: format!("error {:.3e} -> {:.3e}, ratio {ratio:.3} <= 0.6 in {el:.2?} (< 60 s)", r[0].sup_error, r[1].sup_error),
            }
        }
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn criterion_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_alhier");
    let dir = tempfile::tempdir().expect("tempdir");
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(bin).args(["verify", "all", "--seed", "7", "--out"]).arg(&out).output().expect("spawn");
        let code = status.status.code();
        if code != Some(0) && code != Some(1) {
            return Outcome { pass: false, detail: format!("run {run} exited with {code:?}") };
        }
        files.push(std::fs::read(out.join("verify_all.json")).expect("report"));
    }
    Outcome { pass: !files[0].is_empty() && files[0] == files[1], detail: format!("two reports of {} bytes, identical: {}", files[0].len(), files[0] == files[1]) }
}

fn main() {
    let report = suite::verify(Scope::All, SEED, 100);
    let elliptic = {
        let conv = record(&report, "mirror", "elliptic_convention").unwrap_or("none");
        let c = check(&report, "mirror.elliptic_listed_forms");
        let ok = conv != "none" && c.pass && c.max_residual < 1e-10;
        Outcome { pass: ok, detail: format!("elliptic convention {conv:?}, listed forms gap {:.3e} < 1e-10", c.max_residual) }
    };

    let results: Vec<(&str, Outcome)> = vec![
        ("AL equivalence", checks(&report, &["lattice.al_half_sum_of_first_flows", "lattice.al_closed_form"], 100)),
        ("factorization", both(checks(&report, &["lattice.factorization"], 20), criterion_factorization_timed())),
        ("matrix vs Hamiltonian flows", checks(&report, &["lattice.matrix_vs_hamiltonian_flows"], 6)),
        ("conservation", criterion_conservation_timed()),
        ("semi-infinite constraint", checks(&report, &["lattice.semi_infinite_constraint", "lattice.bi_infinite_negative_control"], 1)),
        ("density routes", both(checks(&report, &["hydro.density_routes"], 50), criterion_density_points())),
        (
            "Frobenius core",
            checks(&report, &["frobenius.eta_antidiagonal", "frobenius.c_residue_vs_f0", "frobenius.wdvv", "frobenius.e_euler_bracket", "frobenius.quasi_homogeneity"], 100),
        ),
        ("intersection form", checks(&report, &["frobenius.intersection_routes", "frobenius.intersection_symbolic"], 1)),
        ("pencil flatness", checks(&report, &["frobenius.pencil_flatness", "frobenius.pencil_not_exact"], 1)),
        ("recursions", checks(&report, &["frobenius.recursion_first_family", "frobenius.recursion_second_family", "frobenius.levelt_second_family"], 1)),
        ("Psi2 identity", checks(&report, &["frobenius.psi2_printed_form", "frobenius.theta_recursion"], 1)),
        ("duality", checks(&report, &["mirror.dual_c_routes", "mirror.dual_c_vs_listed_prepotential", "mirror.dual_wdvv", "mirror.dual_unit"], 1)),
        ("periods", both(both(checks(&report, &["mirror.period_routes"], 15), elliptic), checks(&report, &["mirror.topological_listed_map"], 1))),
        ("continuum limit", both(checks(&report, &["hydro.continuum_error_ratio"], 2), criterion_continuum_timed())),
        ("determinism", criterion_determinism()),
    ];

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
