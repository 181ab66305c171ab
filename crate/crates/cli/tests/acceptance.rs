//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are mathematically unattainable as stated; they are
//! still evaluated literally and must keep failing, so a change in behaviour is noticed.

use std::process::Command;
use std::time::{Duration, Instant};

use gl2newform::characters::{characters_of_conductor, epsilon};
use gl2newform::padic::{pow_u64, unit_group};
use gl2newform::verify::{
    certified_sup_norm, check_gl1, check_main_theorem, check_representation, check_supercuspidal, check_twist_lemmas,
    epsilon_sum_modulus, CheckReport, Tolerances,
};
use gl2newform::{family, Context, FamilySpec, Newform, Representation, RootOfUnity, Scalar, TildeCharacter};

/// Criterion 4 asks for the modulus `zeta(1)^-1 q^((r-r')/2)`; Parseval forces `zeta(1)^-1 q^(r-r'/2)`.
const KNOWN_RED: &[u32] = &[4];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn find<'a>(reports: &'a [CheckReport], id: &str) -> &'a CheckReport {
    reports.iter().find(|r| r.id == id).unwrap_or_else(|| panic!("missing report {id}"))
}

fn summary(r: &CheckReport) -> String {
    format!("{} cases={} max_dev={:.2e} (tol {:.0e})", r.id, r.cases, r.max_deviation, r.tolerance)
}

fn all_pass(reports: &[&CheckReport]) -> bool {
    reports.iter().all(|r| r.pass && r.cases > 0)
}

/// The scan family: p in {2, 3, 5}, principal series a1 <= 3, a2 <= 1, Steinberg a(xi) <= 1.
fn scan_family() -> Vec<Representation> {
    let mut out = vec![];
    for p in [2u64, 3, 5] {
        let spec = FamilySpec {
            p,
            n_max: 4,
            principal_series: true,
            steinberg: true,
            a1_max: Some(3),
            a2_max: Some(1),
            xi_max: Some(1),
        };
        out.extend(family(&spec).expect("family"));
    }
    out
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_gl2newform")
}

fn run_scan(args: &[&str]) -> (Vec<u8>, bool, Duration) {
    let t0 = Instant::now();
    let out = Command::new(binary()).args(args).output().expect("run scan");
    (out.stdout, out.status.success(), t0.elapsed())
}

/// `sum_{a(mu)=r} eps(1/2, mu^-1) eps(1/2, mu chi) mu(v)`, summed term by term.
fn epsilon_sum(ctx: &Context, p: u64, r: u32, chi: &TildeCharacter, v: u64) -> Scalar {
    let mut s = Scalar::zero(ctx.prec());
    for mu in characters_of_conductor(p, r) {
        let term = (&epsilon(ctx, &mu.inv()) * &epsilon(ctx, &mu.mul(chi))).mul_root(mu.eval_residue(v as i128));
        s += &term;
    }
    s
}

fn criterion_1_2(ctx: &Context, tol: &Tolerances) -> Vec<Outcome> {
    let t0 = Instant::now();
    let reports = check_gl1(ctx, &[2, 3, 5, 7], 3, tol);
    let elapsed = t0.elapsed();
    let gauss = find(&reports, "gl1.gauss_sum_formula");
    let eps: Vec<_> = ["gl1.epsilon_modulus", "gl1.epsilon_inverse", "gl1.epsilon_quadratic_mod3"]
        .iter()
        .map(|id| find(&reports, id))
        .collect();
    vec![
        Outcome {
            id: 1,
            pass: all_pass(&[gauss]) && elapsed < Duration::from_secs(30),
            detail: format!("{}; {:.1} s (limit 30 s)", summary(gauss), elapsed.as_secs_f64()),
        },
        Outcome { id: 2, pass: all_pass(&eps), detail: eps.iter().map(|r| summary(r)).collect::<Vec<_>>().join("; ") },
    ]
}

fn criterion_3_4(ctx: &Context, tol: &Tolerances) -> Vec<Outcome> {
    let reports = check_twist_lemmas(ctx, &[3, 5], 4, tol);
    let twisted = find(&reports, "gl1.twisted_epsilon");

    // Criterion 4 evaluated literally, against the stated modulus.
    let mut worst = (0.0f64, String::new());
    let mut cases = 0u64;
    for p in [3u64, 5] {
        for r in 2..=4u32 {
            if p == 5 && r == 4 {
                continue;
            }
            for r1 in 1..r {
                let chi = characters_of_conductor(p, r1).into_iter().next().expect("character");
                let zeta_inv = (p as f64 - 1.0) / p as f64;
                let stated = zeta_inv * (p as f64).powf((r - r1) as f64 / 2.0);
                for &v in unit_group(p, r).elements() {
                    let s = epsilon_sum(ctx, p, r, &chi, v).abs();
                    let on = {
                        let w = v as i128 + 1;
                        let pr = pow_u64(p, r - r1) as i128;
                        w % pr == 0 && (w / pr) % p as i128 != 0
                    };
                    let want = if on { stated } else { 0.0 };
                    cases += 1;
                    if (s - want).abs() > worst.0 {
                        worst =
                            ((s - want).abs(), format!("p={p} r={r} r'={r1} v={v}: |sum| = {s:.6}, stated {want:.6}"));
                    }
                }
            }
        }
    }
    let dichotomy = find(&reports, "gl1.epsilon_sum_dichotomy");
    let spot = epsilon_sum(ctx, 3, 2, &"3^1:1".parse().expect("character"), 2).abs();
    let literal_pass = worst.0 <= 1e-18 && (spot - 2.0 * 3f64.sqrt() / 3.0).abs() <= 1e-18;
    vec![
        Outcome { id: 3, pass: all_pass(&[twisted]), detail: summary(twisted) },
        Outcome {
            id: 4,
            pass: literal_pass,
            detail: format!(
                "stated modulus zeta^-1 q^((r-r')/2): {cases} cases, max dev {:.3e} at {}; p=3 r=2 r'=1 v=2 gives {spot:.6} (stated 1.154701, \
                 corrected {:.6}); corrected modulus zeta^-1 q^(r-r'/2) with the same support: {}",
                worst.0,
                worst.1,
                epsilon_sum_modulus(3, 2, 1, 128),
                summary(dichotomy)
            ),
        },
    ]
}

fn criteria_5_to_9_and_11(ctx: &Context, tol: &Tolerances) -> Vec<Outcome> {
    let fam = scan_family();
    let mut norm_dev: f64 = 0.0;
    let mut norm_at = String::new();
    let mut rep_reports = vec![];
    for pi in &fam {
        let nf = Newform::new(ctx, pi.clone(), gl2newform::default_t_max(pi.n())).expect("newform");
        let n = pi.n();
        let g = nf.representative(-2 * n as i64, n, 1).expect("representative");
        let w = nf.whittaker(&g).expect("value");
        // omega(-p^-n) psi(-p^-n); omega is trivial on p throughout the family.
        let expect = Scalar::one(ctx.prec()).mul_root(pi.omega().sign() * RootOfUnity::new(-1, pow_u64(pi.p(), n)));
        let d = w.dist(&expect);
        if d > norm_dev || norm_at.is_empty() {
            norm_dev = norm_dev.max(d);
            norm_at = pi.to_string();
        }
        rep_reports.extend(check_representation(&nf, tol));
    }
    let merged = CheckReport::merge(&rep_reports, "scan family");
    let phase = find(&merged, "rep.atkin_lehner_phase");
    let modulus = find(&merged, "rep.atkin_lehner_modulus");
    let range = find(&merged, "rep.norm_range");
    let value = find(&merged, "rep.norm_value");
    let closed = find(&merged, "rep.closed_form_trivial_l");

    let theorem = check_main_theorem(ctx, &fam, None, "scan family");
    let sandwich = find(&theorem, "theorem.sandwich");
    let coords = find(&theorem, "theorem.witness_coordinates");
    let lower = find(&theorem, "theorem.witness_lower_bound");
    let undefined = theorem.iter().find(|r| r.id == "theorem.witness_undefined");

    let mut trivial_dev: f64 = 0.0;
    let mut trivial_cases = 0;
    for pi in fam.iter().filter(|pi| pi.n() <= 1 && pi.q() >= 5) {
        let s = certified_sup_norm(ctx, pi, gl2newform::default_t_max(pi.n())).expect("sup norm");
        trivial_cases += 1;
        trivial_dev = trivial_dev.max(if s.certified { (s.h - 1.0).abs() } else { f64::INFINITY });
    }
    let (scan_out, scan_ok, scan_time) = run_scan(&["--jobs", "1", "scan", "--p", "3", "--nmax", "6"]);
    let scan_rows = scan_out.iter().filter(|&&b| b == b'\n').count().saturating_sub(1);

    vec![
        Outcome {
            id: 5,
            pass: norm_dev <= 1e-12,
            detail: format!("{} representations, max dev {norm_dev:.2e} (tol 1e-12) at {norm_at}", fam.len()),
        },
        Outcome {
            id: 6,
            pass: all_pass(&[phase, modulus]),
            detail: format!("{}; {}", summary(phase), summary(modulus)),
        },
        Outcome { id: 7, pass: all_pass(&[range, value]), detail: format!("{}; {}", summary(range), summary(value)) },
        Outcome {
            id: 8,
            pass: all_pass(&[sandwich])
                && trivial_cases > 0
                && trivial_dev <= 1e-10
                && scan_ok
                && scan_time < Duration::from_secs(300),
            detail: format!(
                "{}; h = 1 for n <= 1, q >= 5: {trivial_cases} cases, max dev {trivial_dev:.2e} (tol 1e-10); \
                 p=3 n<=6 scan: {scan_rows} rows, sandwich {}, {:.1} s single-threaded (limit 300 s)",
                summary(sandwich),
                if scan_ok { "holds" } else { "violated" },
                scan_time.as_secs_f64()
            ),
        },
        Outcome {
            id: 9,
            pass: all_pass(&[coords, lower]) && undefined.is_none(),
            detail: format!(
                "{}; {}{}",
                summary(coords),
                summary(lower),
                undefined.map(|u| format!("; {} members without an admissible witness", u.cases)).unwrap_or_default()
            ),
        },
        Outcome { id: 11, pass: all_pass(&[closed]), detail: summary(closed) },
    ]
}

fn criterion_10(ctx: &Context, tol: &Tolerances) -> Outcome {
    let mut reports = vec![];
    for p in [2u64, 3, 5] {
        for n in 2..=4u32 {
            let mut omegas = vec![TildeCharacter::trivial(p)];
            omegas.extend(characters_of_conductor(p, n / 2).into_iter().take(1));
            for omega in omegas {
                reports.extend(check_supercuspidal(ctx, p, n, &omega, 11, tol));
            }
        }
    }
    let merged = CheckReport::merge(&reports, "synthetic");
    let k0 = find(&merged, "sc.k0_column");
    let display = find(&merged, "sc.display");
    Outcome { id: 10, pass: all_pass(&[k0, display]), detail: format!("{}; {}", summary(k0), summary(display)) }
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let cache = dir.path().join("cache");
    let cache = cache.to_str().expect("utf-8 path");
    let runs = [
        run_scan(&["scan", "--p", "3", "--nmax", "4"]),
        run_scan(&["scan", "--p", "3", "--nmax", "4"]),
        run_scan(&["--jobs", "1", "scan", "--p", "3", "--nmax", "4"]),
        run_scan(&["--cache-dir", cache, "scan", "--p", "3", "--nmax", "4"]),
        run_scan(&["--cache-dir", cache, "scan", "--p", "3", "--nmax", "4"]),
    ];
    let json = [
        run_scan(&["scan", "--p", "5", "--nmax", "3", "--format", "json"]),
        run_scan(&["scan", "--p", "5", "--nmax", "3", "--format", "json"]),
    ];
    let same = runs.iter().all(|r| r.0 == runs[0].0 && r.1) && json[0].0 == json[1].0 && json[0].1;
    Outcome {
        id: 12,
        pass: same && !runs[0].0.is_empty(),
        detail: format!("{} CSV runs (threads, cache cold/warm) and 2 JSON runs byte-identical: {same}", runs.len()),
    }
}

fn main() {
    let ctx = Context::new(128);
    let tol = Tolerances::default();
    let mut outcomes = criterion_1_2(&ctx, &tol);
    outcomes.extend(criterion_3_4(&ctx, &tol));
    outcomes.extend(criteria_5_to_9_and_11(&ctx, &tol));
    outcomes.push(criterion_10(&ctx, &tol));
    outcomes.push(criterion_12());
    outcomes.sort_by_key(|o| o.id);

    let mut unexpected = vec![];
    for o in &outcomes {
        let red = KNOWN_RED.contains(&o.id);
        let tag = match (o.pass, red) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known, unattainable as stated)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2}: {tag} | {}", o.id, o.detail);
        if o.pass == red {
            unexpected.push(o.id);
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass; known red: {KNOWN_RED:?}", outcomes.len());
    if !unexpected.is_empty() {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
