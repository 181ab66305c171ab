use gl2newform::verify::{
    check_gl1, check_main_theorem, check_representation, check_supercuspidal, check_twist_lemmas,
};
use gl2newform::{family, CheckReport, Context, FamilySpec, Newform, TildeCharacter, Tolerances};

fn assert_all_pass(reports: &[CheckReport]) {
    for r in reports {
        println!(
            "{:<36} cases={:<6} dev={:.3e} tol={:.0e} pass={} {:?}",
            r.id, r.cases, r.max_deviation, r.tolerance, r.pass, r.witness
        );
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

#[test]
fn gl1_checks_small_primes() {
    let ctx = Context::new(128);
    let tol = Tolerances::default();
    let mut reports = check_gl1(&ctx, &[2, 3, 5], 2, &tol);
    reports.extend(check_twist_lemmas(&ctx, &[3, 5], 3, &tol));
    assert_all_pass(&reports);
}

#[test]
fn representation_checks_p3() {
    let ctx = Context::new(128);
    let tol = Tolerances::default();
    let mut spec = FamilySpec::all(3, 3);
    spec.a1_max = Some(3);
    let mut all = vec![];
    for pi in family(&spec).unwrap() {
        let nf = Newform::new(&ctx, pi.clone(), gl2newform::default_t_max(pi.n())).unwrap();
        let reps = check_representation(&nf, &tol);
        if reps.iter().any(|r| !r.pass) {
            println!(
                "-- {pi}: {:?}",
                reps.iter().filter(|r| !r.pass).map(|r| (&r.id, r.cases, r.max_deviation)).collect::<Vec<_>>()
            );
        }
        all.extend(reps);
    }
    assert_all_pass(&CheckReport::merge(&all, "p = 3, n <= 3"));
}

#[test]
fn theorem_checks_p3() {
    let ctx = Context::new(128);
    let fam = family(&FamilySpec::all(3, 4)).unwrap();
    assert_all_pass(&check_main_theorem(&ctx, &fam, None, "p = 3, n <= 4"));
}

#[test]
fn supercuspidal_checks() {
    let ctx = Context::new(128);
    let tol = Tolerances::default();
    let omega = TildeCharacter::trivial(3);
    assert_all_pass(&check_supercuspidal(&ctx, 3, 3, &omega, 7, &tol));
}
