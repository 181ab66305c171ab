use gl2newform::characters::{characters_up_to, epsilon, gauss_sum, gauss_sum_closed_form};
use gl2newform::engine::{in_k1, mat_mul, p_power, reduce_matrix};
use gl2newform::numerics::series_expand;
use gl2newform::padic::{psi_rational, unit_group};
use gl2newform::{
    family, Context, ExtendedCharacter, FamilySpec, LaurentPoly, Newform, PAdicApprox, RationalFn, Representation,
    RootOfUnity, Scalar, Side, SupercuspidalOracle, TildeCharacter,
};
use proptest::prelude::*;
use rug::Rational;

const PRIMES: [u64; 4] = [2, 3, 5, 7];

fn character(p: u64, a: u32, seed: usize) -> TildeCharacter {
    let all = characters_up_to(p, a);
    all[seed % all.len()].clone()
}

fn unit(p: u64, level: u32, seed: usize) -> u64 {
    let g = unit_group(p, level.max(1));
    g.elements()[seed % g.elements().len()]
}

fn rational(num: i64, den: u64, p: u64, e: i64) -> Rational {
    let mut d = den.max(1);
    while d.is_multiple_of(p) {
        d += 1;
    }
    Rational::from((num, d)) * p_power(p, e)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn roots_of_unity_form_a_group(a in -50i128..50, b in -50i128..50, n in 1u64..40, e in -6i64..6) {
        let x = RootOfUnity::new(a, n);
        let y = RootOfUnity::new(b, n + 3);
        prop_assert_eq!(x * x.inv(), RootOfUnity::ONE);
        prop_assert_eq!(x.pow(e) * x.pow(2), x.pow(e + 2));
        prop_assert_eq!(x * y, y * x);
    }

    #[test]
    fn characters_are_multiplicative(pi in 0usize..4, a in 0u32..4, s in 0usize..1000, u1 in 0usize..1000, u2 in 0usize..1000) {
        let p = PRIMES[pi];
        let chi = character(p, a, s);
        let (x, y) = (unit(p, a, u1) as i128, unit(p, a, u2) as i128);
        prop_assert_eq!(chi.eval_residue(x * y), chi.eval_residue(x) * chi.eval_residue(y));
        prop_assert_eq!(chi.mul(&chi.inv()), TildeCharacter::trivial(p));
        prop_assert_eq!(chi.to_string().parse::<TildeCharacter>().unwrap(), chi.clone());
    }

    #[test]
    fn gauss_sum_matches_closed_form(pi in 0usize..4, a in 0u32..3, s in 0usize..1000, vx in -4i64..3, u in 0usize..1000) {
        let ctx = Context::new(128);
        let p = PRIMES[pi];
        let mu = character(p, a, s);
        let level = ((-vx).max(0) as u32).max(mu.conductor());
        let x = PAdicApprox::new(p, vx, unit(p, level, u) as i128, level).unwrap();
        let direct = gauss_sum(&ctx, &x, &mu).unwrap();
        let closed = gauss_sum_closed_form(&ctx, &x, &mu).unwrap();
        prop_assert!(direct.dist(&closed) < 1e-20);
    }

    #[test]
    fn root_numbers_pair_with_inverse(pi in 0usize..4, a in 0u32..4, s in 0usize..1000) {
        let ctx = Context::new(128);
        let mu = character(PRIMES[pi], a, s);
        let e = epsilon(&ctx, &mu);
        prop_assert!((e.abs() - 1.0).abs() < 1e-20);
        let prod = &e * &epsilon(&ctx, &mu.inv());
        prop_assert!(prod.dist(&mu.sign().embed(128)) < 1e-20);
    }

    #[test]
    fn additive_character_is_additive(pi in 0usize..4, n1 in -300i64..300, d1 in 1u64..50, e1 in -3i64..3, n2 in -300i64..300, d2 in 1u64..50, e2 in -3i64..3) {
        let p = PRIMES[pi];
        let x = rational(n1, d1, p, e1);
        let y = rational(n2, d2, p, e2);
        let sum = Rational::from(&x + &y);
        prop_assert_eq!(psi_rational(&sum, p), psi_rational(&x, p) * psi_rational(&y, p));
    }

    #[test]
    fn exact_division_undoes_multiplication(a in proptest::collection::vec(-9i64..9, 1..6), b in proptest::collection::vec(-9i64..9, 1..4), shift in -3i64..3) {
        prop_assume!(b.iter().any(|&c| c != 0));
        let prec = 128;
        let pa = LaurentPoly::from_coeffs(shift, &a.iter().map(|&c| Scalar::from_int(c, prec)).collect::<Vec<_>>(), prec);
        let pb = LaurentPoly::from_coeffs(0, &b.iter().map(|&c| Scalar::from_int(c, prec)).collect::<Vec<_>>(), prec);
        let prod = &pa * &pb;
        let back = prod.div_exact(&pb, 1e-25).unwrap();
        prop_assert!(back.dist(&pa) < 1e-25);
    }

    #[test]
    fn geometric_series_expansion(num in -20i64..20, den in 2i64..20, t_max in 1i64..15) {
        let prec = 128;
        let r = Scalar::from_ratio(num, den, prec);
        let f = RationalFn::new(LaurentPoly::one(prec), LaurentPoly::euler_product(std::slice::from_ref(&r), 1, prec)).unwrap();
        let s = series_expand(&f, t_max).unwrap();
        for t in 0..=t_max {
            prop_assert!(s.coeff(t).dist(&r.pow(t)) < 1e-25);
        }
    }

    #[test]
    fn matrices_reduce_into_k1_cosets(pi in 0usize..3, n in 1u32..5, t in -8i64..4, k in 0u32..5, v in 0usize..1000, x in -40i64..40, u in 0usize..1000, kap in proptest::collection::vec(-20i64..20, 3)) {
        let p = PRIMES[pi];
        let k = k.min(n);
        let v = unit(p, n, v) as i64;
        let g_rep = [
            [Rational::new(), p_power(p, t)],
            [Rational::from(-1), Rational::from(-v) * p_power(p, -(k as i64))],
        ];
        let pn = p_power(p, n as i64);
        let kappa = [
            [Rational::from(1) + Rational::from(&pn * kap[0]), Rational::from(kap[1])],
            [Rational::from(&pn * kap[2]), Rational::from(unit(p, 2, u) as i64)],
        ];
        prop_assume!(in_k1(&kappa, p, n));
        let uu = Rational::from(unit(p, n, u) as i64);
        let left = [[uu.clone(), Rational::from(&uu * x)], [Rational::new(), uu.clone()]];
        let g = mat_mul(&mat_mul(&left, &g_rep), &kappa);
        let red = reduce_matrix(p, n, &g).unwrap();
        prop_assert_eq!(red.rep.t, t);
        prop_assert_eq!(red.rep.k, k);
        let j = k.min(n - k);
        prop_assert_eq!(red.rep.v_mod(p, j), (v as u64) % gl2newform::padic::pow_u64(p, j));
    }
}

fn small_family() -> Vec<Representation> {
    let mut out = vec![];
    for p in [2u64, 3, 5] {
        let mut spec = FamilySpec::all(p, 4);
        spec.a2_max = Some(1);
        out.extend(family(&spec).unwrap());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn atkin_lehner_moduli_agree(idx in 0usize..10_000, k in 0u32..9, dt in 0i64..10, v in 0usize..10_000) {
        let fam = small_family();
        let pi = fam[idx % fam.len()].clone();
        let ctx = Context::new(128);
        let nf = Newform::new(&ctx, pi.clone(), 24).unwrap();
        let (p, n) = (pi.p(), pi.n());
        let k = k % (n + 1);
        let t = -(k as i64) - n as i64 + dt;
        let v = unit(p, n, v) as i128;
        let g = nf.representative(t, k, v).unwrap();
        let star = nf.value_direct(Side::Contragredient, &g).unwrap();
        let target = nf.representative(t + 2 * k as i64 - n as i64, n - k, -v).unwrap();
        let w = nf.value_direct(Side::Pi, &target).unwrap();
        prop_assert!((star.abs() - w.abs()).abs() < 1e-12, "{pi} {g}: {} vs {}", star.abs(), w.abs());
    }

    #[test]
    fn sup_norm_is_sandwiched(idx in 0usize..10_000) {
        let fam = small_family();
        let pi = fam[idx % fam.len()].clone();
        let ctx = Context::new(128);
        let s = gl2newform::verify::certified_sup_norm(&ctx, &pi, gl2newform::default_t_max(pi.n())).unwrap();
        let (lo, up) = gl2newform::engine::reference_bounds(pi.q(), pi.n(), pi.m());
        prop_assert!(s.certified);
        prop_assert!(s.h >= 1.0 - 1e-12);
        prop_assert!(2.0 / 3.0 * lo <= s.h && s.h <= std::f64::consts::SQRT_2 * up, "{pi}: h = {}", s.h);
    }

    #[test]
    fn norms_lie_between_one_and_two(idx in 0usize..10_000) {
        let fam = small_family();
        let pi = fam[idx % fam.len()].clone();
        let ctx = Context::new(128);
        let nf = Newform::new(&ctx, pi.clone(), 40).unwrap();
        for k in 0..=pi.n() / 2 {
            let (s, tail) = nf.lambda_square_sum(k).unwrap();
            prop_assert!(s >= 1.0 - tail - 1e-6 && s <= 2.0 + 1e-6, "{pi} k={k}: {s}");
            prop_assert!((s - pi.whittaker_norm()).abs() <= tail + 1e-6);
        }
    }

    #[test]
    fn oracle_json_round_trips(seed in 0u64..1000, n in 2u32..5) {
        let ctx = Context::new(128);
        let oracle = SupercuspidalOracle::synthetic(&ctx, 3, n, TildeCharacter::trivial(3), seed).unwrap();
        let back = SupercuspidalOracle::from_json(&oracle.to_json(), 128).unwrap();
        prop_assert!(back.is_synthetic());
        for (mu, e) in oracle.entries() {
            let f = back.entry(mu).unwrap();
            prop_assert_eq!(e.a_mu_pi, f.a_mu_pi);
            prop_assert!(e.eps.dist(&f.eps) < 1e-30);
        }
    }
}

#[test]
fn principal_series_requires_unitary_central_value() {
    let chi1: ExtendedCharacter = "3^1:1@1/4".parse().unwrap();
    let chi2: ExtendedCharacter = "3^0:0@0/1".parse().unwrap();
    assert!(Representation::principal_series(chi1, chi2).is_err());
}
