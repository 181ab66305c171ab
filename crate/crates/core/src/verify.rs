//! Executable checks of the local identities behind the newform values.
//!
//! Every check returns a [`CheckReport`] whose `pass` flag is exactly
//! `cases > 0 && max_deviation <= tolerance`. Sampling uses seeded generators, so
//! reports are reproducible for fixed inputs and precision.

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::characters::{
    characters_of_conductor, characters_up_to, critical_unit, epsilon, gauss_sum, gauss_sum_closed_form,
    ExtendedCharacter, TildeCharacter,
};
use crate::context::Context;
use crate::engine::{
    dual_identity, lower_bound_witness, mat_mul, p_power, reference_bounds, solve_identity, Newform, Representative,
    Side, SupNorm,
};
use crate::error::{Error, Result};
use crate::numerics::{q_half_power, RootOfUnity, Scalar};
use crate::padic::{mod_inv, pow_u64, psi_eval, unit_group, PAdicApprox};
use crate::reps::{RepKind, Representation, SupercuspidalOracle};

/// Check identifiers with the statement each one tests.
pub const MANIFEST: &[(&str, &str)] = &[
    ("gl1.gauss_sum_formula", "G(x, mu) by exact summation equals the closed form (zero unless v(x) = -a(mu), or mu = 1 and v(x) >= -1)"),
    ("gl1.epsilon_modulus", "|eps(1/2, mu)| = 1"),
    ("gl1.epsilon_inverse", "eps(1/2, mu) eps(1/2, mu^-1) = mu(-1)"),
    ("gl1.epsilon_quadratic_mod3", "eps(1/2, mu) = i for the quadratic character of conductor 3"),
    ("gl1.critical_unit", "chi(1 + p^(r-r0) u) = psi(v0^-1 p^-r0 u) for all u, r0 = floor(a(chi)/2)"),
    ("gl1.twisted_epsilon", "eps(1/2, mu^-1 chi^-1) mu(-v0) = eps(1/2, chi^-1) whenever a(mu) <= floor(a(chi)/2)"),
    ("gl1.epsilon_sum_dichotomy", "|sum_{a(mu)=r} eps(1/2, mu^-1) eps(1/2, mu chi) mu(v)| = zeta(1)^-1 q^(r - r'/2) on -1 + p^(r-r') o^x, else 0"),
    ("gl1.epsilon_sum_parseval", "sum over v mod p^r of |sum_{a(mu)=r} eps(1/2, mu^-1) eps(1/2, mu chi) mu(v)|^2 = phi(p^r) #{mu : a(mu) = r}"),
    ("gl1.epsilon_sum_spot", "p = 3, r = 2, r' = 1: the sum has modulus 2 sqrt(3) at v = 2 and vanishes at v = 8 (mod 9)"),
    ("rep.normalization", "W(g_{-2n,n,1}) = omega(-1) psi(-p^-n)"),
    ("rep.identity_matrix", "W(1) = W*(1) = 1 through matrix reduction"),
    ("rep.support", "W(g_{t,k,v}) = 0 for t < -k-n"),
    ("rep.diagonal", "W(a(y)) and W*(a(y)) match the known diagonal values"),
    ("rep.coset_reduction", "W(z(u) n(x) g k1) = omega(u) psi(x) W(g) for k1 in K_1(p^n); W*(g k2) = W*(g) for k2 in K_2(p^n)"),
    ("rep.atkin_lehner_phase", "W_pi~(g_{t,k,v}) = eps(1/2, pi) omega(v) psi(-p^(t+k) v^-1) W_pi(g_{t+2k-n,n-k,-v})"),
    ("rep.atkin_lehner_modulus", "|W*(g_{t,k,v})| = |W(g_{t+2k-n,n-k,-v})|"),
    ("rep.dual_identity", "coefficients solved from the conjugate functional equation equal those of the contragredient"),
    ("rep.parseval", "sum_mu |c_{t,k}(mu)|^2 equals the average of |W(g_{t,k,v})|^2 over v"),
    ("rep.norm_value", "sum_t lambda_{t,k}^2 = <W, W> computed from the diagonal"),
    ("rep.norm_range", "1 <= sum_t lambda_{t,k}^2 <= 2, with equality 1 when L(s, pi) = 1"),
    ("rep.lambda_symmetry", "lambda_{pi,t,k} = lambda_{pi~,t+2k-n,n-k}"),
    ("rep.sup_norm_upper", "h(pi) <= sqrt(2) q^(floor(n/2)/2), with a certified truncation"),
    ("rep.small_conductor", "n <= 1: h(pi) <= 3/2, and h(pi) = 1 when q >= 4"),
    ("rep.closed_form_trivial_l", "L(s, pi) = 1, mu away from chi_i^-1: c_{t,k}(mu) = omega(-1) G(p^-k, mu^-1) / (eps(mu chi1) eps(mu chi2)) at t = -a(mu chi1) - a(mu chi2), else 0"),
    ("rep.closed_form_unramified_second", "a(chi2) = 0, mu != 1: c_{t,k}(mu) = zeta(1) chi2(p)^-k q^(-k/2) mu(-1) eps(1/2, mu^-1 chi1^-1) at t = -k-n, else 0"),
    ("theorem.sandwich", "(2/3) max(q^(floor(3m/2)/2 - n/2), 1) <= h(pi) <= sqrt(2) q^(floor(n/2)/2), h certified"),
    ("theorem.witness_coordinates", "the large-value coset has (t, k) = (-floor(n/2)-n, floor(n/2)) if a(chi2) = 0, else (-floor(3a1/2), floor(a1/2))"),
    ("theorem.witness_undefined", "3m > 2n but v0 (1 + p^(floor(a1/2) - a2) o^x) contains no unit, so no witness is constructed (informational)"),
    ("theorem.witness_lower_bound", "|W(witness)| >= (2/3) q^(floor(3m/2)/2 - n/2) when m > 2n/3"),
    ("sc.k0_column", "supercuspidal: W(g_{t,0,v}) = eps(1/2, omega^-1 pi) delta_{t,-n}, of modulus 1"),
    ("sc.display", "supercuspidal: W(g_{t,k,v}) = G(p^-k, 1) eps(1/2, omega^-1 pi) delta_{t,-n} + zeta(1) q^(-k/2) sum_{a(mu)=k, a(mu pi)=-t} eps(1/2, mu) eps(1/2, mu^-1 omega^-1 pi) mu(v)"),
    ("sc.tunnell", "a supercuspidal central character has a(omega) <= n/2"),
];

pub fn statement(id: &str) -> &'static str {
    MANIFEST.iter().find(|(i, _)| *i == id).map(|(_, s)| *s).unwrap_or("")
}

/// Tolerances by layer: exact root-of-unity sums, solver output, truncated series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub exact: f64,
    pub dichotomy: f64,
    pub strict: f64,
    pub solver: f64,
    pub truncation: f64,
    pub trivial_h: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { exact: 1e-20, dichotomy: 1e-18, strict: 1e-15, solver: 1e-12, truncation: 1e-6, trivial_h: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub statement: String,
    pub family: String,
    pub cases: u64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<String>,
}

impl CheckReport {
    /// Combine reports of the same check over several parameter sets.
    pub fn merge(reports: &[CheckReport], family: &str) -> Vec<CheckReport> {
        let mut out: Vec<CheckReport> = vec![];
        for r in reports {
            match out.iter_mut().find(|o| o.id == r.id) {
                Some(o) => {
                    o.cases += r.cases;
                    if r.max_deviation > o.max_deviation || (o.witness.is_none() && r.witness.is_some()) {
                        o.max_deviation = o.max_deviation.max(r.max_deviation);
                        o.witness = r.witness.clone();
                    }
                    o.tolerance = o.tolerance.max(r.tolerance);
                    o.pass = o.cases > 0 && o.max_deviation <= o.tolerance;
                }
                None => {
                    let mut c = r.clone();
                    c.family = family.to_string();
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Running maximum of the deviation of one check.
struct Tracker {
    id: &'static str,
    family: String,
    tol: f64,
    cases: u64,
    max_dev: f64,
    witness: Option<String>,
}

impl Tracker {
    fn new(id: &'static str, family: impl Into<String>, tol: f64) -> Self {
        Tracker { id, family: family.into(), tol, cases: 0, max_dev: 0.0, witness: None }
    }

    fn observe(&mut self, dev: f64, witness: impl FnOnce() -> String) {
        self.cases += 1;
        let dev = if dev.is_nan() { f64::INFINITY } else { dev };
        if dev > self.max_dev || self.witness.is_none() {
            self.max_dev = self.max_dev.max(dev);
            self.witness = Some(witness());
        }
    }

    fn fail(&mut self, e: &Error, at: impl FnOnce() -> String) {
        self.observe(f64::INFINITY, || format!("{}: {e}", at()));
    }

    fn observe_result(&mut self, r: Result<f64>, at: impl FnOnce() -> String) {
        match r {
            Ok(d) => self.observe(d, at),
            Err(e) => self.fail(&e, at),
        }
    }

    fn finish(self) -> CheckReport {
        CheckReport {
            id: self.id.to_string(),
            statement: statement(self.id).to_string(),
            family: self.family,
            cases: self.cases,
            max_deviation: self.max_dev,
            tolerance: self.tol,
            pass: self.cases > 0 && self.max_dev <= self.tol,
            witness: self.witness,
        }
    }
}

fn mr_full(p: u64, r: u32) -> i128 {
    pow_u64(p, r) as i128
}

fn valuation_i128(mut x: i128, p: u64) -> i64 {
    let mut v = 0;
    while x % p as i128 == 0 {
        x /= p as i128;
        v += 1;
    }
    v
}

/// `zeta(1)^-1 q^(r - r'/2)`, the nonzero modulus of the twisted root-number sum.
pub fn epsilon_sum_modulus(p: u64, r: u32, r1: u32, prec: u32) -> f64 {
    zeta1(p, prec).recip().mul_real(&q_half_power(p, 2 * r as i64 - r1 as i64, prec)).abs()
}

fn zeta1(p: u64, prec: u32) -> Scalar {
    Scalar::from_ratio(p as i64, p as i64 - 1, prec)
}

/// Indexes `mu(v)` into the root table of the exponent of `(Z/p^r)^x`.
struct CharacterTable {
    p: u64,
    level: u32,
    exps: Vec<Vec<u64>>,
    weights: Vec<u64>,
    big_n: u64,
}

impl CharacterTable {
    fn new(p: u64, level: u32, chars: &[TildeCharacter]) -> Self {
        let g = unit_group(p, level);
        let big_n = g.generators().iter().fold(1u64, |acc, &(_, o)| num_integer::lcm(acc, o));
        CharacterTable {
            p,
            level,
            exps: chars.iter().map(|c| c.exponents_at_level(level)).collect(),
            weights: g.generators().iter().map(|&(_, o)| big_n / o).collect(),
            big_n,
        }
    }

    fn sum(&self, ctx: &Context, coeffs: &[Scalar], v: u64) -> Scalar {
        let d = unit_group(self.p, self.level).dlog(v as i128).expect("unit");
        let roots = ctx.root_table(self.big_n);
        let mut acc = rug::Complex::new(ctx.prec());
        for (c, e) in coeffs.iter().zip(&self.exps) {
            let s: u128 =
                e.iter().zip(&d).zip(&self.weights).map(|((a, b), w)| *a as u128 * *b as u128 * *w as u128).sum();
            acc += rug::Complex::with_val(ctx.prec(), c.complex() * &roots[(s % self.big_n as u128) as usize]);
        }
        Scalar::from_complex(acc)
    }
}

fn sample_units(p: u64, level: u32, count: usize) -> Vec<u64> {
    let g = unit_group(p, level);
    let els = g.elements();
    if els.len() <= count {
        return els.iter().map(|&e| if level == 0 { 1 } else { e }).collect();
    }
    let step = els.len() / count;
    (0..count).map(|i| els[i * step]).collect()
}

/// Gauss sums and root numbers of `GL(1)` for every `mu` with `a(mu) <= a_max`.
pub fn check_gl1(ctx: &Context, p_list: &[u64], a_max: u32, tol: &Tolerances) -> Vec<CheckReport> {
    let fam = format!("p in {p_list:?}, a(mu) <= {a_max}");
    let mut gauss = Tracker::new("gl1.gauss_sum_formula", fam.clone(), tol.exact);
    let mut modulus = Tracker::new("gl1.epsilon_modulus", fam.clone(), tol.exact);
    let mut inverse = Tracker::new("gl1.epsilon_inverse", fam.clone(), tol.exact);
    let mut quad = Tracker::new("gl1.epsilon_quadratic_mod3", "p = 3", tol.exact);
    for &p in p_list {
        let depth_max = 4i64.max(a_max as i64 + 1);
        for mu in characters_up_to(p, a_max) {
            for vx in -depth_max..=2 {
                let depth = (-vx).max(0) as u32;
                let level = depth.max(mu.conductor());
                for u in sample_units(p, level, 3) {
                    let at = || format!("p={p} mu={mu} x=p^{vx}*{u}");
                    let r = PAdicApprox::new(p, vx, u as i128, level).and_then(|x| {
                        let a = gauss_sum(ctx, &x, &mu)?;
                        let b = gauss_sum_closed_form(ctx, &x, &mu)?;
                        Ok(a.dist(&b))
                    });
                    gauss.observe_result(r, at);
                }
            }
            let e = epsilon(ctx, &mu);
            modulus.observe((e.abs_float() - 1u32).to_f64().abs(), || format!("p={p} mu={mu}"));
            let prod = &e * &epsilon(ctx, &mu.inv());
            inverse.observe(prod.dist(&mu.sign().embed(ctx.prec())), || format!("p={p} mu={mu}"));
        }
    }
    let q3: TildeCharacter = "3^1:1".parse().expect("valid character");
    let i = Scalar::from_f64(0.0, 1.0, ctx.prec());
    quad.observe(epsilon(ctx, &q3).dist(&i), || "mu = 3^1:1".into());
    vec![gauss.finish(), modulus.finish(), inverse.finish(), quad.finish()]
}

/// The two `GL(1)` lemmas on twisted root numbers, for conductors up to `r_max`.
pub fn check_twist_lemmas(ctx: &Context, p_list: &[u64], r_max: u32, tol: &Tolerances) -> Vec<CheckReport> {
    let prec = ctx.prec();
    let fam = format!("p in {p_list:?}, a(chi) <= {r_max}");
    let mut crit = Tracker::new("gl1.critical_unit", fam.clone(), tol.exact);
    let mut twisted = Tracker::new("gl1.twisted_epsilon", fam.clone(), tol.exact);
    let mut dich = Tracker::new("gl1.epsilon_sum_dichotomy", fam, tol.dichotomy);
    let mut parseval =
        Tracker::new("gl1.epsilon_sum_parseval", format!("p in {p_list:?}, a(mu) <= {r_max}"), tol.dichotomy);
    let mut spot = Tracker::new("gl1.epsilon_sum_spot", "p = 3, r = 2, r' = 1", tol.dichotomy);
    for &p in p_list {
        for r in 1..=r_max {
            for chi in characters_of_conductor(p, r) {
                let r0 = r / 2;
                let at = || format!("p={p} chi={chi}");
                let v0 = match critical_unit(&chi) {
                    Ok(v) => v,
                    Err(e) => {
                        crit.fail(&e, at);
                        continue;
                    }
                };
                // chi(1 + p^(r-r0) u) against psi(v0^-1 p^-r0 u), independently of the search.
                let m0 = pow_u64(p, r0);
                let mr = pow_u64(p, r);
                let vinv = mod_inv(v0 as i128, m0.max(1)).unwrap_or(0);
                let mut worst = 0.0f64;
                for u in 0..m0.max(1) {
                    let lhs = chi.eval_residue(((1 + pow_u64(p, r - r0) as u128 * u as u128) % mr as u128) as i128);
                    let rhs = if r0 == 0 {
                        RootOfUnity::ONE
                    } else {
                        RootOfUnity::new((vinv as u128 * u as u128 % m0 as u128) as i128, m0)
                    };
                    worst = worst.max(lhs.embed(prec).dist(&rhs.embed(prec)));
                }
                crit.observe(worst, at);
                if r >= 2 {
                    let base = ExtendedCharacter::new(chi.inv(), RootOfUnity::ONE).epsilon(ctx);
                    for mu in characters_up_to(p, r0) {
                        let lhs = epsilon(ctx, &mu.inv().mul(&chi.inv())).mul_root(mu.eval_residue(-(v0 as i128)));
                        twisted.observe(lhs.dist(&base), || format!("p={p} chi={chi} mu={mu}"));
                    }
                }
            }
        }
        for r in 2..=r_max {
            let mus = characters_of_conductor(p, r);
            let table = CharacterTable::new(p, r, &mus);
            let order = unit_group(p, r).order() as usize;
            let exhaustive = order * mus.len() <= 400_000;
            for r1 in 1..r {
                for chi in characters_of_conductor(p, r1).into_iter().take(3) {
                    let coeffs: Vec<Scalar> =
                        mus.iter().map(|mu| &epsilon(ctx, &mu.inv()) * &epsilon(ctx, &mu.mul(&chi))).collect();
                    let target = epsilon_sum_modulus(p, r, r1, prec);
                    let vs: Vec<u64> = if exhaustive {
                        unit_group(p, r).elements().to_vec()
                    } else {
                        let mr = pow_u64(p, r) as i128;
                        let mut vs: Vec<u64> = vec![];
                        for j in 0..=r {
                            for u in [1i128, 2, p as i128 + 1] {
                                let v = (-1 + pow_u64(p, j) as i128 * u).rem_euclid(mr);
                                if v % p as i128 != 0 {
                                    vs.push(v as u64);
                                }
                            }
                        }
                        vs.extend(sample_units(p, r, 16));
                        vs.sort_unstable();
                        vs.dedup();
                        vs
                    };
                    let mut energy = rug::Float::new(prec);
                    for &v in &vs {
                        let sum = table.sum(ctx, &coeffs, v);
                        energy += sum.norm_sqr();
                        let s = sum.abs();
                        let w = v as i128 + 1;
                        let val = if w % mr_full(p, r) == 0 { r as i64 + 1 } else { valuation_i128(w, p) };
                        let expect = if val == (r - r1) as i64 { target } else { 0.0 };
                        dich.observe((s - expect).abs(), || format!("p={p} r={r} chi={chi} v={v}"));
                        if p == 3 && r == 2 && r1 == 1 && (v == 2 || v == 8) {
                            let want = if v == 2 { 2.0 * 3f64.sqrt() } else { 0.0 };
                            spot.observe((s - want).abs().max((s - expect).abs()), || format!("chi={chi} v={v}: {s}"));
                        }
                    }
                    if exhaustive {
                        let want = order as f64 * mus.len() as f64;
                        let energy = (energy / want).to_f64();
                        parseval.observe((energy - 1.0).abs(), || format!("p={p} r={r} chi={chi}: ratio {energy}"));
                    }
                }
            }
        }
    }
    if !p_list.contains(&3) || r_max < 2 {
        let mus = characters_of_conductor(3, 2);
        let table = CharacterTable::new(3, 2, &mus);
        let chi: TildeCharacter = "3^1:1".parse().expect("valid character");
        let coeffs: Vec<Scalar> =
            mus.iter().map(|mu| &epsilon(ctx, &mu.inv()) * &epsilon(ctx, &mu.mul(&chi))).collect();
        for (v, want) in [(2u64, 2.0 * 3f64.sqrt()), (8, 0.0)] {
            let s = table.sum(ctx, &coeffs, v).abs();
            spot.observe((s - want).abs(), || format!("chi={chi} v={v}: {s}"));
        }
    }
    vec![crit.finish(), twisted.finish(), dich.finish(), parseval.finish(), spot.finish()]
}

fn diag_matrix(p: u64, t: i64, v: i128) -> [[Rational; 2]; 2] {
    [[Rational::from(v) * p_power(p, t), Rational::new()], [Rational::new(), Rational::from(1)]]
}

fn seed_for(label: &str, salt: u64) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf29ce484222325 ^ salt;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn random_unit(rng: &mut ChaCha8Rng, p: u64, n: u32) -> i128 {
    let m = pow_u64(p, n.max(1)) as i128;
    loop {
        let v = rng.gen_range(1..m.max(2));
        if v % p as i128 != 0 {
            return v;
        }
    }
}

fn random_rational(rng: &mut ChaCha8Rng, p: u64) -> Rational {
    let num = rng.gen_range(-40i64..=40);
    let mut den = rng.gen_range(1i64..=12);
    while den % p as i64 == 0 {
        den += 1;
    }
    Rational::from((num, den)) * p_power(p, rng.gen_range(-2..=2))
}

fn det(g: &[[Rational; 2]; 2]) -> Rational {
    Rational::from(&g[0][0] * &g[1][1]) - Rational::from(&g[0][1] * &g[1][0])
}

fn random_k(rng: &mut ChaCha8Rng, p: u64, n: u32, upper_left: bool) -> [[Rational; 2]; 2] {
    let pn = p_power(p, n as i64);
    let int = |rng: &mut ChaCha8Rng| Rational::from(rng.gen_range(-30i64..=30));
    let unit = |rng: &mut ChaCha8Rng| Rational::from(random_unit(rng, p, 2) as i64);
    let c = Rational::from(&pn * &int(rng));
    let fixed = Rational::from(1) + Rational::from(&pn * &int(rng));
    if upper_left {
        [[fixed, int(rng)], [c, unit(rng)]]
    } else {
        [[unit(rng), int(rng)], [c, fixed]]
    }
}

/// All engine-level identities for one representation.
pub fn check_representation(nf: &Newform<'_>, tol: &Tolerances) -> Vec<CheckReport> {
    let ctx = nf.context();
    let pi = nf.pi().clone();
    let p = pi.p();
    let n = pi.n();
    let q = p;
    let prec = ctx.prec();
    let fam = pi.to_string();
    let t_max = nf.t_max();
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(&fam, 17));
    let synthetic = matches!(pi.kind(), RepKind::Supercuspidal(o) if o.is_synthetic());
    let mut reports = vec![];

    let mut norm = Tracker::new("rep.normalization", fam.clone(), tol.solver);
    let r = nf.representative(-2 * n as i64, n, 1).and_then(|g| {
        let w = nf.whittaker(&g)?;
        let psi = psi_eval(&PAdicApprox::new(p, -(n as i64), -1, n)?)?;
        Ok(w.dist(&Scalar::one(prec).mul_root(pi.omega().sign() * psi)))
    });
    norm.observe_result(r, || "(-2n, n, 1)".into());
    if !synthetic {
        reports.push(norm.finish());
    }

    let mut ident = Tracker::new("rep.identity_matrix", fam.clone(), tol.solver);
    let one = [[Rational::from(1), Rational::new()], [Rational::new(), Rational::from(1)]];
    ident.observe_result(nf.value_at_matrix(&one).map(|w| w.dist(&ctx.one())), || "W(1)".into());
    ident.observe_result(nf.conjugate_at_matrix(&one).map(|w| w.dist(&ctx.one())), || "W*(1)".into());
    if !synthetic {
        reports.push(ident.finish());
    }

    let mut support = Tracker::new("rep.support", fam.clone(), tol.strict);
    for k in 0..=n {
        for v in sample_units(p, k.max(1), 4) {
            for t in (-(k as i64) - n as i64 - 3)..=(-(k as i64) - n as i64 - 1) {
                let at = || format!("(t={t}, k={k}, v={v})");
                let r = nf.representative(t, k, v as i128).and_then(|g| nf.whittaker(&g)).map(|w| w.abs());
                support.observe_result(r, at);
            }
        }
    }
    reports.push(support.finish());

    if !synthetic {
        let mut diag = Tracker::new("rep.diagonal", fam.clone(), tol.solver);
        for t in -2i64..=4 {
            for v in sample_units(p, pi.m().max(1), 3) {
                let g = diag_matrix(p, t, v as i128);
                let at = || format!("a(p^{t} * {v})");
                let r = nf.value_at_matrix(&g).map(|w| w.dist(&pi.diagonal_whittaker(ctx, t, v as i128, false)));
                diag.observe_result(r, at);
                let r = nf.conjugate_at_matrix(&g).map(|w| w.dist(&pi.diagonal_whittaker(ctx, t, v as i128, true)));
                diag.observe_result(r, || format!("W* at a(p^{t} * {v})"));
            }
        }
        reports.push(diag.finish());

        let mut cosets = Tracker::new("rep.coset_reduction", fam.clone(), tol.solver);
        let mut tries = 0;
        while cosets.cases < 24 && tries < 400 {
            tries += 1;
            let g = [
                [random_rational(&mut rng, p), random_rational(&mut rng, p)],
                [random_rational(&mut rng, p), random_rational(&mut rng, p)],
            ];
            if det(&g) == 0 {
                continue;
            }
            let Ok(base) = nf.value_at_matrix(&g) else { continue };
            let Ok(base_star) = nf.conjugate_at_matrix(&g) else { continue };
            let k1 = random_k(&mut rng, p, n, true);
            let k2 = random_k(&mut rng, p, n, false);
            let x = random_rational(&mut rng, p);
            let u = Rational::from(random_unit(&mut rng, p, pi.m().max(1)) as i64) * p_power(p, rng.gen_range(-2..=2));
            let left = [[u.clone(), Rational::from(&u * &x)], [Rational::new(), u.clone()]];
            let h = mat_mul(&mat_mul(&left, &g), &k1);
            let r = nf.value_at_matrix(&h).and_then(|w| {
                let unit = crate::engine::unit_residue(&u, p, pi.m().max(1))?;
                let phase = crate::padic::psi_rational(&x, p) * pi.omega().eval_residue(unit as i128);
                Ok(w.dist(&base.mul_root(phase)))
            });
            match r {
                Err(Error::BeyondTruncation { .. }) => continue,
                r => cosets.observe_result(r, || "left N Z, right K_1".into()),
            }
            match nf.conjugate_at_matrix(&mat_mul(&g, &k2)).map(|w| w.dist(&base_star)) {
                Err(Error::BeyondTruncation { .. }) => {}
                r => cosets.observe_result(r, || "right K_2 on W*".into()),
            }
        }
        reports.push(cosets.finish());

        let mut phase = Tracker::new("rep.atkin_lehner_phase", fam.clone(), tol.solver);
        let mut modulus = Tracker::new("rep.atkin_lehner_modulus", fam.clone(), tol.solver);
        let mut drawn = 0;
        while drawn < 100 {
            drawn += 1;
            let k = rng.gen_range(0..=n);
            let lo = -(k as i64) - n as i64;
            let hi = t_max.min(t_max + n as i64 - 2 * k as i64).min(lo + 3 * n as i64 + 6);
            if hi < lo {
                continue;
            }
            let t = rng.gen_range(lo..=hi);
            let v = random_unit(&mut rng, p, n);
            let at = || format!("(t={t}, k={k}, v={v})");
            let r = (|| -> Result<(f64, f64)> {
                let g = nf.representative(t, k, v)?;
                let lhs = nf.value_direct(Side::Contragredient, &g)?;
                let (ph, target) = nf.atkin_lehner(Side::Contragredient, &g)?;
                let rhs_raw = nf.value_direct(Side::Pi, &target)?;
                let rhs = if rhs_raw.abs() < 1e-40 { rhs_raw.clone() } else { ph()? * &rhs_raw };
                Ok((lhs.dist(&rhs), (lhs.abs() - rhs_raw.abs()).abs()))
            })();
            match r {
                Ok((a, b)) => {
                    phase.observe(a, at);
                    modulus.observe(b, at);
                }
                Err(e) => {
                    phase.fail(&e, at);
                    modulus.fail(&e, at);
                }
            }
        }
        reports.push(phase.finish());
        reports.push(modulus.finish());
    }

    let mut dual = Tracker::new("rep.dual_identity", fam.clone(), tol.solver);
    for k in 0..=n {
        if unit_group(p, k).order() > 600 {
            break;
        }
        let lvl = match nf.level(Side::Contragredient, k) {
            Ok(l) => l,
            Err(e) => {
                dual.fail(&e, || format!("k={k}"));
                continue;
            }
        };
        for (mu, tab) in characters_up_to(p, k).iter().zip(&lvl.tables) {
            let at = || format!("k={k} mu={mu}");
            let r = dual_identity(ctx, &pi, mu).and_then(|d| solve_identity(ctx, p, n, k, mu, &d, t_max)).and_then(
                |star| {
                    let mut worst = 0.0f64;
                    for t in star.t_lo.min(tab.t_lo)..=t_max {
                        worst = worst.max(star.coeff(t)?.dist(&tab.coeff(t)?));
                    }
                    Ok(worst)
                },
            );
            dual.observe_result(r, at);
        }
    }
    reports.push(dual.finish());

    let mut parseval = Tracker::new("rep.parseval", fam.clone(), tol.strict);
    for k in 0..=n / 2 {
        let r = (|| -> Result<()> {
            let lvl = nf.level(Side::Pi, k)?;
            let units: Vec<u64> = unit_group(p, k).elements().iter().map(|&e| if k == 0 { 1 } else { e }).collect();
            for t in lvl.t_lo()..=(lvl.t_lo() + 3 * n as i64 + 6).min(t_max) {
                let mut avg = rug::Float::new(prec);
                for &v in &units {
                    avg += nf.value_direct(Side::Pi, &nf.representative(t, k, v as i128)?)?.norm_sqr();
                }
                avg /= units.len() as u32;
                let mut lam = rug::Float::new(prec);
                for tab in &lvl.tables {
                    lam += tab.coeff(t)?.norm_sqr();
                }
                let dev = rug::Float::with_val(prec, &avg - &lam).abs().to_f64();
                parseval.observe(dev, || format!("t={t} k={k}"));
            }
            Ok(())
        })();
        if let Err(e) = r {
            parseval.fail(&e, || format!("k={k}"));
        }
    }
    reports.push(parseval.finish());

    if !synthetic {
        let mut value = Tracker::new("rep.norm_value", fam.clone(), tol.truncation);
        let mut range = Tracker::new("rep.norm_range", fam.clone(), tol.truncation);
        let expect = pi.whittaker_norm();
        for k in 0..=n {
            let at = || format!("k={k}");
            match nf.lambda_square_sum(k) {
                Ok((s, tail)) => {
                    value.observe(((s - expect).abs() - tail).max(0.0), at);
                    let mut dev = (1.0 - (s + tail)).max(s - 2.0).max(0.0);
                    if pi.has_trivial_l_factor() {
                        dev = dev.max(((s - 1.0).abs() - tail).max(0.0));
                    }
                    range.observe(dev, at);
                }
                Err(e) => {
                    value.fail(&e, at);
                    range.fail(&e, at);
                }
            }
        }
        reports.push(value.finish());
        reports.push(range.finish());

        let mut sym = Tracker::new("rep.lambda_symmetry", fam.clone(), tol.solver);
        for k in 0..=n {
            let lo = -(k as i64) - n as i64;
            let hi = t_max.min(t_max + n as i64 - 2 * k as i64).min(lo + 3 * n as i64 + 6);
            for t in lo..=hi {
                let r = (|| -> Result<f64> {
                    let a = nf.level(Side::Pi, k)?.lambda_sq(t)?.sqrt();
                    let b = nf.level(Side::Contragredient, n - k)?.lambda_sq(t + 2 * k as i64 - n as i64)?.sqrt();
                    Ok((a - b).abs())
                })();
                sym.observe_result(r, || format!("t={t} k={k}"));
            }
        }
        reports.push(sym.finish());

        let mut upper = Tracker::new("rep.sup_norm_upper", fam.clone(), 0.0);
        let mut small = Tracker::new("rep.small_conductor", fam.clone(), tol.trivial_h);
        match certified_sup_norm(nf.context(), &pi, t_max) {
            Ok(s) => {
                let (_, up) = reference_bounds(q, n, pi.m());
                let dev = if s.certified { (s.h - SQRT_2 * up).max(0.0) } else { f64::INFINITY };
                upper.observe(dev, || format!("h={} at {}", s.h, s.argmax));
                if n <= 1 {
                    let dev = if q >= 4 { (s.h - 1.0).abs() } else { (s.h - 1.5).max(0.0) };
                    small.observe(dev, || format!("h={}", s.h));
                }
            }
            Err(e) => upper.fail(&e, || "sup norm".into()),
        }
        reports.push(upper.finish());
        if small.cases > 0 {
            reports.push(small.finish());
        }

        if let Some(r) = closed_form_checks(nf, tol) {
            reports.push(r);
        }
    }
    reports
}

/// The single-term closed forms for principal series, where they apply.
fn closed_form_checks(nf: &Newform<'_>, tol: &Tolerances) -> Option<CheckReport> {
    let ctx = nf.context();
    let pi = nf.pi();
    let RepKind::PrincipalSeries { chi1, chi2 } = pi.kind() else {
        return None;
    };
    let (p, n, prec) = (pi.p(), pi.n(), ctx.prec());
    let fam = pi.to_string();
    let sign = pi.omega().sign();
    if chi2.conductor() > 0 {
        let mut tr = Tracker::new("rep.closed_form_trivial_l", fam, tol.strict);
        for k in 0..=n / 2 {
            let lvl = match nf.level(Side::Pi, k) {
                Ok(l) => l,
                Err(e) => {
                    tr.fail(&e, || format!("k={k}"));
                    continue;
                }
            };
            for tab in &lvl.tables {
                let mu = &tab.mu;
                if *mu == chi1.unit_part().inv() || *mu == chi2.unit_part().inv() {
                    continue;
                }
                let at = || format!("k={k} mu={mu}");
                let r = (|| -> Result<f64> {
                    let (m1, m2) = (chi1.twist(mu), chi2.twist(mu));
                    let t_star = -(m1.conductor() as i64) - m2.conductor() as i64;
                    let g = gauss_sum_closed_form(ctx, &PAdicApprox::new(p, -(k as i64), 1, k)?, &mu.inv())?;
                    let c = g.mul_root(sign) / (m1.epsilon(ctx) * m2.epsilon(ctx));
                    let mut worst = 0.0f64;
                    for (t, x) in tab.iter() {
                        let want = if t == t_star { c.clone() } else { Scalar::zero(prec) };
                        worst = worst.max(x.dist(&want));
                    }
                    Ok(worst)
                })();
                tr.observe_result(r, at);
            }
        }
        (tr.cases > 0).then(|| tr.finish())
    } else {
        let mut tr = Tracker::new("rep.closed_form_unramified_second", fam, tol.strict);
        let zeta = zeta1(p, prec);
        for k in 0..=n / 2 {
            let lvl = match nf.level(Side::Pi, k) {
                Ok(l) => l,
                Err(e) => {
                    tr.fail(&e, || format!("k={k}"));
                    continue;
                }
            };
            for tab in lvl.tables.iter().filter(|t| !t.mu.is_trivial()) {
                let mu = &tab.mu;
                let t_star = -(k as i64) - n as i64;
                let e = ExtendedCharacter::new(mu.inv(), RootOfUnity::ONE).mul(&chi1.inv()).epsilon(ctx);
                let c = (&zeta * &e)
                    .mul_real(&q_half_power(p, -(k as i64), prec))
                    .mul_root(chi2.at_p().pow(-(k as i64)) * mu.sign());
                let mut worst = 0.0f64;
                for (t, x) in tab.iter() {
                    let want = if t == t_star { c.clone() } else { Scalar::zero(prec) };
                    worst = worst.max(x.dist(&want));
                }
                tr.observe(worst, || format!("k={k} mu={mu}"));
            }
        }
        (tr.cases > 0).then(|| tr.finish())
    }
}

/// `sup_norm`, doubling `t_max` (up to three times) until the truncation is certified.
pub fn certified_sup_norm(ctx: &Context, pi: &Representation, t_max: i64) -> Result<SupNorm> {
    let mut t = t_max;
    let mut last = None;
    for _ in 0..4 {
        let nf = Newform::new(ctx, pi.clone(), t)?;
        let s = nf.sup_norm()?;
        if s.certified {
            return Ok(s);
        }
        last = Some(s);
        t *= 2;
    }
    Ok(last.expect("at least one attempt"))
}

/// Row of the sup-norm sandwich for one representation.
#[derive(Clone, Debug)]
pub struct TheoremRow {
    pub sup: SupNorm,
    pub lower_ref: f64,
    pub upper_ref: f64,
    pub witness: WitnessStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessStatus {
    /// `3m <= 2n`, or not a principal series.
    NotApplicable,
    /// `3m > 2n` but the construction has no admissible unit (`p = 2`, `a1 = 2 a2 + 1`).
    Undefined,
    Value(Representative, f64),
}

/// Sup-norm, reference bounds and (when `m > 2n/3`) the witness value.
pub fn theorem_row(ctx: &Context, pi: &Representation, t_max: i64) -> Result<TheoremRow> {
    let sup = certified_sup_norm(ctx, pi, t_max)?;
    let (lower_ref, upper_ref) = reference_bounds(pi.q(), pi.n(), pi.m());
    let witness = match lower_bound_witness(pi) {
        Ok(w) => {
            let nf = Newform::new(ctx, pi.clone(), sup.t_max)?;
            let val = nf.whittaker(&w)?.abs();
            WitnessStatus::Value(w, val)
        }
        Err(Error::Domain(_)) if 3 * pi.m() > 2 * pi.n() && matches!(pi.kind(), RepKind::PrincipalSeries { .. }) => {
            WitnessStatus::Undefined
        }
        Err(Error::Domain(_)) => WitnessStatus::NotApplicable,
        Err(e) => return Err(e),
    };
    Ok(TheoremRow { sup, lower_ref, upper_ref, witness })
}

/// The two-sided sup-norm bound and the large-value witnesses over a family.
pub fn check_main_theorem(
    ctx: &Context,
    family: &[Representation],
    t_max: Option<i64>,
    label: &str,
) -> Vec<CheckReport> {
    use rayon::prelude::*;
    let rows: Vec<(Representation, Result<TheoremRow>)> = family
        .par_iter()
        .map(|pi| (pi.clone(), theorem_row(ctx, pi, t_max.unwrap_or_else(|| crate::engine::default_t_max(pi.n())))))
        .collect();
    let mut sandwich = Tracker::new("theorem.sandwich", label, 0.0);
    let mut coords = Tracker::new("theorem.witness_coordinates", label, 0.0);
    let mut lower = Tracker::new("theorem.witness_lower_bound", label, 0.0);
    let mut undefined = Tracker::new("theorem.witness_undefined", label, 0.0);
    for (pi, row) in rows {
        let at = pi.to_string();
        match row {
            Err(e) => sandwich.fail(&e, || at.clone()),
            Ok(row) => {
                let h = row.sup.h;
                let dev = if row.sup.certified {
                    (2.0 / 3.0 * row.lower_ref - h).max(h - SQRT_2 * row.upper_ref).max(0.0)
                } else {
                    f64::INFINITY
                };
                sandwich.observe(dev, || format!("{at}: h={h} certified={}", row.sup.certified));
                if row.witness == WitnessStatus::Undefined {
                    undefined.observe(0.0, || format!("{at}: no admissible w0"));
                }
                if let (WitnessStatus::Value(w, val), Some((a1, a2))) = (row.witness, pi.inducing_conductors()) {
                    let n = pi.n();
                    let expect =
                        if a2 == 0 { (-((n / 2) as i64) - n as i64, n / 2) } else { (-((3 * a1 / 2) as i64), a1 / 2) };
                    coords.observe(if (w.t, w.k) == expect { 0.0 } else { 1.0 }, || format!("{at}: {w}"));
                    let bound = 2.0 / 3.0 * (pi.q() as f64).powf((3 * pi.m() / 2) as f64 / 2.0 - n as f64 / 2.0);
                    lower.observe((bound - val).max(0.0), || {
                        format!("{at} (a1={a1}, a2={a2}): |W({w})| = {val}, bound {bound}")
                    });
                }
            }
        }
    }
    let mut out = vec![sandwich.finish()];
    if coords.cases > 0 {
        out.push(coords.finish());
        out.push(lower.finish());
    }
    if undefined.cases > 0 {
        out.push(undefined.finish());
    }
    out
}

/// Structural checks of the supercuspidal pipeline on a synthetic oracle.
pub fn check_supercuspidal(
    ctx: &Context,
    p: u64,
    n: u32,
    omega: &TildeCharacter,
    seed: u64,
    tol: &Tolerances,
) -> Vec<CheckReport> {
    let prec = ctx.prec();
    let fam = format!("synthetic p={p} n={n} omega={omega} seed={seed}");
    let mut k0 = Tracker::new("sc.k0_column", fam.clone(), tol.strict);
    let mut disp = Tracker::new("sc.display", fam.clone(), tol.strict);
    let mut tunnell = Tracker::new("sc.tunnell", fam.clone(), 0.0);
    let mut run = || -> Result<()> {
        let oracle = SupercuspidalOracle::synthetic(ctx, p, n, omega.clone(), seed)?;
        let pi = Representation::supercuspidal(oracle.clone())?;
        let nf = Newform::new(ctx, pi.clone(), 2 * n as i64 + 4)?;
        let e_tilde = oracle.entry(&omega.inv())?.eps.clone();
        for v in sample_units(p, 1, 3) {
            for t in (-(n as i64) - 3)..=(n as i64 + 2) {
                let w = nf.value_direct(Side::Pi, &nf.representative(t, 0, v as i128)?)?;
                let want = if t == -(n as i64) { e_tilde.clone() } else { Scalar::zero(prec) };
                let mut dev = w.dist(&want);
                if t == -(n as i64) {
                    dev = dev.max((w.abs() - 1.0).abs());
                }
                k0.observe(dev, || format!("t={t} v={v}"));
            }
        }
        let zeta = zeta1(p, prec);
        for k in 1..=n {
            let mus = characters_of_conductor(p, k);
            let gk = match k {
                1 => Scalar::from_ratio(-1, p as i64 - 1, prec),
                _ => Scalar::zero(prec),
            };
            let scale = zeta.mul_real(&q_half_power(p, -(k as i64), prec));
            for v in sample_units(p, k, 12) {
                for t in (-(k as i64) - n as i64 - 1)..=(2 * n as i64 + 2) {
                    let mut want = if t == -(n as i64) { &gk * &e_tilde } else { Scalar::zero(prec) };
                    for mu in &mus {
                        if oracle.entry(mu)?.a_mu_pi as i64 != -t {
                            continue;
                        }
                        let partner = oracle.entry(&mu.inv().mul(&omega.inv()))?.eps.clone();
                        let term = (&epsilon(ctx, mu) * &partner).mul_root(mu.eval_residue(v as i128));
                        want += &(&scale * &term);
                    }
                    let w = nf.value_direct(Side::Pi, &nf.representative(t, k, v as i128)?)?;
                    disp.observe(w.dist(&want), || format!("t={t} k={k} v={v}"));
                }
            }
        }
        Ok(())
    };
    if let Err(e) = run() {
        k0.fail(&e, || "setup".into());
        disp.fail(&e, || "setup".into());
    }
    // A central character with 2 a(omega) > n must be refused.
    let big = characters_of_conductor(p, n / 2 + 1).into_iter().next();
    if let Some(w) = big {
        let r = SupercuspidalOracle::synthetic(ctx, p, n, w.clone(), seed);
        tunnell.observe(if matches!(r, Err(Error::Tunnell { .. })) { 0.0 } else { 1.0 }, || format!("omega={w}"));
    }
    let mut out = vec![k0.finish(), disp.finish()];
    if tunnell.cases > 0 {
        out.push(tunnell.finish());
    }
    out
}

/// Unit part of `x` modulo `p^j`, for checks that build matrices from integers.
pub fn unit_mod(x: i128, p: u64, j: u32) -> Option<u64> {
    let m = pow_u64(p, j) as i128;
    let r = x.rem_euclid(m.max(1));
    (x % p as i128 != 0).then_some(r as u64)
}

/// `G(p^j, 1)` by summation, used by tests.
pub fn gauss_trivial(ctx: &Context, p: u64, j: i64) -> Result<Scalar> {
    let depth = (-j).max(0) as u32;
    gauss_sum(ctx, &PAdicApprox::new(p, j, 1, depth)?, &TildeCharacter::trivial(p))
}
