//! Characters of `Q_p^x`: the group `X~` of characters trivial at `p`, their
//! unramified extensions, Gauss sums and GL(1) epsilon factors at `s = 1/2`.
//!
//! A character of conductor `a` is stored by its exponents on the canonical
//! generators of `(Z/p^a)^x` (see [`unit_group`]): the value at the `i`-th
//! generator of order `o_i` is `e^{2 pi i e_i / o_i}`.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::context::Context;
use crate::error::{Error, Result};
use crate::numerics::{q_half_power, RootOfUnity, Scalar};
use crate::padic::{is_prime, mod_inv, pow_u64, unit_group, PAdicApprox};

/// A character of `Q_p^x` with value 1 at `p`, stored at its exact conductor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TildeCharacter {
    p: u64,
    level: u32,
    exps: Vec<u64>,
}

/// `(Z/2)^x` is trivial, so no character of `Q_2^x` has conductor 1.
fn is_conductor_level(p: u64, a: u32) -> bool {
    !(p == 2 && a == 1)
}

impl TildeCharacter {
    pub fn trivial(p: u64) -> Self {
        TildeCharacter { p, level: 0, exps: vec![] }
    }

    /// The character of `(Z/p^a)^x` with exponents `exps`, reduced to its exact conductor.
    pub fn new(p: u64, a: u32, exps: &[u64]) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let g = unit_group(p, a);
        let gens = g.generators();
        let exps: Vec<u64> = if gens.is_empty() {
            if exps.iter().any(|&e| e != 0) {
                return Err(Error::Malformed(format!("(Z/{p}^{a})^x is trivial but exponents {exps:?} were given")));
            }
            vec![]
        } else {
            if exps.len() != gens.len() {
                return Err(Error::Malformed(format!(
                    "(Z/{p}^{a})^x has {} generators, got {} exponents",
                    gens.len(),
                    exps.len()
                )));
            }
            exps.iter().zip(gens).map(|(e, (_, o))| e % o).collect()
        };
        let raw = TildeCharacter { p, level: a, exps };
        let c = raw.exact_conductor();
        Ok(raw.at_conductor(c))
    }

    fn exact_conductor(&self) -> u32 {
        if self.exps.iter().all(|&e| e == 0) {
            return 0;
        }
        let m = pow_u64(self.p, self.level);
        (1..self.level)
            .filter(|&c| is_conductor_level(self.p, c))
            .find(|&c| self.eval_residue(((1 + pow_u64(self.p, c)) % m) as i128).is_one())
            .unwrap_or(self.level)
    }

    fn at_conductor(self, c: u32) -> Self {
        if c == self.level {
            return self;
        }
        let from = unit_group(self.p, self.level);
        let to = unit_group(self.p, c);
        // The i-th canonical generator at level c lifts to the i-th one at the current level.
        let exps = to
            .generators()
            .iter()
            .zip(from.generators())
            .zip(&self.exps)
            .map(|((&(_, oc), &(_, oa)), &e)| e * oc / oa)
            .collect();
        TildeCharacter { p: self.p, level: c, exps }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// The conductor exponent `a(mu)`.
    pub fn conductor(&self) -> u32 {
        self.level
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exps
    }

    pub fn is_trivial(&self) -> bool {
        self.level == 0
    }

    /// Exponents of the same character viewed on `(Z/p^b)^x`, `b >= a(mu)`.
    pub fn exponents_at_level(&self, b: u32) -> Vec<u64> {
        assert!(b >= self.level, "cannot view a character below its conductor");
        let g = unit_group(self.p, b);
        g.generators()
            .iter()
            .map(|&(x, o)| {
                let r = self.eval_residue(x as i128);
                r.num() * (o / r.order())
            })
            .collect()
    }

    /// Value at an integer unit residue (only its class mod `p^{a(mu)}` matters).
    pub fn eval_residue(&self, u: i128) -> RootOfUnity {
        if self.exps.is_empty() {
            return RootOfUnity::ONE;
        }
        let g = unit_group(self.p, self.level);
        let d = g.dlog(u).unwrap_or_else(|| panic!("{u} is not a unit mod {}^{}", self.p, self.level));
        let mut r = RootOfUnity::ONE;
        for ((&e, &(_, o)), di) in self.exps.iter().zip(g.generators()).zip(d) {
            r *= RootOfUnity::new((e * di) as i128, o);
        }
        r
    }

    /// Value at a p-adic number; the valuation is irrelevant since `mu(p) = 1`.
    pub fn eval(&self, x: &PAdicApprox) -> Result<RootOfUnity> {
        let u = x.unit_mod(self.level)?;
        Ok(self.eval_residue(u as i128))
    }

    pub fn mul(&self, other: &TildeCharacter) -> TildeCharacter {
        assert_eq!(self.p, other.p, "characters of different fields");
        let b = self.level.max(other.level);
        let x = self.exponents_at_level(b);
        let y = other.exponents_at_level(b);
        let sum: Vec<u64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        TildeCharacter::new(self.p, b, &sum).expect("product of valid characters")
    }

    pub fn inv(&self) -> TildeCharacter {
        let g = unit_group(self.p, self.level);
        let exps = self.exps.iter().zip(g.generators()).map(|(e, (_, o))| (o - e) % o).collect();
        TildeCharacter { p: self.p, level: self.level, exps }
    }

    pub fn pow(&self, e: i64) -> TildeCharacter {
        let g = unit_group(self.p, self.level);
        let exps: Vec<u64> = self
            .exps
            .iter()
            .zip(g.generators())
            .map(|(x, (_, o))| ((*x as i128 * e as i128).rem_euclid(*o as i128)) as u64)
            .collect();
        TildeCharacter::new(self.p, self.level, &exps).expect("power of a valid character")
    }

    /// `mu(-1)`.
    pub fn sign(&self) -> RootOfUnity {
        self.eval_residue(-1)
    }

    /// Flat index of this character among all characters of `(Z/p^b)^x`.
    pub fn index_at_level(&self, b: u32) -> usize {
        let g = unit_group(self.p, b);
        let e = self.exponents_at_level(b);
        let mut idx = 0usize;
        for (x, (_, o)) in e.iter().zip(g.generators()).rev() {
            idx = idx * *o as usize + *x as usize;
        }
        idx
    }

    fn fmt_exps(&self) -> String {
        if self.exps.is_empty() {
            "0".to_string()
        } else {
            self.exps.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        }
    }
}

impl fmt::Display for TildeCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}:{}", self.p, self.level, self.fmt_exps())
    }
}

/// `conductor(mu * nu)`.
pub fn conductor_product(mu: &TildeCharacter, nu: &TildeCharacter) -> u32 {
    mu.mul(nu).conductor()
}

/// All of `X~(k)`, the characters with conductor at most `k`, in flat-index order at level `k`.
pub fn characters_up_to(p: u64, k: u32) -> Vec<TildeCharacter> {
    let g = unit_group(p, k);
    let orders: Vec<u64> = g.generators().iter().map(|g| g.1).collect();
    let total: u64 = orders.iter().product();
    (0..total)
        .map(|mut i| {
            let exps: Vec<u64> = orders
                .iter()
                .map(|o| {
                    let e = i % o;
                    i /= o;
                    e
                })
                .collect();
            TildeCharacter::new(p, k, &exps).expect("enumerated exponents are valid")
        })
        .collect()
}

/// Characters of exact conductor `r`.
pub fn characters_of_conductor(p: u64, r: u32) -> Vec<TildeCharacter> {
    characters_up_to(p, r).into_iter().filter(|c| c.conductor() == r).collect()
}

/// A character of `Q_p^x`: a [`TildeCharacter`] together with a root-of-unity value at `p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtendedCharacter {
    unit: TildeCharacter,
    at_p: RootOfUnity,
}

impl ExtendedCharacter {
    pub fn new(unit: TildeCharacter, at_p: RootOfUnity) -> Self {
        ExtendedCharacter { unit, at_p }
    }

    pub fn unramified(p: u64, at_p: RootOfUnity) -> Self {
        ExtendedCharacter { unit: TildeCharacter::trivial(p), at_p }
    }

    pub fn unit_part(&self) -> &TildeCharacter {
        &self.unit
    }

    pub fn at_p(&self) -> RootOfUnity {
        self.at_p
    }

    pub fn p(&self) -> u64 {
        self.unit.p
    }

    pub fn conductor(&self) -> u32 {
        self.unit.level
    }

    pub fn is_unramified(&self) -> bool {
        self.unit.is_trivial()
    }

    pub fn eval(&self, x: &PAdicApprox) -> Result<RootOfUnity> {
        Ok(self.at_p.pow(x.valuation()) * self.unit.eval(x)?)
    }

    pub fn mul(&self, other: &ExtendedCharacter) -> ExtendedCharacter {
        ExtendedCharacter { unit: self.unit.mul(&other.unit), at_p: self.at_p * other.at_p }
    }

    /// Twist by an element of `X~`.
    pub fn twist(&self, mu: &TildeCharacter) -> ExtendedCharacter {
        ExtendedCharacter { unit: self.unit.mul(mu), at_p: self.at_p }
    }

    pub fn inv(&self) -> ExtendedCharacter {
        ExtendedCharacter { unit: self.unit.inv(), at_p: self.at_p.inv() }
    }

    /// `epsilon(1/2, chi) = chi(p)^{a(chi)} epsilon(1/2, chi|_{o^x})` for unramified `psi`.
    pub fn epsilon(&self, ctx: &Context) -> Scalar {
        epsilon(ctx, &self.unit).mul_root(self.at_p.pow(self.conductor() as i64))
    }
}

impl fmt::Display for ExtendedCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, n) = self.at_p.phase();
        write!(f, "{}@{}/{}", self.unit, a, n)
    }
}

fn parse_u(s: &str, what: &str) -> Result<u64> {
    s.trim().parse::<u64>().map_err(|_| Error::Parse(format!("bad {what} '{s}'")))
}

impl FromStr for ExtendedCharacter {
    type Err = Error;

    /// `p^a:e1[,e2][@num/den]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, at) = match s.split_once('@') {
            Some((b, a)) => (b, Some(a)),
            None => (s, None),
        };
        let (pa, es) = body.split_once(':').ok_or_else(|| Error::Parse(format!("missing ':' in '{s}'")))?;
        let (p, a) = pa.split_once('^').ok_or_else(|| Error::Parse(format!("missing '^' in '{s}'")))?;
        let p = parse_u(p, "prime")?;
        let a = parse_u(a, "level")? as u32;
        if !is_prime(p) {
            return Err(Error::Parse(format!("{p} is not prime")));
        }
        if a > 24 {
            return Err(Error::Parse(format!("level {a} is too large")));
        }
        let exps = es.split(',').map(|e| parse_u(e, "exponent")).collect::<Result<Vec<_>>>()?;
        let unit = TildeCharacter::new(p, a, &exps).map_err(|e| Error::Parse(e.to_string()))?;
        let at_p = match at {
            None => RootOfUnity::ONE,
            Some(frac) => {
                let (n, d) = frac.split_once('/').ok_or_else(|| Error::Parse(format!("bad value at p '{frac}'")))?;
                let n: i128 = n.trim().parse().map_err(|_| Error::Parse(format!("bad numerator '{n}'")))?;
                let d = parse_u(d, "denominator")?;
                if d == 0 {
                    return Err(Error::Parse("zero denominator".into()));
                }
                RootOfUnity::new(n, d)
            }
        };
        Ok(ExtendedCharacter { unit, at_p })
    }
}

impl FromStr for TildeCharacter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let c: ExtendedCharacter = s.parse()?;
        if !c.at_p.is_one() {
            return Err(Error::Parse(format!("'{s}' is not trivial at p")));
        }
        Ok(c.unit)
    }
}

/// Largest order of an element of `(Z/p^a)^x`.
fn group_exponent(p: u64, a: u32) -> u64 {
    unit_group(p, a).generators().iter().fold(1u64, |acc, g| acc.lcm(&g.1))
}

/// `G(x, mu)`: the average of `psi(xy) mu(y)` over `y` in `o^x`.
pub fn gauss_sum(ctx: &Context, x: &PAdicApprox, mu: &TildeCharacter) -> Result<Scalar> {
    let p = mu.p;
    let t = x.valuation();
    let depth = if t < 0 { (-t) as u32 } else { 0 };
    let level = mu.level.max(depth);
    if level == 0 {
        return Ok(ctx.one());
    }
    let xu = x.unit_mod(depth)?;
    let pd = pow_u64(p, depth);
    let n = pd.lcm(&group_exponent(p, mu.level));
    // Bucket of mu(y) for each unit y mod p^{a(mu)}, by flat index.
    let small = unit_group(p, mu.level);
    let mu_bucket: Vec<u64> = small
        .elements()
        .iter()
        .map(|&y| {
            let r = mu.eval_residue(y as i128);
            r.num() * (n / r.order())
        })
        .collect();
    let big = unit_group(p, level);
    let mut counts = vec![0i64; n as usize];
    let step = n / pd;
    for &y in big.elements() {
        let psi = (xu as u128 * y as u128 % pd as u128) as u64 * step;
        let m = if mu.level == 0 { 0 } else { mu_bucket[small.index_of(y as i128).expect("unit")] };
        counts[((psi + m) % n) as usize] += 1;
    }
    let s = ctx.sum_roots(&counts);
    let size = Float::with_val(ctx.prec(), big.order());
    Ok(Scalar::from_complex(rug::Complex::with_val(ctx.prec(), s.complex() / &size)))
}

/// `epsilon(1/2, mu) = zeta_F(1)^{-1} q^{a/2} G(p^{-a}, mu^{-1})`; equal to 1 when unramified.
pub fn epsilon(ctx: &Context, mu: &TildeCharacter) -> Scalar {
    if mu.is_trivial() {
        return ctx.one();
    }
    if let Some(e) = ctx.cached_eps(mu) {
        return e;
    }
    let p = mu.p;
    let a = mu.level;
    let x = PAdicApprox::new(p, -(a as i64), 1, a).expect("1 is a unit");
    let g = gauss_sum(ctx, &x, &mu.inv()).expect("precision suffices");
    let mut e = g.mul_real(&q_half_power(p, a as i64, ctx.prec()));
    e = e.mul_real(&Float::with_val(ctx.prec(), p - 1)) / Scalar::from_int(p as i64, ctx.prec());
    if ctx.eps_perturbation() != 0.0 {
        e = e.mul_real(&Float::with_val(ctx.prec(), 1.0 + ctx.eps_perturbation()));
    }
    ctx.store_eps(mu, &e);
    e
}

/// The closed form of `G(x, mu)` by case analysis on `v(x)` and `a(mu)`.
pub fn gauss_sum_closed_form(ctx: &Context, x: &PAdicApprox, mu: &TildeCharacter) -> Result<Scalar> {
    let p = mu.p;
    let t = x.valuation();
    let prec = ctx.prec();
    if mu.is_trivial() {
        return Ok(match t {
            t if t >= 0 => ctx.one(),
            -1 => Scalar::from_ratio(-1, p as i64 - 1, prec),
            _ => ctx.zero(),
        });
    }
    if t != -(mu.level as i64) {
        return Ok(ctx.zero());
    }
    // zeta_F(1) |x|^{-1/2} eps(1/2, mu^{-1}) mu^{-1}(unit part of x)
    let unit = x.unit_mod(mu.level)?;
    let zeta = Scalar::from_ratio(p as i64, p as i64 - 1, prec);
    let e = epsilon(ctx, &mu.inv());
    let abs = q_half_power(p, t, prec);
    Ok((zeta * e).mul_real(&abs).mul_root(mu.eval_residue(unit as i128).inv()))
}

/// A unit `v` with `chi(1 + p^{r - r0} u) = psi(v^{-1} p^{-r0} u)` for all `u`, where `r = a(chi)` and
/// `r0 = floor(r/2)`; returned modulo `p^{r0}` (as 1 when `r0 = 0`).
pub fn critical_unit(chi: &TildeCharacter) -> Result<u64> {
    let r = chi.level;
    if r == 0 {
        return Err(Error::Domain("critical unit of an unramified character".into()));
    }
    let r0 = r / 2;
    if r0 == 0 {
        return Ok(1);
    }
    let p = chi.p;
    let m0 = pow_u64(p, r0);
    let mr = pow_u64(p, r);
    let shift = pow_u64(p, r - r0);
    let lhs = |u: u64| chi.eval_residue(((1 + shift as u128 * u as u128) % mr as u128) as i128);
    let target = lhs(1);
    let found = unit_group(p, r0)
        .elements()
        .iter()
        .copied()
        .find(|&v| RootOfUnity::new(mod_inv(v as i128, m0).unwrap() as i128, m0) == target)
        .ok_or_else(|| Error::Internal(format!("no critical unit for {chi}")))?;
    let vinv = mod_inv(found as i128, m0).unwrap();
    for u in 0..m0 {
        let rhs = RootOfUnity::new(vinv as i128 * u as i128, m0);
        if lhs(u) != rhs {
            return Err(Error::Internal(format!("critical unit identity fails for {chi} at u = {u}")));
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Context {
        Context::default()
    }

    /// Conductor by brute force: least `c` with `mu(u) = 1` for every `u = 1 mod p^c`.
    fn brute_conductor(p: u64, a: u32, exps: &[u64]) -> u32 {
        let g = unit_group(p, a);
        let eval = |u: u64| {
            let d = g.dlog(u as i128).unwrap();
            let mut r = RootOfUnity::ONE;
            for ((e, (_, o)), x) in exps.iter().zip(g.generators()).zip(d) {
                r *= RootOfUnity::new((e * x) as i128, *o);
            }
            r
        };
        (0..=a)
            .find(|&c| {
                let mc = pow_u64(p, c);
                g.elements().iter().filter(|&&u| u % mc == 1 % mc).all(|&u| eval(u).is_one())
            })
            .unwrap()
    }

    #[test]
    fn conductors_match_brute_force() {
        for p in [2u64, 3, 5, 7] {
            for a in 0..=4u32 {
                let g = unit_group(p, a);
                for i in 0..g.order() as usize {
                    let e = g.exponents_of_index(i);
                    let c = TildeCharacter::new(p, a, &e).unwrap();
                    assert_eq!(c.conductor(), brute_conductor(p, a, &e), "p={p} a={a} e={e:?}");
                    // Lowering to the conductor does not change values.
                    for &u in g.elements() {
                        let d = g.dlog(u as i128).unwrap();
                        let mut r = RootOfUnity::ONE;
                        for ((x, (_, o)), y) in e.iter().zip(g.generators()).zip(d) {
                            r *= RootOfUnity::new((x * y) as i128, *o);
                        }
                        assert_eq!(c.eval_residue(u as i128), r);
                    }
                }
            }
        }
    }

    #[test]
    fn spot_characters() {
        let quad = TildeCharacter::new(3, 2, &[3]).unwrap();
        assert_eq!(quad.conductor(), 1);
        assert_eq!(quad.eval_residue(2), RootOfUnity::MINUS_ONE);
        let mu = TildeCharacter::new(3, 2, &[1]).unwrap();
        assert_eq!(mu.conductor(), 2);
        assert_eq!(mu.eval_residue(4), RootOfUnity::new(1, 3));
        assert!(TildeCharacter::new(3, 1, &[0]).unwrap().is_trivial());
        assert_eq!(conductor_product(&quad, &quad), 0);
        let nu = TildeCharacter::new(3, 1, &[1]).unwrap();
        assert_eq!(conductor_product(&mu, &nu), 2);
        assert_eq!(conductor_product(&TildeCharacter::trivial(3), &mu), 2);
    }

    #[test]
    fn char_grammar_round_trip() {
        let c: ExtendedCharacter = "3^2:1@1/4".parse().unwrap();
        assert_eq!(c.conductor(), 2);
        assert_eq!(c.at_p(), RootOfUnity::new(1, 4));
        assert_eq!(c.to_string().parse::<ExtendedCharacter>().unwrap(), c);
        let t: ExtendedCharacter = "3^0:0@0/1".parse().unwrap();
        assert!(t.is_unramified());
        let q: ExtendedCharacter = "3^1:3@0/1".parse().unwrap();
        assert_eq!(q.unit_part().eval_residue(2), RootOfUnity::MINUS_ONE);
        let two: ExtendedCharacter = "2^3:1,1".parse().unwrap();
        assert_eq!(two.conductor(), 3);
        for bad in ["3:1", "3^2", "4^1:1", "3^2:1,1", "3^1:1@1/0", "3^1:x"] {
            assert!(bad.parse::<ExtendedCharacter>().is_err(), "{bad}");
        }
    }

    #[test]
    fn gauss_spot_values() {
        let c = ctx();
        let one = TildeCharacter::trivial(3);
        let quad = TildeCharacter::new(3, 1, &[1]).unwrap();
        let x = PAdicApprox::new(3, 1, 1, 3).unwrap();
        assert!(gauss_sum(&c, &x, &one).unwrap().dist(&c.one()) < 1e-30);
        let x = PAdicApprox::new(3, -1, 1, 3).unwrap();
        assert!(gauss_sum(&c, &x, &one).unwrap().dist(&Scalar::from_f64(-0.5, 0.0, 128)) < 1e-30);
        let g = gauss_sum(&c, &x, &quad).unwrap();
        let expect = Scalar::from_real(Float::with_val(128, 3).sqrt() / 2) * Scalar::from_f64(0.0, 1.0, 128);
        assert!(g.dist(&expect) < 1e-30);
        let x = PAdicApprox::new(3, -2, 1, 3).unwrap();
        assert!(gauss_sum(&c, &x, &quad).unwrap().abs() < 1e-30);
    }

    #[test]
    fn quadratic_epsilon_is_i() {
        let c = ctx();
        let quad = TildeCharacter::new(3, 1, &[1]).unwrap();
        assert!(epsilon(&c, &quad).dist(&Scalar::from_f64(0.0, 1.0, 128)) < 1e-30);
        let prod = epsilon(&c, &quad) * epsilon(&c, &quad.inv());
        assert!(prod.dist(&Scalar::from_int(-1, 128)) < 1e-30);
        assert!(epsilon(&c, &TildeCharacter::trivial(5)).dist(&c.one()) < 1e-40);
    }

    #[test]
    fn critical_units() {
        let chi = TildeCharacter::new(3, 2, &[1]).unwrap();
        assert_eq!(critical_unit(&chi).unwrap(), 1);
        let chi = TildeCharacter::new(5, 1, &[1]).unwrap();
        assert_eq!(critical_unit(&chi).unwrap(), 1);
        // Exhaustive oracle at p = 5, conductor 2.
        for chi in characters_of_conductor(5, 2) {
            let v = critical_unit(&chi).unwrap();
            let lhs = chi.eval_residue(6);
            let rhs = RootOfUnity::new(mod_inv(v as i128, 5).unwrap() as i128, 5);
            assert_eq!(lhs, rhs);
            let others = (1..5).filter(|&w| RootOfUnity::new(mod_inv(w, 5).unwrap() as i128, 5) == lhs).count();
            assert_eq!(others, 1);
        }
    }

    #[test]
    fn enumeration_sizes() {
        assert_eq!(characters_up_to(3, 2).len(), 6);
        assert_eq!(characters_of_conductor(3, 2).len(), 4);
        assert_eq!(characters_of_conductor(2, 1).len(), 0);
        assert_eq!(characters_of_conductor(2, 3).len(), 2);
        assert_eq!(characters_up_to(5, 0), vec![TildeCharacter::trivial(5)]);
        for (i, c) in characters_up_to(7, 2).iter().enumerate() {
            assert_eq!(c.index_at_level(2), i);
        }
    }
}
