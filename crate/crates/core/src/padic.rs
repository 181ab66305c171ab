//! Bookkeeping for `F = Q_p`: truncated p-adic numbers, the additive character
//! `psi` (trivial exactly on `Z_p`), and the unit groups `(Z/p^a)^x` with
//! canonical generators and discrete-log tables.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rug::ops::{Pow, RemRounding};
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::RootOfUnity;

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `p^k`, panicking on overflow (all moduli here are tiny).
pub fn pow_u64(p: u64, k: u32) -> u64 {
    p.checked_pow(k).expect("p-adic modulus overflows u64")
}

pub fn mod_pow(b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u128;
    let mut base = (b % m) as u128;
    let m128 = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * base % m128;
        }
        base = base * base % m128;
        e >>= 1;
    }
    r as u64
}

/// Inverse of `a` modulo `m`, or `None` when not coprime.
pub fn mod_inv(a: i128, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let m = m as i128;
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m) as u64)
}

/// `v_p(x)` for a nonzero integer.
fn int_valuation(x: &Integer, p: u64) -> (i64, Integer) {
    let mut v = 0;
    let mut y = x.clone();
    let pi = Integer::from(p);
    while y.is_divisible(&pi) {
        y /= &pi;
        v += 1;
    }
    (v, y)
}

/// The local field `Q_p` (residue cardinality `q = p`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LocalField {
    p: u64,
}

impl LocalField {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(LocalField { p })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.p
    }

    /// `zeta_F(s) = (1 - q^{-s})^{-1}` for `s >= 1`.
    pub fn zeta(&self, s: u32) -> Rational {
        let qs = Integer::from(self.p).pow(s);
        Rational::from((qs.clone(), qs - 1u32))
    }
}

/// `p^t * u * (1 + O(p^k))` with `u` a unit residue modulo `p^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PAdicApprox {
    p: u64,
    t: i64,
    u: u64,
    k: u32,
}

impl PAdicApprox {
    pub fn new(p: u64, t: i64, u: i128, k: u32) -> Result<Self> {
        let m = pow_u64(p, k);
        let u = u.rem_euclid(m as i128) as u64;
        if k > 0 && u.is_multiple_of(p) {
            return Err(Error::Malformed(format!("{u} is not a unit mod {p}")));
        }
        Ok(PAdicApprox { p, t, u, k })
    }

    /// A unit `u` known modulo `p^k`.
    pub fn unit(p: u64, u: i128, k: u32) -> Result<Self> {
        Self::new(p, 0, u, k)
    }

    pub fn decompose_rational(x: &Rational, p: u64, k: u32) -> Result<Self> {
        if *x == 0 {
            return Err(Error::NoValuation);
        }
        let (vn, un) = int_valuation(x.numer(), p);
        let (vd, ud) = int_valuation(x.denom(), p);
        let m = pow_u64(p, k);
        let modulus = Integer::from(m);
        let un = un.rem_euc(&modulus);
        let ud = ud.rem_euc(&modulus);
        let inv = mod_inv(ud.to_i128().unwrap(), m).ok_or_else(|| Error::Internal("denominator not a unit".into()))?;
        let u = (un.to_u128().unwrap() * inv as u128 % m as u128) as i128;
        Self::new(p, vn - vd, u, k)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn valuation(&self) -> i64 {
        self.t
    }

    pub fn unit_residue(&self) -> u64 {
        self.u
    }

    pub fn precision(&self) -> u32 {
        self.k
    }

    /// The unit part modulo `p^j`.
    pub fn unit_mod(&self, j: u32) -> Result<u64> {
        if j > self.k {
            return Err(Error::Precision { needed: j as i64, available: self.k as i64 });
        }
        Ok(self.u % pow_u64(self.p, j))
    }

    pub fn with_precision(&self, k: u32) -> Result<Self> {
        let u = self.unit_mod(k)?;
        Ok(PAdicApprox { p: self.p, t: self.t, u, k })
    }

    pub fn mul(&self, other: &PAdicApprox) -> PAdicApprox {
        let k = self.k.min(other.k);
        let m = pow_u64(self.p, k);
        let u = (self.u as u128 * other.u as u128 % m as u128) as u64;
        PAdicApprox { p: self.p, t: self.t + other.t, u, k }
    }

    pub fn neg(&self) -> PAdicApprox {
        let m = pow_u64(self.p, self.k);
        PAdicApprox { u: (m - self.u % m) % m, ..*self }
    }

    pub fn inv(&self) -> PAdicApprox {
        let m = pow_u64(self.p, self.k);
        let u = mod_inv(self.u as i128, m).expect("unit residue is invertible");
        PAdicApprox { p: self.p, t: -self.t, u, k: self.k }
    }

    /// Multiply by `p^s`.
    pub fn shift(&self, s: i64) -> PAdicApprox {
        PAdicApprox { t: self.t + s, ..*self }
    }
}

/// `psi(x) = e^{2 pi i {x}_p}`; requires the unit part modulo `p^{-t}` when `t < 0`.
pub fn psi_eval(x: &PAdicApprox) -> Result<RootOfUnity> {
    if x.t >= 0 {
        return Ok(RootOfUnity::ONE);
    }
    let depth = (-x.t) as u32;
    let u = x.unit_mod(depth).map_err(|_| Error::Precision { needed: depth as i64, available: x.k as i64 })?;
    Ok(RootOfUnity::new(u as i128, pow_u64(x.p, depth)))
}

/// `psi` of an exact rational.
pub fn psi_rational(x: &Rational, p: u64) -> RootOfUnity {
    if *x == 0 {
        return RootOfUnity::ONE;
    }
    let (vd, ud) = int_valuation(x.denom(), p);
    if vd == 0 {
        return RootOfUnity::ONE;
    }
    let m = pow_u64(p, vd as u32);
    let modulus = Integer::from(m);
    let a = Integer::from(x.numer().rem_euc(&modulus)).to_i128().unwrap();
    let b = ud.rem_euc(&modulus).to_i128().unwrap();
    let binv = mod_inv(b, m).expect("denominator prime-to-p part is a unit");
    RootOfUnity::new(a * binv as i128, m)
}

/// Least `g` generating `(Z/p^2)^x` (hence every `(Z/p^a)^x`) for odd `p`.
pub fn least_primitive_root_mod_p2(p: u64) -> u64 {
    let m = p * p;
    let phi = p * (p - 1);
    let factors = prime_factors(phi);
    (2..m)
        .find(|&g| g % p != 0 && factors.iter().all(|&l| mod_pow(g, phi / l, m) != 1))
        .expect("cyclic group has a generator")
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// `(Z/p^a)^x` as a product of cyclic groups on canonical generators.
///
/// Elements are indexed by the flat index `e_0 + ord_0 * e_1` of their exponent vector.
#[derive(Debug)]
pub struct UnitGroup {
    p: u64,
    a: u32,
    modulus: u64,
    gens: Vec<(u64, u64)>,
    index_of: Vec<u32>,
    elements: Vec<u64>,
}

const NOT_A_UNIT: u32 = u32::MAX;

impl UnitGroup {
    fn build(p: u64, a: u32) -> UnitGroup {
        let modulus = pow_u64(p, a);
        let gens: Vec<(u64, u64)> = if a == 0 || (p == 2 && a == 1) {
            vec![]
        } else if p == 2 && a == 2 {
            vec![(3, 2)]
        } else if p == 2 {
            vec![(modulus - 1, 2), (5, modulus / 8 * 2)]
        } else {
            let g = least_primitive_root_mod_p2(p) % modulus;
            vec![(g, modulus / p * (p - 1))]
        };
        let order: u64 = gens.iter().map(|g| g.1).product();
        let mut index_of = vec![NOT_A_UNIT; modulus as usize];
        let mut elements = vec![0u64; order as usize];
        for (i, slot) in elements.iter_mut().enumerate() {
            let mut rest = i as u64;
            let mut x = 1 % modulus;
            for &(g, o) in &gens {
                x = (x as u128 * mod_pow(g, rest % o, modulus) as u128 % modulus as u128) as u64;
                rest /= o;
            }
            assert_eq!(index_of[x as usize], NOT_A_UNIT, "generators are not independent");
            index_of[x as usize] = i as u32;
            *slot = x;
        }
        UnitGroup { p, a, modulus, gens, index_of, elements }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> u32 {
        self.a
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `(residue, order)` for each canonical generator.
    pub fn generators(&self) -> &[(u64, u64)] {
        &self.gens
    }

    pub fn order(&self) -> u64 {
        self.elements.len() as u64
    }

    /// Units in flat-index order.
    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn index_of(&self, u: i128) -> Option<usize> {
        let r = u.rem_euclid(self.modulus as i128) as usize;
        match self.index_of[r] {
            NOT_A_UNIT => None,
            i => Some(i as usize),
        }
    }

    pub fn exponents_of_index(&self, mut i: usize) -> Vec<u64> {
        self.gens
            .iter()
            .map(|&(_, o)| {
                let e = i as u64 % o;
                i /= o as usize;
                e
            })
            .collect()
    }

    pub fn dlog(&self, u: i128) -> Option<Vec<u64>> {
        self.index_of(u).map(|i| self.exponents_of_index(i))
    }

    pub fn element(&self, exps: &[u64]) -> u64 {
        let mut x = 1 % self.modulus;
        for (&(g, o), &e) in self.gens.iter().zip(exps) {
            x = (x as u128 * mod_pow(g, e % o, self.modulus) as u128 % self.modulus as u128) as u64;
        }
        x
    }
}

type UnitGroupMemo = RwLock<HashMap<(u64, u32), Arc<UnitGroup>>>;

static UNIT_GROUPS: OnceLock<UnitGroupMemo> = OnceLock::new();

/// The memoised unit group `(Z/p^a)^x`.
pub fn unit_group(p: u64, a: u32) -> Arc<UnitGroup> {
    let memo = UNIT_GROUPS.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(g) = memo.read().expect("unit group memo poisoned").get(&(p, a)) {
        return g.clone();
    }
    let built = Arc::new(UnitGroup::build(p, a));
    memo.write().expect("unit group memo poisoned").entry((p, a)).or_insert(built).clone()
}
