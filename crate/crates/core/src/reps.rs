//! Generic irreducible representations of `GL(2, Q_p)` with central character in `X~`:
//! principal series `chi1 ⊞ chi2`, twists `xi St` of the Steinberg representation, and
//! supercuspidals described by an oracle of twisted conductors and epsilon factors.
//!
//! For each representation this module supplies the data consumed by the
//! functional-equation solver: the diagonal values of the newform, and for every
//! twist `mu` in `X~` the conductor `a(mu pi)`, the root number `eps(1/2, mu pi)`
//! and the Satake parameters of `L(s, mu pi)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::characters::{characters_up_to, ExtendedCharacter, TildeCharacter};
use crate::context::Context;
use crate::error::{Error, Result};
use crate::numerics::{q_half_power, RootOfUnity, Scalar};
use crate::padic::pow_u64;

/// A Satake parameter `phase * q^{half_power/2}`; kept symbolic so repeated roots compare exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EulerRoot {
    pub phase: RootOfUnity,
    pub half_power: i32,
}

impl EulerRoot {
    pub fn new(phase: RootOfUnity, half_power: i32) -> Self {
        EulerRoot { phase, half_power }
    }

    pub fn value(&self, q: u64, prec: u32) -> Scalar {
        self.phase.embed(prec).mul_real(&q_half_power(q, self.half_power as i64, prec))
    }

    pub fn modulus(&self, q: u64) -> f64 {
        (q as f64).powf(self.half_power as f64 / 2.0)
    }
}

/// The data of `mu pi` entering the functional equation.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistData {
    /// `a(mu pi)`.
    pub a: u32,
    /// `eps(1/2, mu pi)`.
    pub eps: Scalar,
    /// Satake parameters of `L(s, mu pi)`.
    pub l_num: Vec<EulerRoot>,
    /// Satake parameters of `L(s, mu^{-1} omega^{-1} pi)`, the factor evaluated at `1 - s`.
    pub l_den: Vec<EulerRoot>,
}

/// `W(a(p^a))` for `a >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagonalProfile {
    /// `rho^a`.
    Geometric(EulerRoot),
    /// 1 at `a = 0`, zero afterwards.
    Delta,
}

/// One twist entry of a supercuspidal oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleEntry {
    pub a_mu_pi: u32,
    pub eps: Scalar,
}

/// Twisted conductors and root numbers of a supercuspidal representation.
///
/// Keys cover every `mu` in `X~` with `a(mu) <= n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupercuspidalOracle {
    p: u64,
    n: u32,
    omega: TildeCharacter,
    twists: BTreeMap<TildeCharacter, OracleEntry>,
    synthetic: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Num {
    Float(f64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
struct OracleTwistFile {
    mu: String,
    a_mu_pi: u32,
    eps: [Num; 2],
}

#[derive(Serialize, Deserialize)]
struct OracleFile {
    p: u64,
    n: u32,
    omega: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    synthetic: bool,
    twists: Vec<OracleTwistFile>,
}

fn num_to_scalar(re: &Num, im: &Num, prec: u32) -> Result<Scalar> {
    let s = |x: &Num| match x {
        Num::Float(f) => format!("{f:e}"),
        Num::Text(t) => t.clone(),
    };
    Scalar::parse(&s(re), &s(im), prec)
}

impl SupercuspidalOracle {
    pub fn new(p: u64, n: u32, omega: TildeCharacter, twists: BTreeMap<TildeCharacter, OracleEntry>) -> Result<Self> {
        let o = SupercuspidalOracle { p, n, omega, twists, synthetic: false };
        o.validate()?;
        Ok(o)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidRepresentation(format!("supercuspidal conductor {} < 2", self.n)));
        }
        if self.omega.p() != self.p {
            return Err(Error::InvalidRepresentation("central character of a different prime".into()));
        }
        let m = self.omega.conductor();
        if 2 * m > self.n {
            return Err(Error::Tunnell { n: self.n, m });
        }
        for mu in characters_up_to(self.p, self.n) {
            let e = self.twists.get(&mu).ok_or_else(|| Error::MissingOracleKey(mu.to_string()))?;
            if (e.eps.abs() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidRepresentation(format!("|eps(1/2, mu pi)| != 1 for mu = {mu}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, prec: u32) -> Result<Self> {
        let f: OracleFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let omega: TildeCharacter = f.omega.parse()?;
        let mut twists = BTreeMap::new();
        for t in &f.twists {
            let mu: TildeCharacter = t.mu.parse()?;
            let eps = num_to_scalar(&t.eps[0], &t.eps[1], prec)?;
            twists.insert(mu, OracleEntry { a_mu_pi: t.a_mu_pi, eps });
        }
        let mut o = Self::new(f.p, f.n, omega, twists)?;
        o.synthetic = f.synthetic;
        Ok(o)
    }

    pub fn to_json(&self) -> String {
        let twists = self
            .twists
            .iter()
            .map(|(mu, e)| {
                let (re, im) = e.eps.to_decimal_strings();
                OracleTwistFile { mu: mu.to_string(), a_mu_pi: e.a_mu_pi, eps: [Num::Text(re), Num::Text(im)] }
            })
            .collect();
        let f = OracleFile { p: self.p, n: self.n, omega: self.omega.to_string(), synthetic: self.synthetic, twists };
        serde_json::to_string_pretty(&f).expect("oracle serializes")
    }

    /// Structurally valid data with random root numbers, not attached to any representation.
    ///
    /// `a(mu pi) = n` when `a(mu) <= n/2` and `2 a(mu)` otherwise; root numbers are random
    /// roots of unity subject to `eps(1/2, mu pi) eps(1/2, mu^{-1} omega^{-1} pi) = omega(-1)`.
    pub fn synthetic(ctx: &Context, p: u64, n: u32, omega: TildeCharacter, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sign = omega.sign();
        let mut twists: BTreeMap<TildeCharacter, OracleEntry> = BTreeMap::new();
        let a_of = |mu: &TildeCharacter| if 2 * mu.conductor() <= n { n } else { 2 * mu.conductor() };
        for mu in characters_up_to(p, n) {
            if twists.contains_key(&mu) {
                continue;
            }
            let partner = mu.inv().mul(&omega.inv());
            let e = if partner == mu {
                // eps^2 = omega(-1)
                let root = RootOfUnity::new(sign.num() as i128, 2 * sign.order());
                if rng.gen_bool(0.5) {
                    root
                } else {
                    root * RootOfUnity::MINUS_ONE
                }
            } else {
                RootOfUnity::new(rng.gen_range(0..360), 360)
            };
            let a = a_of(&mu);
            twists.insert(mu.clone(), OracleEntry { a_mu_pi: a, eps: e.embed(ctx.prec()) });
            if partner != mu {
                let pe = sign * e.inv();
                twists.insert(partner.clone(), OracleEntry { a_mu_pi: a_of(&partner), eps: pe.embed(ctx.prec()) });
            }
        }
        let mut o = SupercuspidalOracle::new(p, n, omega, twists)?;
        o.synthetic = true;
        Ok(o)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn omega(&self) -> &TildeCharacter {
        &self.omega
    }

    pub fn is_synthetic(&self) -> bool {
        self.synthetic
    }

    pub fn entry(&self, mu: &TildeCharacter) -> Result<&OracleEntry> {
        self.twists.get(mu).ok_or_else(|| Error::MissingOracleKey(mu.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&TildeCharacter, &OracleEntry)> {
        self.twists.iter()
    }

    /// Oracle of the contragredient: `mu pi~ = (mu omega^{-1}) pi`.
    pub fn contragredient(&self) -> Result<Self> {
        let w = self.omega.inv();
        let mut twists = BTreeMap::new();
        for mu in self.twists.keys() {
            let e = self.entry(&mu.mul(&w))?.clone();
            twists.insert(mu.clone(), e);
        }
        Ok(SupercuspidalOracle { p: self.p, n: self.n, omega: w, twists, synthetic: self.synthetic })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RepKind {
    /// Normalized with `a(chi1) >= a(chi2)`.
    PrincipalSeries {
        chi1: ExtendedCharacter,
        chi2: ExtendedCharacter,
    },
    Steinberg {
        xi: ExtendedCharacter,
    },
    Supercuspidal(Arc<SupercuspidalOracle>),
}

/// A generic irreducible unitary representation with `omega_pi(p) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    p: u64,
    n: u32,
    m: u32,
    omega: TildeCharacter,
    kind: RepKind,
}

impl Representation {
    pub fn principal_series(chi1: ExtendedCharacter, chi2: ExtendedCharacter) -> Result<Self> {
        if chi1.p() != chi2.p() {
            return Err(Error::InvalidRepresentation("inducing characters of different primes".into()));
        }
        if !(chi1.at_p() * chi2.at_p()).is_one() {
            return Err(Error::InvalidRepresentation(format!(
                "central character is not trivial at p: chi1(p) chi2(p) = {}",
                chi1.at_p() * chi2.at_p()
            )));
        }
        let (chi1, chi2) = if chi1.conductor() >= chi2.conductor() { (chi1, chi2) } else { (chi2, chi1) };
        let n = chi1.conductor() + chi2.conductor();
        if n == 0 {
            return Err(Error::InvalidRepresentation("unramified principal series has n = 0".into()));
        }
        let omega = chi1.unit_part().mul(chi2.unit_part());
        Ok(Representation {
            p: chi1.p(),
            n,
            m: omega.conductor(),
            omega,
            kind: RepKind::PrincipalSeries { chi1, chi2 },
        })
    }

    pub fn steinberg(xi: ExtendedCharacter) -> Result<Self> {
        if !xi.at_p().pow(2).is_one() {
            return Err(Error::InvalidRepresentation(format!(
                "central character is not trivial at p: xi(p)^2 = {}",
                xi.at_p().pow(2)
            )));
        }
        let n = (2 * xi.conductor()).max(1);
        let omega = xi.unit_part().pow(2);
        Ok(Representation { p: xi.p(), n, m: omega.conductor(), omega, kind: RepKind::Steinberg { xi } })
    }

    pub fn supercuspidal(oracle: SupercuspidalOracle) -> Result<Self> {
        oracle.validate()?;
        let omega = oracle.omega.clone();
        Ok(Representation {
            p: oracle.p,
            n: oracle.n,
            m: omega.conductor(),
            omega,
            kind: RepKind::Supercuspidal(Arc::new(oracle)),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.p
    }

    /// Conductor exponent `a(pi)`.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Conductor exponent of the central character.
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn omega(&self) -> &TildeCharacter {
        &self.omega
    }

    pub fn kind(&self) -> &RepKind {
        &self.kind
    }

    pub fn type_tag(&self) -> &'static str {
        match self.kind {
            RepKind::PrincipalSeries { .. } => "ps",
            RepKind::Steinberg { .. } => "st",
            RepKind::Supercuspidal(_) => "sc",
        }
    }

    /// `(a(chi1), a(chi2))` for principal series.
    pub fn inducing_conductors(&self) -> Option<(u32, u32)> {
        match &self.kind {
            RepKind::PrincipalSeries { chi1, chi2 } => Some((chi1.conductor(), chi2.conductor())),
            _ => None,
        }
    }

    /// Whether `L(s, pi) = 1`.
    pub fn has_trivial_l_factor(&self) -> bool {
        self.satake(&TildeCharacter::trivial(self.p)).is_empty()
    }

    /// Satake parameters of `L(s, mu pi)`.
    pub fn satake(&self, mu: &TildeCharacter) -> Vec<EulerRoot> {
        match &self.kind {
            RepKind::PrincipalSeries { chi1, chi2 } => [chi1, chi2]
                .into_iter()
                .map(|c| c.twist(mu))
                .filter(|c| c.is_unramified())
                .map(|c| EulerRoot::new(c.at_p(), 0))
                .collect(),
            RepKind::Steinberg { xi } => {
                let t = xi.twist(mu);
                if t.is_unramified() {
                    vec![EulerRoot::new(t.at_p(), -1)]
                } else {
                    vec![]
                }
            }
            RepKind::Supercuspidal(_) => vec![],
        }
    }

    /// Conductor, root number and L-data of `mu pi`.
    pub fn twist_data(&self, ctx: &Context, mu: &TildeCharacter) -> Result<TwistData> {
        let (a, eps) = match &self.kind {
            RepKind::PrincipalSeries { chi1, chi2 } => {
                let c1 = chi1.twist(mu);
                let c2 = chi2.twist(mu);
                (c1.conductor() + c2.conductor(), c1.epsilon(ctx) * c2.epsilon(ctx))
            }
            RepKind::Steinberg { xi } => {
                let t = xi.twist(mu);
                if t.is_unramified() {
                    (1, Scalar::one(ctx.prec()).mul_root(t.at_p() * RootOfUnity::MINUS_ONE))
                } else {
                    let e = t.epsilon(ctx);
                    (2 * t.conductor(), &e * &e)
                }
            }
            RepKind::Supercuspidal(o) => {
                let e = o.entry(mu)?;
                (e.a_mu_pi, e.eps.clone())
            }
        };
        let l_num = self.satake(mu);
        let l_den = self.satake(&mu.inv().mul(&self.omega.inv()));
        Ok(TwistData { a, eps, l_num, l_den })
    }

    /// `eps(1/2, pi)`.
    pub fn root_number(&self, ctx: &Context) -> Result<Scalar> {
        Ok(self.twist_data(ctx, &TildeCharacter::trivial(self.p))?.eps)
    }

    /// `W(a(p^a))` (or `W*(a(p^a))` when `conjugate`) for `a >= 0`.
    pub fn diagonal_profile(&self, conjugate: bool) -> DiagonalProfile {
        match &self.kind {
            RepKind::Steinberg { xi } if xi.is_unramified() => {
                DiagonalProfile::Geometric(EulerRoot::new(xi.at_p(), -2))
            }
            RepKind::PrincipalSeries { chi1, chi2 } if chi2.is_unramified() => {
                let z = if conjugate { chi2.at_p() } else { chi1.at_p() };
                DiagonalProfile::Geometric(EulerRoot::new(z, -1))
            }
            _ => DiagonalProfile::Delta,
        }
    }

    /// `W(a(p^t v))`, or `W*(a(p^t v))` when `conjugate`, for a unit residue `v`.
    pub fn diagonal_whittaker(&self, ctx: &Context, t: i64, v: i128, conjugate: bool) -> Scalar {
        let prec = ctx.prec();
        if t < 0 {
            return ctx.zero();
        }
        match (&self.kind, self.diagonal_profile(conjugate)) {
            (RepKind::PrincipalSeries { chi1, .. }, DiagonalProfile::Geometric(rho)) => {
                let unit = if conjugate { RootOfUnity::ONE } else { chi1.unit_part().eval_residue(v) };
                rho.value(self.q(), prec).pow(t).mul_root(unit)
            }
            (_, DiagonalProfile::Geometric(rho)) => rho.value(self.q(), prec).pow(t),
            (_, DiagonalProfile::Delta) => {
                if t != 0 {
                    ctx.zero()
                } else if conjugate {
                    ctx.one()
                } else {
                    ctx.one().mul_root(self.omega.eval_residue(v))
                }
            }
        }
    }

    /// `<W, W>` computed from the diagonal values.
    pub fn whittaker_norm(&self) -> f64 {
        match self.diagonal_profile(false) {
            DiagonalProfile::Delta => 1.0,
            DiagonalProfile::Geometric(rho) => {
                let r = rho.modulus(self.q());
                1.0 / (1.0 - r * r)
            }
        }
    }

    pub fn contragredient(&self) -> Result<Representation> {
        match &self.kind {
            RepKind::PrincipalSeries { chi1, chi2 } => Representation::principal_series(chi1.inv(), chi2.inv()),
            RepKind::Steinberg { xi } => Representation::steinberg(xi.inv()),
            RepKind::Supercuspidal(o) => {
                let c = o.contragredient()?;
                Ok(Representation {
                    p: self.p,
                    n: self.n,
                    m: self.m,
                    omega: c.omega.clone(),
                    kind: RepKind::Supercuspidal(Arc::new(c)),
                })
            }
        }
    }

    /// Number of units modulo `p^k`.
    pub fn units_mod(&self, k: u32) -> u64 {
        if k == 0 {
            1
        } else {
            pow_u64(self.p, k - 1) * (self.p - 1)
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RepKind::PrincipalSeries { chi1, chi2 } => write!(f, "ps({chi1};{chi2})"),
            RepKind::Steinberg { xi } => write!(f, "st({xi})"),
            RepKind::Supercuspidal(o) => write!(f, "sc({};{})", o.n, o.omega),
        }
    }
}

/// A family of representations for scans and checks, enumerated in a fixed order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    pub p: u64,
    pub n_max: u32,
    pub principal_series: bool,
    pub steinberg: bool,
    pub a1_max: Option<u32>,
    pub a2_max: Option<u32>,
    pub xi_max: Option<u32>,
}

impl FamilySpec {
    pub fn all(p: u64, n_max: u32) -> Self {
        FamilySpec { p, n_max, principal_series: true, steinberg: true, a1_max: None, a2_max: None, xi_max: None }
    }
}

/// Principal series `chi1 ⊞ chi2` with `chi1(p) = chi2(p) = 1`, one per isomorphism class,
/// then Steinberg twists `xi St` with `xi(p) = ±1`; sorted by `n`, type, conductors and
/// character indices.
pub fn family(spec: &FamilySpec) -> Result<Vec<Representation>> {
    let p = spec.p;
    let mut out: Vec<(u32, u8, u32, u32, usize, usize, Representation)> = vec![];
    if spec.principal_series {
        let a1_max = spec.a1_max.unwrap_or(spec.n_max).min(spec.n_max);
        for a1 in 1..=a1_max {
            let a2_max = spec.a2_max.unwrap_or(a1).min(a1).min(spec.n_max - a1);
            for a2 in 0..=a2_max {
                let c1 = crate::characters::characters_of_conductor(p, a1);
                let c2 = crate::characters::characters_of_conductor(p, a2);
                for (i, x) in c1.iter().enumerate() {
                    for (j, y) in c2.iter().enumerate() {
                        if a1 == a2 && j < i {
                            continue;
                        }
                        let rep = Representation::principal_series(
                            ExtendedCharacter::new(x.clone(), RootOfUnity::ONE),
                            ExtendedCharacter::new(y.clone(), RootOfUnity::ONE),
                        )?;
                        out.push((a1 + a2, 0, a1, a2, i, j, rep));
                    }
                }
            }
        }
    }
    if spec.steinberg {
        let xi_max = spec.xi_max.unwrap_or(spec.n_max / 2);
        for a in 0..=xi_max {
            if (2 * a).max(1) > spec.n_max {
                break;
            }
            for (i, x) in crate::characters::characters_of_conductor(p, a).iter().enumerate() {
                for (j, z) in [RootOfUnity::ONE, RootOfUnity::MINUS_ONE].into_iter().enumerate() {
                    let rep = Representation::steinberg(ExtendedCharacter::new(x.clone(), z))?;
                    out.push((rep.n(), 1, a, 0, i, j, rep));
                }
            }
        }
    }
    out.sort_by_key(|a| (a.0, a.1, a.2, a.3, a.4, a.5));
    Ok(out.into_iter().map(|e| e.6).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(s: &str) -> ExtendedCharacter {
        s.parse().unwrap()
    }

    #[test]
    fn invariants_of_basic_types() {
        let ps = Representation::principal_series(ch("3^1:1@0/1"), ch("3^0:0@0/1")).unwrap();
        assert_eq!((ps.n(), ps.m()), (1, 1));
        let st = Representation::steinberg(ch("3^0:0@0/1")).unwrap();
        assert_eq!((st.n(), st.m()), (1, 0));
        let st2 = Representation::steinberg(ch("5^1:1@1/2")).unwrap();
        assert_eq!((st2.n(), st2.m()), (2, 1));
        // Canonical order puts the larger conductor first.
        let swapped = Representation::principal_series(ch("3^0:0@1/3"), ch("3^2:1@2/3")).unwrap();
        assert_eq!(swapped.inducing_conductors(), Some((2, 0)));
    }

    #[test]
    fn rejections() {
        assert!(Representation::principal_series(ch("3^1:1@1/3"), ch("3^0:0@0/1")).is_err());
        assert!(Representation::principal_series(ch("3^0:0@1/3"), ch("3^0:0@2/3")).is_err());
        assert!(Representation::steinberg(ch("3^0:0@1/4")).is_err());
        let ctx = Context::default();
        let omega: TildeCharacter = "3^2:1".parse().unwrap();
        assert!(matches!(SupercuspidalOracle::synthetic(&ctx, 3, 3, omega, 1), Err(Error::Tunnell { n: 3, m: 2 })));
        let quad: TildeCharacter = "3^1:1".parse().unwrap();
        assert!(SupercuspidalOracle::synthetic(&ctx, 3, 2, quad, 1).is_ok());
    }

    #[test]
    fn steinberg_twist_data() {
        let ctx = Context::default();
        let st = Representation::steinberg(ch("3^0:0@0/1")).unwrap();
        let d = st.twist_data(&ctx, &TildeCharacter::trivial(3)).unwrap();
        assert_eq!(d.a, 1);
        assert!(d.eps.dist(&Scalar::from_int(-1, 128)) < 1e-30);
        assert_eq!(d.l_num, vec![EulerRoot::new(RootOfUnity::ONE, -1)]);
        assert_eq!(d.l_den, d.l_num);
    }

    #[test]
    fn principal_series_twist_data() {
        let ctx = Context::default();
        let ps = Representation::principal_series(ch("3^1:1@0/1"), ch("3^0:0@0/1")).unwrap();
        let d = ps.twist_data(&ctx, &TildeCharacter::trivial(3)).unwrap();
        assert_eq!(d.a, 1);
        assert!(d.eps.dist(&Scalar::from_f64(0.0, 1.0, 128)) < 1e-30);
        assert_eq!(d.l_num.len(), 1);
        let quad: TildeCharacter = "3^1:1".parse().unwrap();
        let d = ps.twist_data(&ctx, &quad).unwrap();
        assert_eq!(d.a, 1);
        assert_eq!(d.l_num.len(), 1);
        assert!(d.l_den.len() == 1);
    }

    #[test]
    fn contragredient_is_an_involution() {
        let ps = Representation::principal_series(ch("5^2:3@1/4"), ch("5^1:1@3/4")).unwrap();
        let back = ps.contragredient().unwrap().contragredient().unwrap();
        assert_eq!(ps, back);
        let c = ps.contragredient().unwrap();
        assert_eq!((c.n(), c.m()), (ps.n(), ps.m()));
        let st = Representation::steinberg(ch("3^0:0@0/1")).unwrap();
        assert_eq!(st.contragredient().unwrap(), st);
    }

    #[test]
    fn diagonal_cases() {
        let ctx = Context::default();
        let st = Representation::steinberg(ch("3^0:0@0/1")).unwrap();
        assert!(st.diagonal_whittaker(&ctx, 2, 1, false).dist(&Scalar::from_ratio(1, 9, 128)) < 1e-30);
        let ps = Representation::principal_series(ch("3^1:1@0/1"), ch("3^0:0@0/1")).unwrap();
        assert!(ps.diagonal_whittaker(&ctx, -1, 1, false).is_zero());
        let both = Representation::principal_series(ch("5^2:1@0/1"), ch("5^1:1@0/1")).unwrap();
        let w = both.omega().eval_residue(2);
        assert!(both.diagonal_whittaker(&ctx, 0, 2, false).dist(&w.embed(128)) < 1e-30);
        assert!(both.diagonal_whittaker(&ctx, 0, 2, true).dist(&ctx.one()) < 1e-30);
        assert!(both.diagonal_whittaker(&ctx, 1, 2, false).is_zero());
    }

    #[test]
    fn family_sizes() {
        // p = 3, n <= 2: ps with (a1, a2) in {(1,0), (1,1), (2,0)} and st with a(xi) in {0, 1}.
        let f = family(&FamilySpec::all(3, 2)).unwrap();
        let ps = f.iter().filter(|r| r.type_tag() == "ps").count();
        let st = f.iter().filter(|r| r.type_tag() == "st").count();
        // 1 + 1 (quad ⊞ quad up to order) + 4
        assert_eq!(ps, 1 + 1 + 4);
        assert_eq!(st, 2 + 2);
        assert!(f.windows(2).all(|w| w[0].n() <= w[1].n()));
        assert!(family(&FamilySpec::all(2, 1)).unwrap().iter().all(|r| r.type_tag() == "st"));
    }

    #[test]
    fn oracle_round_trip_and_pairing() {
        let ctx = Context::default();
        let quad: TildeCharacter = "5^1:2".parse().unwrap();
        let o = SupercuspidalOracle::synthetic(&ctx, 5, 3, quad.clone(), 7).unwrap();
        let back = SupercuspidalOracle::from_json(&o.to_json(), 128).unwrap();
        for (mu, e) in o.entries() {
            let f = back.entry(mu).unwrap();
            assert_eq!(e.a_mu_pi, f.a_mu_pi);
            assert!(e.eps.dist(&f.eps) < 1e-30);
            let partner = o.entry(&mu.inv().mul(&quad.inv())).unwrap();
            let prod = &e.eps * &partner.eps;
            assert!(prod.dist(&quad.sign().embed(128)) < 1e-30);
            assert_eq!(e.a_mu_pi, partner.a_mu_pi);
        }
        let mut text = o.to_json();
        text = text.replacen("\"mu\": \"5^0:0\"", "\"mu\": \"5^3:1\"", 1);
        assert!(SupercuspidalOracle::from_json(&text, 128).is_err());
    }
}
