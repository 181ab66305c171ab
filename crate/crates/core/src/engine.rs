//! Values of the normalized newform on the coset representatives
//! `g_{t,k,v} = a(p^t) w n(p^{-k} v)`.
//!
//! For fixed `k` the value is a finite Fourier sum `sum_mu c_{t,k}(mu) mu(v)` over
//! `mu` in `X~(k)`. Each coefficient sequence `t -> c_{t,k}(mu)` is read off a rational
//! function in `X = q^{-s}` obtained from the local functional equation of `mu pi`,
//! whose right side only needs the diagonal values `W(a(p^a))` and Gauss sums.
//! Levels `k > n/2` are reached through the Atkin-Lehner relation with the contragredient.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::characters::critical_unit;
use crate::characters::{characters_up_to, gauss_sum, TildeCharacter};
use crate::context::Context;
use crate::error::{Error, Result};
use crate::numerics::{q_half_power, series_expand, LaurentPoly, RationalFn, RootOfUnity, Scalar};
use crate::padic::{mod_inv, pow_u64, psi_eval, psi_rational, unit_group, PAdicApprox};
use crate::reps::{DiagonalProfile, RepKind, Representation, TwistData};

/// Default truncation `t_max = 2n + 20`.
pub fn default_t_max(n: u32) -> i64 {
    2 * n as i64 + 20
}

/// Which of `pi`, `pi~` a value refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Pi,
    Contragredient,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Pi => Side::Contragredient,
            Side::Contragredient => Side::Pi,
        }
    }

    fn idx(self) -> usize {
        match self {
            Side::Pi => 0,
            Side::Contragredient => 1,
        }
    }
}

/// The coset `g_{t,k,v}`; `v` is kept modulo `p^n`, which determines every phase used here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Representative {
    pub t: i64,
    pub k: u32,
    pub v: u64,
}

impl Representative {
    pub fn new(p: u64, n: u32, t: i64, k: u32, v: i128) -> Result<Self> {
        if k > n {
            return Err(Error::Domain(format!("k = {k} exceeds the conductor exponent {n}")));
        }
        if v.rem_euclid(p as i128) == 0 {
            return Err(Error::Domain(format!("v = {v} is not a unit at {p}")));
        }
        let m = pow_u64(p, n) as i128;
        Ok(Representative { t, k, v: v.rem_euclid(m) as u64 })
    }

    /// `v mod p^j`.
    pub fn v_mod(&self, p: u64, j: u32) -> u64 {
        self.v % pow_u64(p, j)
    }
}

impl fmt::Display for Representative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, k={}, v={})", self.t, self.k, self.v)
    }
}

/// Bound `|S_{T+s}| <= a0 + a1 s` on the generating-series coefficients past `T = t_max + A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub a0: f64,
    pub a1: f64,
}

impl TailCertificate {
    fn decay(q: u64, a_twist: u32, t_max: i64, s: f64) -> f64 {
        (q as f64).powf(-(t_max as f64 + s + a_twist as f64) / 2.0)
    }

    /// Bound on `|c_t|` for `t > t_max`.
    pub fn bound(&self, q: u64, a_twist: u32, t_max: i64, t: i64) -> f64 {
        let s = (t - t_max) as f64;
        (self.a0 + self.a1 * s) * Self::decay(q, a_twist, t_max, s)
    }

    /// Bound on `sup_{t > t_max} |c_t|`.
    pub fn sup_beyond(&self, q: u64, a_twist: u32, t_max: i64) -> f64 {
        let ln = (q as f64).ln();
        let s = if self.a1 > 0.0 { (2.0 / ln - self.a0 / self.a1).max(1.0) } else { 1.0 };
        (self.a0 + self.a1 * s) * Self::decay(q, a_twist, t_max, s)
    }

    /// Bound on `sum_{t > t_max} |c_t|^2`.
    pub fn square_sum_beyond(&self, q: u64, a_twist: u32, t_max: i64) -> f64 {
        let x = 1.0 / q as f64;
        let y = 1.0 - x;
        let (a0, a1) = (self.a0, self.a1);
        let series = a0 * a0 * x / y + 2.0 * a0 * a1 * x / (y * y) + a1 * a1 * x * (1.0 + x) / (y * y * y);
        series * (q as f64).powf(-(t_max as f64 + a_twist as f64))
    }
}

/// `t -> c_{t,k}(mu)` for `t <= t_max`, with a certified bound beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub mu: TildeCharacter,
    pub a_twist: u32,
    pub t_lo: i64,
    pub t_max: i64,
    pub coeffs: Vec<Scalar>,
    pub tail: TailCertificate,
}

impl CoefficientTable {
    pub fn coeff(&self, t: i64) -> Result<Scalar> {
        if t > self.t_max {
            return Err(Error::BeyondTruncation { t, t_max: self.t_max });
        }
        if t < self.t_lo {
            return Ok(Scalar::zero(self.prec()));
        }
        Ok(self.coeffs[(t - self.t_lo) as usize].clone())
    }

    fn prec(&self) -> u32 {
        self.coeffs.first().map(Scalar::prec).unwrap_or(crate::numerics::DEFAULT_PRECISION)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Scalar)> {
        self.coeffs.iter().enumerate().map(move |(i, c)| (self.t_lo + i as i64, c))
    }

    pub fn tail_bound(&self, q: u64, t: i64) -> f64 {
        self.tail.bound(q, self.a_twist, self.t_max, t)
    }
}

/// Everything the functional equation of one twist needs.
#[derive(Clone, Debug)]
pub struct IdentityData {
    pub twist: TwistData,
    /// `omega(-1)`.
    pub sign: RootOfUnity,
    pub diagonal: DiagonalProfile,
}

/// Data of the identity whose left side carries `c_{t,k}(mu)`.
pub fn primal_identity(ctx: &Context, pi: &Representation, mu: &TildeCharacter) -> Result<IdentityData> {
    Ok(IdentityData { twist: pi.twist_data(ctx, mu)?, sign: pi.omega().sign(), diagonal: pi.diagonal_profile(false) })
}

/// Data of the identity for the coefficients `c*_{t,k}(mu)` of `W*(g) = W(g J)`:
/// `mu omega^{-1} pi` on the left, `W*(a(p^a))` on the right.
pub fn dual_identity(ctx: &Context, pi: &Representation, mu: &TildeCharacter) -> Result<IdentityData> {
    let twist = pi.twist_data(ctx, &mu.mul(&pi.omega().inv()))?;
    Ok(IdentityData { twist, sign: pi.omega().sign(), diagonal: pi.diagonal_profile(true) })
}

fn gauss_at(ctx: &Context, p: u64, j: i64, mu_inv: &TildeCharacter) -> Result<Scalar> {
    let depth = if j < 0 { (-j) as u32 } else { 0 };
    let x = PAdicApprox::new(p, j, 1, depth.max(mu_inv.conductor()))?;
    gauss_sum(ctx, &x, mu_inv)
}

/// Solve the functional equation of one twist for `t -> c_{t,k}(mu)`, `t <= t_max`.
pub fn solve_identity(
    ctx: &Context,
    p: u64,
    n: u32,
    k: u32,
    mu: &TildeCharacter,
    data: &IdentityData,
    t_max: i64,
) -> Result<CoefficientTable> {
    let prec = ctx.prec();
    let q = p;
    let k_i = k as i64;
    let mu_inv = mu.inv();
    let a_twist = data.twist.a as i64;

    // Right side sum_a W(a(p^a)) q^{-a/2} G(p^{a-k}, mu^{-1}) Y^a with Y = X^{-1}.
    // For ramified mu the Gauss sum vanishes once a >= k; for trivial mu it is 1 there.
    let (head_len, ratio) = match data.diagonal {
        DiagonalProfile::Delta => (1i64, None),
        DiagonalProfile::Geometric(rho) => {
            if mu.is_trivial() {
                (k_i, Some(rho))
            } else {
                (k_i, None)
            }
        }
    };
    let diag_value = |a: i64| -> Scalar {
        match data.diagonal {
            DiagonalProfile::Delta => {
                if a == 0 {
                    Scalar::one(prec)
                } else {
                    Scalar::zero(prec)
                }
            }
            DiagonalProfile::Geometric(rho) => rho.value(q, prec).pow(a),
        }
    };
    let mut rhs = LaurentPoly::zero(prec);
    for a in 0..head_len {
        let w = diag_value(a);
        if w.is_zero() {
            continue;
        }
        let g = gauss_at(ctx, p, a - k_i, &mu_inv)?;
        rhs.add_term(-a, &(w * g).mul_real(&q_half_power(q, -a, prec)));
    }
    let mut tail_root = None;
    if let Some(rho) = ratio {
        // Geometric tail from a = k with ratio r = rho q^{-1/2}: multiply through by (1 - r Y).
        let r = rho.value(q, prec).mul_real(&q_half_power(q, -1, prec));
        let one_minus = LaurentPoly::euler_product(std::slice::from_ref(&r), -1, prec);
        let tau = diag_value(k_i).mul_real(&q_half_power(q, -k_i, prec));
        rhs = &(&rhs * &one_minus) + &LaurentPoly::monomial(tau, -k_i);
        tail_root = Some(one_minus);
    }
    let qinv = q_half_power(q, -2, prec);
    let gammas: Vec<Scalar> = data.twist.l_den.iter().map(|g| g.value(q, prec).mul_real(&qinv)).collect();
    rhs = &rhs * &LaurentPoly::euler_product(&gammas, -1, prec);
    if let Some(d) = tail_root {
        rhs = rhs.div_exact(&d, 1e-25)?;
    }
    let factor = Scalar::one(prec).mul_root(data.sign) / &data.twist.eps;
    let num = rhs.scale(&factor);
    let alphas: Vec<Scalar> = data.twist.l_num.iter().map(|a| a.value(q, prec)).collect();
    let den = LaurentPoly::euler_product(&alphas, 1, prec);
    let big_t = t_max + a_twist;
    let series = series_expand(&RationalFn::new(num, den)?, big_t + 1)?;

    let t_lo = series.min_degree().map(|d| d - a_twist).unwrap_or(0).min(-k_i - n as i64);
    let coeffs: Vec<Scalar> =
        (t_lo..=t_max).map(|t| series.coeff(t + a_twist).mul_real(&q_half_power(q, -(t + a_twist), prec))).collect();
    let tail = tail_certificate(&data.twist.l_num, q, prec, &series.coeff(big_t), &series.coeff(big_t + 1));
    Ok(CoefficientTable { mu: mu.clone(), a_twist: data.twist.a, t_lo, t_max, coeffs, tail })
}

/// Past the numerator's degree the series obeys the recurrence of `prod (1 - alpha X)`,
/// and every `|alpha| <= 1`.
fn tail_certificate(
    roots: &[crate::reps::EulerRoot],
    q: u64,
    prec: u32,
    s_t: &Scalar,
    s_t1: &Scalar,
) -> TailCertificate {
    match roots {
        [] => TailCertificate { a0: 0.0, a1: 0.0 },
        [_] => TailCertificate { a0: s_t.abs(), a1: 0.0 },
        [r1, r2] if r1 == r2 => {
            let a = r1.value(q, prec);
            let w = &(s_t1 / &a) - s_t;
            TailCertificate { a0: s_t.abs(), a1: w.abs() }
        }
        [r1, r2] => {
            let (a1, a2) = (r1.value(q, prec), r2.value(q, prec));
            let w = &(s_t1 - &(&a1 * s_t)) / &(&a2 - &a1);
            let u = s_t - &w;
            TailCertificate { a0: u.abs() + w.abs(), a1: 0.0 }
        }
        _ => unreachable!("GL(2) L-factors have at most two Satake parameters"),
    }
}

/// All coefficient tables at one level `k`, with the data needed for Fourier synthesis.
#[derive(Clone, Debug)]
pub struct LevelTables {
    pub k: u32,
    pub tables: Vec<CoefficientTable>,
    /// Exponents of each `mu` on the canonical generators of `(Z/p^k)^x`.
    exps: Vec<Vec<u64>>,
    /// `N / order_i` for each generator, `N` the exponent of `(Z/p^k)^x`.
    weights: Vec<u64>,
    big_n: u64,
}

impl LevelTables {
    pub fn new(p: u64, k: u32, tables: Vec<CoefficientTable>) -> Self {
        let g = unit_group(p, k);
        let big_n = g.generators().iter().fold(1u64, |acc, &(_, o)| num_integer::lcm(acc, o));
        let weights = g.generators().iter().map(|&(_, o)| big_n / o).collect();
        let exps = tables.iter().map(|t| t.mu.exponents_at_level(k)).collect();
        LevelTables { k, tables, exps, weights, big_n }
    }

    pub fn t_lo(&self) -> i64 {
        self.tables.iter().map(|t| t.t_lo).min().unwrap_or(0)
    }

    /// Root-table indices of `mu(v)` for every `mu`.
    fn phases(&self, p: u64, v: u64) -> Vec<usize> {
        let d = unit_group(p, self.k).dlog(v as i128).expect("unit");
        self.exps
            .iter()
            .map(|e| {
                let s: u128 =
                    e.iter().zip(&d).zip(&self.weights).map(|((a, b), w)| *a as u128 * *b as u128 * *w as u128).sum();
                (s % self.big_n as u128) as usize
            })
            .collect()
    }

    fn synthesize(&self, ctx: &Context, t: i64, phases: &[usize]) -> Result<Scalar> {
        let roots = ctx.root_table(self.big_n);
        let mut acc = rug::Complex::new(ctx.prec());
        for (tab, &j) in self.tables.iter().zip(phases) {
            let c = tab.coeff(t)?;
            if !c.is_zero() {
                acc += rug::Complex::with_val(ctx.prec(), c.complex() * &roots[j]);
            }
        }
        Ok(Scalar::from_complex(acc))
    }

    /// `sum_mu |c_{t,k}(mu)|^2`.
    pub fn lambda_sq(&self, t: i64) -> Result<f64> {
        let mut s = 0.0;
        for tab in &self.tables {
            let a = tab.coeff(t)?.abs();
            s += a * a;
        }
        Ok(s)
    }

    /// Bound on `sup_{t > t_max, v} |sum_mu c_t(mu) mu(v)|`.
    pub fn tail_sup(&self, q: u64) -> f64 {
        self.tables.iter().map(|t| t.tail.sup_beyond(q, t.a_twist, t.t_max)).sum()
    }

    /// Bound on `sum_{t > t_max} lambda_t^2`.
    pub fn tail_square_sum(&self, q: u64) -> f64 {
        self.tables.iter().map(|t| t.tail.square_sum_beyond(q, t.a_twist, t.t_max)).sum()
    }
}

/// Result of the sup-norm search.
#[derive(Clone, Debug)]
pub struct SupNorm {
    pub h: f64,
    pub value: Scalar,
    /// Maximizer in `W_pi` coordinates.
    pub argmax: Representative,
    pub t_max: i64,
    /// Bound on `|W|` over all `t > t_max`.
    pub tail_bound: f64,
    pub certified: bool,
}

/// `(max(q^{floor(3m/2)/2 - n/2}, 1), q^{floor(n/2)/2})`.
pub fn reference_bounds(q: u64, n: u32, m: u32) -> (f64, f64) {
    let qf = q as f64;
    let lower = qf.powf((3 * m / 2) as f64 / 2.0 - n as f64 / 2.0).max(1.0);
    let upper = qf.powf((n / 2) as f64 / 2.0);
    (lower, upper)
}

/// The normalized newform of `pi` together with that of `pi~`.
pub struct Newform<'c> {
    ctx: &'c Context,
    reps: [Representation; 2],
    root_numbers: [Scalar; 2],
    t_max: i64,
    levels: RwLock<HashMap<(Side, u32), Arc<LevelTables>>>,
}

impl<'c> Newform<'c> {
    pub fn new(ctx: &'c Context, pi: Representation, t_max: i64) -> Result<Self> {
        if t_max < 0 {
            return Err(Error::Domain(format!("t_max = {t_max} must be non-negative")));
        }
        let dual = pi.contragredient()?;
        let root_numbers = [pi.root_number(ctx)?, dual.root_number(ctx)?];
        Ok(Newform { ctx, reps: [pi, dual], root_numbers, t_max, levels: RwLock::new(HashMap::new()) })
    }

    pub fn context(&self) -> &'c Context {
        self.ctx
    }

    pub fn rep(&self, side: Side) -> &Representation {
        &self.reps[side.idx()]
    }

    pub fn pi(&self) -> &Representation {
        &self.reps[0]
    }

    pub fn p(&self) -> u64 {
        self.reps[0].p()
    }

    pub fn n(&self) -> u32 {
        self.reps[0].n()
    }

    pub fn t_max(&self) -> i64 {
        self.t_max
    }

    /// `eps(1/2, pi_side)`.
    pub fn root_number(&self, side: Side) -> &Scalar {
        &self.root_numbers[side.idx()]
    }

    pub fn representative(&self, t: i64, k: u32, v: i128) -> Result<Representative> {
        Representative::new(self.p(), self.n(), t, k, v)
    }

    /// Coefficient tables of `pi_side` at level `k`, solved on first use.
    pub fn level(&self, side: Side, k: u32) -> Result<Arc<LevelTables>> {
        if k > self.n() {
            return Err(Error::Domain(format!("level {k} exceeds n = {}", self.n())));
        }
        if let Some(l) = self.levels.read().expect("level cache poisoned").get(&(side, k)) {
            return Ok(l.clone());
        }
        let rep = self.rep(side);
        let chars = characters_up_to(self.p(), k);
        let tables = chars
            .par_iter()
            .map(|mu| {
                let data = primal_identity(self.ctx, rep, mu)?;
                solve_identity(self.ctx, self.p(), self.n(), k, mu, &data, self.t_max)
            })
            .collect::<Result<Vec<_>>>()?;
        let built = Arc::new(LevelTables::new(self.p(), k, tables));
        Ok(self.levels.write().expect("level cache poisoned").entry((side, k)).or_insert(built).clone())
    }

    /// Install externally stored tables (e.g. from a cache).
    pub fn insert_level(&self, side: Side, tables: LevelTables) {
        self.levels.write().expect("level cache poisoned").insert((side, tables.k), Arc::new(tables));
    }

    /// `W_pi(g_{t,k,v})`.
    pub fn whittaker(&self, rep: &Representative) -> Result<Scalar> {
        self.value(Side::Pi, rep)
    }

    /// `W*_pi(g_{t,k,v}) = W_pi~(g_{t,k,v})`.
    pub fn conjugate(&self, rep: &Representative) -> Result<Scalar> {
        self.value(Side::Contragredient, rep)
    }

    /// Value on `pi_side`; levels above `n/2` go through the Atkin-Lehner relation.
    pub fn value(&self, side: Side, rep: &Representative) -> Result<Scalar> {
        if 2 * rep.k <= self.n() {
            return self.value_direct(side, rep);
        }
        let (phase, target) = self.atkin_lehner(side, rep)?;
        let w = self.value_direct(side.other(), &target)?;
        if w.is_zero() {
            return Ok(w);
        }
        Ok(phase()? * w)
    }

    /// Fourier synthesis from the tables at level `k`, for any `0 <= k <= n`.
    pub fn value_direct(&self, side: Side, rep: &Representative) -> Result<Scalar> {
        if rep.t > self.t_max {
            return Err(Error::BeyondTruncation { t: rep.t, t_max: self.t_max });
        }
        let lvl = self.level(side, rep.k)?;
        let phases = lvl.phases(self.p(), rep.v_mod(self.p(), rep.k));
        lvl.synthesize(self.ctx, rep.t, &phases)
    }

    /// `W_side(g_{t,k,v}) = phase * W_other(g_{t+2k-n, n-k, -v})` with
    /// `phase = eps(1/2, pi_other) omega_side(v)^{-1} psi(-p^{t+k} v^{-1})`.
    ///
    /// The phase is returned lazily: it needs `v` modulo `p^{-(t+k)}`, which is only
    /// guaranteed when the target value can be nonzero.
    #[allow(clippy::type_complexity)]
    pub fn atkin_lehner(
        &self,
        side: Side,
        rep: &Representative,
    ) -> Result<(impl Fn() -> Result<Scalar> + '_, Representative)> {
        let p = self.p();
        let n = self.n();
        let target = Representative::new(p, n, rep.t + 2 * rep.k as i64 - n as i64, n - rep.k, -(rep.v as i128))?;
        let rep = *rep;
        let phase = move || -> Result<Scalar> {
            let modulus = pow_u64(p, n);
            let vinv = mod_inv(rep.v as i128, modulus).expect("unit");
            let x = PAdicApprox::new(p, rep.t + rep.k as i64, -(vinv as i128), n)?;
            let psi = psi_eval(&x)?;
            let w = self.rep(side).omega().eval_residue(rep.v as i128).inv();
            Ok(self.root_number(side.other()).mul_root(psi * w))
        };
        Ok((phase, target))
    }

    /// `lambda_{pi,t,k} = (sum_mu |c_{t,k}(mu)|^2)^{1/2}`, reduced to `k <= n/2`.
    pub fn lambda(&self, t: i64, k: u32) -> Result<f64> {
        let n = self.n();
        if k > n {
            return Err(Error::Domain(format!("level {k} exceeds n = {n}")));
        }
        let (side, t, k) =
            if 2 * k <= n { (Side::Pi, t, k) } else { (Side::Contragredient, t + 2 * k as i64 - n as i64, n - k) };
        Ok(self.level(side, k)?.lambda_sq(t)?.sqrt())
    }

    /// `sum_t lambda_{pi,t,k}^2` over the stored range and a bound on the rest.
    pub fn lambda_square_sum(&self, k: u32) -> Result<(f64, f64)> {
        let n = self.n();
        let (side, kk) = if 2 * k <= n { (Side::Pi, k) } else { (Side::Contragredient, n - k) };
        let lvl = self.level(side, kk)?;
        let mut s = 0.0;
        for t in lvl.t_lo()..=self.t_max {
            s += lvl.lambda_sq(t)?;
        }
        Ok((s, lvl.tail_square_sum(self.p())))
    }

    /// `sup_g |W_pi(g)|` over `k <= n/2` on both `pi` and `pi~` and `t <= t_max`,
    /// with a bound on everything beyond `t_max`.
    ///
    /// Ties within `1e-20` go to the smallest `(k, t, index of v)` in `W_pi` coordinates.
    pub fn sup_norm(&self) -> Result<SupNorm> {
        let p = self.p();
        let n = self.n();
        let mut jobs = vec![];
        for side in [Side::Pi, Side::Contragredient] {
            for k in 0..=n / 2 {
                let lvl = self.level(side, k)?;
                for &v in unit_group(p, k).elements() {
                    jobs.push((side, lvl.clone(), v));
                }
            }
        }
        let best = jobs
            .par_iter()
            .map(|(side, lvl, v)| -> Result<Option<Candidate>> {
                let v = if lvl.k == 0 { 1 } else { *v };
                let phases = lvl.phases(p, v);
                let mut best: Option<Candidate> = None;
                for t in lvl.t_lo()..=self.t_max {
                    let w = lvl.synthesize(self.ctx, t, &phases)?;
                    let h = w.abs();
                    if h == 0.0 {
                        continue;
                    }
                    let local = Representative::new(p, n, t, lvl.k, v as i128)?;
                    let global = match side {
                        Side::Pi => local,
                        Side::Contragredient => {
                            Representative::new(p, n, t + 2 * lvl.k as i64 - n as i64, n - lvl.k, -(v as i128))?
                        }
                    };
                    let kn = global.k.min(n - global.k);
                    let vidx = unit_group(p, kn).index_of(global.v as i128).unwrap_or(0);
                    let key = (global.k, global.t, vidx);
                    best = pick(best, (h, key, local, *side));
                }
                Ok(best)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(None, |acc, b| match b {
                Some(b) => pick(acc, b),
                None => acc,
            });
        let (h, _, local, side) = best.ok_or_else(|| Error::Internal("newform vanishes on every coset".into()))?;
        let argmax = match side {
            Side::Pi => local,
            Side::Contragredient => {
                Representative::new(p, n, local.t + 2 * local.k as i64 - n as i64, n - local.k, -(local.v as i128))?
            }
        };
        let value = self.whittaker(&argmax)?;
        let mut tail_bound: f64 = 0.0;
        for side in [Side::Pi, Side::Contragredient] {
            for k in 0..=n / 2 {
                tail_bound = tail_bound.max(self.level(side, k)?.tail_sup(p));
            }
        }
        Ok(SupNorm { h, value, argmax, t_max: self.t_max, tail_bound, certified: tail_bound < h })
    }

    /// `W_pi(g)` for `g` in `GL(2, Q)` viewed in `GL(2, Q_p)`.
    pub fn value_at_matrix(&self, g: &[[Rational; 2]; 2]) -> Result<Scalar> {
        self.value_at_matrix_on(Side::Pi, g)
    }

    /// `W_{pi_side}(g) = psi(x) omega_side(u) W_{pi_side}(g_{t,k,v})`.
    pub fn value_at_matrix_on(&self, side: Side, g: &[[Rational; 2]; 2]) -> Result<Scalar> {
        let r = reduce_matrix(self.p(), self.n(), g)?;
        let w = self.value(side, &r.rep)?;
        let omega_u = self.rep(side).omega().eval_residue(r.u_unit as i128);
        Ok(w.mul_root(r.psi_phase(self.p()) * omega_u))
    }

    /// `W*_pi(g) = omega_pi(det g) W_pi~(g)`, the `K_2(p^n)`-invariant vector with `W*(1) = 1`.
    pub fn conjugate_at_matrix(&self, g: &[[Rational; 2]; 2]) -> Result<Scalar> {
        let det = Rational::from(&g[0][0] * &g[1][1]) - Rational::from(&g[0][1] * &g[1][0]);
        let w = self.value_at_matrix_on(Side::Contragredient, g)?;
        let m = self.pi().m().max(1);
        Ok(w.mul_root(self.pi().omega().eval_residue(unit_residue(&det, self.p(), m)? as i128)))
    }
}

type Candidate = (f64, (u32, i64, usize), Representative, Side);

fn pick(acc: Option<Candidate>, c: Candidate) -> Option<Candidate> {
    match acc {
        None => Some(c),
        Some(a) => {
            if c.0 > a.0 + 1e-20 || ((c.0 - a.0).abs() <= 1e-20 && c.1 < a.1) {
                Some(c)
            } else {
                Some(a)
            }
        }
    }
}

/// The maximizing coset of the large-central-conductor lower bound, when it applies.
///
/// Principal series `chi1 ⊞ chi2` with `a(chi2) = 0`: `(t, k, v) = (-floor(n/2) - n, floor(n/2), v0)`;
/// with `0 < 2 a(chi2) < a(chi1)`: `(-floor(3 a1/2), floor(a1/2), v0 (1 + p^{floor(a1/2) - a2}))`,
/// where `v0` is the critical unit of `chi1`.
pub fn lower_bound_witness(pi: &Representation) -> Result<Representative> {
    let RepKind::PrincipalSeries { chi1, chi2 } = pi.kind() else {
        return Err(Error::Domain(format!("{pi}: witnesses exist only for principal series")));
    };
    let (a1, a2) = (chi1.conductor(), chi2.conductor());
    let (n, p) = (pi.n(), pi.p());
    if a1 <= 2 * a2 {
        return Err(Error::Domain(format!("{pi}: witness needs a1 > 2 a2 (equivalently 3m > 2n)")));
    }
    let v0 = critical_unit(chi1.unit_part())? as i128;
    if a2 == 0 {
        let n0 = n / 2;
        return Representative::new(p, n, -(n0 as i64) - n as i64, n0, v0);
    }
    let k = a1 / 2;
    let e = k - a2;
    // v0 (1 + p^e o^x) contains no unit when e = 0 and p = 2.
    if e == 0 && p == 2 {
        return Err(Error::Domain(format!("{pi}: v0 (1 + o^x) has no units at p = 2")));
    }
    Representative::new(p, n, -((3 * a1 / 2) as i64), k, v0 * (1 + pow_u64(p, e) as i128))
}

/// `g = z(u) n(x) g_{t,k,v} kappa` with `kappa` in `K_1(p^n)` (upper-left entry in `1 + p^n`).
#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub x: Rational,
    /// Unit part of `u` modulo `p^n`; `u` has valuation `u_val`.
    pub u_unit: u64,
    pub u_val: i64,
    pub rep: Representative,
}

impl Reduction {
    /// `psi(x)`.
    pub fn psi_phase(&self, p: u64) -> RootOfUnity {
        psi_rational(&self.x, p)
    }
}

/// `v_p(x)`, or `None` for zero.
pub fn valuation_q(x: &Rational, p: u64) -> Option<i64> {
    if *x == 0 {
        return None;
    }
    let pv = Integer::from(p);
    let count = |z: &Integer| {
        let mut z = z.clone().abs();
        let mut c = 0i64;
        while z.is_divisible(&pv) {
            z /= &pv;
            c += 1;
        }
        c
    };
    Some(count(x.numer()) - count(x.denom()))
}

/// `p^e` as a rational.
pub fn p_power(p: u64, e: i64) -> Rational {
    let base = Rational::from(Integer::from(p));
    if e >= 0 {
        rug::ops::Pow::pow(base, e as u32)
    } else {
        rug::ops::Pow::pow(base, (-e) as u32).recip()
    }
}

/// Unit part of `x` modulo `p^j`.
pub fn unit_residue(x: &Rational, p: u64, j: u32) -> Result<u64> {
    let a = PAdicApprox::decompose_rational(x, p, j)?;
    a.unit_mod(j)
}

/// Membership in `K_1(p^n)`.
pub fn in_k1(m: &[[Rational; 2]; 2], p: u64, n: u32) -> bool {
    let integral = |x: &Rational| valuation_q(x, p).is_none_or(|v| v >= 0);
    if !m.iter().flatten().all(integral) {
        return false;
    }
    let det = Rational::from(&m[0][0] * &m[1][1]) - Rational::from(&m[0][1] * &m[1][0]);
    let c_ok = valuation_q(&m[1][0], p).is_none_or(|v| v >= n as i64);
    let a1 = Rational::from(&m[0][0] - 1u32);
    let a_ok = valuation_q(&a1, p).is_none_or(|v| v >= n as i64);
    c_ok && a_ok && valuation_q(&det, p) == Some(0)
}

/// Product of 2x2 rational matrices.
pub fn mat_mul(a: &[[Rational; 2]; 2], b: &[[Rational; 2]; 2]) -> [[Rational; 2]; 2] {
    let e = |i: usize, j: usize| Rational::from(&a[i][0] * &b[0][j]) + Rational::from(&a[i][1] * &b[1][j]);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

/// Decompose `g` in `GL(2, Q)` as `z(u) n(x) g_{t,k,v} kappa`, verifying `kappa` in `K_1(p^n)`.
pub fn reduce_matrix(p: u64, n: u32, g: &[[Rational; 2]; 2]) -> Result<Reduction> {
    let det = Rational::from(&g[0][0] * &g[1][1]) - Rational::from(&g[0][1] * &g[1][0]);
    if det == 0 {
        return Err(Error::Domain("singular matrix".into()));
    }
    let vd = valuation_q(&g[1][1], p);
    let vc = valuation_q(&g[1][0], p);
    let needs_shift = match (vc, vd) {
        (None, _) => true,
        (Some(c), Some(d)) => c > d + n as i64,
        (Some(_), None) => false,
    };
    let pn = p_power(p, n as i64);
    let g = if needs_shift {
        let k0 = [[Rational::from(1), Rational::new()], [pn.clone(), Rational::from(1)]];
        mat_mul(g, &k0)
    } else {
        g.clone()
    };
    let [[a, b], [c, d]] = &g;
    let _ = b;
    let vc = valuation_q(c, p).expect("c != 0 after the shift");
    let k = match valuation_q(d, p) {
        Some(vd) => (vc - vd).clamp(0, n as i64) as u32,
        None => 0,
    };
    let vdet = valuation_q(&det, p).expect("nonzero");
    let t = vdet - 2 * vc;
    let x = Rational::from(a / c);
    let u = -c.clone();
    let u_val = valuation_q(&u, p).expect("nonzero");
    let u_unit = unit_residue(&u, p, n)?;
    let candidate = if k == 0 {
        1
    } else {
        let r = Rational::from(d * c) * p_power(p, k as i64 + t) / &det;
        unit_residue(&r, p, k).unwrap_or(1)
    };
    let mk = pow_u64(p, k);
    let check = |v: u64| -> bool {
        let vr = Rational::from(v);
        let pk = p_power(p, -(k as i64));
        let pt = p_power(p, t);
        // M = z(u) n(x) g_{t,k,v} = u [[-x, p^t - x p^{-k} v], [-1, -p^{-k} v]]
        let m = [
            [-Rational::from(&u * &x), Rational::from(&u * &(pt.clone() - Rational::from(&x * &pk) * &vr))],
            [-u.clone(), -(Rational::from(&u * &pk) * &vr)],
        ];
        let dm = Rational::from(&m[0][0] * &m[1][1]) - Rational::from(&m[0][1] * &m[1][0]);
        let inv = [
            [Rational::from(&m[1][1] / &dm), -Rational::from(&m[0][1] / &dm)],
            [-Rational::from(&m[1][0] / &dm), Rational::from(&m[0][0] / &dm)],
        ];
        in_k1(&mat_mul(&inv, &g), p, n)
    };
    let v = if check(candidate) {
        candidate
    } else {
        unit_group(p, k)
            .elements()
            .iter()
            .map(|&e| if k == 0 { 1 } else { e })
            .find(|&e| check(e % mk.max(1)))
            .ok_or_else(|| Error::Internal("no coset representative found".into()))?
    };
    let rep = Representative::new(p, n, t, k, v as i128)?;
    Ok(Reduction { x, u_unit, u_val, rep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::ExtendedCharacter;

    fn ch(s: &str) -> ExtendedCharacter {
        s.parse().unwrap()
    }

    fn ps(a: &str, b: &str) -> Representation {
        Representation::principal_series(ch(a), ch(b)).unwrap()
    }

    #[test]
    fn normalization_at_identity() {
        let ctx = Context::default();
        for pi in [
            ps("3^1:1@0/1", "3^0:0@0/1"),
            ps("5^2:3@1/4", "5^1:1@3/4"),
            Representation::steinberg(ch("3^0:0@1/2")).unwrap(),
            Representation::steinberg(ch("5^1:1@0/1")).unwrap(),
        ] {
            let nf = Newform::new(&ctx, pi.clone(), default_t_max(pi.n())).unwrap();
            let one = [[Rational::from(1), Rational::new()], [Rational::new(), Rational::from(1)]];
            let w = nf.value_at_matrix(&one).unwrap();
            assert!(w.dist(&ctx.one()) < 1e-25, "{pi}: W(1) = {w}");
        }
    }

    #[test]
    fn spot_value_quadratic_ps() {
        let ctx = Context::default();
        let nf = Newform::new(&ctx, ps("3^1:1@0/1", "3^0:0@0/1"), 22).unwrap();
        let r = nf.representative(-2, 1, 1).unwrap();
        let w = nf.whittaker(&r).unwrap();
        let expect = -RootOfUnity::new(-1, 3).embed(128);
        assert!(w.dist(&expect) < 1e-25, "{w}");
    }

    #[test]
    fn diagonal_is_reproduced() {
        let ctx = Context::default();
        for pi in [
            ps("5^2:3@1/4", "5^0:0@3/4"),
            Representation::steinberg(ch("3^0:0@1/2")).unwrap(),
            ps("5^2:3@0/1", "5^1:1@0/1"),
        ] {
            let nf = Newform::new(&ctx, pi.clone(), 30).unwrap();
            for t in 0..5i64 {
                for v in [1i128, 2, 4] {
                    let y = Rational::from(v) * p_power(pi.p(), t);
                    let g = [[y, Rational::new()], [Rational::new(), Rational::from(1)]];
                    let w = nf.value_at_matrix(&g).unwrap();
                    let d = pi.diagonal_whittaker(&ctx, t, v, false);
                    assert!(w.dist(&d) < 1e-25, "{pi} t={t} v={v}: {w} vs {d}");
                }
            }
        }
    }
}
