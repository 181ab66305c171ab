//! Scalar substrate: exact roots of unity, multiprecision complex scalars,
//! and Laurent polynomials / rational functions in the indeterminate `X = q^{-s}`.
//!
//! Character values are carried as [`RootOfUnity`] and only embedded into
//! [`Scalar`] when summed, so phases never drift.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_integer::Integer;
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default binary precision of [`Scalar`].
pub const DEFAULT_PRECISION: u32 = 128;

/// The phase `e^{2 pi i num/order}` with `gcd(num, order) = 1` (or `(0, 1)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootOfUnity {
    num: u64,
    order: u64,
}

impl RootOfUnity {
    pub const ONE: RootOfUnity = RootOfUnity { num: 0, order: 1 };
    pub const MINUS_ONE: RootOfUnity = RootOfUnity { num: 1, order: 2 };

    /// `e^{2 pi i num/den}` for any integer numerator and nonzero denominator.
    pub fn new(num: i128, den: u64) -> Self {
        assert!(den > 0, "root of unity with zero denominator");
        let den_i = den as i128;
        let r = num.rem_euclid(den_i) as u64;
        let g = r.gcd(&den);
        if r == 0 {
            return Self::ONE;
        }
        RootOfUnity { num: r / g, order: den / g }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn is_one(&self) -> bool {
        self.num == 0
    }

    pub fn inv(self) -> Self {
        Self::new(-(self.num as i128), self.order)
    }

    pub fn pow(self, e: i64) -> Self {
        let n = (self.num as i128) * (e as i128);
        Self::new(n, self.order)
    }

    /// The phase `num/order` as a fraction in `[0, 1)`.
    pub fn phase(&self) -> (u64, u64) {
        (self.num, self.order)
    }

    pub fn embed(&self, prec: u32) -> Scalar {
        Scalar(embed_phase(self.num, self.order, prec))
    }
}

impl Mul for RootOfUnity {
    type Output = RootOfUnity;

    fn mul(self, rhs: RootOfUnity) -> RootOfUnity {
        let l = self.order.lcm(&rhs.order);
        let a = self.num as i128 * (l / self.order) as i128;
        let b = rhs.num as i128 * (l / rhs.order) as i128;
        RootOfUnity::new(a + b, l)
    }
}

impl MulAssign for RootOfUnity {
    fn mul_assign(&mut self, rhs: RootOfUnity) {
        *self = *self * rhs;
    }
}

impl fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.order)
    }
}

/// `e^{2 pi i j/n}` at the given precision; exact when `n` divides 4.
pub(crate) fn embed_phase(j: u64, n: u64, prec: u32) -> Complex {
    let j = j % n;
    if 4 % n == 0 {
        let quarter = j * (4 / n);
        let (re, im) = match quarter {
            0 => (1, 0),
            1 => (0, 1),
            2 => (-1, 0),
            _ => (0, -1),
        };
        return Complex::with_val(prec, (re, im));
    }
    let mut angle = Float::with_val(prec + 16, Constant::Pi);
    angle *= 2 * j;
    angle /= n;
    let (s, c) = angle.sin_cos(Float::new(prec + 16));
    Complex::with_val(prec, (c, s))
}

/// `q^{e/2}` as a real float.
pub fn q_half_power(q: u64, e: i64, prec: u32) -> Float {
    let mut base = Float::with_val(prec + 8, q);
    if e.rem_euclid(2) == 1 {
        base = base.sqrt();
        let whole = Float::with_val(prec + 8, q).pow((e - 1) / 2);
        return Float::with_val(prec, base * whole);
    }
    base = base.pow(e / 2);
    Float::with_val(prec, base)
}

/// Complex scalar with a configurable binary precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalar(pub(crate) Complex);

impl Scalar {
    pub fn zero(prec: u32) -> Self {
        Scalar(Complex::new(prec))
    }

    pub fn one(prec: u32) -> Self {
        Scalar(Complex::with_val(prec, 1))
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Self {
        Scalar(Complex::with_val(prec, (re, im)))
    }

    pub fn from_int(x: i64, prec: u32) -> Self {
        Scalar(Complex::with_val(prec, x))
    }

    pub fn from_ratio(num: i64, den: i64, prec: u32) -> Self {
        let mut c = Complex::with_val(prec, num);
        c /= den;
        Scalar(c)
    }

    pub fn from_real(x: Float) -> Self {
        let prec = x.prec();
        Scalar(Complex::with_val(prec, (x, 0)))
    }

    pub fn from_complex(c: Complex) -> Self {
        Scalar(c)
    }

    /// Parse `re` and `im` decimal strings at the given precision.
    pub fn parse(re: &str, im: &str, prec: u32) -> Result<Self> {
        let r = Float::parse(re).map_err(|e| Error::Parse(format!("{re}: {e}")))?;
        let i = Float::parse(im).map_err(|e| Error::Parse(format!("{im}: {e}")))?;
        Ok(Scalar(Complex::with_val(prec, (r, i))))
    }

    pub fn complex(&self) -> &Complex {
        &self.0
    }

    pub fn prec(&self) -> u32 {
        self.0.prec().0
    }

    pub fn re(&self) -> &Float {
        self.0.real()
    }

    pub fn im(&self) -> &Float {
        self.0.imag()
    }

    pub fn re_f64(&self) -> f64 {
        self.0.real().to_f64()
    }

    pub fn im_f64(&self) -> f64 {
        self.0.imag().to_f64()
    }

    pub fn abs_float(&self) -> Float {
        Float::with_val(self.prec(), self.0.abs_ref())
    }

    pub fn abs(&self) -> f64 {
        self.abs_float().to_f64()
    }

    pub fn norm_sqr(&self) -> Float {
        Float::with_val(self.prec(), self.0.norm_ref())
    }

    pub fn conj(&self) -> Scalar {
        Scalar(self.0.clone().conj())
    }

    pub fn recip(&self) -> Scalar {
        Scalar(self.0.clone().recip())
    }

    pub fn is_zero(&self) -> bool {
        self.0.real().is_zero() && self.0.imag().is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.0.real().is_finite() && self.0.imag().is_finite()
    }

    /// `|self - other|` as `f64`.
    pub fn dist(&self, other: &Scalar) -> f64 {
        (self - other).abs()
    }

    pub fn approx_eq(&self, other: &Scalar, tol: f64) -> bool {
        self.dist(other) <= tol
    }

    pub fn mul_root(&self, r: RootOfUnity) -> Scalar {
        if r.is_one() {
            return self.clone();
        }
        self * &r.embed(self.prec())
    }

    pub fn mul_real(&self, x: &Float) -> Scalar {
        Scalar(Complex::with_val(self.prec(), &self.0 * x))
    }

    pub fn pow(&self, e: i64) -> Scalar {
        if e >= 0 {
            Scalar(Complex::with_val(self.prec(), (&self.0).pow(e as u64)))
        } else {
            Scalar(Complex::with_val(self.prec(), (&self.0).pow(e.unsigned_abs())).recip())
        }
    }

    /// Decimal strings for the real and imaginary parts, round-tripping at this precision.
    pub fn to_decimal_strings(&self) -> (String, String) {
        let digits = (self.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2;
        (self.0.real().to_string_radix(10, Some(digits)), self.0.imag().to_string_radix(10, Some(digits)))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = f.precision().unwrap_or(15);
        let re = self.re_f64();
        let im = self.im_f64();
        let sign = if im.is_sign_negative() { '-' } else { '+' };
        write!(f, "{:.*e} {} {:.*e}i", prec, re, sign, prec, im.abs())
    }
}

macro_rules! scalar_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                let prec = self.prec().max(rhs.prec());
                Scalar(Complex::with_val(prec, (&self.0).$m(&rhs.0)))
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
    };
}

scalar_binop!(Add, add);
scalar_binop!(Sub, sub);
scalar_binop!(Mul, mul);
scalar_binop!(Div, div);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0.clone())
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        self.0 *= &rhs.0;
    }
}

/// Finite Laurent polynomial in `X`; exact zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly {
    prec: u32,
    terms: BTreeMap<i64, Scalar>,
}

impl LaurentPoly {
    pub fn zero(prec: u32) -> Self {
        LaurentPoly { prec, terms: BTreeMap::new() }
    }

    pub fn one(prec: u32) -> Self {
        Self::monomial(Scalar::one(prec), 0)
    }

    pub fn monomial(c: Scalar, degree: i64) -> Self {
        let mut p = Self::zero(c.prec());
        p.add_term(degree, &c);
        p
    }

    /// Coefficients `coeffs[i]` at degree `lo + i`.
    pub fn from_coeffs(lo: i64, coeffs: &[Scalar], prec: u32) -> Self {
        let mut p = Self::zero(prec);
        for (i, c) in coeffs.iter().enumerate() {
            p.add_term(lo + i as i64, c);
        }
        p
    }

    /// `prod_j (1 - r_j X^step)`.
    pub fn euler_product(roots: &[Scalar], step: i64, prec: u32) -> Self {
        let mut p = Self::one(prec);
        for r in roots {
            let mut f = Self::one(prec);
            f.add_term(step, &-r);
            p = &p * &f;
        }
        p
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, degree: i64) -> Scalar {
        self.terms.get(&degree).cloned().unwrap_or_else(|| Scalar::zero(self.prec))
    }

    pub fn min_degree(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Scalar)> {
        self.terms.iter().map(|(d, c)| (*d, c))
    }

    pub fn add_term(&mut self, degree: i64, c: &Scalar) {
        if c.is_zero() {
            return;
        }
        let prec = self.prec;
        let entry = self.terms.entry(degree).or_insert_with(|| Scalar::zero(prec));
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&degree);
        }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        let mut out = Self::zero(self.prec);
        for (d, x) in &self.terms {
            out.add_term(*d, &(x * c));
        }
        out
    }

    /// Multiply by `X^s`.
    pub fn shift(&self, s: i64) -> Self {
        LaurentPoly { prec: self.prec, terms: self.terms.iter().map(|(d, c)| (d + s, c.clone())).collect() }
    }

    pub fn truncate(&self, max_degree: i64) -> Self {
        LaurentPoly { prec: self.prec, terms: self.terms.range(..=max_degree).map(|(d, c)| (*d, c.clone())).collect() }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(Scalar::abs).fold(0.0, f64::max)
    }

    /// Largest coefficient distance to `other`.
    pub fn dist(&self, other: &LaurentPoly) -> f64 {
        (self - other).max_abs_coeff()
    }

    /// Exact quotient `self / divisor`; fails if the remainder exceeds `tol` relative to `self`.
    pub fn div_exact(&self, divisor: &LaurentPoly, tol: f64) -> Result<LaurentPoly> {
        let (Some(dlo), Some(dhi)) = (divisor.min_degree(), divisor.max_degree()) else {
            return Err(Error::Malformed("division by the zero polynomial".into()));
        };
        let Some(lo) = self.min_degree() else {
            return Ok(Self::zero(self.prec));
        };
        // Long division from the top degree; the quotient is supported in [lo - dlo, hi - dhi].
        let lead = divisor.coeff(dhi);
        let mut rem = self.clone();
        let mut quot = Self::zero(self.prec);
        let scale = self.max_abs_coeff().max(1.0);
        while let Some(top) = rem.max_degree() {
            if top - dhi < lo - dlo {
                break;
            }
            let c = &rem.coeff(top) / &lead;
            let shift = top - dhi;
            quot.add_term(shift, &c);
            for (d, x) in divisor.iter() {
                rem.add_term(d + shift, &-(x * &c));
            }
            rem.terms.remove(&top);
        }
        let r = rem.max_abs_coeff();
        if r > tol * scale {
            return Err(Error::InexactDivision { remainder: r });
        }
        Ok(quot)
    }
}

impl Add<&LaurentPoly> for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (d, c) in rhs.iter() {
            out.add_term(d, c);
        }
        out
    }
}

impl Sub<&LaurentPoly> for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (d, c) in rhs.iter() {
            out.add_term(d, &-c);
        }
        out
    }
}

impl Mul<&LaurentPoly> for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.prec.max(rhs.prec));
        for (a, x) in self.iter() {
            for (b, y) in rhs.iter() {
                out.add_term(a + b, &(x * y));
            }
        }
        out
    }
}

/// Quotient of Laurent polynomials with the denominator normalized to `1 + O(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFn {
    num: LaurentPoly,
    den: LaurentPoly,
}

impl RationalFn {
    pub fn new(num: LaurentPoly, den: LaurentPoly) -> Result<Self> {
        let Some(lo) = den.min_degree() else {
            return Err(Error::Malformed("rational function with zero denominator".into()));
        };
        let c = den.coeff(lo).recip();
        let den = den.shift(-lo).scale(&c);
        let num = num.shift(-lo).scale(&c);
        Ok(RationalFn { num, den })
    }

    pub fn numerator(&self) -> &LaurentPoly {
        &self.num
    }

    pub fn denominator(&self) -> &LaurentPoly {
        &self.den
    }

    pub fn mul(&self, other: &RationalFn) -> Result<RationalFn> {
        RationalFn::new(&self.num * &other.num, &self.den * &other.den)
    }
}

/// Laurent expansion of `f` around `X = 0` through degree `t_max`.
pub fn series_expand(f: &RationalFn, t_max: i64) -> Result<LaurentPoly> {
    let prec = f.num.prec().max(f.den.prec());
    if f.den.min_degree() != Some(0) {
        return Err(Error::Malformed("denominator has no constant term".into()));
    }
    let one = Scalar::one(prec);
    if f.den.coeff(0).dist(&one) > 1e-30 {
        return Err(Error::Malformed("denominator constant term is not 1".into()));
    }
    let Some(lo) = f.num.min_degree() else {
        return Ok(LaurentPoly::zero(prec));
    };
    if t_max < lo {
        return Ok(LaurentPoly::zero(prec));
    }
    let den: Vec<(i64, Scalar)> = f.den.iter().filter(|(d, _)| *d > 0).map(|(d, c)| (d, c.clone())).collect();
    let len = (t_max - lo + 1) as usize;
    let mut e: Vec<Scalar> = Vec::with_capacity(len);
    for j in 0..len {
        let mut x = f.num.coeff(lo + j as i64);
        for (d, c) in &den {
            let d = *d as usize;
            if d <= j {
                x -= &(c * &e[j - d]);
            }
        }
        e.push(x);
    }
    Ok(LaurentPoly::from_coeffs(lo, &e, prec))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = DEFAULT_PRECISION;

    #[test]
    fn root_products() {
        assert_eq!(RootOfUnity::new(1, 3) * RootOfUnity::new(1, 3), RootOfUnity::new(2, 3));
        assert_eq!(RootOfUnity::new(1, 2) * RootOfUnity::new(1, 2), RootOfUnity::ONE);
        let r = RootOfUnity::new(1, 4) * RootOfUnity::new(1, 6);
        assert_eq!(r.phase(), (5, 12));
        assert_eq!(RootOfUnity::new(-1, 3).phase(), (2, 3));
        assert_eq!(RootOfUnity::new(4, 8).phase(), (1, 2));
    }

    #[test]
    fn embeddings() {
        assert_eq!(RootOfUnity::ONE.embed(P), Scalar::one(P));
        assert_eq!(RootOfUnity::new(1, 4).embed(P), Scalar::from_f64(0.0, 1.0, P));
        let w = RootOfUnity::new(1, 3).embed(P);
        let half_sqrt3 = Float::with_val(P, 3).sqrt() / 2;
        let expect = Scalar(Complex::with_val(P, (-0.5, half_sqrt3)));
        assert!(w.dist(&expect) < 1e-36);
    }

    #[test]
    fn q_powers() {
        assert_eq!(q_half_power(9, 2, P), 9);
        assert_eq!(q_half_power(4, -2, P), 0.25);
        let s = q_half_power(3, 3, P);
        assert!((s.to_f64() - 27f64.sqrt()).abs() < 1e-12);
        assert!((q_half_power(2, -1, P).to_f64() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    fn poly(lo: i64, c: &[f64]) -> LaurentPoly {
        let s: Vec<Scalar> = c.iter().map(|x| Scalar::from_f64(*x, 0.0, P)).collect();
        LaurentPoly::from_coeffs(lo, &s, P)
    }

    #[test]
    fn geometric_series() {
        let f = RationalFn::new(poly(0, &[1.0]), poly(0, &[1.0, -1.0])).unwrap();
        let s = series_expand(&f, 3).unwrap();
        assert!(s.dist(&poly(0, &[1.0, 1.0, 1.0, 1.0])) < 1e-30);
    }

    #[test]
    fn identity_quotient() {
        let f = RationalFn::new(poly(0, &[1.0, -1.0]), poly(0, &[1.0, -1.0])).unwrap();
        let s = series_expand(&f, 5).unwrap();
        assert!(s.dist(&poly(0, &[1.0])) < 1e-30);
    }

    #[test]
    fn repeated_root() {
        let f = RationalFn::new(poly(0, &[1.0]), poly(0, &[1.0, -2.0, 1.0])).unwrap();
        let s = series_expand(&f, 2).unwrap();
        assert!(s.dist(&poly(0, &[1.0, 2.0, 3.0])) < 1e-30);
    }

    #[test]
    fn principal_part_survives_normalization() {
        // X^{-2} / (X (1 - X)) = X^{-3} + X^{-2} + ...
        let f = RationalFn::new(poly(-2, &[1.0]), poly(1, &[1.0, -1.0])).unwrap();
        let s = series_expand(&f, 0).unwrap();
        assert!(s.dist(&poly(-3, &[1.0, 1.0, 1.0, 1.0])) < 1e-30);
    }

    #[test]
    fn zero_denominator_rejected() {
        assert!(RationalFn::new(poly(0, &[1.0]), LaurentPoly::zero(P)).is_err());
    }

    #[test]
    fn exact_division() {
        let a = poly(-2, &[1.0, 0.5, -3.0]);
        let b = poly(-1, &[2.0, 1.0]);
        let prod = &a * &b;
        let q = prod.div_exact(&b, 1e-30).unwrap();
        assert!(q.dist(&a) < 1e-30);
        let bad = &prod + &poly(0, &[1e-3]);
        assert!(matches!(bad.div_exact(&b, 1e-20), Err(Error::InexactDivision { .. })));
    }
}
