//! Exact arithmetic in the quantum parameter.
//!
//! Every coefficient downstream lives in [`QScalar`]: a reduced fraction of
//! integer Laurent polynomials in `s = q^(1/2)`. Working with the half power
//! as the primitive variable keeps all exponents integral; `q` itself is
//! `s^2`. [`QLaurent`] is the subring of honest Laurent polynomials (with
//! rational coefficients), where final structure constants must land.
//!
//! Normal form of a [`QScalar`]: the fraction is reduced (polynomial gcd of
//! numerator and denominator is a unit, integer contents coprime), the
//! denominator has lowest exponent 0 and positive leading coefficient.
//! Equality is then syntactic, and values are usable as map keys.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QError, QResult};

/// Integer-coefficient Laurent polynomial in `s`, dense between its lowest
/// and highest exponents. `coeffs[i]` is the coefficient of `s^(lo + i)`.
/// Zero is the empty coefficient vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct ZPoly {
    lo: i64,
    coeffs: Vec<BigInt>,
}

impl ZPoly {
    pub(crate) fn zero() -> Self {
        ZPoly { lo: 0, coeffs: Vec::new() }
    }

    pub(crate) fn one() -> Self {
        ZPoly::monomial(0, BigInt::one())
    }

    pub(crate) fn monomial(exp: i64, c: BigInt) -> Self {
        if c.is_zero() {
            return ZPoly::zero();
        }
        ZPoly { lo: exp, coeffs: vec![c] }
    }

    pub(crate) fn from_coeffs(lo: i64, coeffs: Vec<BigInt>) -> Self {
        let mut p = ZPoly { lo, coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().map_or(false, |c| c.is_zero()) {
            self.coeffs.pop();
        }
        let lead_zeros = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead_zeros > 0 {
            self.coeffs.drain(..lead_zeros);
            self.lo += lead_zeros as i64;
        }
        if self.coeffs.is_empty() {
            self.lo = 0;
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    pub(crate) fn add(&self, other: &ZPoly) -> ZPoly {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let mut coeffs = vec![BigInt::zero(); (hi - lo + 1) as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[(self.lo - lo) as usize + i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            coeffs[(other.lo - lo) as usize + i] += c;
        }
        ZPoly::from_coeffs(lo, coeffs)
    }

    pub(crate) fn neg(&self) -> ZPoly {
        ZPoly {
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub(crate) fn mul(&self, other: &ZPoly) -> ZPoly {
        if self.is_zero() || other.is_zero() {
            return ZPoly::zero();
        }
        let mut coeffs = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        ZPoly::from_coeffs(self.lo + other.lo, coeffs)
    }

    /// Substitute `s -> s^{-1}`.
    pub(crate) fn bar(&self) -> ZPoly {
        if self.is_zero() {
            return ZPoly::zero();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        ZPoly::from_coeffs(-self.hi(), coeffs)
    }

    /// Positive gcd of the integer coefficients; 0 for the zero polynomial.
    fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = num_integer::gcd(g, c.clone());
        }
        g
    }

    /// Sum of coefficients, i.e. the value at `s = 1`.
    fn eval_one(&self) -> BigInt {
        self.coeffs.iter().sum()
    }

    /// Exact division by `(s - 1)` assuming `eval_one == 0`.
    fn div_s_minus_one(&self) -> ZPoly {
        debug_assert!(self.eval_one().is_zero());
        if self.is_zero() {
            return ZPoly::zero();
        }
        // Synthetic division of the polynomial part by (s - 1).
        let n = self.coeffs.len();
        let mut out = vec![BigInt::zero(); n - 1];
        let mut carry = BigInt::zero();
        for i in (1..n).rev() {
            carry = &carry + &self.coeffs[i];
            out[i - 1] = carry.clone();
        }
        ZPoly::from_coeffs(self.lo, out)
    }

    fn to_qpoly(&self) -> Vec<BigRational> {
        self.coeffs
            .iter()
            .map(|c| BigRational::from_integer(c.clone()))
            .collect()
    }

    /// Primitive gcd of the polynomial parts (the `s^lo` units are ignored).
    fn gcd(&self, other: &ZPoly) -> ZPoly {
        if self.is_zero() {
            let mut g = other.clone();
            g.lo = 0;
            return g.make_primitive_positive();
        }
        if other.is_zero() {
            let mut g = self.clone();
            g.lo = 0;
            return g.make_primitive_positive();
        }
        let mut a = self.to_qpoly();
        let mut b = other.to_qpoly();
        // Euclid over Q[s], reducing to monic at each step.
        loop {
            if b.iter().all(|c| c.is_zero()) {
                break;
            }
            let r = qpoly_rem(&a, &b);
            a = b;
            b = r;
        }
        qpoly_to_primitive_zpoly(&a)
    }

    fn make_primitive_positive(mut self) -> ZPoly {
        if self.is_zero() {
            return self;
        }
        let c = self.content();
        if !c.is_one() {
            for x in &mut self.coeffs {
                *x = &*x / &c;
            }
        }
        if self.coeffs.last().unwrap().is_negative() {
            for x in &mut self.coeffs {
                *x = -&*x;
            }
        }
        self
    }

    /// Exact division, `Some(self / other)` when the remainder vanishes and
    /// the quotient has integer coefficients.
    fn div_exact(&self, other: &ZPoly) -> Option<ZPoly> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(ZPoly::zero());
        }
        let (q, r) = qpoly_divrem(&self.to_qpoly(), &other.to_qpoly());
        if r.iter().any(|c| !c.is_zero()) {
            return None;
        }
        if q.iter().any(|c| !c.denom().is_one()) {
            return None;
        }
        let coeffs = q.into_iter().map(|c| c.to_integer()).collect();
        Some(ZPoly::from_coeffs(self.lo - other.lo, coeffs))
    }
}

/// Remainder of dense rational polynomial division (coefficient index =
/// exponent, constant term first).
fn qpoly_divrem(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let bdeg = b.len() - 1;
    debug_assert!(!b[bdeg].is_zero());
    let mut rem: Vec<BigRational> = a.to_vec();
    if rem.len() < b.len() {
        return (Vec::new(), rem);
    }
    let qlen = rem.len() - bdeg;
    let mut quot = vec![BigRational::zero(); qlen];
    for i in (0..qlen).rev() {
        let c = &rem[i + bdeg] / &b[bdeg];
        if !c.is_zero() {
            for (j, bj) in b.iter().enumerate() {
                let t = &c * bj;
                rem[i + j] -= t;
            }
        }
        quot[i] = c;
    }
    while rem.last().map_or(false, |c| c.is_zero()) {
        rem.pop();
    }
    (quot, rem)
}

fn qpoly_rem(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut b = b.to_vec();
    while b.last().map_or(false, |c| c.is_zero()) {
        b.pop();
    }
    qpoly_divrem(a, &b).1
}

fn qpoly_to_primitive_zpoly(a: &[BigRational]) -> ZPoly {
    let mut denom_lcm = BigInt::one();
    for c in a {
        denom_lcm = num_integer::lcm(denom_lcm, c.denom().clone());
    }
    let coeffs: Vec<BigInt> = a
        .iter()
        .map(|c| c.numer() * (&denom_lcm / c.denom()))
        .collect();
    ZPoly::from_coeffs(0, coeffs).make_primitive_positive()
}

/// Exact rational function in `s = q^(1/2)` over the rationals, in the
/// normal form described at module level.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QScalar {
    num: ZPoly,
    den: ZPoly,
}

impl QScalar {
    fn new(num: ZPoly, den: ZPoly) -> QResult<Self> {
        if den.is_zero() {
            return Err(QError::DivisionByZero);
        }
        let mut q = QScalar { num, den };
        q.reduce();
        Ok(q)
    }

    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.den = ZPoly::one();
            return;
        }
        // Move the s-power unit of the denominator into the numerator.
        self.num.lo -= self.den.lo;
        self.den.lo = 0;
        let g = self.num.gcd(&self.den);
        let g_trivial = g.coeffs.len() == 1 && g.coeffs[0].is_one();
        if !g.is_zero() && !g_trivial {
            if let (Some(n), Some(d)) = (self.num.div_exact(&g), self.den.div_exact(&g)) {
                self.num = n;
                self.den = d;
                self.num.lo -= self.den.lo;
                self.den.lo = 0;
            }
        }
        // Integer contents.
        let cn = self.num.content();
        let cd = self.den.content();
        let g = num_integer::gcd(cn, cd);
        if !g.is_one() && !g.is_zero() {
            for x in &mut self.num.coeffs {
                *x = &*x / &g;
            }
            for x in &mut self.den.coeffs {
                *x = &*x / &g;
            }
        }
        // Positive leading denominator coefficient.
        if self.den.coeffs.last().unwrap().is_negative() {
            self.num = self.num.neg();
            self.den = self.den.neg();
        }
    }

    pub fn zero() -> Self {
        QScalar { num: ZPoly::zero(), den: ZPoly::one() }
    }

    pub fn one() -> Self {
        QScalar { num: ZPoly::one(), den: ZPoly::one() }
    }

    pub fn from_int(n: i64) -> Self {
        QScalar { num: ZPoly::monomial(0, BigInt::from(n)), den: ZPoly::one() }
    }

    pub fn from_rational(n: i64, d: i64) -> Self {
        assert!(d != 0);
        QScalar::new(
            ZPoly::monomial(0, BigInt::from(n)),
            ZPoly::monomial(0, BigInt::from(d)),
        )
        .unwrap()
    }

    pub fn from_big_rational(r: &BigRational) -> Self {
        QScalar::new(
            ZPoly::monomial(0, r.numer().clone()),
            ZPoly::monomial(0, r.denom().clone()),
        )
        .unwrap()
    }

    /// `s^k`, i.e. `q^(k/2)`.
    pub fn s_pow(k: i64) -> Self {
        QScalar { num: ZPoly::monomial(k, BigInt::one()), den: ZPoly::one() }
    }

    /// `q^k = s^(2k)`.
    pub fn q_pow(k: i64) -> Self {
        QScalar::s_pow(2 * k)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self == &QScalar::one()
    }

    pub fn add(&self, other: &QScalar) -> QScalar {
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        QScalar::new(num, den).expect("nonzero denominators")
    }

    pub fn sub(&self, other: &QScalar) -> QScalar {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> QScalar {
        QScalar { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, other: &QScalar) -> QScalar {
        QScalar::new(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("nonzero denominators")
    }

    pub fn div(&self, other: &QScalar) -> QResult<QScalar> {
        if other.is_zero() {
            return Err(QError::DivisionByZero);
        }
        QScalar::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn inv(&self) -> QResult<QScalar> {
        QScalar::one().div(self)
    }

    /// The involution `s -> s^{-1}`; a ring homomorphism.
    pub fn bar(&self) -> QScalar {
        QScalar::new(self.num.bar(), self.den.bar()).expect("nonzero denominator")
    }

    /// Present the value as a Laurent polynomial in `s`, failing with
    /// [`QError::NotLaurent`] when the denominator does not divide exactly.
    pub fn as_laurent(&self) -> QResult<QLaurent> {
        if self.is_zero() {
            return Ok(QLaurent::zero());
        }
        let (q, r) = qpoly_divrem(&self.num.to_qpoly(), &self.den.to_qpoly());
        if r.iter().any(|c| !c.is_zero()) {
            return Err(QError::NotLaurent);
        }
        let lo = self.num.lo - self.den.lo;
        let mut coeffs = BTreeMap::new();
        for (i, c) in q.into_iter().enumerate() {
            if !c.is_zero() {
                coeffs.insert(lo + i as i64, c);
            }
        }
        Ok(QLaurent { coeffs })
    }

    /// Exact evaluation at `s = 1` after cancelling common `(s-1)` factors.
    pub fn classical_limit(&self) -> QResult<BigRational> {
        let mut num = self.num.clone();
        let mut den = self.den.clone();
        if num.is_zero() {
            return Ok(BigRational::zero());
        }
        loop {
            let n1 = num.eval_one();
            let d1 = den.eval_one();
            if d1.is_zero() {
                if n1.is_zero() {
                    num = num.div_s_minus_one();
                    den = den.div_s_minus_one();
                    continue;
                }
                return Err(QError::PoleAtOne);
            }
            return Ok(BigRational::new(n1, d1));
        }
    }

    /// `lim_{q->1} (c12 - c21) / (q - 1)`, the Poisson structure constant of
    /// a commutator whose classical limits agree.
    pub fn poisson_extract(c12: &QScalar, c21: &QScalar) -> QResult<BigRational> {
        let diff = c12.sub(c21);
        match diff.classical_limit() {
            Ok(v) if v.is_zero() => {}
            Ok(_) => return Err(QError::NonVanishingDifference),
            Err(_) => return Err(QError::NonVanishingDifference),
        }
        let q_minus_one = QScalar::q_pow(1).sub(&QScalar::one());
        let h = diff.div(&q_minus_one)?;
        h.classical_limit().map_err(|_| QError::NonVanishingDifference)
    }

    /// Display helper: exact evaluation at a rational value of `s`.
    /// Returns `None` on poles. Never used in core computations.
    pub fn eval_rational(&self, s: &BigRational) -> Option<BigRational> {
        let eval_poly = |p: &ZPoly| -> Option<BigRational> {
            if p.is_zero() {
                return Some(BigRational::zero());
            }
            if s.is_zero() && p.lo < 0 {
                return None;
            }
            let mut acc = BigRational::zero();
            let mut power = if p.lo >= 0 {
                num_traits::pow::Pow::pow(s.clone(), p.lo as u64)
            } else {
                num_traits::pow::Pow::pow(s.clone().recip(), (-p.lo) as u64)
            };
            for c in &p.coeffs {
                acc += BigRational::from_integer(c.clone()) * &power;
                power *= s;
            }
            Some(acc)
        };
        let n = eval_poly(&self.num)?;
        let d = eval_poly(&self.den)?;
        if d.is_zero() {
            None
        } else {
            Some(n / d)
        }
    }

    /// Lowest exponent of `s` in the numerator minus that of the denominator
    /// (the denominator's is 0 in normal form). For display.
    pub fn s_order(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.num.lo)
        }
    }
}

impl fmt::Debug for QScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn fmt_zpoly(p: &ZPoly, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_zero() {
        return write!(f, "0");
    }
    let mut first = true;
    for (i, c) in p.coeffs.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let exp = p.lo + i as i64;
        if first {
            if c.is_negative() {
                write!(f, "-")?;
            }
            first = false;
        } else if c.is_negative() {
            write!(f, " - ")?;
        } else {
            write!(f, " + ")?;
        }
        let a = c.abs();
        if exp == 0 {
            write!(f, "{}", a)?;
        } else if a.is_one() {
            write!(f, "s^{}", exp)?;
        } else {
            write!(f, "{}*s^{}", a, exp)?;
        }
    }
    Ok(())
}

impl fmt::Display for QScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == ZPoly::one() {
            fmt_zpoly(&self.num, f)
        } else {
            write!(f, "(")?;
            fmt_zpoly(&self.num, f)?;
            write!(f, ")/(")?;
            fmt_zpoly(&self.den, f)?;
            write!(f, ")")
        }
    }
}

/// Laurent polynomial in `s = q^(1/2)` with rational coefficients, keyed by
/// the integer exponent of `s` (i.e. the half-integer exponent of `q`).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QLaurent {
    coeffs: BTreeMap<i64, BigRational>,
}

impl QLaurent {
    pub fn zero() -> Self {
        QLaurent { coeffs: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, s_exp: i64) -> BigRational {
        self.coeffs.get(&s_exp).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &BigRational)> {
        self.coeffs.iter()
    }

    pub fn insert(&mut self, s_exp: i64, c: BigRational) {
        if c.is_zero() {
            self.coeffs.remove(&s_exp);
        } else {
            self.coeffs.insert(s_exp, c);
        }
    }

    /// Integer coefficients check (used by BPS-type factorizations).
    pub fn is_integral(&self) -> bool {
        self.coeffs.values().all(|c| c.denom().is_one())
    }

    /// Embed back into the fraction field.
    pub fn to_scalar(&self) -> QScalar {
        let mut denom_lcm = BigInt::one();
        for c in self.coeffs.values() {
            denom_lcm = num_integer::lcm(denom_lcm, c.denom().clone());
        }
        let mut acc = ZPoly::zero();
        for (e, c) in &self.coeffs {
            let int_c = c.numer() * (&denom_lcm / c.denom());
            acc = acc.add(&ZPoly::monomial(*e, int_c));
        }
        QScalar::new(acc, ZPoly::monomial(0, denom_lcm)).expect("nonzero denominator")
    }
}

fn q_exp_string(s_exp: i64) -> String {
    if s_exp % 2 == 0 {
        format!("{}", s_exp / 2)
    } else {
        format!("{}/2", s_exp)
    }
}

fn parse_q_exp(key: &str) -> Result<i64, String> {
    if let Some((n, d)) = key.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|e| format!("{e}"))?;
        let d: i64 = d.trim().parse().map_err(|e| format!("{e}"))?;
        if d != 2 {
            return Err(format!("unsupported exponent denominator {d}"));
        }
        Ok(n)
    } else {
        let n: i64 = key.trim().parse().map_err(|e| format!("{e}"))?;
        Ok(2 * n)
    }
}

impl Serialize for QLaurent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, String> = self
            .coeffs
            .iter()
            .map(|(e, c)| (q_exp_string(*e), format!("{}/{}", c.numer(), c.denom())))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QLaurent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, String>::deserialize(deserializer)?;
        let mut out = QLaurent::zero();
        for (k, v) in map {
            let e = parse_q_exp(&k).map_err(DeError::custom)?;
            let (n, d) = match v.split_once('/') {
                Some((n, d)) => (n.to_string(), d.to_string()),
                None => (v.clone(), "1".to_string()),
            };
            let n: BigInt = n.trim().parse().map_err(DeError::custom)?;
            let d: BigInt = d.trim().parse().map_err(DeError::custom)?;
            if d.is_zero() {
                return Err(DeError::custom("zero denominator"));
            }
            out.insert(e, BigRational::new(n, d));
        }
        Ok(out)
    }
}

impl Serialize for QScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            num: QLaurent,
            den: QLaurent,
        }
        let to_laurent = |p: &ZPoly| {
            let mut l = QLaurent::zero();
            for (i, c) in p.coeffs.iter().enumerate() {
                if !c.is_zero() {
                    l.insert(p.lo + i as i64, BigRational::from_integer(c.clone()));
                }
            }
            l
        };
        Repr { num: to_laurent(&self.num), den: to_laurent(&self.den) }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QScalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            num: QLaurent,
            den: QLaurent,
        }
        let r = Repr::deserialize(deserializer)?;
        if r.den.is_zero() {
            return Err(DeError::custom("zero denominator"));
        }
        r.num
            .to_scalar()
            .div(&r.den.to_scalar())
            .map_err(DeError::custom)
    }
}
