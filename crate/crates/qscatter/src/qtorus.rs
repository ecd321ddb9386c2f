//! The noncommutative monomial algebra of a chart: truncated elements of
//! `k_q[P]`, products with q-twists, wall-crossing automorphisms, and the
//! conversion between Hamiltonians and wall functions.
//!
//! A monomial is `c * ẑ^(m, β)` with tangent part `m` in chart coordinates
//! and central curve-class part `β`; the product rule is
//! `ẑ^(m,β) ẑ^(m',β') = q^(<m,m'>/2) ẑ^(m+m', β+β')` with
//! `<(a,b),(c,d)> = ad - bc`, i.e. a twist by `s^<m,m'>`. Elements are
//! truncated at a fixed order `N`: terms whose class degree reaches `N` are
//! dropped.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::affine::CurveClass;
use crate::error::{QError, QResult};
use crate::qcoeff::QScalar;

pub type Tangent = (i64, i64);

pub fn det2(a: Tangent, b: Tangent) -> i64 {
    a.0 * b.1 - a.1 * b.0
}

/// A single monomial `coeff * ẑ^(tangent, class)` in a fixed chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMonomial {
    pub tangent: Tangent,
    pub class: CurveClass,
    pub coeff: QScalar,
}

/// Multiply two monomials living in the same chart.
pub fn mono_mul(a: &QMonomial, b: &QMonomial) -> QMonomial {
    let twist = QScalar::s_pow(det2(a.tangent, b.tangent));
    QMonomial {
        tangent: (a.tangent.0 + b.tangent.0, a.tangent.1 + b.tangent.1),
        class: a.class.add(&b.class),
        coeff: a.coeff.mul(&b.coeff).mul(&twist),
    }
}

/// A truncated element of the chart algebra: a finite sum of monomials,
/// closed under the declared truncation order.
#[derive(Clone, PartialEq, Eq)]
pub struct QTorusElement {
    pub chart: usize,
    pub order: usize,
    rank: usize,
    terms: BTreeMap<(Tangent, CurveClass), QScalar>,
}

impl QTorusElement {
    pub fn zero(chart: usize, order: usize, rank: usize) -> Self {
        QTorusElement { chart, order, rank, terms: BTreeMap::new() }
    }

    pub fn one(chart: usize, order: usize, rank: usize) -> Self {
        let mut e = QTorusElement::zero(chart, order, rank);
        e.add_term((0, 0), CurveClass::zero(rank), QScalar::one());
        e
    }

    pub fn monomial(
        chart: usize,
        order: usize,
        tangent: Tangent,
        class: CurveClass,
        coeff: QScalar,
    ) -> Self {
        let mut e = QTorusElement::zero(chart, order, class.rank());
        e.add_term(tangent, class, coeff);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Tangent, CurveClass), &QScalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, tangent: Tangent, class: &CurveClass) -> QScalar {
        self.terms
            .get(&(tangent, class.clone()))
            .cloned()
            .unwrap_or_else(QScalar::zero)
    }

    pub fn constant_term(&self) -> QScalar {
        self.terms
            .iter()
            .filter(|((t, c), _)| *t == (0, 0) && c.is_zero())
            .map(|(_, v)| v.clone())
            .next()
            .unwrap_or_else(QScalar::zero)
    }

    /// Add one monomial, respecting truncation and dropping zeros.
    pub fn add_term(&mut self, tangent: Tangent, class: CurveClass, coeff: QScalar) {
        debug_assert_eq!(class.rank(), self.rank, "class rank mismatch");
        if coeff.is_zero() || class.degree() >= self.order as i64 {
            return;
        }
        let key = (tangent, class);
        let entry = self.terms.entry(key.clone()).or_insert_with(QScalar::zero);
        *entry = entry.add(&coeff);
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &QTorusElement) -> QResult<QTorusElement> {
        self.compatible(other)?;
        let mut out = self.clone();
        for ((t, c), v) in &other.terms {
            out.add_term(*t, c.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &QTorusElement) -> QResult<QTorusElement> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> QTorusElement {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.neg();
        }
        out
    }

    pub fn scale(&self, c: &QScalar) -> QTorusElement {
        let mut out = QTorusElement::zero(self.chart, self.order, self.rank);
        for ((t, cl), v) in &self.terms {
            out.add_term(*t, cl.clone(), v.mul(c));
        }
        out
    }

    pub fn mul(&self, other: &QTorusElement) -> QResult<QTorusElement> {
        self.compatible(other)?;
        let mut out = QTorusElement::zero(self.chart, self.order, self.rank);
        for ((ta, ca), va) in &self.terms {
            for ((tb, cb), vb) in &other.terms {
                let class = ca.add(cb);
                if class.degree() >= self.order as i64 {
                    continue;
                }
                let twist = QScalar::s_pow(det2(*ta, *tb));
                out.add_term((ta.0 + tb.0, ta.1 + tb.1), class, va.mul(vb).mul(&twist));
            }
        }
        Ok(out)
    }

    fn compatible(&self, other: &QTorusElement) -> QResult<()> {
        if self.chart != other.chart {
            return Err(QError::ChartMismatch { expected: self.chart, got: other.chart });
        }
        if self.order != other.order {
            return Err(QError::OrderMismatch(self.order, other.order));
        }
        if self.rank != other.rank {
            return Err(QError::InconsistentLengths(format!(
                "class rank {} vs {}",
                self.rank, other.rank
            )));
        }
        Ok(())
    }

    pub fn pow(&self, k: usize) -> QResult<QTorusElement> {
        let rank = self.class_rank();
        let mut acc = QTorusElement::one(self.chart, self.order, rank);
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    pub fn class_rank(&self) -> usize {
        self.rank
    }

    /// Inverse of an element with invertible scalar constant term and all
    /// other terms of class degree >= 1, by geometric series at truncation.
    pub fn inv(&self) -> QResult<QTorusElement> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return Err(QError::DivisionByZero);
        }
        let rank = self.class_rank();
        let one = QTorusElement::one(self.chart, self.order, rank);
        let c0_inv = c0.inv()?;
        // self = c0 (1 + y) with y of positive class degree.
        let y = self.scale(&c0_inv).sub(&one)?;
        if y.terms.iter().any(|((_, c), _)| c.degree() < 1) {
            return Err(QError::DivisionByZero);
        }
        let mut acc = one.clone();
        let mut pow = one;
        for k in 1..self.order {
            pow = pow.mul(&y)?;
            if pow.is_zero() {
                break;
            }
            let signed = if k % 2 == 0 { pow.clone() } else { pow.neg() };
            acc = acc.add(&signed)?;
        }
        Ok(acc.scale(&c0_inv))
    }

    /// `log(self)` for elements with constant term 1 and the rest of class
    /// degree >= 1.
    pub fn log(&self) -> QResult<QTorusElement> {
        let rank = self.class_rank();
        let one = QTorusElement::one(self.chart, self.order, rank);
        if !self.constant_term().is_one() {
            return Err(QError::MalformedWall);
        }
        let y = self.sub(&one)?;
        if y.terms.iter().any(|((_, c), _)| c.degree() < 1) {
            return Err(QError::MalformedWall);
        }
        let mut acc = QTorusElement::zero(self.chart, self.order, rank);
        let mut pow = one;
        for k in 1..self.order {
            pow = pow.mul(&y)?;
            if pow.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&pow.scale(&QScalar::from_rational(sign, k as i64)))?;
        }
        Ok(acc)
    }

    /// `exp(self)` for elements of class degree >= 1 (no constant term).
    pub fn exp(&self) -> QResult<QTorusElement> {
        if self.terms.iter().any(|((_, c), _)| c.degree() < 1) {
            return Err(QError::SupportViolation);
        }
        let rank = self.class_rank();
        let mut acc = QTorusElement::one(self.chart, self.order, rank);
        let mut pow = acc.clone();
        let mut factorial = 1i64;
        for k in 1..self.order {
            pow = pow.mul(self)?;
            factorial *= k as i64;
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow.scale(&QScalar::from_rational(1, factorial)))?;
        }
        Ok(acc)
    }

    /// Map every coefficient, dropping vanished terms.
    pub fn map_coeffs<F: Fn(&QScalar) -> QScalar>(&self, f: F) -> QTorusElement {
        let mut out = QTorusElement::zero(self.chart, self.order, self.rank);
        for ((t, c), v) in &self.terms {
            out.add_term(*t, c.clone(), f(v));
        }
        out
    }

    pub fn retag(&self, chart: usize) -> QTorusElement {
        let mut out = self.clone();
        out.chart = chart;
        out
    }
}

impl fmt::Debug for QTorusElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((t, c), v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}) z^[{:?};{:?}]", v, t, c.0)?;
        }
        Ok(())
    }
}

/// JSON form of one monomial.
#[derive(Serialize, Deserialize)]
pub struct TermSpec {
    pub tangent: (i64, i64),
    pub chart: usize,
    pub class: BTreeMap<String, i64>,
    pub coeff: QScalar,
}

impl QTorusElement {
    pub fn to_specs(&self, labels: &[String]) -> Vec<TermSpec> {
        self.terms
            .iter()
            .map(|((t, c), v)| TermSpec {
                tangent: *t,
                chart: self.chart,
                class: labels
                    .iter()
                    .zip(&c.0)
                    .filter(|(_, m)| **m != 0)
                    .map(|(l, m)| (l.clone(), *m))
                    .collect(),
                coeff: v.clone(),
            })
            .collect()
    }

    pub fn from_specs(
        specs: &[TermSpec],
        chart: usize,
        order: usize,
        labels: &[String],
    ) -> QResult<QTorusElement> {
        let mut e = QTorusElement::zero(chart, order, labels.len());
        for s in specs {
            if s.chart != chart {
                return Err(QError::ChartMismatch { expected: chart, got: s.chart });
            }
            let mut c = CurveClass::zero(labels.len());
            for (l, m) in &s.class {
                let i = labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| QError::Parse(format!("unknown class label {l}")))?;
                c.0[i] = *m;
            }
            e.add_term(s.tangent, c, s.coeff.clone());
        }
        Ok(e)
    }
}

// ---------------------------------------------------------------------------
// Wall functions and crossing automorphisms
// ---------------------------------------------------------------------------

/// Check that `f` is a wall function for direction `dir`: constant term 1,
/// every other term's tangent a negative multiple of `dir`, and every other
/// term of class degree >= 1.
pub fn check_wall_function(f: &QTorusElement, dir: Tangent) -> QResult<()> {
    if !crate::affine::is_primitive(dir) {
        return Err(QError::MalformedWall);
    }
    if !f.constant_term().is_one() {
        return Err(QError::MalformedWall);
    }
    for ((t, c), _) in f.terms() {
        if *t == (0, 0) && c.is_zero() {
            continue;
        }
        if wall_multiple(*t, dir).map_or(true, |l| l >= 0) {
            return Err(QError::MalformedWall);
        }
        if c.degree() < 1 {
            return Err(QError::MalformedWall);
        }
    }
    Ok(())
}

/// Write `t = l * dir` when `t` is an integer multiple of the primitive
/// `dir`; `None` otherwise.
pub fn wall_multiple(t: Tangent, dir: Tangent) -> Option<i64> {
    if det2(t, dir) != 0 {
        return None;
    }
    let l = if dir.0 != 0 { t.0 / dir.0 } else { t.1 / dir.1 };
    if (dir.0 * l, dir.1 * l) == t {
        Some(l)
    } else {
        None
    }
}

/// The dressed function `f(q^j ẑ)`: the term with tangent `l*dir` is scaled
/// by `q^(l*j)`.
pub fn dress(f: &QTorusElement, dir: Tangent, j: i64) -> QTorusElement {
    let mut out = QTorusElement::zero(f.chart, f.order, f.class_rank());
    for ((t, c), v) in f.terms() {
        if *t == (0, 0) && c.is_zero() {
            out.add_term(*t, c.clone(), v.clone());
            continue;
        }
        let l = wall_multiple(*t, dir).expect("wall function support");
        out.add_term(*t, c.clone(), v.mul(&QScalar::s_pow(2 * l * j)));
    }
    out
}

/// Apply the wall-crossing automorphism of a wall with direction `dir` and
/// function `f` to `elem`, with sign `eps`:
/// `ẑ^p -> ẑ^p Π_{j=0}^{n-1} f(q^j ẑ)^{eps}` when `n = <dir, r(p)> >= 0`,
/// and `ẑ^p Π_{j=0}^{|n|-1} f(q^{-j-1} ẑ)^{-eps}` when `n < 0`.
pub fn wallcross_apply(
    f: &QTorusElement,
    dir: Tangent,
    elem: &QTorusElement,
    eps: i8,
) -> QResult<QTorusElement> {
    check_wall_function(f, dir)?;
    if f.chart != elem.chart {
        return Err(QError::ChartMismatch { expected: elem.chart, got: f.chart });
    }
    if f.order != elem.order {
        return Err(QError::OrderMismatch(elem.order, f.order));
    }
    let order = elem.order;
    let mut out = QTorusElement::zero(elem.chart, order, elem.class_rank());
    let mut factors: BTreeMap<i64, QTorusElement> = BTreeMap::new();
    for ((t, c), v) in elem.terms() {
        let n = det2(dir, *t);
        if !factors.contains_key(&n) {
            factors.insert(n, crossing_factor(f, dir, n, eps)?);
        }
        let factor = &factors[&n];
        let mono = QTorusElement::monomial(elem.chart, order, *t, c.clone(), v.clone());
        out = out.add(&mono.mul(factor)?)?;
    }
    Ok(out)
}

/// The product `Π f(q^j ẑ)^{±1}` attached to a monomial with pairing `n`.
fn crossing_factor(f: &QTorusElement, dir: Tangent, n: i64, eps: i8) -> QResult<QTorusElement> {
    let rank = f.class_rank();
    let mut acc = QTorusElement::one(f.chart, f.order, rank);
    if n >= 0 {
        for j in 0..n {
            let d = dress(f, dir, j);
            let d = if eps > 0 { d } else { d.inv()? };
            acc = acc.mul(&d)?;
        }
    } else {
        for j in 0..(-n) {
            let d = dress(f, dir, -j - 1);
            let d = if eps > 0 { d.inv()? } else { d };
            acc = acc.mul(&d)?;
        }
    }
    Ok(acc)
}

/// The non-inverted product that governs broken-line bending at a point
/// where several walls meet: for each wall `w` with `n_w = <dir_w, r(p_L)>`,
/// the factor `Π_{j=0}^{n_w-1} f_w(q^j ẑ)` when `n_w > 0` and
/// `Π_{j=0}^{|n_w|-1} f_w(q^{-j-1} ẑ)` when `n_w < 0`; walls with `n_w = 0`
/// contribute nothing.
pub fn bend_product(
    walls: &[(Tangent, QTorusElement)],
    incoming_tangent: Tangent,
    chart: usize,
    order: usize,
    rank: usize,
) -> QResult<QTorusElement> {
    let mut acc = QTorusElement::one(chart, order, rank);
    for (dir, f) in walls {
        let n = det2(*dir, incoming_tangent);
        if n > 0 {
            for j in 0..n {
                acc = acc.mul(&dress(f, *dir, j))?;
            }
        } else if n < 0 {
            for j in 0..(-n) {
                acc = acc.mul(&dress(f, *dir, -j - 1))?;
            }
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

/// A wall Hamiltonian: a formal sum `Σ H_p ẑ^p` with every tangent a
/// negative multiple of the primitive direction. Coefficients are allowed
/// the `1/(q^l - 1)`-type denominators that never appear in persistent data.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub dir: Tangent,
    pub chart: usize,
    pub order: usize,
    pub rank: usize,
    pub terms: Vec<(Tangent, CurveClass, QScalar)>,
}

/// `f = exp( Σ (q^l - 1) H_p ẑ^p )` where `r(p) = l * dir` (so `l <= 0`).
pub fn hamiltonian_to_f(h: &Hamiltonian) -> QResult<QTorusElement> {
    let mut arg = QTorusElement::zero(h.chart, h.order, h.rank);
    for (t, c, v) in &h.terms {
        let l = wall_multiple(*t, h.dir).ok_or(QError::SupportViolation)?;
        if l >= 0 {
            return Err(QError::SupportViolation);
        }
        let factor = QScalar::q_pow(l).sub(&QScalar::one());
        arg.add_term(*t, c.clone(), v.mul(&factor));
    }
    arg.exp()
}

/// Inverse of [`hamiltonian_to_f`]: `H_p = (log f)_p / (q^l - 1)`.
pub fn f_to_hamiltonian(f: &QTorusElement, dir: Tangent) -> QResult<Hamiltonian> {
    check_wall_function(f, dir)?;
    let lg = f.log()?;
    let mut terms = Vec::new();
    for ((t, c), v) in lg.terms() {
        let l = wall_multiple(*t, dir).ok_or(QError::SupportViolation)?;
        let factor = QScalar::q_pow(l).sub(&QScalar::one());
        terms.push((*t, c.clone(), v.div(&factor)?));
    }
    Ok(Hamiltonian { dir, chart: f.chart, order: f.order, rank: f.class_rank(), terms })
}

// ---------------------------------------------------------------------------
// BPS-type product factorization
// ---------------------------------------------------------------------------

/// One factor `(1 + q^((j-1)/2) ẑ^p)^Ω` of a wall-function factorization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpsFactor {
    pub tangent: Tangent,
    pub class: CurveClass,
    pub j: i64,
    pub omega: i64,
}

/// Greedy order-by-order factorization of a wall function into the product
/// `Π (1 + q^((j-1)/2) ẑ^p)^{Ω_{p,j}}` with integer exponents.
pub fn bps_factorize(f: &QTorusElement, dir: Tangent) -> QResult<Vec<BpsFactor>> {
    check_wall_function(f, dir)?;
    let rank = f.class_rank();
    let one = QTorusElement::one(f.chart, f.order, rank);
    let mut rem = f.clone();
    let mut out = Vec::new();
    loop {
        let next = rem
            .terms()
            .filter(|((t, c), _)| !(*t == (0, 0) && c.is_zero()))
            .map(|((t, c), v)| (c.degree(), *t, c.clone(), v.clone()))
            .min_by(|a, b| (a.0, a.1, &a.2).cmp(&(b.0, b.1, &b.2)));
        let Some((_, t, c, v)) = next else { break };
        let laurent = v.as_laurent().map_err(|_| QError::NonIntegralExponent)?;
        if !laurent.is_integral() {
            return Err(QError::NonIntegralExponent);
        }
        let mut to_divide = Vec::new();
        for (s_exp, coeff) in laurent.terms() {
            // coefficient of s^(j-1) is Ω_{p,j}
            let j = s_exp + 1;
            let omega: i64 = {
                use num_traits::ToPrimitive;
                coeff.to_integer().to_i64().ok_or(QError::NonIntegralExponent)?
            };
            out.push(BpsFactor { tangent: t, class: c.clone(), j, omega });
            to_divide.push((j, omega));
        }
        for (j, omega) in to_divide {
            let factor = one.add(&QTorusElement::monomial(
                f.chart,
                f.order,
                t,
                c.clone(),
                QScalar::s_pow(j - 1),
            ))?;
            let step = if omega >= 0 { factor.inv()? } else { factor };
            for _ in 0..omega.unsigned_abs() {
                rem = rem.mul(&step)?;
            }
        }
    }
    out.sort_by(|a, b| {
        (a.class.degree(), a.tangent, &a.class, a.j).cmp(&(
            b.class.degree(),
            b.tangent,
            &b.class,
            b.j,
        ))
    });
    Ok(out)
}

/// Rebuild the product from its factors (used to verify factorizations).
pub fn bps_reconstruct(
    factors: &[BpsFactor],
    chart: usize,
    order: usize,
    rank: usize,
) -> QResult<QTorusElement> {
    let one = QTorusElement::one(chart, order, rank);
    let mut acc = one.clone();
    for f in factors {
        let base = one.add(&QTorusElement::monomial(
            chart,
            order,
            f.tangent,
            f.class.clone(),
            QScalar::s_pow(f.j - 1),
        ))?;
        let step = if f.omega >= 0 { base } else { base.inv()? };
        for _ in 0..f.omega.unsigned_abs() {
            acc = acc.mul(&step)?;
        }
    }
    Ok(acc)
}

// Deterministic tiny generator for randomized algebra tests.
#[doc(hidden)]
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next_u64() % ((hi - lo + 1) as u64)) as i64
    }
}

/// Small random element over one class label; used by property tests and
/// the acceptance suite.
#[doc(hidden)]
pub fn random_element(rng: &mut Lcg, order: usize, max_terms: usize) -> QTorusElement {
    let mut e = QTorusElement::zero(0, order, 1);
    let n = 1 + (rng.next_u64() as usize) % max_terms;
    for _ in 0..n {
        let t = (rng.range(-2, 2), rng.range(-2, 2));
        let c = CurveClass(vec![rng.range(0, 2)]);
        let coeff = QScalar::s_pow(rng.range(-2, 2)).mul(&QScalar::from_int(rng.range(-3, 3)));
        e.add_term(t, c, coeff);
    }
    e
}
