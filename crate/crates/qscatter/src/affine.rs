//! The integral affine surface `(B, Σ)` with one singular point at the
//! origin: rays, charts, parallel transport with kinks, integral points,
//! the developing map, and the torus-weight map.
//!
//! `B` is glued from `r` two-dimensional cones `σ_{j,j+1}` along rays
//! `ρ_1, ..., ρ_r` (indices mod `r`). The chart around `ρ_j` sends
//! `v_{j-1} -> (1,0)`, `v_j -> (0,1)`, `v_{j+1} -> (-1, -d_j)` where
//! `d_j = D_j^2`, so the fan relation `v_{j-1} + d_j v_j + v_{j+1} = 0`
//! holds in every chart. Tangent coordinates `(a, b)` in chart `j` always
//! mean `a*v_j + b*v_{j+1}`.
//!
//! The multivalued piecewise-linear function φ is never stored: its kinks
//! (one effective curve class per ray) are folded into monomial transport,
//! so a monomial is a pair (tangent vector, curve class) relative to a
//! chart, and crossing `ρ_j` shifts the class by a multiple of the kink.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{QError, QResult};

/// A curve class: an integer vector over the surface's class labels.
/// Effective classes have all coordinates >= 0; intermediate transport
/// results may momentarily leave the effective cone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurveClass(pub Vec<i64>);

impl CurveClass {
    pub fn zero(rank: usize) -> Self {
        CurveClass(vec![0; rank])
    }

    pub fn unit(rank: usize, i: usize) -> Self {
        let mut v = vec![0; rank];
        v[i] = 1;
        CurveClass(v)
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0)
    }

    pub fn is_effective(&self) -> bool {
        self.0.iter().all(|c| *c >= 0)
    }

    /// Total degree: the sum of coordinates. This is the grading used for
    /// every truncation in the crate.
    pub fn degree(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &CurveClass) -> CurveClass {
        debug_assert_eq!(self.rank(), other.rank());
        CurveClass(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CurveClass) -> CurveClass {
        debug_assert_eq!(self.rank(), other.rank());
        CurveClass(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, k: i64) -> CurveClass {
        CurveClass(self.0.iter().map(|a| a * k).collect())
    }
}

impl fmt::Debug for CurveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A tangent vector (or point) of `B` in chart coordinates:
/// `coords = (a, b)` means `a*v_chart + b*v_{chart+1}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChartVector {
    pub chart: usize,
    pub coords: (i64, i64),
}

impl ChartVector {
    pub fn new(chart: usize, a: i64, b: i64) -> Self {
        ChartVector { chart, coords: (a, b) }
    }
}

/// A point of `B` with rational coordinates in a chart, plus a winding
/// counter for paths that wrap the origin (the cut-and-develop picture).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DevelopedPoint {
    pub chart: usize,
    pub coords: (BigRational, BigRational),
    pub winding: i64,
}

impl DevelopedPoint {
    pub fn from_rationals(chart: usize, a: BigRational, b: BigRational) -> Self {
        DevelopedPoint { chart, coords: (a, b), winding: 0 }
    }

    pub fn from_fractions(chart: usize, a: (i64, i64), b: (i64, i64)) -> Self {
        DevelopedPoint::from_rationals(
            chart,
            BigRational::new(BigInt::from(a.0), BigInt::from(a.1)),
            BigRational::new(BigInt::from(b.0), BigInt::from(b.1)),
        )
    }
}

/// Per-ray construction data: self-intersection, kink class, and the
/// blow-up (exceptional) classes attached to the dual boundary divisor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RaySpec {
    pub selfint: i64,
    #[serde(default)]
    pub kink: BTreeMap<String, i64>,
    #[serde(default)]
    pub exceptionals: Vec<String>,
}

/// JSON form of a surface description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub rays: Vec<RaySpec>,
    pub classes: Vec<String>,
    /// Optional intersection data: for each class label, the vector of
    /// intersection numbers with the boundary divisors `D_1..D_r`.
    /// Required by torus-weight checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<BTreeMap<String, Vec<i64>>>,
    /// Optional degree-preserving relations among the class labels, as
    /// integer vectors over `classes`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<Vec<i64>>,
}

/// Relations among the class labels: the kernel lattice of the map onto
/// the honest curve-class group, in Hermite normal form. Classes are
/// compared modulo this lattice; every relation must have coordinate sum
/// zero so that the degree grading descends.
#[derive(Clone, Debug, Default)]
pub struct ClassRelations {
    /// HNF rows with `pivots[i]` the pivot column of row `i`.
    rows: Vec<Vec<i64>>,
    pivots: Vec<usize>,
}

impl ClassRelations {
    /// Build from a spanning set of relation vectors.
    pub fn new(relations: Vec<Vec<i64>>, rank: usize) -> QResult<ClassRelations> {
        let mut work: Vec<Vec<i64>> = Vec::new();
        for r in relations {
            if r.len() != rank {
                return Err(QError::InconsistentLengths("relation length".into()));
            }
            if r.iter().sum::<i64>() != 0 {
                return Err(QError::Parse(
                    "class relation does not preserve total degree".into(),
                ));
            }
            work.push(r);
        }
        // Integer row echelon (Hermite) by repeated gcd elimination.
        let mut rows: Vec<Vec<i64>> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        for col in 0..rank {
            loop {
                let mut candidates: Vec<usize> = (0..work.len())
                    .filter(|i| work[*i][col] != 0 && work[*i][..col].iter().all(|x| *x == 0))
                    .collect();
                if candidates.len() <= 1 {
                    break;
                }
                candidates.sort_by_key(|i| work[*i][col].abs());
                let (a, b) = (candidates[0], candidates[1]);
                let q = work[b][col] / work[a][col];
                for k in 0..rank {
                    work[b][k] -= q * work[a][k];
                }
            }
            if let Some(i) = (0..work.len())
                .find(|i| work[*i][col] != 0 && work[*i][..col].iter().all(|x| *x == 0))
            {
                let mut row = work[i].clone();
                if row[col] < 0 {
                    for x in &mut row {
                        *x = -*x;
                    }
                }
                rows.push(row);
                pivots.push(col);
                work[i] = vec![0; rank];
            }
        }
        // Reduce entries above each pivot for a unique normal form.
        for i in (0..rows.len()).rev() {
            let (p, h) = (pivots[i], rows[i][pivots[i]]);
            for j in 0..i {
                let q = rows[j][p].div_euclid(h);
                if q != 0 {
                    for k in 0..rank {
                        rows[j][k] -= q * rows[i][k];
                    }
                }
            }
        }
        Ok(ClassRelations { rows, pivots })
    }

    /// Canonical coset representative: pivot coordinates reduced into
    /// `[0, pivot entry)`.
    pub fn reduce(&self, class: &CurveClass) -> CurveClass {
        let mut v = class.0.clone();
        for (row, p) in self.rows.iter().zip(&self.pivots) {
            let h = row[*p];
            let q = v[*p].div_euclid(h);
            if q != 0 {
                for k in 0..v.len() {
                    v[k] -= q * row[k];
                }
            }
        }
        CurveClass(v)
    }

    pub fn is_trivial(&self) -> bool {
        self.rows.is_empty()
    }
}

/// The tropicalization `(B, Σ)`: rays with self-intersections, kinks valued
/// in curve classes, and the class-lattice bookkeeping.
#[derive(Clone, Debug)]
pub struct TropicalSurface {
    selfint: Vec<i64>,
    kinks: Vec<CurveClass>,
    labels: Vec<String>,
    /// Blow-up class indices attached per ray (used by canonical diagrams).
    exceptionals: Vec<Vec<usize>>,
    /// `pairing[c][j]` = (class c) . D_j, when supplied.
    pairing: Option<Vec<Vec<i64>>>,
    /// Relations among the class labels (trivial by default).
    relations: ClassRelations,
}

impl TropicalSurface {
    /// Build a surface from the raw sequences. `kinks[j]` is the class
    /// `κ_j = η([D_j])` attached to ray `j`.
    pub fn new(
        selfint: Vec<i64>,
        kinks: Vec<CurveClass>,
        labels: Vec<String>,
    ) -> QResult<TropicalSurface> {
        if selfint.is_empty() {
            return Err(QError::InconsistentLengths("need at least one ray".into()));
        }
        if selfint.len() != kinks.len() {
            return Err(QError::InconsistentLengths(format!(
                "{} self-intersections vs {} kinks",
                selfint.len(),
                kinks.len()
            )));
        }
        let rank = labels.len();
        for k in &kinks {
            if k.rank() != rank {
                return Err(QError::InconsistentLengths(
                    "kink class rank differs from label count".into(),
                ));
            }
            if !k.is_effective() {
                return Err(QError::InconsistentLengths("kink class not effective".into()));
            }
        }
        let r = selfint.len();
        Ok(TropicalSurface {
            selfint,
            kinks,
            labels,
            exceptionals: vec![Vec::new(); r],
            pairing: None,
            relations: ClassRelations::default(),
        })
    }

    pub fn from_spec(spec: &SurfaceSpec) -> QResult<TropicalSurface> {
        let labels = spec.classes.clone();
        let index_of = |l: &str| -> QResult<usize> {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| QError::Parse(format!("unknown class label {l}")))
        };
        let mut selfint = Vec::new();
        let mut kinks = Vec::new();
        let mut exceptionals = Vec::new();
        for ray in &spec.rays {
            selfint.push(ray.selfint);
            let mut k = CurveClass::zero(labels.len());
            for (l, m) in &ray.kink {
                k.0[index_of(l)?] = *m;
            }
            kinks.push(k);
            let mut ex = Vec::new();
            for l in &ray.exceptionals {
                ex.push(index_of(l)?);
            }
            exceptionals.push(ex);
        }
        let pairing = match &spec.pairing {
            None => None,
            Some(map) => {
                let mut rows = vec![vec![0i64; selfint.len()]; labels.len()];
                for (l, v) in map {
                    if v.len() != selfint.len() {
                        return Err(QError::InconsistentLengths(format!(
                            "pairing row for {l} has length {}, expected {}",
                            v.len(),
                            selfint.len()
                        )));
                    }
                    rows[index_of(l)?] = v.clone();
                }
                Some(rows)
            }
        };
        let mut s = TropicalSurface::new(selfint, kinks, labels)?;
        s.exceptionals = exceptionals;
        s.pairing = pairing;
        if !spec.relations.is_empty() {
            s.relations = ClassRelations::new(spec.relations.clone(), s.class_rank())?;
        }
        Ok(s)
    }

    pub fn to_spec(&self) -> SurfaceSpec {
        let rays = (0..self.ray_count())
            .map(|j| RaySpec {
                selfint: self.selfint[j],
                kink: self
                    .labels
                    .iter()
                    .zip(&self.kinks[j].0)
                    .filter(|(_, m)| **m != 0)
                    .map(|(l, m)| (l.clone(), *m))
                    .collect(),
                exceptionals: self.exceptionals[j]
                    .iter()
                    .map(|i| self.labels[*i].clone())
                    .collect(),
            })
            .collect();
        let pairing = self.pairing.as_ref().map(|rows| {
            self.labels
                .iter()
                .zip(rows)
                .map(|(l, row)| (l.clone(), row.clone()))
                .collect()
        });
        SurfaceSpec {
            rays,
            classes: self.labels.clone(),
            pairing,
            relations: self.relations.rows.clone(),
        }
    }

    pub fn ray_count(&self) -> usize {
        self.selfint.len()
    }

    pub fn class_rank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn selfint(&self, ray: usize) -> i64 {
        self.selfint[ray % self.ray_count()]
    }

    pub fn kink(&self, ray: usize) -> &CurveClass {
        &self.kinks[ray % self.ray_count()]
    }

    pub fn exceptional_classes(&self, ray: usize) -> &[usize] {
        &self.exceptionals[ray % self.ray_count()]
    }

    pub fn set_exceptionals(&mut self, per_ray: Vec<Vec<usize>>) {
        assert_eq!(per_ray.len(), self.ray_count());
        self.exceptionals = per_ray;
    }

    pub fn set_pairing(&mut self, rows: Vec<Vec<i64>>) {
        assert_eq!(rows.len(), self.class_rank());
        self.pairing = Some(rows);
    }

    pub fn set_relations(&mut self, relations: Vec<Vec<i64>>) -> QResult<()> {
        self.relations = ClassRelations::new(relations, self.class_rank())?;
        Ok(())
    }

    /// Canonical representative of a class modulo the label relations.
    pub fn reduce_class(&self, class: &CurveClass) -> CurveClass {
        if self.relations.is_trivial() {
            class.clone()
        } else {
            self.relations.reduce(class)
        }
    }

    pub fn classes_equal(&self, a: &CurveClass, b: &CurveClass) -> bool {
        self.reduce_class(a) == self.reduce_class(b)
    }

    /// `(class) . D_j` from the supplied intersection data.
    pub fn pair_with_boundary(&self, class: &CurveClass, ray: usize) -> QResult<i64> {
        let rows = self
            .pairing
            .as_ref()
            .ok_or_else(|| QError::Parse("surface has no intersection data".into()))?;
        let j = ray % self.ray_count();
        Ok(class.0.iter().zip(rows).map(|(m, row)| m * row[j]).sum())
    }

    pub fn has_pairing(&self) -> bool {
        self.pairing.is_some()
    }

    /// Every kink has positive total degree. Broken-line enumeration relies
    /// on this for termination when the surface has nontrivial monodromy.
    pub fn all_kinks_positive(&self) -> bool {
        self.kinks.iter().all(|k| k.degree() >= 1)
    }

    /// Tangent transport across `ρ_{j+1}`, counterclockwise from chart `j`
    /// (basis `v_j, v_{j+1}`) to chart `j+1` (basis `v_{j+1}, v_{j+2}`):
    /// `(a, b) -> (b - a*d_{j+1}, -a)`.
    pub fn cross_ccw(&self, chart: usize, v: (i64, i64)) -> (i64, i64) {
        let d = self.selfint(chart + 1);
        (v.1 - v.0 * d, -v.0)
    }

    /// Inverse of [`Self::cross_ccw`]: from chart `j+1` back to chart `j`
    /// across `ρ_{j+1}`.
    pub fn cross_cw(&self, chart_from: usize, v: (i64, i64)) -> (i64, i64) {
        let d = self.selfint(chart_from);
        (-v.1, v.0 - v.1 * d)
    }

    /// Transport a tangent vector across one ray. `crossing` is the ray
    /// index; `direction = +1` crosses counterclockwise (the vector must be
    /// presented in the chart before the ray), `direction = -1` clockwise
    /// (presented in the chart after it).
    pub fn transport_tangent(
        &self,
        v: &ChartVector,
        crossing: usize,
        direction: i8,
    ) -> QResult<ChartVector> {
        let r = self.ray_count();
        let crossing = crossing % r;
        if direction > 0 {
            let expected = (crossing + r - 1) % r;
            if v.chart % r != expected {
                return Err(QError::NonAdjacentChart(crossing));
            }
            Ok(ChartVector { chart: crossing, coords: self.cross_ccw(expected, v.coords) })
        } else {
            if v.chart % r != crossing {
                return Err(QError::NonAdjacentChart(crossing));
            }
            Ok(ChartVector {
                chart: (crossing + r - 1) % r,
                coords: self.cross_cw(crossing, v.coords),
            })
        }
    }

    /// Transport a monomial `(tangent, class)` across one ray, folding the
    /// kink into the class part. Counterclockwise across `ρ_{j+1}` from
    /// chart `j`, the class shifts by `a * κ_{j+1}` where `a` is the
    /// coefficient of `v_j`; clockwise is the exact inverse.
    pub fn transport_monomial(
        &self,
        v: &ChartVector,
        class: &CurveClass,
        crossing: usize,
        direction: i8,
    ) -> QResult<(ChartVector, CurveClass)> {
        let moved = self.transport_tangent(v, crossing, direction)?;
        let shift = if direction > 0 {
            self.kink(crossing).scaled(v.coords.0)
        } else {
            self.kink(crossing).scaled(v.coords.1)
        };
        Ok((moved, class.add(&shift)))
    }

    /// The torus-weight map on points of `B`: `a*v_j + b*v_{j+1}` maps to
    /// `a*e_{D_j} + b*e_{D_{j+1}}` in `Z^r`.
    pub fn weight(&self, p: &ChartVector) -> Vec<i64> {
        let r = self.ray_count();
        let mut w = vec![0i64; r];
        w[p.chart % r] += p.coords.0;
        w[(p.chart + 1) % r] += p.coords.1;
        w
    }

    /// Canonical representative of an integral point: points on a ray `ρ_j`
    /// are presented in chart `j` as `(a, 0)`.
    pub fn canonical_point(&self, p: &ChartVector) -> ChartVector {
        let r = self.ray_count();
        let chart = p.chart % r;
        let (a, b) = p.coords;
        assert!(a >= 0 && b >= 0, "points of B have nonnegative coordinates");
        if a == 0 && b > 0 {
            ChartVector { chart: (chart + 1) % r, coords: (b, 0) }
        } else {
            ChartVector { chart, coords: (a, b) }
        }
    }

    /// Composed counterclockwise monodromy around the origin, acting on
    /// chart-0 tangent coordinates (columns are the images of `v_0`, `v_1`).
    pub fn monodromy(&self) -> [[i64; 2]; 2] {
        let r = self.ray_count();
        let mut e1 = (1i64, 0i64);
        let mut e2 = (0i64, 1i64);
        for j in 0..r {
            e1 = self.cross_ccw(j, e1);
            e2 = self.cross_ccw(j, e2);
        }
        [[e1.0, e2.0], [e1.1, e2.1]]
    }

    /// A surface with trivial kinks and trivial monodromy extends its affine
    /// structure over the origin.
    pub fn is_toric(&self) -> bool {
        self.kinks.iter().all(|k| k.is_zero()) && self.monodromy() == [[1, 0], [0, 1]]
    }
}

/// Convenience constructor mirroring the surface description file.
pub fn build_surface(
    selfint: Vec<i64>,
    kinks: Vec<CurveClass>,
    labels: Vec<String>,
) -> QResult<TropicalSurface> {
    TropicalSurface::new(selfint, kinks, labels)
}

// ---------------------------------------------------------------------------
// Developing map
// ---------------------------------------------------------------------------

pub type Vec2 = (BigInt, BigInt);
pub type Point2 = (BigRational, BigRational);

pub fn cross2(a: &Vec2, b: &Vec2) -> BigInt {
    &a.0 * &b.1 - &a.1 * &b.0
}

fn cross_pv(p: &Point2, v: &Vec2) -> BigRational {
    &p.0 * BigRational::from_integer(v.1.clone()) - &p.1 * BigRational::from_integer(v.0.clone())
}

/// The development of the cone sequence around the origin, cut at a base
/// chart. Sheet `k` (any integer) is the developed image of the chart
/// `(base + k) mod r`; its boundary rays are `u_k` and `u_{k+1}` with
/// `u_0 = (1,0)`, `u_1 = (0,1)` and the fan relation
/// `u_{k-1} + d_{base+k} * u_k + u_{k+1} = 0`.
pub struct Developing<'a> {
    surface: &'a TropicalSurface,
    base: usize,
    fwd: Vec<Vec2>,
    bwd: Vec<Vec2>,
}

impl<'a> Developing<'a> {
    pub fn new(surface: &'a TropicalSurface, base: usize) -> Self {
        Developing {
            surface,
            base,
            fwd: vec![(BigInt::one(), BigInt::zero()), (BigInt::zero(), BigInt::one())],
            bwd: Vec::new(),
        }
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn surface(&self) -> &TropicalSurface {
        self.surface
    }

    /// Chart index underlying sheet `k`.
    pub fn chart_of_sheet(&self, k: i64) -> usize {
        let r = self.surface.ray_count() as i64;
        (((self.base as i64 + k) % r + r) % r) as usize
    }

    /// Ray of Σ corresponding to the developed boundary ray `u_k` (the ray
    /// between sheets `k-1` and `k`).
    pub fn ray_of_boundary(&self, k: i64) -> usize {
        self.chart_of_sheet(k)
    }

    /// Developed boundary ray vector `u_k`.
    pub fn u(&mut self, k: i64) -> Vec2 {
        if k >= 0 {
            let k = k as usize;
            while self.fwd.len() <= k {
                let n = self.fwd.len();
                // u_n = -u_{n-2} - d_{base+n-1} * u_{n-1}
                let d = self.surface.selfint(self.base + n - 1);
                let a = self.fwd[n - 2].clone();
                let b = self.fwd[n - 1].clone();
                let nx = -&a.0 - BigInt::from(d) * &b.0;
                let ny = -&a.1 - BigInt::from(d) * &b.1;
                self.fwd.push((nx, ny));
            }
            self.fwd[k].clone()
        } else {
            let idx = (-k - 1) as usize;
            while self.bwd.len() <= idx {
                let n = self.bwd.len() as i64 + 1; // computing u_{-n}
                // u_{-n} = -u_{-n+2} - d_{base-n+1} * u_{-n+1}
                let d = self.surface.selfint(self.chart_of_sheet(-n + 1));
                let a = self.u(-n + 2);
                let b = self.u(-n + 1);
                let nx = -&a.0 - BigInt::from(d) * &b.0;
                let ny = -&a.1 - BigInt::from(d) * &b.1;
                self.bwd.push((nx, ny));
            }
            self.bwd[idx].clone()
        }
    }

    /// Developed image of a tangent vector presented in the chart of sheet
    /// `k`: `(a, b) -> a*u_k + b*u_{k+1}`.
    pub fn develop_tangent(&mut self, sheet: i64, v: (i64, i64)) -> Vec2 {
        let uk = self.u(sheet);
        let uk1 = self.u(sheet + 1);
        (
            BigInt::from(v.0) * &uk.0 + BigInt::from(v.1) * &uk1.0,
            BigInt::from(v.0) * &uk.1 + BigInt::from(v.1) * &uk1.1,
        )
    }

    /// Express a developed integer vector in the chart basis of sheet `k`.
    /// Adjacent developed rays are a unimodular pair, so this is exact.
    pub fn tangent_in_sheet(&mut self, sheet: i64, w: &Vec2) -> (i64, i64) {
        let uk = self.u(sheet);
        let uk1 = self.u(sheet + 1);
        let a = cross2(w, &uk1);
        let b = cross2(&uk, w);
        let to_i64 = |x: BigInt| -> i64 {
            use num_traits::ToPrimitive;
            x.to_i64().expect("tangent coordinate overflow")
        };
        (to_i64(a), to_i64(b))
    }

    /// Developed image of a rational point in the chart of sheet `k`.
    pub fn develop_point(&mut self, sheet: i64, p: &(BigRational, BigRational)) -> Point2 {
        let uk = self.u(sheet);
        let uk1 = self.u(sheet + 1);
        (
            &p.0 * BigRational::from_integer(uk.0.clone())
                + &p.1 * BigRational::from_integer(uk1.0.clone()),
            &p.0 * BigRational::from_integer(uk.1.clone())
                + &p.1 * BigRational::from_integer(uk1.1.clone()),
        )
    }

    /// Whether the developed vector `w` lies in the closed cone of sheet `k`.
    pub fn cone_contains(&mut self, sheet: i64, w: &Vec2) -> bool {
        let uk = self.u(sheet);
        let uk1 = self.u(sheet + 1);
        !cross2(&uk, w).is_negative() && !cross2(w, &uk1).is_negative()
    }
}

/// One Σ-ray crossing met by a straight developed path.
#[derive(Clone, Debug)]
pub struct RayCrossing {
    /// Sheet boundary index: the path crosses the developed ray `u_k`.
    pub boundary: i64,
    /// Ray of Σ corresponding to that boundary.
    pub ray: usize,
    /// Crossing time along the path, `> 0`.
    pub t: BigRational,
    /// Crossing point in the developed plane.
    pub point: Point2,
    /// +1 when the path moves counterclockwise (sheet `k-1` to `k`),
    /// -1 clockwise.
    pub direction: i8,
}

/// Walk a straight developed path `x + t*dir`, `t > 0`, starting inside
/// sheet `start_sheet`, listing Σ-ray crossings in order until the path
/// escapes to infinity inside a sheet or `max_crossings` is exceeded.
///
/// Errors with [`QError::DegenerateEndpoint`] when the path runs through the
/// origin or along a boundary ray; callers perturb and retry.
pub fn develop_ray_crossings(
    dev: &mut Developing<'_>,
    start_sheet: i64,
    x: &Point2,
    dir: &Vec2,
    max_crossings: usize,
) -> QResult<Vec<RayCrossing>> {
    let mut out = Vec::new();
    let mut sheet = start_sheet;
    let mut t0 = BigRational::zero();
    if dir.0.is_zero() && dir.1.is_zero() {
        return Err(QError::DegenerateEndpoint);
    }
    loop {
        if out.len() > max_crossings {
            break;
        }
        if dev.cone_contains(sheet, dir) {
            break; // the ray eventually stays inside this sheet
        }
        // A straight path leaves the closed cone through one of its two
        // boundary rays; compute both candidate exit times and take the
        // earliest one strictly after the current position.
        let uk = dev.u(sheet);
        let uk1 = dev.u(sheet + 1);
        let mut best: Option<(BigRational, i64, Vec2, i8)> = None;
        for (boundary, bvec, step) in [(sheet, uk, -1i8), (sheet + 1, uk1, 1i8)] {
            let denom = cross2(dir, &bvec);
            if denom.is_zero() {
                continue;
            }
            let t = -cross_pv(x, &bvec) / BigRational::from_integer(denom);
            if t <= t0 {
                continue;
            }
            if best.as_ref().map_or(true, |(bt, _, _, _)| &t < bt) {
                best = Some((t, boundary, bvec, step));
            }
        }
        let Some((t, boundary, bvec, step)) = best else {
            return Err(QError::DegenerateEndpoint);
        };
        let point = (
            &x.0 + &t * BigRational::from_integer(dir.0.clone()),
            &x.1 + &t * BigRational::from_integer(dir.1.clone()),
        );
        if point.0.is_zero() && point.1.is_zero() {
            return Err(QError::DegenerateEndpoint);
        }
        // The crossing must land on the positive half of the boundary ray.
        let dot = &point.0 * BigRational::from_integer(bvec.0.clone())
            + &point.1 * BigRational::from_integer(bvec.1.clone());
        if !dot.is_positive() {
            return Err(QError::DegenerateEndpoint);
        }
        out.push(RayCrossing {
            boundary,
            ray: dev.ray_of_boundary(boundary),
            t: t.clone(),
            point,
            direction: step,
        });
        t0 = t;
        sheet += step as i64;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// ν: comparison with a toric model fan
// ---------------------------------------------------------------------------

/// A complete fan in `Z^2` given by its rays in counterclockwise order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fan {
    pub rays: Vec<(i64, i64)>,
}

impl Fan {
    pub fn ray_count(&self) -> usize {
        self.rays.len()
    }

    /// Self-intersection sequence determined by the fan relations
    /// `v_{j-1} + d_j v_j + v_{j+1} = 0`. Errors when adjacent rays are not
    /// unimodular.
    pub fn selfints(&self) -> QResult<Vec<i64>> {
        let n = self.rays.len();
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            let prev = self.rays[(j + n - 1) % n];
            let cur = self.rays[j];
            let next = self.rays[(j + 1) % n];
            let tx = -(prev.0 + next.0);
            let ty = -(prev.1 + next.1);
            let d = if cur.0 != 0 { tx.checked_div(cur.0) } else { ty.checked_div(cur.1) }
                .ok_or_else(|| QError::SeedMismatch("degenerate fan ray".into()))?;
            if cur.0 * d != tx || cur.1 * d != ty {
                return Err(QError::SeedMismatch("fan rays are not unimodular".into()));
            }
            out.push(d);
        }
        Ok(out)
    }
}

/// The piecewise-linear identification `ν : B -> B̄` onto a toric model fan:
/// cone-wise, `a*v_j + b*v_{j+1}` maps to `a*m̄_j + b*m̄_{j+1}`.
pub fn nu_pushforward(
    surface: &TropicalSurface,
    fan: &Fan,
    v: &ChartVector,
) -> QResult<(i64, i64)> {
    if fan.ray_count() != surface.ray_count() {
        return Err(QError::NoToricModel);
    }
    let j = v.chart % fan.ray_count();
    let m0 = fan.rays[j];
    let m1 = fan.rays[(j + 1) % fan.ray_count()];
    Ok((
        v.coords.0 * m0.0 + v.coords.1 * m1.0,
        v.coords.0 * m0.1 + v.coords.1 * m1.1,
    ))
}

/// Inverse of [`nu_pushforward`] on integral points.
pub fn nu_pullback(surface: &TropicalSurface, fan: &Fan, w: (i64, i64)) -> Option<ChartVector> {
    let n = fan.ray_count();
    if n != surface.ray_count() {
        return None;
    }
    if w == (0, 0) {
        return Some(ChartVector::new(0, 0, 0));
    }
    for j in 0..n {
        let m0 = fan.rays[j];
        let m1 = fan.rays[(j + 1) % n];
        let det = m0.0 * m1.1 - m0.1 * m1.0;
        if det == 0 {
            continue;
        }
        let a_num = w.0 * m1.1 - w.1 * m1.0;
        let b_num = m0.0 * w.1 - m0.1 * w.0;
        if a_num % det != 0 || b_num % det != 0 {
            continue;
        }
        let a = a_num / det;
        let b = b_num / det;
        if (a >= 0 && b > 0) || (a > 0 && b == 0) {
            return Some(surface.canonical_point(&ChartVector::new(j, a, b)));
        }
    }
    None
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn is_primitive(v: (i64, i64)) -> bool {
    gcd_i64(v.0, v.1) == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> TropicalSurface {
        TropicalSurface::new(vec![1, 1, 1], vec![CurveClass::zero(0); 3], vec![]).unwrap()
    }

    fn dp5() -> TropicalSurface {
        let labels: Vec<String> = (1..=5)
            .map(|i| format!("D{i}"))
            .chain((1..=5).map(|i| format!("E{i}")))
            .collect();
        let kinks = (0..5).map(|j| CurveClass::unit(10, j)).collect();
        let mut s = TropicalSurface::new(vec![-1; 5], kinks, labels).unwrap();
        s.set_exceptionals((0..5).map(|j| vec![5 + j]).collect());
        s
    }

    #[test]
    fn toric_p2_monodromy_is_identity() {
        assert_eq!(p2().monodromy(), [[1, 0], [0, 1]]);
        assert!(p2().is_toric());
    }

    #[test]
    fn dp5_monodromy_is_nontrivial() {
        assert_ne!(dp5().monodromy(), [[1, 0], [0, 1]]);
    }

    #[test]
    fn single_ray_surface_is_accepted() {
        let s = TropicalSurface::new(vec![9], vec![CurveClass::unit(1, 0)], vec!["D1".into()]);
        assert!(s.is_ok());
    }

    #[test]
    fn ray_generator_across_its_ray() {
        // v_j presented in chart σ_{j-1,j} as (0,1) crosses ρ_j to (1,0).
        let s = dp5();
        let v = ChartVector::new(4, 0, 1); // v_0 seen in chart 4
        let moved = s.transport_tangent(&v, 0, 1).unwrap();
        assert_eq!(moved, ChartVector::new(0, 1, 0));
    }

    #[test]
    fn previous_ray_generator_across_ray() {
        // v_{j-1} = (1,0) in σ_{j-1,j} crosses ρ_j counterclockwise to
        // (-d_j, -1): the fan relation v_{j-1} = -d_j v_j - v_{j+1}.
        for d in [-3i64, -1, 0, 1, 2] {
            let s =
                TropicalSurface::new(vec![d, 0, 0, 0], vec![CurveClass::zero(0); 4], vec![])
                    .unwrap();
            let v = ChartVector::new(3, 1, 0);
            let moved = s.transport_tangent(&v, 0, 1).unwrap();
            assert_eq!(moved.coords, (-d, -1), "d = {d}");
        }
    }

    #[test]
    fn round_trip_crossing_is_identity() {
        let s = dp5();
        for a in -5i64..=5 {
            for b in -5i64..=5 {
                let v = ChartVector::new(1, a, b);
                let fwd = s.transport_tangent(&v, 2, 1).unwrap();
                let back = s.transport_tangent(&fwd, 2, -1).unwrap();
                assert_eq!(back, v);
            }
        }
    }

    #[test]
    fn transitions_are_unimodular() {
        let s = dp5();
        for j in 0..5 {
            let e1 = s.cross_ccw(j, (1, 0));
            let e2 = s.cross_ccw(j, (0, 1));
            assert_eq!(e1.0 * e2.1 - e1.1 * e2.0, 1);
        }
    }

    #[test]
    fn kink_acts_only_transversally() {
        let s = dp5();
        // A monomial tangent to ρ_1 has first coordinate 0 in chart 0;
        // crossing ρ_1 counterclockwise leaves the class unchanged.
        let (moved, class) = s
            .transport_monomial(&ChartVector::new(0, 0, 3), &CurveClass::zero(10), 1, 1)
            .unwrap();
        assert!(class.is_zero());
        assert_eq!(moved.coords, (3, 0));
    }

    #[test]
    fn kink_identity_on_every_ray() {
        // φ_ρ(m_{ρ-}) + φ_ρ(m_{ρ+}) = κ_ρ - d_ρ φ_ρ(m_ρ), read in chart
        // σ_{j,j+1}: transporting (v_{j-1}, 0) across ρ_j gives
        // (-d_j, -1) with class κ_j; adding the (0,1) of m_{ρ+} leaves
        // (-d_j, 0) with class κ_j.
        let s = dp5();
        for j in 0..5usize {
            let prev_chart = (j + 4) % 5;
            let v = ChartVector::new(prev_chart, 1, 0);
            let (moved, class) = s
                .transport_monomial(&v, &CurveClass::zero(10), j, 1)
                .unwrap();
            let sum = (moved.coords.0, moved.coords.1 + 1);
            assert_eq!(sum, (-s.selfint(j), 0));
            assert_eq!(&class, s.kink(j));
        }
    }

    #[test]
    fn full_loop_transport_toric_trivial_kinks() {
        let s = p2();
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                let mut v = ChartVector::new(0, a, b);
                let mut class = CurveClass::zero(0);
                for j in 1..=3usize {
                    let (nv, nc) = s.transport_monomial(&v, &class, j % 3, 1).unwrap();
                    v = nv;
                    class = nc;
                }
                assert_eq!(v, ChartVector::new(0, a, b));
                assert!(class.is_zero());
            }
        }
    }

    #[test]
    fn weight_of_ray_generators() {
        let s = dp5();
        for j in 0..5 {
            let w = s.weight(&ChartVector::new(j, 1, 0));
            let mut expect = vec![0; 5];
            expect[j] = 1;
            assert_eq!(w, expect);
        }
        assert_eq!(s.weight(&ChartVector::new(0, 0, 0)), vec![0; 5]);
        let w = s.weight(&ChartVector::new(2, 2, 3));
        let mut expect = vec![0; 5];
        expect[2] = 2;
        expect[3] = 3;
        assert_eq!(w, expect);
    }

    #[test]
    fn weight_additive_on_cones() {
        let s = dp5();
        let p = ChartVector::new(1, 2, 1);
        let q = ChartVector::new(1, 1, 4);
        let sum = ChartVector::new(1, 3, 5);
        let add = |x: Vec<i64>, y: Vec<i64>| -> Vec<i64> {
            x.into_iter().zip(y).map(|(a, b)| a + b).collect()
        };
        assert_eq!(s.weight(&sum), add(s.weight(&p), s.weight(&q)));
    }

    #[test]
    fn developing_walk_interior_no_crossings() {
        let s = dp5();
        let mut dev = Developing::new(&s, 0);
        let x = (
            BigRational::new(3.into(), 1.into()),
            BigRational::new(2.into(), 1.into()),
        );
        let crossings =
            develop_ray_crossings(&mut dev, 0, &x, &(BigInt::from(1), BigInt::from(1)), 10)
                .unwrap();
        assert!(crossings.is_empty());
    }

    #[test]
    fn developing_walk_single_crossing() {
        let s = dp5();
        let mut dev = Developing::new(&s, 0);
        let x = (
            BigRational::new(1.into(), 3.into()),
            BigRational::new(2.into(), 1.into()),
        );
        // Heading down-right crosses ρ_0 clockwise once, then escapes.
        let crossings =
            develop_ray_crossings(&mut dev, 0, &x, &(BigInt::from(1), BigInt::from(-1)), 10)
                .unwrap();
        assert_eq!(crossings.len(), 1);
        assert_eq!(crossings[0].ray, 0);
        assert_eq!(crossings[0].direction, -1);
    }

    #[test]
    fn developing_walk_two_ccw_crossings() {
        let s = dp5();
        let mut dev = Developing::new(&s, 0);
        let x = (
            BigRational::new(1.into(), 3.into()),
            BigRational::new(2.into(), 1.into()),
        );
        // Heading left from the first quadrant crosses ρ_1 then ρ_2.
        let crossings =
            develop_ray_crossings(&mut dev, 0, &x, &(BigInt::from(-1), BigInt::from(0)), 10)
                .unwrap();
        let rays: Vec<usize> = crossings.iter().map(|c| c.ray).collect();
        assert_eq!(rays, vec![1, 2]);
        assert!(crossings.iter().all(|c| c.direction == 1));
    }

    #[test]
    fn developing_walk_through_origin_rejected() {
        let s = dp5();
        let mut dev = Developing::new(&s, 0);
        let x = (
            BigRational::new(1.into(), 1.into()),
            BigRational::new(1.into(), 1.into()),
        );
        let r =
            develop_ray_crossings(&mut dev, 0, &x, &(BigInt::from(-1), BigInt::from(-1)), 10);
        assert!(matches!(r, Err(QError::DegenerateEndpoint)));
    }

    #[test]
    fn v2_backward_path_crosses_once() {
        // Upper half-plane picture of the two-ray surface: the backward path
        // of the second developed realization of the first ray's charge,
        // from z near v_1 + v_2, crosses exactly one Σ-ray before escaping.
        let s = TropicalSurface::new(
            vec![0, 0],
            vec![CurveClass::unit(2, 0), CurveClass::unit(2, 1)],
            vec!["D1".into(), "D2".into()],
        )
        .unwrap();
        let mut dev = Developing::new(&s, 0);
        let z = (
            BigRational::new(11.into(), 10.into()),
            BigRational::new(1.into(), 1.into()),
        );
        let crossings =
            develop_ray_crossings(&mut dev, 0, &z, &(BigInt::from(-1), BigInt::from(0)), 10)
                .unwrap();
        assert_eq!(crossings.len(), 1);
        assert_eq!(crossings[0].ray, 1);
    }

    #[test]
    fn nu_bijective_on_bounded_points_dp5_model() {
        // dP5 toric model: five-ray fan, blow-ups on rays 0 and 1.
        let s = TropicalSurface::new(
            vec![-1; 5],
            (0..5).map(|j| CurveClass::unit(7, j)).collect(),
            (1..=5)
                .map(|i| format!("D{i}"))
                .chain((1..=2).map(|i| format!("E{i}")))
                .collect(),
        )
        .unwrap();
        let fan = Fan { rays: vec![(1, 0), (0, 1), (-1, 0), (-1, -1), (0, -1)] };
        assert_eq!(fan.selfints().unwrap(), vec![0, 0, -1, -1, -1]);
        let mut seen = std::collections::BTreeSet::new();
        let mut count = 0usize;
        for j in 0..5usize {
            for a in 0..=6i64 {
                for b in 0..=6i64 {
                    if a == 0 && b > 0 {
                        continue; // canonical reps only
                    }
                    if a == 0 && b == 0 && j > 0 {
                        continue;
                    }
                    let p = ChartVector::new(j, a, b);
                    let w = nu_pushforward(&s, &fan, &p).unwrap();
                    assert!(seen.insert(w), "ν not injective at {:?}", p);
                    if w != (0, 0) {
                        let back = nu_pullback(&s, &fan, w).unwrap();
                        assert_eq!(back, s.canonical_point(&p));
                    }
                    count += 1;
                }
            }
        }
        assert!(count > 100);
    }
}
