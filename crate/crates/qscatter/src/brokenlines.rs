//! Quantum broken lines on a tropicalized surface: enumeration by backward
//! tracing from the endpoint, lifts, theta-function structure constants,
//! Poisson extraction, and the torus-weight grading check.
//!
//! A broken line of charge `p` with endpoint `Q` is traced backward from
//! `Q`: the current segment carries a monomial whose tangent gives the
//! backward direction; at every Σ-ray or wall crossing the search branches
//! over "no bend" and every un-bend that divides the current monomial by a
//! term of the bending product. Termination is driven by the class-degree
//! budget: every bend and every kink crossing consumes degree, and the
//! initial monomial has degree zero.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::affine::{
    cross2, develop_ray_crossings, ChartVector, CurveClass, Developing, Point2, TropicalSurface,
    Vec2,
};
use crate::error::{QError, QResult};
use crate::qcoeff::QScalar;
use crate::qtorus::{bend_product, det2, wallcross_apply, QTorusElement, Tangent};
use crate::scattering::{ScatteringDiagram, Wall};

/// A rational endpoint inside a chamber of one chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub chart: usize,
    pub coords: (BigRational, BigRational),
}

impl Endpoint {
    pub fn from_fractions(chart: usize, a: (i64, i64), b: (i64, i64)) -> Self {
        Endpoint {
            chart,
            coords: (
                BigRational::new(BigInt::from(a.0), BigInt::from(a.1)),
                BigRational::new(BigInt::from(b.0), BigInt::from(b.1)),
            ),
        }
    }

    /// Deterministic perturbation sequence used when an endpoint turns out
    /// to be non-generic: shift by `h_k * (2, 1/(3+k))` with
    /// `h_k = 1/(101 + 7k)`; both the scale and the slope vary so that any
    /// finite set of bad directions is eventually avoided.
    pub fn perturbed(&self, attempt: usize) -> Endpoint {
        let k = attempt as i64;
        let h = BigRational::new(BigInt::from(1), BigInt::from(101 + 7 * k));
        Endpoint {
            chart: self.chart,
            coords: (
                &self.coords.0 + &h * BigRational::from_integer(2.into()),
                &self.coords.1 + &h * BigRational::new(BigInt::from(1), BigInt::from(3 + k)),
            ),
        }
    }
}

/// One enumerated broken line.
#[derive(Clone, Debug)]
pub struct BrokenLine {
    /// Final tangent `s(γ)` in the endpoint's chart.
    pub final_tangent: Tangent,
    /// Curve class accumulated by bends and kink crossings.
    pub class: CurveClass,
    /// Scalar part of the final coefficient `c(γ)`.
    pub coeff: QScalar,
    /// Number of bends (diagnostic).
    pub bends: usize,
}

/// Element of the coefficient ring `R_I^q`: curve-class-weighted Laurent
/// sums, the home of structure constants.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RingElem {
    pub terms: BTreeMap<CurveClass, QScalar>,
}

impl RingElem {
    pub fn zero() -> Self {
        RingElem { terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, class: CurveClass, coeff: QScalar) {
        let e = self.terms.entry(class.clone()).or_insert_with(QScalar::zero);
        *e = e.add(&coeff);
        if e.is_zero() {
            self.terms.remove(&class);
        }
    }

    pub fn scalar(c: QScalar, rank: usize) -> Self {
        let mut e = RingElem::zero();
        e.add_term(CurveClass::zero(rank), c);
        e
    }

    /// Drop the terms whose class degree reaches the truncation order.
    pub fn truncated(&self, order: i64) -> RingElem {
        let mut out = RingElem::zero();
        for (c, v) in &self.terms {
            if c.degree() < order {
                out.add_term(c.clone(), v.clone());
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

struct Enumerator<'a> {
    surface: &'a TropicalSurface,
    diagram: &'a ScatteringDiagram,
    dev: Developing<'a>,
    order: usize,
    rank: usize,
    /// Developed representatives of the charge, per sheet.
    charge: ChartVector,
    max_crossings: usize,
    results: Vec<BrokenLine>,
}

/// Representatives of the integral point `p` visible in the chart of sheet
/// `k`: its own chart presentation, and for ray points also the
/// presentation from the clockwise neighbour chart.
fn reps_in_chart(surface: &TropicalSurface, p: &ChartVector, chart: usize) -> Vec<Tangent> {
    let r = surface.ray_count();
    let mut out = Vec::new();
    if p.chart % r == chart {
        out.push(p.coords);
    }
    if p.coords.1 == 0 && (p.chart + r - 1) % r == chart {
        out.push((0, p.coords.0));
    }
    out
}

impl<'a> Enumerator<'a> {
    /// Walls meeting a Σ-ray, with their direction written in the chart on
    /// the clockwise side when `side_chart` differs from the ray index.
    fn sigma_walls_in_chart(&self, ray: usize, side_chart: usize) -> Vec<(Tangent, QTorusElement)> {
        self.diagram
            .sigma_ray_walls(ray)
            .into_iter()
            .map(|w| {
                if side_chart == ray {
                    ((1, 0), w.f.clone())
                } else {
                    // Chart σ_{ray-1, ray}: the ray's generator is (0, 1);
                    // the wall terms are tangent to the ray, so relabeling
                    // coordinates is the whole transport.
                    let mut f = QTorusElement::zero(side_chart, self.order, self.rank);
                    for ((t, c), v) in w.f.terms() {
                        f.add_term((t.1, t.0), c.clone(), v.clone());
                    }
                    ((0, 1), f)
                }
            })
            .map(|(d, f)| (d, f.retag(0)))
            .collect()
    }

    /// Interior walls of a chart grouped by support direction.
    fn interior_by_dir(&self, chart: usize) -> Vec<(Tangent, Vec<&'a Wall>)> {
        let mut map: BTreeMap<Tangent, Vec<&Wall>> = BTreeMap::new();
        for w in self.diagram.interior_walls(chart) {
            map.entry(w.dir).or_default().push(w);
        }
        map.into_iter().collect()
    }

    /// Backward step: from position `pos` (developed plane) in sheet
    /// `sheet`, carrying monomial `(m, class, coeff)` presented in that
    /// sheet's chart, with `coeff` the *backward accumulated* divisor.
    fn trace(
        &mut self,
        pos: Point2,
        sheet: i64,
        m: Tangent,
        class: CurveClass,
        coeff: QScalar,
        bends: usize,
        root: &BrokenLine,
    ) -> QResult<()> {
        if m == (0, 0) {
            return Ok(());
        }
        let u = self.dev.develop_tangent(sheet, m);
        if u.0.is_zero() && u.1.is_zero() {
            return Ok(());
        }
        let (crossings, escaped) = walk(&mut self.dev, sheet, &pos, &u, self.max_crossings)?;

        // Interior-wall crossing events interleave with the Σ-ray events.
        #[derive(Clone)]
        enum Ev {
            Sigma(usize /* index into crossings */),
            Interior { point: Point2, sheet: i64, dir: Tangent },
        }
        let mut events: Vec<(BigRational, Ev)> = crossings
            .iter()
            .enumerate()
            .map(|(i, c)| (c.t.clone(), Ev::Sigma(i)))
            .collect();
        // Sheet intervals: before crossing 0 we are in `sheet`, etc.
        let mut interval_start = BigRational::zero();
        let mut cur_sheet = sheet;
        let mut intervals = Vec::new();
        for c in &crossings {
            intervals.push((interval_start.clone(), Some(c.t.clone()), cur_sheet));
            interval_start = c.t.clone();
            cur_sheet += c.direction as i64;
        }
        intervals.push((interval_start, None, cur_sheet));
        for (t0, t1, k) in &intervals {
            let chart = self.dev.chart_of_sheet(*k);
            for (dir, _) in self.interior_by_dir(chart) {
                let w_dev = self.dev.develop_tangent(*k, dir);
                let denom = cross2(&u, &w_dev);
                if denom.is_zero() {
                    continue;
                }
                let denom = BigRational::from_integer(denom);
                let num = &pos.0 * BigRational::from_integer(w_dev.1.clone())
                    - &pos.1 * BigRational::from_integer(w_dev.0.clone());
                let t = -num / denom;
                if &t <= t0 {
                    continue;
                }
                if let Some(t1) = t1 {
                    if &t >= t1 {
                        continue;
                    }
                }
                let point = (
                    &pos.0 + &t * BigRational::from_integer(u.0.clone()),
                    &pos.1 + &t * BigRational::from_integer(u.1.clone()),
                );
                // Positive half of the support only.
                let dot = &point.0 * BigRational::from_integer(w_dev.0.clone())
                    + &point.1 * BigRational::from_integer(w_dev.1.clone());
                if !dot.is_positive() {
                    continue;
                }
                events.push((t, Ev::Interior { point, sheet: *k, dir }));
            }
        }
        events.sort_by(|a, b| a.0.cmp(&b.0));

        // Walk the events in order; the first event at which we act splits
        // the recursion. Everything before the chosen event must be a
        // "no-bend" pass, so we process events one at a time: at each event
        // we branch into un-bends, and the no-bend continuation falls
        // through to the next event with the monomial transported as needed.
        let mut cur_m = m;
        let mut cur_class = class;
        let cur_coeff = coeff;
        let mut cur_sheet = sheet;
        for (_, ev) in events {
            match ev {
                Ev::Interior { point, sheet: k, dir, .. } => {
                    debug_assert_eq!(k, cur_sheet);
                    let chart = self.dev.chart_of_sheet(k);
                    let walls: Vec<(Tangent, QTorusElement)> = self
                        .interior_by_dir(chart)
                        .into_iter()
                        .filter(|(d, _)| *d == dir)
                        .flat_map(|(d, ws)| {
                            ws.into_iter().map(move |w| (d, w.f.retag(0)))
                        })
                        .collect();
                    self.branch_bends(&walls, point, k, cur_m, &cur_class, &cur_coeff, bends, root)?;
                    // no-bend: continue unchanged.
                }
                Ev::Sigma(i) => {
                    let c = &crossings[i];
                    // Un-transport the monomial to the far side of the ray.
                    let from_chart = self.dev.chart_of_sheet(cur_sheet);
                    let next_sheet = cur_sheet + c.direction as i64;
                    let cv = ChartVector { chart: from_chart, coords: cur_m };
                    // The backward walk crosses the ray with `c.direction`;
                    // the forward line crossed it the other way, so the
                    // backward transport uses `c.direction` itself.
                    let (moved, shifted) = self.surface.transport_monomial(
                        &cv,
                        &cur_class,
                        c.ray,
                        c.direction,
                    )?;
                    // Undo the forward kink shift: forward added it, so the
                    // backward presentation subtracts twice the transport's
                    // own addition. transport_monomial already applied the
                    // shift for the direction walked; the forward crossing
                    // (opposite direction) contributed the inverse, so the
                    // pre-crossing class is `shifted` minus twice... see
                    // below: we recompute directly instead.
                    let _ = shifted;
                    let shift = if c.direction > 0 {
                        // backward ccw: forward was cw across this ray;
                        // forward cw shift uses the second source coord,
                        // source chart = destination of backward = moved.
                        self.surface.kink(c.ray).scaled(moved.coords.1)
                    } else {
                        self.surface.kink(c.ray).scaled(moved.coords.0)
                    };
                    let pre_class = cur_class.sub(&shift);
                    if !pre_class.is_effective() {
                        return Ok(());
                    }
                    // Bends at the ray: walls supported on it, presented in
                    // the pre-crossing chart.
                    let side_chart = moved.chart;
                    let walls = self.sigma_walls_in_chart(c.ray, side_chart);
                    self.branch_bends(
                        &walls,
                        c.point.clone(),
                        next_sheet,
                        moved.coords,
                        &pre_class,
                        &cur_coeff,
                        bends,
                        root,
                    )?;
                    cur_m = moved.coords;
                    cur_class = pre_class;
                    cur_sheet = next_sheet;
                    if cur_class.degree() < 0 {
                        return Ok(());
                    }
                }
            }
        }

        if !escaped {
            // Walk was cut by the crossing cap without pruning: with all
            // kinks of positive degree this cannot happen inside the budget.
            return Err(QError::Internal("backward walk did not escape".into()));
        }

        // Escape: accept when the monomial is exactly ẑ^{φ(p)}.
        if cur_class.is_zero() {
            let chart = self.dev.chart_of_sheet(cur_sheet);
            if reps_in_chart(self.surface, &self.charge, chart).contains(&cur_m) {
                let c_line = cur_coeff.inv()?;
                self.results.push(BrokenLine {
                    final_tangent: root.final_tangent,
                    class: self.surface.reduce_class(&root.class),
                    coeff: c_line,
                    bends,
                });
            }
        }
        Ok(())
    }

    /// Branch over the un-bends available at one crossing point.
    #[allow(clippy::too_many_arguments)]
    fn branch_bends(
        &mut self,
        walls: &[(Tangent, QTorusElement)],
        point: Point2,
        sheet: i64,
        m: Tangent,
        class: &CurveClass,
        coeff: &QScalar,
        bends: usize,
        root: &BrokenLine,
    ) -> QResult<()> {
        if walls.is_empty() {
            return Ok(());
        }
        let dir = walls[0].0;
        let max_l = (self.order as i64).saturating_sub(1);
        for big_l in 1..=max_l {
            // Candidate pre-bend tangent.
            let pre_m = (m.0 + big_l * dir.0, m.1 + big_l * dir.1);
            let product = bend_product(walls, pre_m, 0, self.order, self.rank)?;
            // Terms with tangent exactly -big_l * dir.
            let target = (-big_l * dir.0, -big_l * dir.1);
            for ((t, tc), tv) in product.terms() {
                if *t != target {
                    continue;
                }
                let new_class = class.sub(tc);
                if !new_class.is_effective() {
                    continue;
                }
                // Forward: M = M_pre * τ with coefficient
                // c = c_pre * c_τ * s^{<pre_m, t>}; divide it out backward.
                let twist = QScalar::s_pow(det2(pre_m, *t));
                let divisor = tv.mul(&twist);
                if divisor.is_zero() {
                    continue;
                }
                let new_coeff = coeff.div(&divisor)?;
                self.trace(point.clone(), sheet, pre_m, new_class, new_coeff, bends + 1, root)?;
            }
        }
        Ok(())
    }
}

/// Developed walk wrapper that also reports whether the path escaped.
fn walk(
    dev: &mut Developing<'_>,
    sheet: i64,
    pos: &Point2,
    u: &Vec2,
    max_crossings: usize,
) -> QResult<(Vec<crate::affine::RayCrossing>, bool)> {
    let crossings = develop_ray_crossings(dev, sheet, pos, u, max_crossings)?;
    let escaped = crossings.len() <= max_crossings;
    // develop_ray_crossings stops either on escape or when the cap is
    // exceeded; reaching exactly the cap+1 entries means it was cut short.
    Ok((crossings, escaped))
}

/// Candidate final monomials `(tangent, class)` at the endpoint, generated
/// by a forward over-approximation walk from the developed representatives
/// of the charge: bend by any wall term, cross any boundary (accumulating
/// kinks), stay within the degree budget.
fn root_candidates(
    diagram: &ScatteringDiagram,
    surface: &TropicalSurface,
    dev: &mut Developing<'_>,
    charge: &ChartVector,
    window: i64,
) -> BTreeSet<(Tangent, CurveClass)> {
    let order = diagram.order as i64;
    let rank = surface.class_rank();
    let mut seen: BTreeSet<(i64, Tangent, CurveClass)> = BTreeSet::new();
    let mut queue: VecDeque<(i64, Tangent, CurveClass)> = VecDeque::new();
    for k in -window..=window {
        let chart = dev.chart_of_sheet(k);
        for m in reps_in_chart(surface, charge, chart) {
            let st = (k, m, CurveClass::zero(rank));
            if seen.insert(st.clone()) {
                queue.push_back(st);
            }
        }
    }
    while let Some((k, m, class)) = queue.pop_front() {
        // Bends by walls visible from sheet k.
        let chart = dev.chart_of_sheet(k);
        let mut wall_terms: Vec<(Tangent, CurveClass)> = Vec::new();
        for w in diagram.interior_walls(chart) {
            for ((t, c), _) in w.f.terms() {
                if !(t == &(0, 0) && c.is_zero()) {
                    wall_terms.push((*t, c.clone()));
                }
            }
        }
        for ray in [chart, (chart + 1) % surface.ray_count()] {
            for w in diagram.sigma_ray_walls(ray) {
                for ((t, c), _) in w.f.terms() {
                    if t == &(0, 0) && c.is_zero() {
                        continue;
                    }
                    let t_here = if ray == chart { *t } else { (t.1, t.0) };
                    wall_terms.push((t_here, c.clone()));
                }
            }
        }
        for (t, c) in wall_terms {
            let nm = (m.0 + t.0, m.1 + t.1);
            let nc = class.add(&c);
            if nc.degree() >= order {
                continue;
            }
            let st = (k, nm, nc);
            if seen.insert(st.clone()) {
                queue.push_back(st);
            }
        }
        // Boundary crossings toward the endpoint sheet (both directions).
        for dir in [1i8, -1] {
            let nk = k + dir as i64;
            if nk.abs() > window {
                continue;
            }
            let ray = if dir > 0 { dev.chart_of_sheet(nk) } else { dev.chart_of_sheet(k) };
            let cv = ChartVector { chart, coords: m };
            if let Ok((moved, shifted)) =
                surface.transport_monomial(&cv, &class, ray, dir)
            {
                if shifted.is_effective() && shifted.degree() < order {
                    let st = (nk, moved.coords, shifted);
                    if seen.insert(st.clone()) {
                        queue.push_back(st);
                    }
                }
            }
        }
    }
    seen.into_iter()
        .filter(|(k, _, _)| *k == 0)
        .map(|(_, m, c)| (m, c))
        .collect()
}

/// Enumerate the quantum broken lines of charge `p` ending at `Q`, complete
/// mod the diagram's truncation order.
pub fn enumerate_broken_lines(
    diagram: &ScatteringDiagram,
    p: &ChartVector,
    q: &Endpoint,
) -> QResult<Vec<BrokenLine>> {
    let surface = diagram.base.surface()?;
    if !surface.all_kinks_positive() && !surface.is_toric() {
        return Err(QError::SeedMismatch(
            "broken-line enumeration needs positive-degree kinks or a toric surface".into(),
        ));
    }
    if p.coords == (0, 0) {
        // θ̂_0 is the unit: one trivial line carrying ẑ^0.
        return Ok(vec![BrokenLine {
            final_tangent: (0, 0),
            class: CurveClass::zero(surface.class_rank()),
            coeff: QScalar::one(),
            bends: 0,
        }]);
    }
    let charge = surface.canonical_point(p);
    let rank = surface.class_rank();
    let r = surface.ray_count() as i64;
    let window = r * (diagram.order as i64 + 2) + 4;
    let max_crossings = (r * (diagram.order as i64 + 2) + 8) as usize;

    let mut dev = Developing::new(surface, q.chart);
    let roots = root_candidates(diagram, surface, &mut dev, &charge, window);
    let mut en = Enumerator {
        surface,
        diagram,
        dev,
        order: diagram.order,
        rank,
        charge,
        max_crossings,
        results: Vec::new(),
    };
    let pos = (q.coords.0.clone(), q.coords.1.clone());
    for (m, class) in roots {
        let root = BrokenLine {
            final_tangent: m,
            class: class.clone(),
            coeff: QScalar::one(),
            bends: 0,
        };
        en.trace(pos.clone(), 0, m, class, QScalar::one(), 0, &root)?;
    }
    Ok(en.results)
}

/// Enumerate with the documented perturbation retry rule.
pub fn enumerate_with_retries(
    diagram: &ScatteringDiagram,
    p: &ChartVector,
    q: &Endpoint,
    retry_seed: usize,
) -> QResult<(Vec<BrokenLine>, Endpoint)> {
    let mut attempt = 0usize;
    loop {
        let qq = if attempt == 0 { q.clone() } else { q.perturbed(retry_seed + attempt) };
        match enumerate_broken_lines(diagram, p, &qq) {
            Ok(lines) => return Ok((lines, qq)),
            Err(QError::DegenerateEndpoint) if attempt < 25 => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

/// `Lift_Q(p)`: the sum of final monomials over all broken lines of charge
/// `p` with endpoint `Q`, an element of the chart algebra at `Q`.
pub fn lift(diagram: &ScatteringDiagram, p: &ChartVector, q: &Endpoint) -> QResult<QTorusElement> {
    let lines = enumerate_broken_lines(diagram, p, q)?;
    let mut out = QTorusElement::zero(q.chart, diagram.order, diagram.class_rank());
    for l in lines {
        out.add_term(l.final_tangent, l.class.clone(), l.coeff.clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Structure constants
// ---------------------------------------------------------------------------

/// One row of the structure-constant table: the expansion of
/// `θ̂_{p1} θ̂_{p2} = Σ_p C^p θ̂_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductRow {
    pub p1: ChartVector,
    pub p2: ChartVector,
    pub terms: BTreeMap<ChartVector, RingElem>,
}

/// Place `z` very close to `p` inside the adjacent chamber, following the
/// documented offset `p + h*(2, 1/(3+k))` with `h = 1/(89 + 9k)` on retry
/// `k`; varying both scale and slope dodges any finite set of degenerate
/// directions.
pub fn z_near(p: &ChartVector, attempt: usize) -> Endpoint {
    let k = attempt as i64;
    let h = BigRational::new(BigInt::from(1), BigInt::from(89 + 9 * k));
    Endpoint {
        chart: p.chart,
        coords: (
            BigRational::from_integer(p.coords.0.into()) + &h * BigRational::from_integer(2.into()),
            BigRational::from_integer(p.coords.1.into())
                + &h * BigRational::new(BigInt::from(1), BigInt::from(3 + k)),
        ),
    }
}

/// All canonical integral points with coordinate sum up to `bound`,
/// including the origin.
pub fn charge_box(surface: &TropicalSurface, bound: i64) -> Vec<ChartVector> {
    let mut out = vec![ChartVector::new(0, 0, 0)];
    for chart in 0..surface.ray_count() {
        for a in 0..=bound {
            for b in 0..=bound {
                if a + b == 0 || a + b > bound || (a == 0 && b > 0) {
                    continue;
                }
                out.push(ChartVector::new(chart, a, b));
            }
        }
    }
    out
}

/// Structure constants of `θ̂_{p1} θ̂_{p2}` by the two-line sum
/// `C^p = Σ c(γ1) c(γ2) q^{<s(γ1), s(γ2)>/2}` over pairs of broken lines
/// ending at a point very close to `p` with `s(γ1) + s(γ2) = p`.
pub fn structure_constants(
    diagram: &ScatteringDiagram,
    p1: &ChartVector,
    p2: &ChartVector,
) -> QResult<ProductRow> {
    structure_constants_with_retry(diagram, p1, p2, 0)
}

/// [`structure_constants`] with the endpoint-perturbation sequence offset
/// by `retry_base`.
pub fn structure_constants_with_retry(
    diagram: &ScatteringDiagram,
    p1: &ChartVector,
    p2: &ChartVector,
    retry_base: usize,
) -> QResult<ProductRow> {
    let surface = diagram.base.surface()?;
    let p1 = surface.canonical_point(p1);
    let p2 = surface.canonical_point(p2);
    let bound = (p1.coords.0 + p1.coords.1)
        + (p2.coords.0 + p2.coords.1)
        + 2 * diagram.order as i64;
    let mut terms = BTreeMap::new();
    for p in charge_box(surface, bound) {
        if !weight_compatible(surface, &p1, &p2, &p, diagram.order) {
            continue;
        }
        let c = structure_constant_at_with_retry(diagram, &p1, &p2, &p, retry_base)?;
        if !c.is_zero() {
            terms.insert(p, c);
        }
    }
    Ok(ProductRow { p1, p2, terms })
}

/// Cheap necessary condition from the torus grading: a term `ẑ^β θ̂_p` of
/// `θ̂_{p1} θ̂_{p2}` satisfies `w(p) = w(p1) + w(p2) - Σ (β.D_j) e_j` for an
/// effective class of degree below the truncation order, so every
/// coordinate of `w(p)` stays within the reach of the intersection numbers.
/// Surfaces without intersection data skip the filter.
fn weight_compatible(
    surface: &TropicalSurface,
    p1: &ChartVector,
    p2: &ChartVector,
    p: &ChartVector,
    order: usize,
) -> bool {
    if !surface.has_pairing() {
        return true;
    }
    let w1 = surface.weight(p1);
    let w2 = surface.weight(p2);
    let wp = surface.weight(p);
    let r = surface.ray_count();
    let rank = surface.class_rank();
    for j in 0..r {
        let lhs = w1[j] + w2[j];
        let max_abs = (0..rank)
            .map(|c| {
                surface
                    .pair_with_boundary(&CurveClass::unit(rank, c), j)
                    .unwrap_or(0)
                    .abs()
            })
            .max()
            .unwrap_or(0);
        let slack = (order as i64 - 1) * max_abs;
        if (wp[j] - lhs).abs() > slack.max(0) {
            return false;
        }
    }
    true
}

/// The single coefficient `C^p_{p1,p2}`.
pub fn structure_constant_at(
    diagram: &ScatteringDiagram,
    p1: &ChartVector,
    p2: &ChartVector,
    p: &ChartVector,
) -> QResult<RingElem> {
    structure_constant_at_with_retry(diagram, p1, p2, p, 0)
}

/// [`structure_constant_at`] with the endpoint-perturbation sequence offset
/// by `retry_base`.
pub fn structure_constant_at_with_retry(
    diagram: &ScatteringDiagram,
    p1: &ChartVector,
    p2: &ChartVector,
    p: &ChartVector,
    retry_base: usize,
) -> QResult<RingElem> {
    let surface = diagram.base.surface()?;
    let p = surface.canonical_point(p);
    let mut attempt = retry_base;
    let (lines1, lines2, z) = loop {
        let z = z_near(&p, attempt);
        let r1 = enumerate_broken_lines(diagram, p1, &z);
        let r2 = enumerate_broken_lines(diagram, p2, &z);
        match (r1, r2) {
            (Ok(a), Ok(b)) => break (a, b, z),
            (Err(QError::DegenerateEndpoint), _) | (_, Err(QError::DegenerateEndpoint))
                if attempt < retry_base + 25 =>
            {
                attempt += 1
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    };
    // The target tangent: p's representative in z's chart.
    let target = if p.coords == (0, 0) {
        (0, 0)
    } else {
        debug_assert_eq!(p.chart, z.chart);
        p.coords
    };
    let mut out = RingElem::zero();
    for l1 in &lines1 {
        for l2 in &lines2 {
            let sum = (
                l1.final_tangent.0 + l2.final_tangent.0,
                l1.final_tangent.1 + l2.final_tangent.1,
            );
            if sum != target {
                continue;
            }
            let twist = QScalar::s_pow(det2(l1.final_tangent, l2.final_tangent));
            out.add_term(
                surface.reduce_class(&l1.class.add(&l2.class)),
                l1.coeff.mul(&l2.coeff).mul(&twist),
            );
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Poisson tables
// ---------------------------------------------------------------------------

/// Classical Poisson bracket table `{θ_{p1}, θ_{p2}} = Σ P^p θ_p`, with the
/// coefficients as rational multiples of class monomials.
pub type PoissonRow = BTreeMap<ChartVector, BTreeMap<CurveClass, BigRational>>;

/// Route (a): extract the bracket from the q-structure constants as
/// `lim_{q→1} (C^p_{p1,p2} - C^p_{p2,p1})/(q-1)`.
pub fn poisson_from_q_table(
    diagram: &ScatteringDiagram,
    p1: &ChartVector,
    p2: &ChartVector,
) -> QResult<PoissonRow> {
    let row12 = structure_constants(diagram, p1, p2)?;
    let row21 = structure_constants(diagram, p2, p1)?;
    let mut out = PoissonRow::new();
    let mut points: BTreeSet<ChartVector> = BTreeSet::new();
    points.extend(row12.terms.keys().cloned());
    points.extend(row21.terms.keys().cloned());
    for p in points {
        let zero = RingElem::zero();
        let c12 = row12.terms.get(&p).unwrap_or(&zero);
        let c21 = row21.terms.get(&p).unwrap_or(&zero);
        let mut classes: BTreeSet<CurveClass> = BTreeSet::new();
        classes.extend(c12.terms.keys().cloned());
        classes.extend(c21.terms.keys().cloned());
        let mut entry = BTreeMap::new();
        for cl in classes {
            let a = c12.terms.get(&cl).cloned().unwrap_or_else(QScalar::zero);
            let b = c21.terms.get(&cl).cloned().unwrap_or_else(QScalar::zero);
            let v = QScalar::poisson_extract(&a, &b)?;
            if !v.is_zero() {
                entry.insert(cl, v);
            }
        }
        if !entry.is_empty() {
            out.insert(p, entry);
        }
    }
    Ok(out)
}

/// Route (b): the direct classical formula
/// `P^p = Σ <s(γ1), s(γ2)> c(γ1) c(γ2)` with the coefficients at `q = 1`.
pub fn poisson_direct(
    diagram: &ScatteringDiagram,
    p1: &ChartVector,
    p2: &ChartVector,
) -> QResult<PoissonRow> {
    let surface = diagram.base.surface()?;
    let p1 = surface.canonical_point(p1);
    let p2 = surface.canonical_point(p2);
    let bound = (p1.coords.0 + p1.coords.1)
        + (p2.coords.0 + p2.coords.1)
        + 2 * diagram.order as i64;
    let mut out = PoissonRow::new();
    for p in charge_box(surface, bound) {
        if !weight_compatible(surface, &p1, &p2, &p, diagram.order) {
            continue;
        }
        let mut attempt = 0usize;
        let (lines1, lines2) = loop {
            let z = z_near(&p, attempt);
            match (
                enumerate_broken_lines(diagram, &p1, &z),
                enumerate_broken_lines(diagram, &p2, &z),
            ) {
                (Ok(a), Ok(b)) => break (a, b),
                (Err(QError::DegenerateEndpoint), _) | (_, Err(QError::DegenerateEndpoint))
                    if attempt < 25 =>
                {
                    attempt += 1
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        };
        let target = if p.coords == (0, 0) { (0, 0) } else { p.coords };
        let mut entry: BTreeMap<CurveClass, BigRational> = BTreeMap::new();
        for l1 in &lines1 {
            for l2 in &lines2 {
                let sum = (
                    l1.final_tangent.0 + l2.final_tangent.0,
                    l1.final_tangent.1 + l2.final_tangent.1,
                );
                if sum != target {
                    continue;
                }
                let w = det2(l1.final_tangent, l2.final_tangent);
                if w == 0 {
                    continue;
                }
                let c1 = l1.coeff.classical_limit()?;
                let c2 = l2.coeff.classical_limit()?;
                let add = c1 * c2 * BigRational::from_integer(w.into());
                let cl = surface.reduce_class(&l1.class.add(&l2.class));
                let e = entry.entry(cl.clone()).or_insert_with(BigRational::zero);
                *e += add;
                if e.is_zero() {
                    entry.remove(&cl);
                }
            }
        }
        if !entry.is_empty() {
            out.insert(p, entry);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Torus-weight grading check
// ---------------------------------------------------------------------------

/// Verify the torus grading on a product row: for every term
/// `ẑ^β θ̂_p` of `θ̂_{p1} θ̂_{p2}`,
/// `w(p1) + w(p2) = w(p) + Σ_j (β.D_j) e_j`.
pub fn weight_check(surface: &TropicalSurface, row: &ProductRow) -> QResult<Vec<String>> {
    let mut failures = Vec::new();
    let w1 = surface.weight(&row.p1);
    let w2 = surface.weight(&row.p2);
    let lhs: Vec<i64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
    for (p, coeff) in &row.terms {
        let wp = surface.weight(p);
        for class in coeff.terms.keys() {
            let mut rhs = wp.clone();
            for j in 0..surface.ray_count() {
                rhs[j] += surface.pair_with_boundary(class, j)?;
            }
            if rhs != lhs {
                failures.push(format!(
                    "term z^{:?} θ_{:?} of θ_{:?}·θ_{:?}: weight {:?} != {:?}",
                    class.0, p, row.p1, row.p2, rhs, lhs
                ));
            }
        }
    }
    Ok(failures)
}

// ---------------------------------------------------------------------------
// Consistency on the surface
// ---------------------------------------------------------------------------

/// Outcome of the surface consistency check.
#[derive(Clone, Debug)]
pub enum ConsistencyReport {
    Pass,
    Fail { context: String },
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        matches!(self, ConsistencyReport::Pass)
    }
}

/// Rewrite every class key of an element in its canonical form modulo the
/// surface's class relations.
pub fn reduce_elem(surface: &TropicalSurface, elem: &QTorusElement) -> QTorusElement {
    let mut out = QTorusElement::zero(elem.chart, elem.order, elem.class_rank());
    for ((t, c), v) in elem.terms() {
        out.add_term(*t, surface.reduce_class(c), v.clone());
    }
    out
}

/// Transport an element across the Σ-ray `ρ_j` counterclockwise (from chart
/// `j-1` to chart `j`), applying the crossing automorphisms of every wall
/// supported on the ray. Wall functions on a Σ-ray are tangent to it, so
/// the crossing commutes with the chart transport.
pub fn cross_sigma_ray_ccw(
    diagram: &ScatteringDiagram,
    ray: usize,
    elem: &QTorusElement,
) -> QResult<QTorusElement> {
    let surface = diagram.base.surface()?;
    let r = surface.ray_count();
    let from_chart = (ray + r - 1) % r;
    if elem.chart != from_chart {
        return Err(QError::ChartMismatch { expected: from_chart, got: elem.chart });
    }
    // Transport every monomial, then apply the ray walls in the new chart.
    let mut moved = QTorusElement::zero(ray, diagram.order, diagram.class_rank());
    for ((t, c), v) in elem.terms() {
        let cv = ChartVector { chart: from_chart, coords: *t };
        let (nv, nc) = surface.transport_monomial(&cv, c, ray, 1)?;
        moved.add_term(nv.coords, surface.reduce_class(&nc), v.clone());
    }
    let mut acc = moved;
    for w in diagram.sigma_ray_walls(ray) {
        let f = w.f.retag(ray);
        acc = wallcross_apply(&f, (1, 0), &acc, -1)?;
    }
    Ok(reduce_elem(surface, &acc))
}

/// The images of the ray-algebra generators `X, X₊, X₋` of `ρ_j` in the two
/// adjacent chart algebras. `X` maps to `ẑ^{φ(v_j)}` on both sides; the
/// generator pointing away from a side picks up the ray's wall functions
/// and the kink class:
/// on the clockwise side, `X₊ ↦ ẑ^{φρ(v_{j+1})} f_out(ẑ^{φρ(v_j)})`,
/// on the counterclockwise side, `X₋ ↦ f_out(ẑ^{φρ(v_j)}) ẑ^{φρ(v_{j-1})}`.
pub struct RayGenerators {
    pub x_minus_side: QTorusElement,
    pub xplus_minus_side: QTorusElement,
    pub xminus_minus_side: QTorusElement,
    pub x_plus_side: QTorusElement,
    pub xplus_plus_side: QTorusElement,
    pub xminus_plus_side: QTorusElement,
}

pub fn ray_generators(diagram: &ScatteringDiagram, ray: usize) -> QResult<RayGenerators> {
    let surface = diagram.base.surface()?;
    let r = surface.ray_count();
    let rank = surface.class_rank();
    let order = diagram.order;
    let minus_chart = (ray + r - 1) % r;
    let d = surface.selfint(ray);
    let kink = surface.kink(ray).clone();
    // f_out on each side: the ray's wall functions, tangent to the ray.
    let mut f_out_plus = QTorusElement::one(ray, order, rank);
    for w in diagram.sigma_ray_walls(ray) {
        f_out_plus = f_out_plus.mul(&w.f.retag(ray))?;
    }
    let mut f_out_minus = QTorusElement::zero(minus_chart, order, rank);
    for ((t, c), v) in f_out_plus.terms() {
        // Ray-tangent monomials relabel as (0, t.0) on the clockwise side.
        f_out_minus.add_term((t.1, t.0), c.clone(), v.clone());
    }
    let mono = |chart: usize, t: Tangent, c: CurveClass| {
        QTorusElement::monomial(chart, order, t, c, QScalar::one())
    };
    Ok(RayGenerators {
        x_minus_side: mono(minus_chart, (0, 1), CurveClass::zero(rank)),
        xminus_minus_side: mono(minus_chart, (1, 0), CurveClass::zero(rank)),
        xplus_minus_side: mono(minus_chart, (-1, -d), kink.clone()).mul(&f_out_minus)?,
        x_plus_side: mono(ray, (1, 0), CurveClass::zero(rank)),
        xplus_plus_side: mono(ray, (0, 1), CurveClass::zero(rank)),
        xminus_plus_side: f_out_plus.mul(&mono(ray, (-d, -1), kink))?,
    })
}

/// Decide whether a class coset contains an effective vector (all
/// coordinates nonnegative) of the same total degree.
fn coset_contains_effective(surface: &TropicalSurface, class: &CurveClass) -> bool {
    let deg = class.degree();
    if deg < 0 {
        return false;
    }
    let rank = class.rank();
    if rank == 0 {
        return deg == 0;
    }
    let target = surface.reduce_class(class);
    // Enumerate effective vectors of total degree `deg`.
    fn rec(
        surface: &TropicalSurface,
        target: &CurveClass,
        prefix: &mut Vec<i64>,
        remaining: i64,
        rank: usize,
    ) -> bool {
        if prefix.len() == rank - 1 {
            prefix.push(remaining);
            let ok = surface.reduce_class(&CurveClass(prefix.clone())) == *target;
            prefix.pop();
            return ok;
        }
        for v in 0..=remaining {
            prefix.push(v);
            if rec(surface, target, prefix, remaining - v, rank) {
                prefix.pop();
                return true;
            }
            prefix.pop();
        }
        false
    }
    rec(surface, &target, &mut Vec::new(), deg, rank)
}

/// The gluing check across one Σ-ray: both lifts must be the two images of
/// a single element of the ray algebra. The element is solved greedily in
/// the normal basis `X^a X₊^b`, `X^a X₋^c`, working on both sides at once
/// by increasing class degree: a word coefficient read off one side is
/// subtracted from both images, so that terms whose other-side image is
/// pushed beyond the truncation order are handled correctly.
pub fn rho_glue_check(
    diagram: &ScatteringDiagram,
    ray: usize,
    lift_minus: &QTorusElement,
    lift_plus: &QTorusElement,
) -> QResult<bool> {
    let surface = diagram.base.surface()?;
    let d = surface.selfint(ray);
    let kink = surface.kink(ray);
    let gens = ray_generators(diagram, ray)?;
    let order = diagram.order;
    let rank = surface.class_rank();

    let word_image = |a: i64, b: i64, c: i64, side_plus: bool| -> QResult<QTorusElement> {
        let (x, xp, xm, chart) = if side_plus {
            (&gens.x_plus_side, &gens.xplus_plus_side, &gens.xminus_plus_side, ray)
        } else {
            (
                &gens.x_minus_side,
                &gens.xplus_minus_side,
                &gens.xminus_minus_side,
                lift_minus.chart,
            )
        };
        let mut acc = QTorusElement::one(chart, order, rank);
        let xa = if a >= 0 { x.clone() } else { invert_monomial(x)? };
        for _ in 0..a.unsigned_abs() {
            acc = acc.mul(&xa)?;
        }
        for _ in 0..b {
            acc = acc.mul(xp)?;
        }
        for _ in 0..c {
            acc = acc.mul(xm)?;
        }
        Ok(acc)
    };

    let mut res_minus = reduce_elem(surface, lift_minus);
    let mut res_plus = reduce_elem(surface, lift_plus);
    let kink_deg = kink.degree();
    let mut used_words: std::collections::BTreeSet<(i64, i64, i64)> = Default::default();
    let mut guard = 0usize;
    while !res_minus.is_zero() || !res_plus.is_zero() {
        guard += 1;
        if guard > 4096 {
            return Err(QError::Internal("ray gluing solve did not terminate".into()));
        }
        // Decode each residual term to its normal word; pick the candidate
        // whose central coefficient has the lowest class degree, so that a
        // word is always solved before its wall/kink corrections appear.
        let decode = |t: (i64, i64), minus: bool| -> (i64, i64, i64, i64) {
            let (alpha, beta) = t;
            if minus {
                // minus chart: X = (0,1), X₋ = (1,0), X₊-lead = (-1,-d).
                if alpha >= 0 {
                    (beta, 0, alpha, 0)
                } else {
                    (beta - alpha * d, -alpha, 0, -alpha)
                }
            } else {
                // plus chart: X = (1,0), X₊ = (0,1), X₋-lead = (-d,-1).
                if beta >= 0 {
                    (alpha, beta, 0, 0)
                } else {
                    (alpha - beta * d, 0, -beta, -beta)
                }
            }
        };
        let best_of = |e: &QTorusElement, minus: bool| {
            e.terms()
                .map(|((t, cl), v)| {
                    let w = decode(*t, minus);
                    let lam_deg = cl.degree() - w.3 * kink_deg;
                    (lam_deg, (*t, cl.clone()), v.clone(), w)
                })
                .min_by(|a, b| (a.0, a.1 .0, &a.1 .1).cmp(&(b.0, b.1 .0, &b.1 .1)))
        };
        let cand_minus = best_of(&res_minus, true);
        let cand_plus = best_of(&res_plus, false);
        let from_minus = match (&cand_minus, &cand_plus) {
            (Some(m), Some(p)) => m.0 <= p.0,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!(),
        };
        let (_, (t, cls), coeff, (a, b, c, lead_kappa_mult)) =
            if from_minus { cand_minus.unwrap() } else { cand_plus.unwrap() };
        if !used_words.insert((a, b, c)) {
            // The same word demanded two different coefficients: no single
            // element of the ray algebra has both lifts as images.
            return Ok(false);
        }
        let lead_class = surface.reduce_class(&kink.scaled(lead_kappa_mult));
        let lambda_class = cls.sub(&lead_class);
        if !coset_contains_effective(surface, &lambda_class) {
            return Ok(false);
        }
        let image_raw = reduce_elem(surface, &word_image(a, b, c, !from_minus)?);
        let lead_coeff = image_raw.coeff(t, &lead_class);
        if lead_coeff.is_zero() {
            return Err(QError::Internal("ray gluing image lost its leading term".into()));
        }
        let lambda_scalar = coeff.div(&lead_coeff)?;
        // Subtract λ ẑ^{λ_class} · ψ̂(w) from both residuals.
        for (side_plus, res) in [(false, &mut res_minus), (true, &mut res_plus)] {
            let image = word_image(a, b, c, side_plus)?;
            let mut contribution = QTorusElement::zero(res.chart, order, rank);
            for ((it, ic), iv) in image.terms() {
                contribution.add_term(
                    *it,
                    surface.reduce_class(&ic.add(&lambda_class)),
                    iv.mul(&lambda_scalar),
                );
            }
            *res = res.sub(&contribution)?;
        }
    }
    Ok(true)
}

fn invert_monomial(x: &QTorusElement) -> QResult<QTorusElement> {
    let mut terms = x.terms();
    let ((t, c), v) = terms.next().ok_or(QError::DivisionByZero)?;
    if terms.next().is_some() {
        return Err(QError::Internal("not a monomial".into()));
    }
    Ok(QTorusElement::monomial(
        x.chart,
        x.order,
        (-t.0, -t.1),
        CurveClass(c.0.iter().map(|a| -a).collect()),
        v.inv()?,
    ))
}

/// Chamber sample points of one cone: one per connected component of the
/// complement of the interior walls.
fn chamber_points(diagram: &ScatteringDiagram, chart: usize) -> Vec<Endpoint> {
    let mut dirs: Vec<(i64, i64)> = diagram
        .interior_walls(chart)
        .iter()
        .map(|w| w.dir)
        .collect();
    dirs.sort_by(|a, b| (a.1 * b.0).cmp(&(b.1 * a.0)));
    dirs.dedup();
    let mut bounds = vec![(1i64, 0i64)];
    bounds.extend(dirs);
    bounds.push((0, 1));
    let mut out = Vec::new();
    for pair in bounds.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        // A rational point strictly between the two directions, at offset
        // 1/7 to dodge integral-slope degeneracies.
        let x = BigRational::from_integer((a.0 + b.0).into())
            + BigRational::new(1.into(), 7.into());
        let y = BigRational::from_integer((a.1 + b.1).into())
            + BigRational::new(1.into(), 11.into());
        out.push(Endpoint { chart, coords: (x, y) });
    }
    out
}

/// Consistency of a diagram on its surface, checked at the truncation
/// order: lifts are compatible along paths between adjacent chambers of a
/// cone (crossing one interior wall) and across every Σ-ray.
pub fn consistency_check_on_b(
    diagram: &ScatteringDiagram,
    charges: &[ChartVector],
) -> QResult<ConsistencyReport> {
    let surface = diagram.base.surface()?;
    let r = surface.ray_count();
    if !surface.all_kinks_positive() {
        return Err(QError::SeedMismatch("consistency needs positive-degree kinks".into()));
    }
    if r < 3 {
        return Err(QError::SeedMismatch(
            "surface consistency sampling requires at least three rays".into(),
        ));
    }
    for p in charges {
        let mut per_cone: Vec<Vec<(Endpoint, QTorusElement)>> = Vec::new();
        for chart in 0..r {
            let mut lifts = Vec::new();
            for q in chamber_points(diagram, chart) {
                let mut attempt = 0usize;
                let (value, actual_q) = loop {
                    let qq = if attempt == 0 { q.clone() } else { q.perturbed(attempt) };
                    match lift(diagram, p, &qq) {
                        Ok(v) => break (v, qq),
                        Err(QError::DegenerateEndpoint) if attempt < 25 => attempt += 1,
                        Err(e) => return Err(e),
                    }
                };
                lifts.push((actual_q, value));
            }
            per_cone.push(lifts);
        }
        // Within a cone: consecutive chambers differ by one interior wall.
        for chart in 0..r {
            let mut dirs: Vec<(i64, i64)> = diagram
                .interior_walls(chart)
                .iter()
                .map(|w| w.dir)
                .collect();
            dirs.sort_by(|a, b| (a.1 * b.0).cmp(&(b.1 * a.0)));
            dirs.dedup();
            let lifts = &per_cone[chart];
            for (i, dir) in dirs.iter().enumerate() {
                let walls: Vec<&Wall> = diagram
                    .interior_walls(chart)
                    .into_iter()
                    .filter(|w| w.dir == *dir)
                    .collect();
                let mut acc = lifts[i].1.clone();
                for w in walls {
                    acc = wallcross_apply(&w.f.retag(chart), *dir, &acc, -1)?;
                }
                if reduce_elem(surface, &acc) != reduce_elem(surface, &lifts[i + 1].1) {
                    return Ok(ConsistencyReport::Fail {
                        context: format!(
                            "charge {:?}: lift mismatch across interior wall {:?} of cone {}",
                            p, dir, chart
                        ),
                    });
                }
            }
        }
        // Across each Σ-ray: the last chamber of cone j-1 maps to the first
        // chamber of cone j.
        for ray in 0..r {
            let prev = (ray + r - 1) % r;
            let from = per_cone[prev].last().unwrap();
            let to = per_cone[ray].first().unwrap();
            if !rho_glue_check(diagram, ray, &from.1, &to.1)? {
                return Ok(ConsistencyReport::Fail {
                    context: format!("charge {:?}: lifts do not glue across Σ-ray {}", p, ray),
                });
            }
        }
    }
    Ok(ConsistencyReport::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::CurveClass;
    use crate::scattering::ScatteringDiagram;

    /// The single-quadrant surface at the special fiber: one ray, kink of
    /// degree one, no walls.
    fn v1_diagram() -> ScatteringDiagram {
        let s = TropicalSurface::new(vec![9], vec![CurveClass::unit(1, 0)], vec!["D1".into()])
            .unwrap();
        ScatteringDiagram::new_surface(s, 1)
    }

    /// Two-ray surface at the special fiber (upper half-plane picture).
    fn v2_diagram() -> ScatteringDiagram {
        let s = TropicalSurface::new(
            vec![0, 0],
            vec![CurveClass::unit(2, 0), CurveClass::unit(2, 1)],
            vec!["D1".into(), "D2".into()],
        )
        .unwrap();
        ScatteringDiagram::new_surface(s, 1)
    }

    #[test]
    fn straight_line_only_in_same_cone() {
        // Trivial diagram on the toric plane: one straight line.
        let s =
            TropicalSurface::new(vec![1, 1, 1], vec![CurveClass::zero(0); 3], vec![]).unwrap();
        let d = ScatteringDiagram::new_surface(s, 3);
        let p = ChartVector::new(0, 2, 1);
        let q = Endpoint::from_fractions(0, (7, 2), (5, 3));
        let lines = enumerate_broken_lines(&d, &p, &q).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].final_tangent, (2, 1));
        assert!(lines[0].class.is_zero());
        assert_eq!(lines[0].coeff, QScalar::one());
    }

    #[test]
    fn v1_ray_charge_has_two_lines() {
        // On the quadrant, the ray charge reaches any interior endpoint in
        // both boundary developments.
        let d = v1_diagram();
        let v = ChartVector::new(0, 1, 0);
        let q = Endpoint::from_fractions(0, (5, 2), (7, 4));
        let lines = enumerate_broken_lines(&d, &v, &q).unwrap();
        let mut tangents: Vec<Tangent> = lines.iter().map(|l| l.final_tangent).collect();
        tangents.sort();
        assert_eq!(tangents, vec![(0, 1), (1, 0)]);
        assert!(lines.iter().all(|l| l.coeff == QScalar::one() && l.class.is_zero()));
    }

    #[test]
    fn v2_special_fiber_lift() {
        let d = v2_diagram();
        let v1 = ChartVector::new(0, 1, 0);
        let q = Endpoint::from_fractions(0, (11, 10), (1, 1));
        let lines = enumerate_broken_lines(&d, &v1, &q).unwrap();
        // Straight line from the right; the left realization is cut off by
        // the degree-one kink at the special fiber.
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].final_tangent, (1, 0));
        // In the adjacent cone the charge shows its other face.
        let q2 = Endpoint::from_fractions(1, (11, 10), (1, 1));
        let lines2 = enumerate_broken_lines(&d, &v1, &q2).unwrap();
        assert_eq!(lines2.len(), 1);
        assert_eq!(lines2[0].final_tangent, (0, 1));
    }

    #[test]
    fn v1_xy_products() {
        // x = θ_{(2,1)}, y = θ_v, z = θ_{(1,1)}:
        // x̂ŷ = q^{-1/2} θ_{(3,1)} + q θ_{(2,2)}.
        let d = v1_diagram();
        let x = ChartVector::new(0, 2, 1);
        let y = ChartVector::new(0, 1, 0);
        let row = structure_constants(&d, &x, &y).unwrap();
        let expect_31 = RingElem::scalar(QScalar::s_pow(-1), 1);
        let expect_22 = RingElem::scalar(QScalar::s_pow(2), 1);
        assert_eq!(row.terms.get(&ChartVector::new(0, 3, 1)).unwrap(), &expect_31);
        assert_eq!(row.terms.get(&ChartVector::new(0, 2, 2)).unwrap(), &expect_22);
        assert_eq!(row.terms.len(), 2);
    }

    #[test]
    fn v2_xy_products() {
        // x̂ŷ = q^{1/2} θ_{w+v2} + q^{-1/2} θ_{w'+v2}: in canonical charts,
        // θ_{(1,1)@0} and θ_{(1,1)@1}.
        let d = v2_diagram();
        let x = ChartVector::new(0, 1, 0);
        let y = ChartVector::new(0, 0, 1); // = v_2, canonical (1,0)@1
        let row = structure_constants(&d, &x, &y).unwrap();
        assert_eq!(
            row.terms.get(&ChartVector::new(0, 1, 1)).unwrap(),
            &RingElem::scalar(QScalar::s_pow(1), 2)
        );
        assert_eq!(
            row.terms.get(&ChartVector::new(1, 1, 1)).unwrap(),
            &RingElem::scalar(QScalar::s_pow(-1), 2)
        );
        assert_eq!(row.terms.len(), 2);
    }

    /// The five-ray surface with one blow-up class per ray and the five
    /// outgoing walls `1 + q^{-1/2} ẑ^{E_j - φ(v_j)}`. The class labels
    /// carry the honest degree-preserving relations of the rank-five curve
    /// lattice, plus the full intersection pairing.
    fn dp5_diagram(order: usize) -> ScatteringDiagram {
        let labels: Vec<String> = (1..=5)
            .map(|i| format!("D{i}"))
            .chain((1..=5).map(|i| format!("E{i}")))
            .collect();
        let kinks = (0..5).map(|j| CurveClass::unit(10, j)).collect();
        let mut s = TropicalSurface::new(vec![-1; 5], kinks, labels).unwrap();
        s.set_relations(vec![
            vec![-1, -1, 0, 1, 0, 0, 0, 0, 1, 0],
            vec![0, -1, -1, 0, 1, 0, 0, 0, 0, 1],
            vec![0, -1, -1, 0, 0, 1, 0, 0, 1, 0],
            vec![-1, -1, -1, 0, 0, 0, 1, 0, 1, 1],
            vec![-1, -1, 0, 0, 0, 0, 0, 1, 0, 1],
        ])
        .unwrap();
        s.set_pairing(vec![
            vec![-1, 1, 0, 0, 1],
            vec![1, -1, 1, 0, 0],
            vec![0, 1, -1, 1, 0],
            vec![0, 0, 1, -1, 1],
            vec![1, 0, 0, 1, -1],
            vec![1, 0, 0, 0, 0],
            vec![0, 1, 0, 0, 0],
            vec![0, 0, 1, 0, 0],
            vec![0, 0, 0, 1, 0],
            vec![0, 0, 0, 0, 1],
        ]);
        let mut d = ScatteringDiagram::new_surface(s, order);
        for j in 0..5 {
            let f = QTorusElement::one(j, order, 10)
                .add(&QTorusElement::monomial(
                    j,
                    order,
                    (-1, 0),
                    CurveClass::unit(10, 5 + j),
                    QScalar::s_pow(-1),
                ))
                .unwrap();
            d.push_wall(crate::scattering::Wall { dir: (1, 0), chart: j, incoming: false, f });
        }
        d
    }

    #[test]
    fn dp5_product_row() {
        // θ_{v_{j-1}} θ_{v_{j+1}} = ẑ^{D_j}(ẑ^{E_j} + q^{1/2} θ_{v_j}),
        // and the reversed order with q^{-1/2}.
        let d = dp5_diagram(3);
        for j in 0..5usize {
            let prev = ChartVector::new((j + 4) % 5, 1, 0);
            let next = ChartVector::new((j + 1) % 5, 1, 0);
            let vj = ChartVector::new(j, 1, 0);
            let zero = ChartVector::new(0, 0, 0);
            let surface = d.base.surface().unwrap();
            let mut dj_class = CurveClass::zero(10);
            dj_class.0[j] = 1;
            let mut djej = dj_class.clone();
            djej.0[5 + j] = 1;
            let dj_class = surface.reduce_class(&dj_class);
            let djej = surface.reduce_class(&djej);

            let row = structure_constants(&d, &prev, &next).unwrap();
            let mut expect_unit = RingElem::zero();
            expect_unit.add_term(djej.clone(), QScalar::one());
            let mut expect_vj = RingElem::zero();
            expect_vj.add_term(dj_class.clone(), QScalar::s_pow(1));
            assert_eq!(row.terms.get(&zero), Some(&expect_unit), "j = {j}");
            assert_eq!(row.terms.get(&vj), Some(&expect_vj), "j = {j}");
            assert_eq!(row.terms.len(), 2, "j = {j}: {:?}", row.terms);

            let row_rev = structure_constants(&d, &next, &prev).unwrap();
            let mut expect_vj_rev = RingElem::zero();
            expect_vj_rev.add_term(dj_class, QScalar::s_pow(-1));
            assert_eq!(row_rev.terms.get(&zero), Some(&expect_unit), "j = {j}");
            assert_eq!(row_rev.terms.get(&vj), Some(&expect_vj_rev), "j = {j}");
            assert_eq!(row_rev.terms.len(), 2, "j = {j}");
        }
    }

    #[test]
    fn dp5_consistency_passes_and_mutation_fails() {
        let d = dp5_diagram(3);
        let charges: Vec<ChartVector> = (0..5).map(|j| ChartVector::new(j, 1, 0)).collect();
        assert!(consistency_check_on_b(&d, &charges).unwrap().passed());

        // A spurious extra factor on one wall breaks consistency.
        let mut bad = d.clone();
        let spurious = QTorusElement::one(0, 3, 10)
            .add(&QTorusElement::monomial(
                0,
                3,
                (-1, 0),
                CurveClass::unit(10, 6),
                QScalar::one(),
            ))
            .unwrap();
        for w in &mut bad.walls {
            if w.chart == 0 && w.is_sigma_ray() {
                w.f = w.f.mul(&spurious).unwrap();
            }
        }
        assert!(!consistency_check_on_b(&bad, &charges).unwrap().passed());
    }

    #[test]
    fn lift_constant_in_chambers() {
        let d = dp5_diagram(3);
        let p = ChartVector::new(1, 1, 0);
        let q1 = Endpoint::from_fractions(3, (3, 1), (2, 1));
        let q2 = Endpoint::from_fractions(3, (5, 2), (7, 3));
        let l1 = lift(&d, &p, &q1).unwrap();
        let l2 = lift(&d, &p, &q2).unwrap();
        assert_eq!(l1, l2);
    }

    #[test]
    fn special_fiber_different_cones_is_empty() {
        // With at least three rays and positive kinks, a charge two cones
        // away contributes nothing at the lowest truncation.
        let d = dp5_diagram(1);
        let p = ChartVector::new(2, 1, 0);
        let q = Endpoint::from_fractions(0, (5, 2), (7, 4));
        assert!(enumerate_broken_lines(&d, &p, &q).unwrap().is_empty());
    }

    #[test]
    fn special_fiber_consistency_is_trivial() {
        // At order 1 every wall function is trivial and the check passes.
        let d = dp5_diagram(1);
        let charges: Vec<ChartVector> = (0..5).map(|j| ChartVector::new(j, 1, 0)).collect();
        assert!(consistency_check_on_b(&d, &charges).unwrap().passed());
    }

    #[test]
    fn rows_are_independent_of_the_retry_offset() {
        // Different endpoint placements compute the same structure
        // constants.
        let d = dp5_diagram(3);
        let prev = ChartVector::new(4, 1, 0);
        let next = ChartVector::new(1, 1, 0);
        let a = structure_constants_with_retry(&d, &prev, &next, 0).unwrap();
        let b = structure_constants_with_retry(&d, &prev, &next, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn theta_times_unit_is_identity() {
        let d = v1_diagram();
        let p = ChartVector::new(0, 2, 1);
        let zero = ChartVector::new(0, 0, 0);
        let row = structure_constants(&d, &p, &zero).unwrap();
        assert_eq!(row.terms.len(), 1);
        assert_eq!(row.terms.get(&p).unwrap(), &RingElem::scalar(QScalar::one(), 1));
    }
}
