//! Scattering diagrams as data: walls with attached functions, path-ordered
//! products, the order-by-order consistency completion on the plane, and the
//! loop-identity checker.
//!
//! A wall stores its primitive support direction `dir` and a function `f`
//! with unit constant term whose nonconstant tangents are negative multiples
//! of `dir`. Outgoing walls are supported on the ray `R_{>=0} dir`; incoming
//! walls (seed data on the plane) are supported on the full line `R dir`.
//! Crossing a wall at a point `u` applies the conjugation automorphism with
//! sign `ε = sign(<γ', dir>)`; on a counterclockwise loop this gives `ε = -1`
//! on the ray `R_{>=0} dir` and `ε = +1` on the opposite ray.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::affine::{is_primitive, CurveClass, SurfaceSpec, TropicalSurface};
use crate::error::{QError, QResult};
use crate::qcoeff::QScalar;
use crate::qtorus::{check_wall_function, det2, wallcross_apply, QTorusElement, Tangent, TermSpec};

pub use crate::brokenlines::{consistency_check_on_b, ConsistencyReport};

/// One wall of a diagram.
#[derive(Clone, Debug)]
pub struct Wall {
    /// Primitive support direction, in the coordinates of `chart`.
    pub dir: Tangent,
    /// Chart the support lives in (always 0 on the plane; on a surface,
    /// Σ-ray walls use their own ray's chart with `dir = (1,0)`).
    pub chart: usize,
    /// Incoming walls are supported on the full line through ±dir.
    pub incoming: bool,
    pub f: QTorusElement,
}

impl Wall {
    pub fn validate(&self) -> QResult<()> {
        if !is_primitive(self.dir) {
            return Err(QError::MalformedWall);
        }
        check_wall_function(&self.f, self.dir)
    }

    /// Σ-ray wall: supported on a boundary ray of the cone decomposition.
    pub fn is_sigma_ray(&self) -> bool {
        self.dir == (1, 0)
    }
}

/// What the diagram lives on: the smooth plane model (one global chart,
/// kink-free) or a tropicalized surface.
#[derive(Clone, Debug)]
pub enum DiagramBase {
    Plane { labels: Vec<String> },
    Surface(TropicalSurface),
}

impl DiagramBase {
    pub fn labels(&self) -> Vec<String> {
        match self {
            DiagramBase::Plane { labels } => labels.clone(),
            DiagramBase::Surface(s) => s.labels().to_vec(),
        }
    }

    pub fn class_rank(&self) -> usize {
        match self {
            DiagramBase::Plane { labels } => labels.len(),
            DiagramBase::Surface(s) => s.class_rank(),
        }
    }

    pub fn surface(&self) -> QResult<&TropicalSurface> {
        match self {
            DiagramBase::Surface(s) => Ok(s),
            _ => Err(QError::Parse("operation requires a surface diagram".into())),
        }
    }

    pub fn require_plane(&self) -> QResult<()> {
        match self {
            DiagramBase::Plane { .. } => Ok(()),
            _ => Err(QError::Parse("operation requires the plane model".into())),
        }
    }
}

/// A scattering diagram: a base, a truncation order, and finitely many
/// walls with nontrivial functions.
#[derive(Clone, Debug)]
pub struct ScatteringDiagram {
    pub base: DiagramBase,
    pub order: usize,
    pub walls: Vec<Wall>,
}

impl ScatteringDiagram {
    pub fn new_plane(labels: Vec<String>, order: usize) -> Self {
        ScatteringDiagram { base: DiagramBase::Plane { labels }, order, walls: Vec::new() }
    }

    pub fn new_surface(surface: TropicalSurface, order: usize) -> Self {
        ScatteringDiagram { base: DiagramBase::Surface(surface), order, walls: Vec::new() }
    }

    pub fn class_rank(&self) -> usize {
        self.base.class_rank()
    }

    pub fn validate(&self) -> QResult<()> {
        for w in &self.walls {
            w.validate()?;
            if w.f.order != self.order {
                return Err(QError::OrderMismatch(self.order, w.f.order));
            }
            if let DiagramBase::Surface(s) = &self.base {
                if w.incoming {
                    return Err(QError::MalformedWall);
                }
                if w.chart >= s.ray_count() {
                    return Err(QError::NonAdjacentChart(w.chart));
                }
                let (a, b) = w.dir;
                if a <= 0 || b < 0 {
                    return Err(QError::MalformedWall);
                }
            }
        }
        Ok(())
    }

    pub fn push_wall(&mut self, wall: Wall) {
        self.walls.push(wall);
        self.sort_walls();
    }

    /// Canonical wall order: by chart, then angle within the chart, then
    /// incoming before outgoing. Keeps serialized output deterministic.
    pub fn sort_walls(&mut self) {
        self.walls.sort_by(|a, b| {
            (a.chart, !a.incoming, a.dir)
                .cmp(&(b.chart, !b.incoming, b.dir))
                .then(angle_cmp(a.dir, b.dir))
        });
    }

    /// Walls supported on the Σ-ray `ρ_j` of a surface diagram.
    pub fn sigma_ray_walls(&self, ray: usize) -> Vec<&Wall> {
        self.walls
            .iter()
            .filter(|w| w.is_sigma_ray() && w.chart == ray)
            .collect()
    }

    /// Interior walls inside the cone of `chart`.
    pub fn interior_walls(&self, chart: usize) -> Vec<&Wall> {
        self.walls
            .iter()
            .filter(|w| !w.is_sigma_ray() && w.chart == chart)
            .collect()
    }
}

/// Sector of a nonzero integer vector, counting counterclockwise from just
/// above the positive x-axis; the positive x-axis itself sorts last (a loop
/// based there crosses it at the very end).
fn sector(u: Tangent) -> u8 {
    match (u.0.signum(), u.1.signum()) {
        (1, 1) => 0,
        (0, 1) => 1,
        (-1, 1) => 2,
        (-1, 0) => 3,
        (-1, -1) => 4,
        (0, -1) => 5,
        (1, -1) => 6,
        (1, 0) => 7,
        _ => panic!("zero vector has no angle"),
    }
}

/// Compare two directions by counterclockwise angle from just above the
/// positive x-axis; exact. Proportional vectors compare equal.
pub fn angle_cmp(a: Tangent, b: Tangent) -> std::cmp::Ordering {
    let (sa, sb) = (sector(a), sector(b));
    if sa != sb {
        return sa.cmp(&sb);
    }
    let c = det2(a, b);
    if c > 0 {
        std::cmp::Ordering::Less
    } else if c < 0 {
        std::cmp::Ordering::Greater
    } else {
        std::cmp::Ordering::Equal
    }
}

// ---------------------------------------------------------------------------
// Path-ordered products on the plane
// ---------------------------------------------------------------------------

/// One crossing event on the counterclockwise loop.
#[derive(Clone, Debug)]
struct LoopEvent {
    /// Direction of the crossing point (where the loop meets the support).
    at: Tangent,
    /// Index into the diagram's wall list.
    wall: usize,
    /// Crossing sign.
    eps: i8,
}

/// The ordered crossing events of a full counterclockwise loop based just
/// above the positive x-axis.
fn loop_events(diagram: &ScatteringDiagram) -> Vec<LoopEvent> {
    let mut events = Vec::new();
    for (i, w) in diagram.walls.iter().enumerate() {
        // Crossing the ray `R_{>=0} dir` on a ccw loop has ε = -1.
        events.push(LoopEvent { at: w.dir, wall: i, eps: -1 });
        if w.incoming {
            // The other half of the line, ε = +1.
            events.push(LoopEvent { at: (-w.dir.0, -w.dir.1), wall: i, eps: 1 });
        }
    }
    events.sort_by(|a, b| angle_cmp(a.at, b.at).then(a.wall.cmp(&b.wall)));
    events
}

/// Apply the path-ordered product of a full counterclockwise loop (based
/// just above the positive x-axis) to `elem`, on the plane model.
pub fn loop_transform(diagram: &ScatteringDiagram, elem: &QTorusElement) -> QResult<QTorusElement> {
    diagram.base.require_plane()?;
    let mut acc = elem.clone();
    for ev in loop_events(diagram) {
        let w = &diagram.walls[ev.wall];
        acc = wallcross_apply(&w.f, w.dir, &acc, ev.eps)?;
    }
    Ok(acc)
}

/// Path-ordered product over the counterclockwise arc of directions
/// `(from, to]` on the plane model, plus `winding` extra full loops.
pub fn path_ordered_product(
    diagram: &ScatteringDiagram,
    from: Tangent,
    to: Tangent,
    winding: usize,
    elem: &QTorusElement,
) -> QResult<QTorusElement> {
    diagram.base.require_plane()?;
    let events = loop_events(diagram);
    let mut acc = elem.clone();
    let in_arc = |at: Tangent| -> bool {
        use std::cmp::Ordering::*;
        match angle_cmp(from, to) {
            Less => angle_cmp(from, at) == Less && angle_cmp(at, to) != Greater,
            Greater => angle_cmp(from, at) == Less || angle_cmp(at, to) != Greater,
            Equal => false,
        }
    };
    let mut arc_events: Vec<&LoopEvent> = events.iter().filter(|e| in_arc(e.at)).collect();
    arc_events.sort_by(|a, b| {
        // Events angularly after `from` come first, wrapped ones after.
        let wrapped = |t: Tangent| angle_cmp(from, t) != std::cmp::Ordering::Less;
        wrapped(a.at)
            .cmp(&wrapped(b.at))
            .then(angle_cmp(a.at, b.at))
            .then(a.wall.cmp(&b.wall))
    });
    for ev in arc_events {
        let w = &diagram.walls[ev.wall];
        acc = wallcross_apply(&w.f, w.dir, &acc, ev.eps)?;
    }
    for _ in 0..winding {
        acc = loop_transform(diagram, &acc)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Loop-identity check and completion (plane model)
// ---------------------------------------------------------------------------

/// Outcome of [`check_loop_identity`].
#[derive(Clone, Debug)]
pub enum LoopReport {
    Pass,
    Fail {
        /// Lowest class degree at which the loop fails to be the identity.
        degree: i64,
        /// Offending monomials `(generator, tangent, class, coefficient)`.
        terms: Vec<(&'static str, Tangent, CurveClass, QScalar)>,
    },
}

impl LoopReport {
    pub fn passed(&self) -> bool {
        matches!(self, LoopReport::Pass)
    }
}

/// Defect of the loop automorphism on one generator, normalized as
/// `gen^{-1} * L(gen) - 1`.
fn generator_defect(diagram: &ScatteringDiagram, gen: Tangent) -> QResult<QTorusElement> {
    let rank = diagram.class_rank();
    let g = QTorusElement::monomial(0, diagram.order, gen, CurveClass::zero(rank), QScalar::one());
    let image = loop_transform(diagram, &g)?;
    let ginv = QTorusElement::monomial(
        0,
        diagram.order,
        (-gen.0, -gen.1),
        CurveClass::zero(rank),
        QScalar::one(),
    );
    let normalized = ginv.mul(&image)?;
    normalized.sub(&QTorusElement::one(0, diagram.order, rank))
}

/// Check whether the full loop acts as the identity on the two chart
/// generators, mod the truncation order.
pub fn check_loop_identity(diagram: &ScatteringDiagram) -> QResult<LoopReport> {
    diagram.base.require_plane()?;
    let du = generator_defect(diagram, (1, 0))?;
    let dv = generator_defect(diagram, (0, 1))?;
    let mut worst: Option<i64> = None;
    let mut terms = Vec::new();
    for (name, d) in [("x", &du), ("y", &dv)] {
        for ((t, c), v) in d.terms() {
            let deg = c.degree();
            if worst.map_or(true, |w| deg < w) {
                worst = Some(deg);
            }
            terms.push((name, *t, c.clone(), v.clone()));
        }
    }
    match worst {
        None => Ok(LoopReport::Pass),
        Some(degree) => {
            terms.retain(|(_, _, c, _)| c.degree() == degree);
            Ok(LoopReport::Fail { degree, terms })
        }
    }
}

/// Consistency completion on the plane: add outgoing walls, order by order
/// in the class grading, until the full loop acts as the identity mod the
/// truncation order. At most one wall is added per direction; input walls
/// are untouched.
pub fn complete(diagram: &ScatteringDiagram) -> QResult<ScatteringDiagram> {
    diagram.base.require_plane()?;
    diagram.validate()?;
    let rank = diagram.class_rank();
    let order = diagram.order;
    let mut added: BTreeMap<Tangent, QTorusElement> = BTreeMap::new();

    let rebuild =
        |base: &ScatteringDiagram, added: &BTreeMap<Tangent, QTorusElement>| -> ScatteringDiagram {
            let mut d = base.clone();
            for (dir, f) in added {
                if f.len() > 1 {
                    d.push_wall(Wall { dir: *dir, chart: 0, incoming: false, f: f.clone() });
                }
            }
            d
        };

    let mut current = diagram.clone();
    let mut guard = 0usize;
    loop {
        guard += 1;
        if guard > 10_000 {
            return Err(QError::Internal("completion did not stabilize".into()));
        }
        let du = generator_defect(&current, (1, 0))?;
        let dv = generator_defect(&current, (0, 1))?;
        let min_deg = du.terms().chain(dv.terms()).map(|((_, c), _)| c.degree()).min();
        let Some(k) = min_deg else { break };
        // One canonical defect term of lowest degree.
        let pick = |d: &QTorusElement| -> Option<(Tangent, CurveClass, QScalar)> {
            d.terms()
                .filter(|((_, c), _)| c.degree() == k)
                .map(|((t, c), v)| (*t, c.clone(), v.clone()))
                .next()
        };
        let (host, (t, c, defect)) = match pick(&du) {
            Some(x) => ((1, 0), x),
            None => ((0, 1), pick(&dv).expect("some defect at the minimal degree")),
        };
        // The defect monomial of gen^{-1} L(gen) carries the tangent of the
        // responsible wall term; its direction names the wall to correct.
        if t == (0, 0) {
            return Err(QError::Internal("central loop defect".into()));
        }
        let g = crate::affine::gcd_i64(t.0, t.1);
        let dir = (-t.0 / g, -t.1 / g);
        if det2(dir, host) == 0 {
            return Err(QError::Internal(
                "defect direction parallel to its host generator".into(),
            ));
        }
        // Linear response of that defect coefficient to a unit wall term.
        let mut probe_added = added.clone();
        let probe_entry =
            probe_added.entry(dir).or_insert_with(|| QTorusElement::one(0, order, rank));
        *probe_entry =
            probe_entry.add(&QTorusElement::monomial(0, order, t, c.clone(), QScalar::one()))?;
        let probed = rebuild(diagram, &probe_added);
        let probe_defect = generator_defect(&probed, host)?;
        let base_defect = if host == (1, 0) { &du } else { &dv };
        let response = probe_defect.coeff(t, &c).sub(&base_defect.coeff(t, &c));
        if response.is_zero() {
            return Err(QError::Internal("degenerate completion response".into()));
        }
        let coeff = defect.neg().div(&response)?;
        let entry = added.entry(dir).or_insert_with(|| QTorusElement::one(0, order, rank));
        *entry = entry.add(&QTorusElement::monomial(0, order, t, c.clone(), coeff))?;
        current = rebuild(diagram, &added);
    }
    current.sort_walls();
    current.validate()?;
    Ok(current)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct WallSpec {
    pub direction: (i64, i64),
    pub chart: usize,
    pub orientation: String,
    pub f: Vec<TermSpec>,
}

#[derive(Serialize, Deserialize)]
pub struct DiagramSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane_classes: Option<Vec<String>>,
    pub order: usize,
    pub walls: Vec<WallSpec>,
}

impl ScatteringDiagram {
    pub fn to_spec(&self) -> DiagramSpec {
        let labels = self.base.labels();
        let (surface, plane_classes) = match &self.base {
            DiagramBase::Surface(s) => (Some(s.to_spec()), None),
            DiagramBase::Plane { labels } => (None, Some(labels.clone())),
        };
        DiagramSpec {
            surface,
            plane_classes,
            order: self.order,
            walls: self
                .walls
                .iter()
                .map(|w| WallSpec {
                    direction: w.dir,
                    chart: w.chart,
                    orientation: if w.incoming { "ingoing".into() } else { "outgoing".into() },
                    f: w.f.to_specs(&labels),
                })
                .collect(),
        }
    }

    pub fn from_spec(spec: &DiagramSpec) -> QResult<ScatteringDiagram> {
        let base = match (&spec.surface, &spec.plane_classes) {
            (Some(s), None) => DiagramBase::Surface(TropicalSurface::from_spec(s)?),
            (None, Some(labels)) => DiagramBase::Plane { labels: labels.clone() },
            _ => {
                return Err(QError::Parse(
                    "diagram needs exactly one of surface / plane_classes".into(),
                ))
            }
        };
        let labels = base.labels();
        let mut walls = Vec::new();
        for w in &spec.walls {
            let incoming = match w.orientation.as_str() {
                "ingoing" | "incoming" => true,
                "outgoing" => false,
                other => return Err(QError::Parse(format!("unknown orientation {other}"))),
            };
            walls.push(Wall {
                dir: w.direction,
                chart: w.chart,
                incoming,
                f: QTorusElement::from_specs(&w.f, w.chart, spec.order, &labels)?,
            });
        }
        let mut d = ScatteringDiagram { base, order: spec.order, walls };
        d.sort_walls();
        d.validate()?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtorus::Lcg;

    fn seed_wall(order: usize, dir: Tangent, class_index: usize, rank: usize) -> Wall {
        let f = QTorusElement::one(0, order, rank)
            .add(&QTorusElement::monomial(
                0,
                order,
                (-dir.0, -dir.1),
                CurveClass::unit(rank, class_index),
                QScalar::s_pow(-1),
            ))
            .unwrap();
        Wall { dir, chart: 0, incoming: true, f }
    }

    fn pentagon_seed(order: usize) -> ScatteringDiagram {
        let mut d = ScatteringDiagram::new_plane(vec!["E1".into(), "E2".into()], order);
        d.push_wall(seed_wall(order, (1, 0), 0, 2));
        d.push_wall(seed_wall(order, (0, 1), 1, 2));
        d
    }

    #[test]
    fn empty_diagram_loop_is_identity() {
        let d = ScatteringDiagram::new_plane(vec!["E1".into()], 6);
        assert!(check_loop_identity(&d).unwrap().passed());
    }

    #[test]
    fn single_incoming_wall_is_consistent() {
        let mut d = ScatteringDiagram::new_plane(vec!["E1".into()], 8);
        d.push_wall(seed_wall(8, (2, 1), 0, 1));
        assert!(check_loop_identity(&d).unwrap().passed());
        let completed = complete(&d).unwrap();
        assert_eq!(completed.walls.len(), 1);
    }

    #[test]
    fn forward_backward_crossing_cancels() {
        let w = seed_wall(8, (1, 1), 0, 1);
        let mut rng = Lcg(11);
        for _ in 0..20 {
            let e = crate::qtorus::random_element(&mut rng, 8, 4);
            let fwd = wallcross_apply(&w.f, w.dir, &e, 1).unwrap();
            let back = wallcross_apply(&w.f, w.dir, &fwd, -1).unwrap();
            assert_eq!(back, e);
        }
    }

    #[test]
    fn pentagon_seed_defect_at_order_two() {
        let d = pentagon_seed(3);
        match check_loop_identity(&d).unwrap() {
            LoopReport::Pass => panic!("seed diagram should not be consistent"),
            LoopReport::Fail { degree, terms } => {
                assert_eq!(degree, 2);
                assert!(terms.iter().all(|(_, _, c, _)| c == &CurveClass(vec![1, 1])));
                assert!(!terms.is_empty());
            }
        }
    }

    #[test]
    fn pentagon_completion_adds_exactly_one_wall() {
        let d = pentagon_seed(5);
        let completed = complete(&d).unwrap();
        assert!(check_loop_identity(&completed).unwrap().passed());
        let added: Vec<&Wall> = completed.walls.iter().filter(|w| !w.incoming).collect();
        assert_eq!(added.len(), 1);
        let w = added[0];
        assert_eq!(w.dir, (1, 1));
        // f = 1 + q^{-1/2} ẑ^{E1+E2 - φ(m1+m2)}
        let expect = QTorusElement::one(0, 5, 2)
            .add(&QTorusElement::monomial(
                0,
                5,
                (-1, -1),
                CurveClass(vec![1, 1]),
                QScalar::s_pow(-1),
            ))
            .unwrap();
        assert_eq!(w.f, expect);
    }

    #[test]
    fn completion_is_idempotent() {
        let d = pentagon_seed(5);
        let c1 = complete(&d).unwrap();
        let c2 = complete(&c1).unwrap();
        assert_eq!(c1.walls.len(), c2.walls.len());
        for (a, b) in c1.walls.iter().zip(&c2.walls) {
            assert_eq!(a.dir, b.dir);
            assert_eq!(a.f, b.f);
        }
    }

    /// Independent classical tropical-vertex engine: commutative products,
    /// crossing a wall multiplies a monomial by `f^(ε <dir, r(p)>)`. Used as
    /// an oracle for the classical limit of the quantum completion.
    mod classical {
        use super::*;

        pub fn cmul(a: &QTorusElement, b: &QTorusElement) -> QTorusElement {
            let mut out = QTorusElement::zero(0, a.order, a.class_rank());
            for ((ta, ca), va) in a.terms() {
                for ((tb, cb), vb) in b.terms() {
                    out.add_term((ta.0 + tb.0, ta.1 + tb.1), ca.add(cb), va.mul(vb));
                }
            }
            out
        }

        pub fn cinv(a: &QTorusElement) -> QTorusElement {
            let rank = a.class_rank();
            let one = QTorusElement::one(0, a.order, rank);
            let y = a.sub(&one).unwrap();
            let mut acc = one.clone();
            let mut pow = one;
            for k in 1..a.order {
                pow = cmul(&pow, &y);
                if pow.is_zero() {
                    break;
                }
                let signed = if k % 2 == 0 { pow.clone() } else { pow.neg() };
                acc = acc.add(&signed).unwrap();
            }
            acc
        }

        pub fn cpow(a: &QTorusElement, n: i64) -> QTorusElement {
            let rank = a.class_rank();
            let base = if n >= 0 { a.clone() } else { cinv(a) };
            let mut acc = QTorusElement::one(0, a.order, rank);
            for _ in 0..n.unsigned_abs() {
                acc = cmul(&acc, &base);
            }
            acc
        }

        pub fn cross(f: &QTorusElement, dir: Tangent, e: &QTorusElement, eps: i8) -> QTorusElement {
            let mut out = QTorusElement::zero(0, e.order, e.class_rank());
            for ((t, c), v) in e.terms() {
                let n = det2(dir, *t) * eps as i64;
                let mono = QTorusElement::monomial(0, e.order, *t, c.clone(), v.clone());
                out = out.add(&cmul(&mono, &cpow(f, n))).unwrap();
            }
            out
        }

        pub fn loop_transform(d: &ScatteringDiagram, e: &QTorusElement) -> QTorusElement {
            let mut events = Vec::new();
            for (i, w) in d.walls.iter().enumerate() {
                events.push((w.dir, i, -1i8));
                if w.incoming {
                    events.push(((-w.dir.0, -w.dir.1), i, 1));
                }
            }
            events.sort_by(|a, b| angle_cmp(a.0, b.0).then(a.1.cmp(&b.1)));
            let mut acc = e.clone();
            for (_, i, eps) in events {
                acc = cross(&d.walls[i].f, d.walls[i].dir, &acc, eps);
            }
            acc
        }

        pub fn defect(d: &ScatteringDiagram, gen: Tangent) -> QTorusElement {
            let rank = d.class_rank();
            let g =
                QTorusElement::monomial(0, d.order, gen, CurveClass::zero(rank), QScalar::one());
            let image = loop_transform(d, &g);
            let ginv = QTorusElement::monomial(
                0,
                d.order,
                (-gen.0, -gen.1),
                CurveClass::zero(rank),
                QScalar::one(),
            );
            cmul(&ginv, &image).sub(&QTorusElement::one(0, d.order, rank)).unwrap()
        }

        pub fn complete(d: &ScatteringDiagram) -> ScatteringDiagram {
            let rank = d.class_rank();
            let order = d.order;
            let mut added: BTreeMap<Tangent, QTorusElement> = BTreeMap::new();
            let rebuild = |added: &BTreeMap<Tangent, QTorusElement>| -> ScatteringDiagram {
                let mut out = d.clone();
                for (dir, f) in added {
                    if f.len() > 1 {
                        out.push_wall(Wall { dir: *dir, chart: 0, incoming: false, f: f.clone() });
                    }
                }
                out
            };
            let mut current = d.clone();
            for _ in 0..10_000 {
                let du = defect(&current, (1, 0));
                let dv = defect(&current, (0, 1));
                let min_deg =
                    du.terms().chain(dv.terms()).map(|((_, c), _)| c.degree()).min();
                let Some(k) = min_deg else { return current };
                let pick = |e: &QTorusElement| {
                    e.terms()
                        .filter(|((_, c), _)| c.degree() == k)
                        .map(|((t, c), v)| (*t, c.clone(), v.clone()))
                        .next()
                };
                let (host, (t, c, dcoeff)) = match pick(&du) {
                    Some(x) => ((1, 0), x),
                    None => ((0, 1), pick(&dv).unwrap()),
                };
                let g = crate::affine::gcd_i64(t.0, t.1);
                let dir = (-t.0 / g, -t.1 / g);
                let n = det2(dir, host);
                // Response of the defect term to a unit wall coefficient is
                // -n on the ε = -1 ray (ccw loop), linear at leading order.
                let response = QScalar::from_int(-n);
                let coeff = dcoeff.neg().div(&response).unwrap();
                let entry =
                    added.entry(dir).or_insert_with(|| QTorusElement::one(0, order, rank));
                *entry =
                    entry.add(&QTorusElement::monomial(0, order, t, c.clone(), coeff)).unwrap();
                current = rebuild(&added);
            }
            panic!("classical completion did not stabilize");
        }
    }

    #[test]
    fn completion_classical_limit_commutes() {
        // Classical limit of the quantum completion equals the independent
        // classical completion of the classical limit of the seed,
        // coefficient-wise at order 4, for the two-seed diagram and for a
        // three-line seed with a doubled direction.
        let order = 4;
        let classicalize = |d: &ScatteringDiagram| -> ScatteringDiagram {
            let mut out = d.clone();
            for w in &mut out.walls {
                w.f = w
                    .f
                    .map_coeffs(|c| QScalar::from_big_rational(&c.classical_limit().unwrap()));
            }
            out
        };
        let seeds: Vec<ScatteringDiagram> = vec![pentagon_seed(order), {
            let mut d = ScatteringDiagram::new_plane(
                vec!["E1".into(), "E2".into(), "E3".into()],
                order,
            );
            d.push_wall(seed_wall(order, (1, 0), 0, 3));
            d.push_wall(seed_wall(order, (0, 1), 1, 3));
            d.push_wall(seed_wall(order, (1, 2), 2, 3));
            d
        }];
        for seed in seeds {
            let quantum = complete(&seed).unwrap();
            let classical = classical::complete(&classicalize(&seed));
            assert!(classical::defect(&classical, (1, 0)).is_zero());
            assert!(classical::defect(&classical, (0, 1)).is_zero());
            let q_then_cl = classicalize(&quantum);
            assert_eq!(q_then_cl.walls.len(), classical.walls.len());
            for (a, b) in q_then_cl.walls.iter().zip(&classical.walls) {
                assert_eq!(a.dir, b.dir);
                assert_eq!(a.f, b.f, "wall at {:?}", a.dir);
            }
        }
    }

    #[test]
    fn completion_independent_of_insertion_order() {
        let order = 4;
        let mut d1 = ScatteringDiagram::new_plane(vec!["E1".into(), "E2".into()], order);
        d1.push_wall(seed_wall(order, (1, 0), 0, 2));
        d1.push_wall(seed_wall(order, (0, 1), 1, 2));
        let mut d2 = ScatteringDiagram::new_plane(vec!["E1".into(), "E2".into()], order);
        d2.push_wall(seed_wall(order, (0, 1), 1, 2));
        d2.push_wall(seed_wall(order, (1, 0), 0, 2));
        let c1 = complete(&d1).unwrap();
        let c2 = complete(&d2).unwrap();
        assert_eq!(c1.walls.len(), c2.walls.len());
        for (a, b) in c1.walls.iter().zip(&c2.walls) {
            assert_eq!(a.dir, b.dir);
            assert_eq!(a.f, b.f);
        }
    }

    #[test]
    fn arc_products_compose_to_the_loop() {
        // Splitting the loop into two arcs reproduces the full transform,
        // and crossing one wall out and back is the identity.
        let d = complete(&pentagon_seed(5)).unwrap();
        let mut rng = Lcg(31);
        for _ in 0..10 {
            let mut e = QTorusElement::zero(0, 5, 2);
            for _ in 0..3 {
                e.add_term(
                    (rng.range(-2, 2), rng.range(-2, 2)),
                    CurveClass(vec![rng.range(0, 1), rng.range(0, 1)]),
                    QScalar::from_int(rng.range(-3, 3)),
                );
            }
            let half = path_ordered_product(&d, (1, 0), (-1, 0), 0, &e).unwrap();
            let full = path_ordered_product(&d, (-1, 0), (1, 0), 0, &half).unwrap();
            assert_eq!(full, loop_transform(&d, &e).unwrap());
        }
    }

    #[test]
    fn completed_pentagon_wall_factorizes_integrally() {
        // The added wall carries a single integral factor on the combined
        // blow-up class.
        let d = complete(&pentagon_seed(4)).unwrap();
        let added = d.walls.iter().find(|w| !w.incoming).unwrap();
        let factors = crate::qtorus::bps_factorize(&added.f, added.dir).unwrap();
        assert_eq!(factors.len(), 1);
        assert_eq!(factors[0].class, CurveClass(vec![1, 1]));
        assert_eq!(factors[0].j, 0);
        assert_eq!(factors[0].omega, 1);
    }

    #[test]
    fn diagram_json_round_trip() {
        let d = complete(&pentagon_seed(4)).unwrap();
        let spec = d.to_spec();
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let spec2: DiagramSpec = serde_json::from_str(&json).unwrap();
        let d2 = ScatteringDiagram::from_spec(&spec2).unwrap();
        assert_eq!(d.walls.len(), d2.walls.len());
        for (a, b) in d.walls.iter().zip(&d2.walls) {
            assert_eq!(a.dir, b.dir);
            assert_eq!(a.incoming, b.incoming);
            assert_eq!(a.f, b.f);
        }
        let json2 = serde_json::to_string_pretty(&d2.to_spec()).unwrap();
        assert_eq!(json, json2);
    }
}
