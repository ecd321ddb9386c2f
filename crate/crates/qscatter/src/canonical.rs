//! Canonical diagrams of a Looijenga pair from toric-model seed data: the
//! seed diagram on the plane, its consistency completion, and the pull-back
//! to the surface; plus the generators-and-relations presentation of the
//! algebra attached to one ray.
//!
//! A seed is a complete fan together with blow-up classes attached to some
//! of its rays. The seed diagram has one incoming line per blown-up ray
//! direction `m`, with function `Π (1 + q^{-1/2} ẑ^{E - φ(m)})` over the
//! blow-ups on that ray. Completion adds outgoing walls; fan-ray walls stay
//! on their Σ-rays and interior walls pull back cone-by-cone through the
//! piecewise-linear identification with the surface.

use serde::{Deserialize, Serialize};

use crate::affine::{is_primitive, CurveClass, Fan, TropicalSurface};
use crate::brokenlines::ray_generators;
use crate::error::{QError, QResult};
use crate::qcoeff::QScalar;
use crate::qtorus::{dress, QTorusElement};
use crate::scattering::{angle_cmp, complete, ScatteringDiagram, Wall};

/// Toric-model seed data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Seed {
    /// Directions carrying non-toric blow-ups (repeats allowed: several
    /// blow-ups on one boundary divisor).
    pub seed_vectors: Vec<(i64, i64)>,
    /// Blow-up class labels, one per seed vector, in order.
    #[serde(default)]
    pub blowups: Vec<BlowupSpec>,
    /// Extra fan rays carrying no blow-ups, to complete the fan.
    #[serde(default)]
    pub extra_rays: Vec<(i64, i64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowupSpec {
    pub dir: (i64, i64),
    pub class: String,
}

impl Seed {
    /// Pair each seed vector with its blow-up label; default labels
    /// `E1, E2, ...` follow the seed-vector order.
    pub fn labelled_blowups(&self) -> QResult<Vec<((i64, i64), String)>> {
        if self.blowups.is_empty() {
            return Ok(self
                .seed_vectors
                .iter()
                .enumerate()
                .map(|(i, v)| (*v, format!("E{}", i + 1)))
                .collect());
        }
        if self.blowups.len() != self.seed_vectors.len() {
            return Err(QError::SeedMismatch(
                "blowups and seed_vectors must have equal length".into(),
            ));
        }
        Ok(self
            .blowups
            .iter()
            .map(|b| (b.dir, b.class.clone()))
            .collect())
    }

    /// The complete fan: distinct seed directions plus the extra rays, in
    /// counterclockwise order starting from the first seed vector.
    pub fn fan(&self) -> QResult<Fan> {
        let mut rays: Vec<(i64, i64)> = Vec::new();
        for v in self.seed_vectors.iter().chain(&self.extra_rays) {
            if !is_primitive(*v) {
                return Err(QError::NonPrimitiveVector(v.0, v.1));
            }
            if !rays.contains(v) {
                rays.push(*v);
            }
        }
        if rays.is_empty() {
            return Err(QError::SeedMismatch("empty seed".into()));
        }
        let first = rays[0];
        rays.sort_by(|a, b| angle_cmp(*a, *b));
        let start = rays.iter().position(|r| *r == first).unwrap();
        rays.rotate_left(start);
        Ok(Fan { rays })
    }

    /// Class labels of the plane model, in blow-up order with duplicates
    /// removed.
    pub fn class_labels(&self) -> QResult<Vec<String>> {
        let mut labels = Vec::new();
        for (_, l) in self.labelled_blowups()? {
            if labels.contains(&l) {
                return Err(QError::SeedMismatch(format!("duplicate blow-up class {l}")));
            }
            labels.push(l);
        }
        Ok(labels)
    }
}

/// The seed diagram on the plane: one incoming line per blown-up direction,
/// `f = Π_j (1 + q^{-1/2} ẑ^{E_j - φ(m)})` over the blow-ups `j` on that
/// direction.
pub fn build_seed_diagram(seed: &Seed, order: usize) -> QResult<ScatteringDiagram> {
    let labels = seed.class_labels()?;
    let rank = labels.len();
    let mut diagram = ScatteringDiagram::new_plane(labels.clone(), order);
    let blowups = seed.labelled_blowups()?;
    let mut dirs: Vec<(i64, i64)> = Vec::new();
    for (v, _) in &blowups {
        if !is_primitive(*v) {
            return Err(QError::NonPrimitiveVector(v.0, v.1));
        }
        if !dirs.contains(v) {
            dirs.push(*v);
        }
    }
    for dir in dirs {
        let mut f = QTorusElement::one(0, order, rank);
        for (v, label) in &blowups {
            if *v != dir {
                continue;
            }
            let idx = labels.iter().position(|l| l == label).unwrap();
            let factor = QTorusElement::one(0, order, rank).add(&QTorusElement::monomial(
                0,
                order,
                (-dir.0, -dir.1),
                CurveClass::unit(rank, idx),
                QScalar::s_pow(-1),
            ))?;
            f = f.mul(&factor)?;
        }
        diagram.push_wall(Wall { dir, chart: 0, incoming: true, f });
    }
    Ok(diagram)
}

/// Check the surface against the seed: same ray count in matching cyclic
/// order, self-intersections `d_j = d̄_j - (number of blow-ups on ray j)`,
/// kinks of positive degree, and the blow-up labels present among the
/// surface classes.
fn check_compatible(seed: &Seed, surface: &TropicalSurface) -> QResult<(Fan, Vec<Vec<usize>>)> {
    let fan = seed.fan()?;
    if fan.ray_count() != surface.ray_count() {
        return Err(QError::SeedMismatch(format!(
            "fan has {} rays, surface has {}",
            fan.ray_count(),
            surface.ray_count()
        )));
    }
    let dbar = fan.selfints()?;
    let blowups = seed.labelled_blowups()?;
    let mut per_ray: Vec<Vec<usize>> = vec![Vec::new(); fan.ray_count()];
    for (v, label) in &blowups {
        let j = fan
            .rays
            .iter()
            .position(|r| r == v)
            .ok_or_else(|| QError::SeedMismatch(format!("blow-up off the fan: {:?}", v)))?;
        let idx = surface
            .label_index(label)
            .ok_or_else(|| QError::SeedMismatch(format!("surface lacks class {label}")))?;
        per_ray[j].push(idx);
    }
    for j in 0..fan.ray_count() {
        let expect = dbar[j] - per_ray[j].len() as i64;
        if surface.selfint(j) != expect {
            return Err(QError::SeedMismatch(format!(
                "ray {j}: surface self-intersection {} but toric model gives {}",
                surface.selfint(j),
                expect
            )));
        }
    }
    if !surface.all_kinks_positive() {
        return Err(QError::SeedMismatch("surface kinks must have positive degree".into()));
    }
    Ok((fan, per_ray))
}

/// The canonical diagram on the surface: per-ray walls
/// `Π (1 + q^{-1/2} ẑ^{E_j - φ(v_j)})` from the blow-ups, plus the interior
/// walls of the plane completion pulled back cone-by-cone. Every wall is
/// outgoing.
pub fn canonical_diagram(
    seed: &Seed,
    surface: &TropicalSurface,
    order: usize,
) -> QResult<ScatteringDiagram> {
    let (fan, per_ray) = check_compatible(seed, surface)?;
    let rank = surface.class_rank();
    let mut out = ScatteringDiagram::new_surface(surface.clone(), order);

    // Σ-ray walls, directly from the blow-up lists.
    for (j, classes) in per_ray.iter().enumerate() {
        if classes.is_empty() {
            continue;
        }
        let mut f = QTorusElement::one(j, order, rank);
        for idx in classes {
            let factor = QTorusElement::one(j, order, rank).add(&QTorusElement::monomial(
                j,
                order,
                (-1, 0),
                CurveClass::unit(rank, *idx),
                QScalar::s_pow(-1),
            ))?;
            f = f.mul(&factor)?;
        }
        out.push_wall(Wall { dir: (1, 0), chart: j, incoming: false, f });
    }

    // Interior walls from the plane completion. The plane model tracks only
    // the blow-up classes; on the surface, a scattered wall with blow-up
    // multiplicities p sits on the ray whose tangency data matches the
    // honest curve class `β = Σ c_k π*[D̄_k] - Σ p_e [E_e]`. Since the
    // blow-ups kill the tangency on the seed side, that ray is the
    // pull-back of the direction *opposite* the plane support, and the
    // pushforward multiplicities `c` solve the toric intersection system.
    let plane_labels = seed.class_labels()?;
    let blow_ray: Vec<usize> = {
        let blowups = seed.labelled_blowups()?;
        plane_labels
            .iter()
            .map(|l| {
                let (v, _) = blowups.iter().find(|(_, bl)| bl == l).unwrap();
                fan.rays.iter().position(|r| r == v).unwrap()
            })
            .collect()
    };
    let completed = complete(&build_seed_diagram(seed, order)?)?;
    for w in &completed.walls {
        if w.incoming {
            continue; // seed lines are already represented on the Σ-rays
        }
        let wneg = (-w.dir.0, -w.dir.1);
        // Tangency profile of the support on the surface side.
        let n = fan.ray_count();
        let mut support: Option<(usize, (i64, i64), Vec<i64>)> = None;
        if let Some(k) = fan.rays.iter().position(|r| *r == wneg) {
            let mut prof = vec![0i64; n];
            prof[k] = 1;
            support = Some((k, (1, 0), prof));
        } else {
            for j in 0..n {
                let m0 = fan.rays[j];
                let m1 = fan.rays[(j + 1) % n];
                let det = m0.0 * m1.1 - m0.1 * m1.0;
                let a_num = wneg.0 * m1.1 - wneg.1 * m1.0;
                let b_num = m0.0 * wneg.1 - m0.1 * wneg.0;
                if det == 0 || a_num % det != 0 || b_num % det != 0 {
                    continue;
                }
                let (a, b) = (a_num / det, b_num / det);
                if a >= 1 && b >= 1 {
                    let mut prof = vec![0i64; n];
                    prof[j] = a;
                    prof[(j + 1) % n] = b;
                    support = Some((j, (a, b), prof));
                    break;
                }
            }
        }
        let Some((chart, dir, profile)) = support else {
            return Err(QError::Internal(format!(
                "completed wall at {:?} has no surface support",
                w.dir
            )));
        };
        let mut f = QTorusElement::one(chart, order, rank);
        for ((t, c), v) in w.f.terms() {
            if *t == (0, 0) && c.is_zero() {
                continue;
            }
            let l = crate::affine::gcd_i64(t.0, t.1);
            // Intersection targets: l * (tangency profile) plus the blow-up
            // corrections on each ray.
            let mut targets = vec![0i64; n];
            for (k, pk) in profile.iter().enumerate() {
                targets[k] = l * pk;
            }
            for (e, mult) in c.0.iter().enumerate() {
                targets[blow_ray[e]] += mult;
            }
            let coeffs = solve_toric_curve(&fan, &targets).ok_or_else(|| {
                QError::SeedMismatch(format!(
                    "no effective pushforward class for the wall at {:?}",
                    w.dir
                ))
            })?;
            // β = Σ c_k π*[D̄_k] - Σ p_e [E_e] in the surface labels.
            let mut class = CurveClass::zero(rank);
            for (k, ck) in coeffs.iter().enumerate() {
                if *ck == 0 {
                    continue;
                }
                class = class.add(&surface.kink(k).scaled(*ck));
                for idx in surface.exceptional_classes(k) {
                    class.0[*idx] += ck;
                }
            }
            for (e, mult) in c.0.iter().enumerate() {
                let label = &plane_labels[e];
                let idx = surface.label_index(label).expect("checked above");
                class.0[idx] -= mult;
            }
            if !class.is_effective() {
                // Allow relation-equivalent effective representatives.
                let reduced = surface.reduce_class(&class);
                if !reduced.is_effective() {
                    return Err(QError::SeedMismatch(format!(
                        "wall class {:?} is not effective in the surface labels",
                        class.0
                    )));
                }
                class = reduced;
            }
            f.add_term((-l * dir.0, -l * dir.1), class, v.clone());
        }
        if dir == (1, 0) {
            merge_sigma_wall(&mut out, chart, f)?;
        } else {
            out.push_wall(Wall { dir, chart, incoming: false, f });
        }
    }
    out.validate()?;
    Ok(out)
}

/// Solve for an effective curve class `β̄ = Σ c_k [D̄_k]` on the toric model
/// with prescribed intersection numbers `β̄ . D̄_j = targets[j]`, returning
/// the lexicographically smallest nonnegative integer solution.
fn solve_toric_curve(fan: &Fan, targets: &[i64]) -> Option<Vec<i64>> {
    let n = fan.ray_count();
    let dbar = fan.selfints().ok()?;
    let m = |i: usize, k: usize| -> i64 {
        if i == k {
            dbar[i]
        } else if (i + 1) % n == k || (k + 1) % n == i {
            1
        } else {
            0
        }
    };
    // Kernel of c -> c·M: the two divisor-relation vectors.
    let k1: Vec<i64> = fan.rays.iter().map(|r| r.0).collect();
    let k2: Vec<i64> = fan.rays.iter().map(|r| r.1).collect();
    // Particular rational solution by Gaussian elimination.
    use num_rational::BigRational;
    use num_traits::{Signed, Zero};
    let mut aug: Vec<Vec<BigRational>> = (0..n)
        .map(|k| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|i| BigRational::from_integer(m(i, k).into()))
                .collect();
            row.push(BigRational::from_integer(targets[k].into()));
            row
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut r = 0usize;
    for col in 0..n {
        if let Some(p) = (r..n).find(|i| !aug[*i][col].is_zero()) {
            aug.swap(r, p);
            let lead = aug[r][col].clone();
            for x in &mut aug[r] {
                *x /= lead.clone();
            }
            for i in 0..n {
                if i != r && !aug[i][col].is_zero() {
                    let f = aug[i][col].clone();
                    for cidx in 0..=n {
                        let t = &f * &aug[r][cidx];
                        aug[i][cidx] -= t;
                    }
                }
            }
            pivot_cols.push(col);
            r += 1;
        }
    }
    // Inconsistent system?
    for i in r..n {
        if !aug[i][n].is_zero() {
            return None;
        }
    }
    let mut part = vec![BigRational::zero(); n];
    for (row, col) in pivot_cols.iter().enumerate() {
        part[*col] = aug[row][n].clone();
    }
    // Scan kernel translates for nonnegative integer solutions.
    let bound: i64 = targets.iter().map(|t| t.abs()).sum::<i64>() + 8;
    let mut best: Option<Vec<i64>> = None;
    for s in -bound..=bound {
        for t in -bound..=bound {
            let mut c = Vec::with_capacity(n);
            let mut ok = true;
            for i in 0..n {
                let v = &part[i]
                    + BigRational::from_integer((s * k1[i]).into())
                    + BigRational::from_integer((t * k2[i]).into());
                if !v.is_integer() || v.is_negative() {
                    ok = false;
                    break;
                }
                use num_traits::ToPrimitive;
                c.push(v.to_integer().to_i64()?);
            }
            if ok && best.as_ref().map_or(true, |b| &c < b) {
                best = Some(c);
            }
        }
    }
    best
}

fn merge_sigma_wall(out: &mut ScatteringDiagram, ray: usize, f: QTorusElement) -> QResult<()> {
    for w in &mut out.walls {
        if w.is_sigma_ray() && w.chart == ray {
            w.f = w.f.mul(&f)?;
            return Ok(());
        }
    }
    out.push_wall(Wall { dir: (1, 0), chart: ray, incoming: false, f });
    Ok(())
}

// ---------------------------------------------------------------------------
// Generators-and-relations presentation at a ray
// ---------------------------------------------------------------------------

/// The four defining relations of the algebra attached to a Σ-ray, with the
/// wall data of the diagram folded in, plus the verification that the two
/// chart embeddings of the generators satisfy them at the truncation order.
#[derive(Debug)]
pub struct RayPresentation {
    pub ray: usize,
    pub selfint: i64,
    pub kink: CurveClass,
    pub f_out: QTorusElement,
    /// Human-readable forms of the four relations.
    pub relations: Vec<String>,
    /// Whether the generator images satisfy every relation on both sides.
    pub verified: bool,
}

/// Emit the presentation of the ray algebra `X X₊ = q X₊ X`,
/// `X X₋ = q^{-1} X₋ X`,
/// `X₊ X₋ = q^{d/2} ẑ^κ f_out(q^{-1}X) X^{-d}`,
/// `X₋ X₊ = q^{-d/2} ẑ^κ f_out(X) X^{-d}`, and verify the chart images.
pub fn rho_presentation(diagram: &ScatteringDiagram, ray: usize) -> QResult<RayPresentation> {
    let surface = diagram.base.surface()?;
    let d = surface.selfint(ray);
    let kink = surface.kink(ray).clone();
    let order = diagram.order;
    let rank = surface.class_rank();
    let gens = ray_generators(diagram, ray)?;
    let mut f_out = QTorusElement::one(ray, order, rank);
    for w in diagram.sigma_ray_walls(ray) {
        f_out = f_out.mul(&w.f.retag(ray))?;
    }

    let q = QScalar::q_pow(1);
    let verify_side = |x: &QTorusElement,
                       xp: &QTorusElement,
                       xm: &QTorusElement,
                       chart: usize|
     -> QResult<bool> {
        let x_inv_pow = |k: i64| -> QResult<QTorusElement> {
            // x is a monomial; integer powers are exact.
            let mut acc = QTorusElement::one(chart, order, rank);
            let base = if k >= 0 {
                x.clone()
            } else {
                let ((t, c), v) = x.terms().next().unwrap();
                QTorusElement::monomial(
                    chart,
                    order,
                    (-t.0, -t.1),
                    CurveClass(c.0.iter().map(|a| -a).collect()),
                    v.inv()?,
                )
            };
            for _ in 0..k.unsigned_abs() {
                acc = acc.mul(&base)?;
            }
            Ok(acc)
        };
        // Wall functions in this chart's presentation (ray-tangent terms).
        let mut f_here = QTorusElement::zero(chart, order, rank);
        for ((t, c), v) in f_out.terms() {
            let tt = if chart == ray { *t } else { (t.1, t.0) };
            f_here.add_term(tt, c.clone(), v.clone());
        }
        let ray_dir = if chart == ray { (1, 0) } else { (0, 1) };
        let kappa = QTorusElement::monomial(
            chart,
            order,
            (0, 0),
            kink.clone(),
            QScalar::one(),
        );
        let r1 = x.mul(xp)? == xp.mul(x)?.scale(&q);
        let r2 = x.mul(xm)? == xm.mul(x)?.scale(&q.inv()?);
        let rhs3 = kappa
            .mul(&dress(&f_here, ray_dir, -1))?
            .mul(&x_inv_pow(-d)?)?
            .scale(&QScalar::s_pow(d));
        let r3 = xp.mul(xm)? == rhs3;
        let rhs4 = kappa
            .mul(&f_here)?
            .mul(&x_inv_pow(-d)?)?
            .scale(&QScalar::s_pow(-d));
        let r4 = xm.mul(xp)? == rhs4;
        Ok(r1 && r2 && r3 && r4)
    };

    let minus_chart = (ray + surface.ray_count() - 1) % surface.ray_count();
    let ok_minus = verify_side(
        &gens.x_minus_side,
        &gens.xplus_minus_side,
        &gens.xminus_minus_side,
        minus_chart,
    )?;
    let ok_plus = verify_side(
        &gens.x_plus_side,
        &gens.xplus_plus_side,
        &gens.xminus_plus_side,
        ray,
    )?;

    let kink_text: String = surface
        .labels()
        .iter()
        .zip(&kink.0)
        .filter(|(_, m)| **m != 0)
        .map(|(l, m)| if *m == 1 { l.clone() } else { format!("{m}*{l}") })
        .collect::<Vec<_>>()
        .join("+");
    let relations = vec![
        "X*X+ = q*X+*X".to_string(),
        "X*X- = q^(-1)*X-*X".to_string(),
        format!("X+*X- = q^({d}/2)*z^[{kink_text}]*f_out(q^(-1)X)*X^({})", -d),
        format!("X-*X+ = q^({}/2)*z^[{kink_text}]*f_out(X)*X^({})", -d, -d),
    ];
    Ok(RayPresentation {
        ray,
        selfint: d,
        kink,
        f_out,
        relations,
        verified: ok_minus && ok_plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::check_loop_identity;

    fn pentagon_seed() -> Seed {
        Seed {
            seed_vectors: vec![(1, 0), (0, 1)],
            blowups: vec![],
            extra_rays: vec![(-1, 0), (0, -1)],
        }
    }

    /// The r = 4 surface induced by the two-seed toric model: both blown-up
    /// rays drop from self-intersection 0 to -1. The class labels form a
    /// basis of anticanonical-degree-one classes, so the kinks of the two
    /// untouched rays are the composite vectors [D1]+[E1] and [D2]+[E2].
    fn pentagon_surface() -> TropicalSurface {
        let labels: Vec<String> = ["D1", "D2", "E1", "E2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let kinks = vec![
            CurveClass(vec![1, 0, 0, 0]),
            CurveClass(vec![0, 1, 0, 0]),
            CurveClass(vec![1, 0, 1, 0]),
            CurveClass(vec![0, 1, 0, 1]),
        ];
        let mut s = TropicalSurface::new(vec![-1, -1, 0, 0], kinks, labels).unwrap();
        s.set_exceptionals(vec![vec![2], vec![3], vec![], vec![]]);
        s
    }

    #[test]
    fn seed_diagram_two_walls() {
        let d = build_seed_diagram(&pentagon_seed(), 5).unwrap();
        assert_eq!(d.walls.len(), 2);
        for w in &d.walls {
            assert!(w.incoming);
            assert_eq!(w.f.len(), 2);
        }
    }

    #[test]
    fn seed_with_repeated_direction_merges_factors() {
        let seed = Seed {
            seed_vectors: vec![(1, 0), (1, 0)],
            blowups: vec![],
            extra_rays: vec![(0, 1), (-1, -1)],
        };
        let d = build_seed_diagram(&seed, 5).unwrap();
        assert_eq!(d.walls.len(), 1);
        // Two binomial factors expand to four terms (with the cross term).
        assert_eq!(d.walls[0].f.len(), 4);
    }

    #[test]
    fn empty_seed_gives_empty_diagram() {
        let seed = Seed {
            seed_vectors: vec![],
            blowups: vec![],
            extra_rays: vec![(1, 0), (0, 1), (-1, -1)],
        };
        let d = build_seed_diagram(&seed, 4).unwrap();
        assert!(d.walls.is_empty());
        assert!(check_loop_identity(&d).unwrap().passed());
    }

    #[test]
    fn pentagon_canonical_diagram() {
        let seed = pentagon_seed();
        let surface = pentagon_surface();
        let d = canonical_diagram(&seed, &surface, 5).unwrap();
        // Two Σ-ray walls plus one interior wall from the completion.
        assert_eq!(d.walls.len(), 3);
        assert!(d.walls.iter().all(|w| !w.incoming));
        let interior: Vec<&Wall> = d.walls.iter().filter(|w| !w.is_sigma_ray()).collect();
        assert_eq!(interior.len(), 1);
        let w = interior[0];
        // The blow-ups kill the tangency on the seed side, so the honest
        // wall lives in the opposite cone, with the pushforward class
        // [D1]+[D2] of the curve through both blown-up points.
        assert_eq!(w.chart, 2);
        assert_eq!(w.dir, (1, 1));
        let mut expect_class = CurveClass::zero(4);
        expect_class.0[0] = 1;
        expect_class.0[1] = 1;
        let expect = QTorusElement::one(2, 5, 4)
            .add(&QTorusElement::monomial(2, 5, (-1, -1), expect_class, QScalar::s_pow(-1)))
            .unwrap();
        assert_eq!(w.f, expect);
    }

    #[test]
    fn toric_pair_has_empty_canonical_diagram() {
        let seed = Seed {
            seed_vectors: vec![],
            blowups: vec![],
            extra_rays: vec![(1, 0), (0, 1), (-1, -1)],
        };
        let labels: Vec<String> = vec!["D1".into(), "D2".into(), "D3".into()];
        let kinks = (0..3).map(|j| CurveClass::unit(3, j)).collect();
        let surface = TropicalSurface::new(vec![1, 1, 1], kinks, labels).unwrap();
        let d = canonical_diagram(&seed, &surface, 4).unwrap();
        assert!(d.walls.is_empty());
    }

    #[test]
    fn seed_surface_mismatch_is_rejected() {
        let seed = pentagon_seed();
        let labels: Vec<String> = vec!["D1".into(), "E1".into(), "E2".into()];
        let kinks = (0..4).map(|_| CurveClass::unit(3, 0)).collect();
        // Wrong self-intersections for this model.
        let surface = TropicalSurface::new(vec![0, 0, 0, 0], kinks, labels).unwrap();
        assert!(canonical_diagram(&seed, &surface, 4).is_err());
    }

    #[test]
    fn pentagon_canonical_is_consistent_on_surface() {
        let seed = pentagon_seed();
        let surface = pentagon_surface();
        let d = canonical_diagram(&seed, &surface, 3).unwrap();
        let charges: Vec<crate::affine::ChartVector> =
            (0..4).map(|j| crate::affine::ChartVector::new(j, 1, 0)).collect();
        assert!(crate::brokenlines::consistency_check_on_b(&d, &charges)
            .unwrap()
            .passed());
    }

    #[test]
    fn rho_presentation_verifies_on_dp5_ray() {
        let labels: Vec<String> = (1..=5)
            .map(|i| format!("D{i}"))
            .chain((1..=5).map(|i| format!("E{i}")))
            .collect();
        let kinks = (0..5).map(|j| CurveClass::unit(10, j)).collect();
        let s = TropicalSurface::new(vec![-1; 5], kinks, labels).unwrap();
        let mut d = ScatteringDiagram::new_surface(s, 3);
        for j in 0..5 {
            let f = QTorusElement::one(j, 3, 10)
                .add(&QTorusElement::monomial(
                    j,
                    3,
                    (-1, 0),
                    CurveClass::unit(10, 5 + j),
                    QScalar::s_pow(-1),
                ))
                .unwrap();
            d.push_wall(Wall { dir: (1, 0), chart: j, incoming: false, f });
        }
        for ray in 0..5 {
            let p = rho_presentation(&d, ray).unwrap();
            assert!(p.verified, "ray {ray}");
            assert_eq!(p.relations.len(), 4);
        }
    }

    #[test]
    fn rho_presentation_special_fiber_degenerates() {
        // At truncation order 1 the product relations collapse to
        // X+X- = X-X+ = 0.
        let labels: Vec<String> = vec!["D1".into(), "D2".into(), "D3".into()];
        let kinks = (0..3).map(|j| CurveClass::unit(3, j)).collect();
        let s = TropicalSurface::new(vec![1, 1, 1], kinks, labels).unwrap();
        let d = ScatteringDiagram::new_surface(s, 1);
        let p = rho_presentation(&d, 0).unwrap();
        assert!(p.verified);
        let gens = ray_generators(&d, 0).unwrap();
        assert!(gens
            .xplus_plus_side
            .mul(&gens.xminus_plus_side)
            .unwrap()
            .is_zero());
        assert!(gens
            .xminus_plus_side
            .mul(&gens.xplus_plus_side)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn toric_ray_relation_without_walls() {
        // f = 1: X+X- = q^{d/2} ẑ^κ X^{-d} directly.
        let labels: Vec<String> = vec!["D1".into(), "D2".into(), "D3".into()];
        let kinks = (0..3).map(|j| CurveClass::unit(3, j)).collect();
        let s = TropicalSurface::new(vec![1, 1, 1], kinks, labels).unwrap();
        let d = ScatteringDiagram::new_surface(s, 3);
        let p = rho_presentation(&d, 1).unwrap();
        assert!(p.verified);
        assert!(p.f_out.len() == 1);
    }
}
