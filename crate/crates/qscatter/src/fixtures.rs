//! Bundled example data: the two-seed scattering model, the degree-five
//! del Pezzo surface, the one- and two-ray special fibers, the toric plane,
//! and the blown-up quadric model with its interior wall.

use crate::affine::{ChartVector, CurveClass, TropicalSurface};
use crate::canonical::Seed;
use crate::error::{QError, QResult};
use crate::qcoeff::QScalar;
use crate::qtorus::QTorusElement;
use crate::scattering::{ScatteringDiagram, Wall};

/// Names accepted by `fixture:<name>` CLI inputs.
pub const FIXTURE_NAMES: &[&str] =
    &["pentagon", "dp5", "v1", "v2", "toric-p2", "pentagon-canonical"];

/// The two-line seed on the plane whose completion is the quantum
/// dilogarithm pentagon.
pub fn pentagon_seed() -> Seed {
    Seed {
        seed_vectors: vec![(1, 0), (0, 1)],
        blowups: vec![],
        extra_rays: vec![(-1, 0), (0, -1)],
    }
}

/// The five-ray surface of the degree-five del Pezzo pair: every boundary
/// component a (-1)-curve with one transversal (-1)-curve `E_j` attached,
/// with the honest rank-five relation lattice and the full intersection
/// pairing.
pub fn dp5_surface() -> TropicalSurface {
    let labels: Vec<String> = (1..=5)
        .map(|i| format!("D{i}"))
        .chain((1..=5).map(|i| format!("E{i}")))
        .collect();
    let kinks = (0..5).map(|j| CurveClass::unit(10, j)).collect();
    let mut s = TropicalSurface::new(vec![-1; 5], kinks, labels).unwrap();
    s.set_exceptionals((0..5).map(|j| vec![5 + j]).collect());
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
    s
}

/// The canonical diagram of the degree-five del Pezzo pair: five outgoing
/// walls `1 + q^{-1/2} ẑ^{E_j - φ(v_j)}`, one per Σ-ray.
pub fn dp5_diagram(order: usize) -> ScatteringDiagram {
    let s = dp5_surface();
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
        d.push_wall(Wall { dir: (1, 0), chart: j, incoming: false, f });
    }
    d
}

/// Generator charges of the five theta functions on dP5.
pub fn dp5_generators() -> Vec<ChartVector> {
    (0..5).map(|j| ChartVector::new(j, 1, 0)).collect()
}

/// The one-ray surface at the special fiber (cubic cone picture): the
/// self-intersection is that of a nodal anticanonical cubic in the plane.
pub fn v1_diagram() -> ScatteringDiagram {
    let s = TropicalSurface::new(vec![9], vec![CurveClass::unit(1, 0)], vec!["D1".into()])
        .unwrap();
    ScatteringDiagram::new_surface(s, 1)
}

/// V1 generators: x = θ_{(2,1)}, y = θ_v, z = θ_{(1,1)}.
pub fn v1_generators() -> Vec<ChartVector> {
    vec![
        ChartVector::new(0, 2, 1),
        ChartVector::new(0, 1, 0),
        ChartVector::new(0, 1, 1),
    ]
}

/// The two-ray surface at the special fiber (upper half-plane picture).
pub fn v2_diagram() -> ScatteringDiagram {
    let s = TropicalSurface::new(
        vec![0, 0],
        vec![CurveClass::unit(2, 0), CurveClass::unit(2, 1)],
        vec!["D1".into(), "D2".into()],
    )
    .unwrap();
    ScatteringDiagram::new_surface(s, 1)
}

/// V2 generators: x = θ_{v1}, y = θ_{v2}, z = θ_{w+v2}.
pub fn v2_generators() -> Vec<ChartVector> {
    vec![
        ChartVector::new(0, 1, 0),
        ChartVector::new(1, 1, 0),
        ChartVector::new(0, 1, 1),
    ]
}

/// The plane with the fan of the projective plane: trivial kinks, trivial
/// diagram; products recover the full quantum torus.
pub fn toric_p2_diagram(order: usize) -> ScatteringDiagram {
    let s = TropicalSurface::new(vec![1, 1, 1], vec![CurveClass::zero(0); 3], vec![]).unwrap();
    ScatteringDiagram::new_surface(s, order)
}

/// The r = 4 surface of the two-blow-up quadric model, with the class basis
/// (D1, D2, E1, E2) of anticanonical-degree-one classes.
pub fn pentagon_canonical_surface() -> TropicalSurface {
    let labels: Vec<String> =
        ["D1", "D2", "E1", "E2"].iter().map(|s| s.to_string()).collect();
    let kinks = vec![
        CurveClass(vec![1, 0, 0, 0]),
        CurveClass(vec![0, 1, 0, 0]),
        CurveClass(vec![1, 0, 1, 0]),
        CurveClass(vec![0, 1, 0, 1]),
    ];
    let mut s = TropicalSurface::new(vec![-1, -1, 0, 0], kinks, labels).unwrap();
    s.set_exceptionals(vec![vec![2], vec![3], vec![], vec![]]);
    s.set_pairing(vec![
        vec![-1, 1, 0, 1],
        vec![1, -1, 1, 0],
        vec![1, 0, 0, 0],
        vec![0, 1, 0, 0],
    ]);
    s
}

/// The canonical diagram of the two-blow-up quadric model.
pub fn pentagon_canonical_diagram(order: usize) -> QResult<ScatteringDiagram> {
    crate::canonical::canonical_diagram(&pentagon_seed(), &pentagon_canonical_surface(), order)
}

/// Look a fixture diagram up by name.
pub fn diagram_by_name(name: &str, order: usize) -> QResult<ScatteringDiagram> {
    match name {
        "dp5" => Ok(dp5_diagram(order)),
        "v1" => Ok(v1_diagram()),
        "v2" => Ok(v2_diagram()),
        "toric-p2" => Ok(toric_p2_diagram(order)),
        "pentagon-canonical" => pentagon_canonical_diagram(order),
        "pentagon" => {
            crate::scattering::complete(&crate::canonical::build_seed_diagram(
                &pentagon_seed(),
                order,
            )?)
        }
        other => Err(QError::Parse(format!(
            "unknown fixture {other}; available: {}",
            FIXTURE_NAMES.join(", ")
        ))),
    }
}

/// Default generator set and display names for a fixture.
pub fn generators_by_name(name: &str) -> QResult<(Vec<ChartVector>, Vec<String>)> {
    match name {
        "dp5" | "pentagon-canonical" => {
            let d = diagram_by_name(name, 2)?;
            let r = d.base.surface()?.ray_count();
            Ok((
                (0..r).map(|j| ChartVector::new(j, 1, 0)).collect(),
                (1..=r).map(|i| format!("t{i}")).collect(),
            ))
        }
        "v1" => Ok((v1_generators(), vec!["x".into(), "y".into(), "z".into()])),
        "v2" => Ok((v2_generators(), vec!["x".into(), "y".into(), "z".into()])),
        other => Err(QError::Parse(format!("fixture {other} has no generator set"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        for name in FIXTURE_NAMES {
            let d = diagram_by_name(name, 3).unwrap();
            d.validate().unwrap();
        }
    }

    #[test]
    fn dp5_relation_lattice_identities() {
        let s = dp5_surface();
        // [D1] + [D5] = [D3] + [E3] (both are the conic class minus one
        // exceptional in a blow-up presentation).
        let d1d5 = CurveClass(vec![1, 0, 0, 0, 1, 0, 0, 0, 0, 0]);
        let d3e3 = CurveClass(vec![0, 0, 1, 0, 0, 0, 0, 1, 0, 0]);
        assert!(s.classes_equal(&d1d5, &d3e3));
        // Degrees are preserved by the relation lattice.
        assert_eq!(s.reduce_class(&d1d5).degree(), 2);
    }
}
