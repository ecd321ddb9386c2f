//! From toric-model seed data to the canonical diagram on the surface:
//! the two-blow-up quadric model gets its two boundary walls plus one
//! interior wall, and the result is consistent on the surface.

use qscatter::brokenlines::consistency_check_on_b;
use qscatter::canonical::rho_presentation;
use qscatter::fixtures::{pentagon_canonical_diagram, pentagon_canonical_surface};

fn main() {
    let order = 3;
    let d = pentagon_canonical_diagram(order).unwrap();
    let surface = pentagon_canonical_surface();
    println!("canonical diagram on the {}-ray surface:", surface.ray_count());
    for w in &d.walls {
        println!("  chart {} dir {:?}: f = {:?}", w.chart, w.dir, w.f);
    }
    let charges: Vec<_> =
        (0..4).map(|j| qscatter::affine::ChartVector::new(j, 1, 0)).collect();
    println!(
        "consistency on the surface: {}",
        consistency_check_on_b(&d, &charges).unwrap().passed()
    );

    // The generators-and-relations presentation of a ray algebra.
    let p = rho_presentation(&d, 0).unwrap();
    println!("ray 0 presentation (verified: {}):", p.verified);
    for r in &p.relations {
        println!("  {r}");
    }
}
