//! The quantized coordinate rings of the one- and two-ray special fibers,
//! presented by generators and relations.

use qscatter::fixtures::{v1_diagram, v1_generators, v2_diagram, v2_generators};
use qscatter::mirror::{derive_relations, ThetaAlgebra};

fn main() {
    for (name, d, gens) in [
        ("one-ray cubic cone", v1_diagram(), v1_generators()),
        ("two-ray quadric cone", v2_diagram(), v2_generators()),
    ] {
        println!("{name}:");
        let names: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let mut alg = ThetaAlgebra::lazy(&d, gens.clone()).unwrap();
        for r in derive_relations(&mut alg, &gens, &names).unwrap() {
            println!("  {}", r.text);
        }
    }
}
