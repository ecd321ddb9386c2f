//! The theta algebra of the degree-five del Pezzo surface: the cyclic
//! exchange relations among the five boundary theta functions.

use qscatter::fixtures::{dp5_diagram, dp5_generators};
use qscatter::mirror::{derive_relations, ThetaAlgebra};

fn main() {
    let d = dp5_diagram(3);
    let gens = dp5_generators();
    let names: Vec<String> = (1..=5).map(|i| format!("t{i}")).collect();
    let mut alg = ThetaAlgebra::lazy(&d, gens.clone()).unwrap();
    let relations = derive_relations(&mut alg, &gens, &names).unwrap();
    for r in &relations {
        println!("{}", r.text);
    }
}
