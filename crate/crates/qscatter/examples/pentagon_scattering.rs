//! The quantum dilogarithm pentagon: completing the two-line seed diagram
//! adds exactly one wall, and the full loop then acts as the identity.

use qscatter::canonical::{build_seed_diagram, Seed};
use qscatter::scattering::{check_loop_identity, complete};

fn main() {
    let seed = Seed {
        seed_vectors: vec![(1, 0), (0, 1)],
        blowups: vec![],
        extra_rays: vec![(-1, 0), (0, -1)],
    };
    let order = 5;
    let seeded = build_seed_diagram(&seed, order).unwrap();
    println!("seed diagram: {} incoming lines", seeded.walls.len());
    println!("loop identity before completion: {:?}", check_loop_identity(&seeded).unwrap());

    let completed = complete(&seeded).unwrap();
    for w in &completed.walls {
        println!(
            "{} at direction {:?}: f = {:?}",
            if w.incoming { "line" } else { "added ray" },
            w.dir,
            w.f
        );
    }
    println!(
        "loop identity after completion: {}",
        check_loop_identity(&completed).unwrap().passed()
    );
}
