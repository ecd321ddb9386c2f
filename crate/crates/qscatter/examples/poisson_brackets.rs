//! The classical limit as a Poisson algebra: brackets computed two ways —
//! extracted from the q-commutators and directly from the classical
//! two-line formula — agree exactly.

use qscatter::brokenlines::{poisson_direct, poisson_from_q_table};
use qscatter::fixtures::{v2_diagram, v2_generators};

fn main() {
    let d = v2_diagram();
    let gens = v2_generators();
    let names = ["x", "y", "z"];
    for i in 0..3 {
        for j in (i + 1)..3 {
            let a = poisson_from_q_table(&d, &gens[i], &gens[j]).unwrap();
            let b = poisson_direct(&d, &gens[i], &gens[j]).unwrap();
            println!(
                "{{{}, {}}}: {} theta term(s); extraction == classical formula: {}",
                names[i],
                names[j],
                a.len(),
                a == b
            );
            for (p, classes) in &a {
                for (class, v) in classes {
                    println!("   {} * z^{:?} theta_({}:{}:{})", v, class.0, p.chart, p.coords.0, p.coords.1);
                }
            }
        }
    }
}
