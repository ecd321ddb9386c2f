//! Specializing every curve class of the del Pezzo table to 1 recovers the
//! rank-two cluster exchange pattern: t_{j-1} t_{j+1} = 1 + q^{1/2} t_j.

use qscatter::affine::ChartVector;
use qscatter::fixtures::{dp5_diagram, dp5_generators};
use qscatter::mirror::{scalar_text, ThetaAlgebra};
use qscatter::qcoeff::QScalar;

fn main() {
    let d = dp5_diagram(3);
    let mut alg = ThetaAlgebra::lazy(&d, dp5_generators()).unwrap();
    for j in 0..5usize {
        let prev = ChartVector::new((j + 4) % 5, 1, 0);
        let next = ChartVector::new((j + 1) % 5, 1, 0);
        alg.row(&prev, &next).unwrap();
    }
    let ones = vec![QScalar::one(); 10];
    let table = alg.specialize_classes(&ones).unwrap();
    for ((p1, p2), row) in &table {
        let rhs: Vec<String> = row
            .iter()
            .map(|(p, c)| {
                let coeff = scalar_text(c);
                let name = if p.coords == (0, 0) {
                    "1".to_string()
                } else {
                    format!("t{}", p.chart + 1)
                };
                if coeff == "1" {
                    name
                } else if name == "1" {
                    coeff
                } else {
                    format!("{coeff}*{name}")
                }
            })
            .collect();
        println!("t{}*t{} = {}", p1.chart + 1, p2.chart + 1, rhs.join(" + "));
    }
}
