//! Quantum broken lines on the five-ray surface: enumeration, lifts, and
//! how a lift changes between chambers.

use qscatter::affine::ChartVector;
use qscatter::brokenlines::{enumerate_broken_lines, lift, Endpoint};
use qscatter::fixtures::dp5_diagram;

fn main() {
    let d = dp5_diagram(3);
    let charge = ChartVector::new(1, 1, 0); // the second ray generator

    for (chart, label) in [(1usize, "its own cone"), (0usize, "one cone clockwise")] {
        let q = Endpoint::from_fractions(chart, (8, 7), (12, 11));
        let lines = enumerate_broken_lines(&d, &charge, &q).unwrap();
        println!("charge v2, endpoint in {label}: {} line(s)", lines.len());
        for l in &lines {
            println!(
                "  final tangent {:?}, class {:?}, coefficient {}, bends {}",
                l.final_tangent, l.class.0, l.coeff, l.bends
            );
        }
        println!("  lift = {:?}", lift(&d, &charge, &q).unwrap());
    }
}
