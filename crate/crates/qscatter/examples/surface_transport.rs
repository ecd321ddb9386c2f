//! Tour of the integral affine surface: charts, parallel transport with
//! kinks, monodromy, torus weights, and the developing map.

use num_bigint::BigInt;
use num_rational::BigRational;
use qscatter::affine::{
    develop_ray_crossings, ChartVector, CurveClass, Developing, TropicalSurface,
};

fn main() {
    // The toric plane: three rays of self-intersection 1, trivial kinks.
    let p2 = TropicalSurface::new(vec![1, 1, 1], vec![CurveClass::zero(0); 3], vec![]).unwrap();
    println!("toric plane monodromy: {:?}", p2.monodromy());

    // The five-ray surface with (-1)-boundary components: the affine
    // structure is singular at the origin.
    let labels: Vec<String> = (1..=5)
        .map(|i| format!("D{i}"))
        .chain((1..=5).map(|i| format!("E{i}")))
        .collect();
    let kinks = (0..5).map(|j| CurveClass::unit(10, j)).collect();
    let dp5 = TropicalSurface::new(vec![-1; 5], kinks, labels).unwrap();
    println!("five-ray surface monodromy: {:?}", dp5.monodromy());

    // Transport a tangent vector across a ray and back.
    let v = ChartVector::new(0, 2, -1);
    let fwd = dp5.transport_tangent(&v, 1, 1).unwrap();
    let back = dp5.transport_tangent(&fwd, 1, -1).unwrap();
    println!("transport {:?} -> {:?} -> {:?}", v.coords, fwd.coords, back.coords);

    // Kinks shift curve classes on transversal crossings.
    let (moved, class) = dp5
        .transport_monomial(&ChartVector::new(0, 1, 0), &CurveClass::zero(10), 1, 1)
        .unwrap();
    println!(
        "monomial tangent (1,0) crosses ray 1: tangent {:?}, class picks up {:?}",
        moved.coords, class.0
    );

    // The torus-weight map on integral points.
    println!("weight of 2*v_2 + 3*v_3: {:?}", dp5.weight(&ChartVector::new(1, 2, 3)));

    // A straight backward walk in the developed picture.
    let mut dev = Developing::new(&dp5, 0);
    let x = (
        BigRational::new(BigInt::from(1), BigInt::from(3)),
        BigRational::new(BigInt::from(2), BigInt::from(1)),
    );
    let crossings =
        develop_ray_crossings(&mut dev, 0, &x, &(BigInt::from(-1), BigInt::from(0)), 10).unwrap();
    let rays: Vec<usize> = crossings.iter().map(|c| c.ray).collect();
    println!("walking left from chart 0 crosses rays {:?}", rays);
}
