//! The quantum torus and its wall-crossing automorphisms: products with
//! q-twists, conjugation by a wall function, Hamiltonian conversion, and
//! the integral product factorization of a wall function.

use qscatter::affine::CurveClass;
use qscatter::qcoeff::QScalar;
use qscatter::qtorus::{
    bps_factorize, f_to_hamiltonian, hamiltonian_to_f, wallcross_apply, QTorusElement,
};

fn main() {
    let order = 6;
    // f = 1 + q^{-1/2} ẑ^{E - φ(m)} on the wall direction m = (1, 0).
    let dir = (1, 0);
    let f = QTorusElement::one(0, order, 1)
        .add(&QTorusElement::monomial(
            0,
            order,
            (-1, 0),
            CurveClass::unit(1, 0),
            QScalar::s_pow(-1),
        ))
        .unwrap();
    println!("wall function f = {:?}", f);

    // Crossing acts trivially on monomials parallel to the wall...
    let parallel = QTorusElement::monomial(0, order, (2, 0), CurveClass::zero(1), QScalar::one());
    println!(
        "parallel monomial is fixed: {}",
        wallcross_apply(&f, dir, &parallel, 1).unwrap() == parallel
    );

    // ... and dresses transversal ones by powers of f.
    let transversal =
        QTorusElement::monomial(0, order, (0, 2), CurveClass::zero(1), QScalar::one());
    let image = wallcross_apply(&f, dir, &transversal, 1).unwrap();
    println!("transversal image has {} terms", image.len());
    let back = wallcross_apply(&f, dir, &image, -1).unwrap();
    println!("inverse crossing restores it: {}", back == transversal);

    // Hamiltonian <-> wall function round trip.
    let h = f_to_hamiltonian(&f, dir).unwrap();
    println!("log-coefficients of f:");
    for (t, c, v) in &h.terms {
        println!("  tangent {:?} class {:?}: {}", t, c.0, v);
    }
    let back = hamiltonian_to_f(&h).unwrap();
    println!("exp of the Hamiltonian returns f: {}", back == f);

    // Integral factorization of a product of walls.
    let f2 = f.mul(&f).unwrap();
    let factors = bps_factorize(&f2, dir).unwrap();
    for fac in &factors {
        println!(
            "factor (1 + q^(({})-1)/2) ẑ^[{:?};{:?}])^{}",
            fac.j + 1,
            fac.tangent,
            fac.class.0,
            fac.omega
        );
    }
}
