//! Exact symbolic engine for q-deformed scattering diagrams on the
//! tropicalization of a log Calabi-Yau surface, quantum broken lines, and
//! the structure constants of the quantized mirror algebra in its canonical
//! theta-function basis.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`qcoeff`] — exact rational-function arithmetic in `s = q^(1/2)`;
//! 2. [`affine`] — the integral affine surface `(B, Σ)`: charts, parallel
//!    transport with kinks, the developing map, integral points;
//! 3. [`qtorus`] — the noncommutative monomial algebra, wall-crossing
//!    automorphisms, Hamiltonian/wall-function conversion, BPS factorization;
//! 4. [`scattering`] — scattering diagrams, path-ordered products, the
//!    order-by-order consistency completion on the plane, consistency checks
//!    on the surface;
//! 5. [`canonical`] — canonical diagrams of a Looijenga pair from toric-model
//!    seed data;
//! 6. [`brokenlines`] — quantum broken line enumeration, lifts, theta
//!    structure constants, Poisson extraction, torus-weight grading checks;
//! 7. [`mirror`] — the theta-basis algebra, finite presentations, class
//!    specializations.
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `qscatter` binary for the file-based pipeline.

pub mod affine;
pub mod brokenlines;
pub mod canonical;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod mirror;
pub mod qcoeff;
pub mod qtorus;
pub mod scattering;

pub use error::{QError, QResult};
pub use qcoeff::{QLaurent, QScalar};
