//! Numerics for the Ablowitz–Ladik hierarchy as a rational reduction of 2D-Toda,
//! its dispersionless limit, the Frobenius structure on the space of Lax symbols
//! λ(p) = p(p − e^v)/(p − e^{v+w}) and the almost-dual mirror periods.

pub mod diff;
pub mod frobenius;
pub mod hydro;
pub mod jet;
pub mod lattice;
pub mod linalg;
pub mod mirror;
pub mod report;
pub mod specfun;
pub mod suite;

pub use num_complex::Complex64 as C64;
