//! General (spinless, complex-orbital) Hartree-Fock in a finite s-type
//! Gaussian basis, together with the structure analysis of the solution set:
//! realified Jacobian of the residual map, its coercive-plus-structured
//! splitting, numerical kernel extraction, phase orbits and predictor,
//! corrector continuation, Koopmans and orbital-energy bound checks.
//!
//! Everything downstream of [`integrals`] works in the Löwdin-orthonormalized
//! basis, where the discretized L² inner product is the plain complex dot
//! product.

pub mod hf_core;
pub mod integrals;
pub mod linalg;
pub mod report;
pub mod scf;
pub mod structure;

pub use num_complex::Complex64;

/// Complex scalar used for orbital coefficients throughout.
pub type C64 = num_complex::Complex64;
