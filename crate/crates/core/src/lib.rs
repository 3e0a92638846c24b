//! Simulation library for macroscopic superposition (cat) states generated in a
//! driven qubit-oscillator system.
//!
//! The crate is organized bottom-up:
//! - [`specfun`]: scalar special functions (Bessel, Laguerre, Hermite, log-factorial)
//! - [`linalg`]: dense Hermitian eigensolver used for spectra and trace norms
//! - [`fock`]: truncated-oscillator state vectors, coherent/cat constructors,
//!   displacement and quadrature matrix elements
//! - [`model`]: system parameters, effective drive parameters, Hamiltonian assembly
//! - [`analytic`]: closed-form rotating-wave solution (displacement amplitude,
//!   probabilities, entanglement measures, propagator, joint state)
//! - [`closed`]: exact unitary integration of the full time-dependent Hamiltonian
//! - [`open`]: Lindblad master-equation integration with qubit and oscillator baths
//! - [`tomography`]: Wigner functions and rotated-quadrature distributions
//! - [`presets`]: named parameter sets and run configurations
//!
//! All frequencies and rates are expressed in units of the bare coupling `g_0`
//! and times in units of `1/g_0` unless stated otherwise.

pub mod analytic;
pub mod closed;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod open;
pub mod presets;
pub mod specfun;
pub mod tomography;

pub use num_complex::Complex64 as C64;
