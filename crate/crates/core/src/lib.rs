//! Long-time homogenization of the periodic wave equation in one space dimension.
//!
//! The crate builds the spectral (Taylor–Bloch) and hyperbolic corrector
//! hierarchies of a periodic coefficient, the dispersive effective symbols and
//! their well-posed variants, two-scale expansions of the heterogeneous
//! solution, and two independent reference solvers (Bloch–Duhamel and a
//! pseudo-spectral leapfrog scheme) used to measure approximation errors.

pub mod bloch;
pub mod cell;
pub mod domain;
pub mod duhamel;
pub mod effective;
pub mod error;
pub mod expansion;
pub mod field;
pub mod fine;
pub mod fit;
pub mod harness;
pub mod hyperbolic;
pub mod impulse;
pub mod jet;
pub mod spectral;
pub mod tensor;

pub use cell::{cell_mean, CellGrid, PeriodicField};
pub use error::{Error, Result};
pub use field::CoefficientField;
pub use num_complex::Complex64;
pub use tensor::{SymTensor, SymTensorField};
