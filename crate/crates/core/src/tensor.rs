//! Symmetric tensor fields in one space dimension.
//!
//! At d = 1 a symmetric n-tensor has a single independent component, so a
//! tensor field is one periodic scalar field tagged with its order, and the
//! contraction against ξ^{⊗n} is multiplication by ξⁿ.

use num_complex::Complex64;

use crate::cell::PeriodicField;

/// Periodic symmetric tensor field of a given order.
#[derive(Clone, Debug)]
pub struct SymTensorField {
    pub order: usize,
    pub field: PeriodicField,
}

impl SymTensorField {
    pub fn new(order: usize, field: PeriodicField) -> Self {
        Self { order, field }
    }

    /// Contraction T ⊙ ξ^{⊗order} for a complex frequency vector.
    pub fn contract(&self, xi: Complex64) -> PeriodicField {
        self.field.scale(xi.powu(self.order as u32))
    }

    /// Contraction against (iξ)^{⊗order}.
    pub fn contract_i(&self, xi: f64) -> PeriodicField {
        self.contract(Complex64::new(0.0, xi))
    }
}

/// Constant symmetric tensor (single component at d = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor {
    pub order: usize,
    pub value: f64,
}

impl SymTensor {
    pub fn contract(&self, xi: Complex64) -> Complex64 {
        self.value * xi.powu(self.order as u32)
    }
}
