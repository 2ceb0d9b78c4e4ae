//! Periodic coefficient fields on the unit cell.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar periodic coefficient a(y) on the unit cell (−1/2, 1/2), together with
/// its ellipticity bounds `lambda ≤ a(y) ≤ upper`.
///
/// The upper bound is carried explicitly because the default test field
/// `2 + sin 2πy` exceeds 1.
#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    params: Vec<f64>,
    eval: Evaluator,
    /// Lower ellipticity bound.
    pub lambda: f64,
    /// Upper bound on a.
    pub upper: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("lambda", &self.lambda)
            .field("upper", &self.upper)
            .finish()
    }
}

impl CoefficientField {
    /// Space dimension. Only d = 1 is implemented.
    pub const DIM: usize = 1;

    /// a ≡ c.
    pub fn constant(c: f64) -> Self {
        assert!(c > 0.0, "coefficient must be positive");
        Self {
            name: "constant".into(),
            params: vec![c],
            eval: Arc::new(move |_| c),
            lambda: c,
            upper: c,
        }
    }

    /// a(y) = c + amp·sin(2πy).
    pub fn sine(c: f64, amp: f64) -> Self {
        assert!(c > amp.abs(), "c + amp sin must stay positive");
        Self {
            name: "sine".into(),
            params: vec![c, amp],
            eval: Arc::new(move |y| c + amp * (2.0 * std::f64::consts::PI * y).sin()),
            lambda: c - amp.abs(),
            upper: c + amp.abs(),
        }
    }

    /// a(y) = 1/(c + amp·sin(2πy)).
    pub fn inverse_sine(c: f64, amp: f64) -> Self {
        assert!(c > amp.abs(), "c + amp sin must stay positive");
        Self {
            name: "inverse_sine".into(),
            params: vec![c, amp],
            eval: Arc::new(move |y| 1.0 / (c + amp * (2.0 * std::f64::consts::PI * y).sin())),
            lambda: 1.0 / (c + amp.abs()),
            upper: 1.0 / (c - amp.abs()),
        }
    }

    /// The default test field a(y) = 2 + sin 2πy.
    pub fn test_field() -> Self {
        Self::sine(2.0, 1.0)
    }

    /// Arbitrary field from a closure and explicit bounds.
    pub fn custom(
        name: &str,
        lambda: f64,
        upper: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), params: vec![], eval: Arc::new(f), lambda, upper }
    }

    /// Look up a field by configuration name.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let p = |i: usize, d: f64| params.get(i).copied().unwrap_or(d);
        let bad = |msg: &str| Error::InvalidConfig(format!("field {name}: {msg}"));
        match name {
            "constant" => {
                let c = p(0, 1.0);
                if c <= 0.0 {
                    return Err(bad("needs c > 0"));
                }
                Ok(Self::constant(c))
            }
            "sine" | "test" => {
                let (c, amp) = (p(0, 2.0), p(1, 1.0));
                if c <= amp.abs() {
                    return Err(bad("needs c > |amp|"));
                }
                Ok(Self::sine(c, amp))
            }
            "inverse_sine" => {
                let (c, amp) = (p(0, 1.0), p(1, 0.5));
                if c <= amp.abs() {
                    return Err(bad("needs c > |amp|"));
                }
                Ok(Self::inverse_sine(c, amp))
            }
            _ => Err(bad("unknown field name")),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Evaluate a at a cell point (the field is 1-periodic).
    pub fn eval(&self, y: f64) -> f64 {
        (self.eval)(y)
    }

    /// True if a is constant.
    pub fn is_constant(&self) -> bool {
        self.name == "constant"
    }

    /// Check `lambda ≤ a ≤ upper` on `samples` equispaced points.
    pub fn check_bounds(&self, samples: usize) -> bool {
        (0..samples).all(|j| {
            let v = self.eval(-0.5 + j as f64 / samples as f64);
            v >= self.lambda - 1e-14 && v <= self.upper + 1e-14
        })
    }
}
