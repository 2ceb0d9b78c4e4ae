//! Separable impulses f(t, x) = f₁(t) f₂(x) with a smooth compactly supported
//! time profile and a band-limited spatial spectrum on a line-domain Fourier grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::jet::Jet;

/// Highest f₁ derivative order provided.
pub const MAX_TIME_DERIVATIVE: usize = 16;

/// C^∞ bump f₁(t) = exp(1 − 1/(1 − z²)), z = 2(t − t₀)/w − 1, supported on [t₀, t₀ + w].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBump {
    pub t0: f64,
    pub width: f64,
}

impl Default for TimeBump {
    fn default() -> Self {
        Self { t0: 0.0, width: 1.0 }
    }
}

impl TimeBump {
    pub fn new(t0: f64, width: f64) -> Self {
        assert!(width > 0.0, "bump width must be positive");
        Self { t0, width }
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.width
    }

    pub fn value(&self, t: f64) -> f64 {
        let z = 2.0 * (t - self.t0) / self.width - 1.0;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        (1.0 - 1.0 / (1.0 - z * z)).exp()
    }

    /// Derivatives f₁^{(k)}(t) for k = 0..=order.
    pub fn jet(&self, t: f64, order: usize) -> Vec<f64> {
        let z0 = 2.0 * (t - self.t0) / self.width - 1.0;
        if z0.abs() >= 1.0 {
            return vec![0.0; order + 1];
        }
        let p0 = 1.0 - z0 * z0;
        // Below this the value underflows and the series coefficients overflow.
        if 1.0 - 1.0 / p0 < -700.0 {
            return vec![0.0; order + 1];
        }
        let z = Jet::linear(z0, 2.0 / self.width, order);
        let p = &Jet::constant(1.0, order) - &(&z * &z);
        let h = &Jet::constant(1.0, order) - &p.recip();
        let e = h.exp();
        (0..=order).map(|k| e.derivative(k)).collect()
    }

    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        self.jet(t, k)[k]
    }

    /// ∫|f₁| (f₁ ≥ 0), by Gauss–Legendre on the support.
    pub fn l1_norm(&self) -> f64 {
        crate::duhamel::integrate_support(self, |s| self.value(s))
    }
}

/// Band-limited separable impulse; `modes` lists (ξ, f̂₂(ξ)) on the grid ξ = πk/L.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Impulse {
    pub f1: TimeBump,
    pub half_length: f64,
    pub radius: f64,
    pub modes: Vec<(f64, Complex64)>,
}

impl Impulse {
    /// Unit-modulus random-phase spectrum on all grid frequencies 0 < |ξ| ≤ R.
    pub fn random_band(f1: TimeBump, half_length: f64, radius: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kmax = (radius * half_length / PI + 1e-9).floor() as i64;
        let mut modes = Vec::new();
        for k in -kmax..=kmax {
            if k == 0 {
                continue;
            }
            let theta: f64 = rng.gen_range(0.0..2.0 * PI);
            modes.push((PI * k as f64 / half_length, Complex64::from_polar(1.0, theta)));
        }
        Self { f1, half_length, radius, modes }
    }

    /// A single grid frequency with amplitude `amp`.
    pub fn single_mode(f1: TimeBump, half_length: f64, k: i64, amp: Complex64) -> Self {
        let xi = PI * k as f64 / half_length;
        Self { f1, half_length, radius: xi.abs(), modes: vec![(xi, amp)] }
    }

    pub fn zero(f1: TimeBump, half_length: f64) -> Self {
        Self { f1, half_length, radius: 0.0, modes: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|(_, a)| a.norm() == 0.0)
    }

    /// f₂(x).
    pub fn f2(&self, x: f64) -> Complex64 {
        self.modes.iter().map(|&(xi, a)| a * Complex64::from_polar(1.0, xi * x)).sum()
    }

    /// ‖f₂‖_{L²(−L,L)} by Parseval.
    pub fn f2_l2(&self) -> f64 {
        (2.0 * self.half_length * self.modes.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// ‖f‖_{L¹((0,∞); L²)}.
    pub fn l1_l2(&self) -> f64 {
        self.f1.l1_norm() * self.f2_l2()
    }
}
