//! Periodic line domain (−L, L) commensurate with the ε-cells, and the fibered
//! representation x ↦ Σ_ξ e^{iξx} w_ξ(x/ε) of fields on it.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum grid points per ε-cell.
pub const MIN_POINTS_PER_CELL: usize = 32;

/// Uniform grid x_j = −L + j·2L/M on the torus of length 2L, with ε = 1/K.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineDomain {
    pub half_length: usize,
    pub inv_eps: usize,
    pub points_per_cell: usize,
}

impl LineDomain {
    pub fn new(half_length: usize, eps: f64, points_per_cell: usize) -> Result<Self> {
        let inv_eps = inv_eps(eps)?;
        if half_length == 0 {
            return Err(Error::InvalidConfig("domain half-length must be positive".into()));
        }
        if points_per_cell < MIN_POINTS_PER_CELL {
            return Err(Error::InvalidConfig(format!(
                "points per cell {points_per_cell} below {MIN_POINTS_PER_CELL}"
            )));
        }
        Ok(Self { half_length, inv_eps, points_per_cell })
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.inv_eps as f64
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length as f64
    }

    /// Number of grid points M = 2L·K·points_per_cell.
    pub fn m(&self) -> usize {
        2 * self.half_length * self.inv_eps * self.points_per_cell
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.m() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -(self.half_length as f64) + j as f64 * self.dx()
    }

    /// Physical frequency π n / L of the signed index n.
    pub fn frequency(&self, n: i64) -> f64 {
        PI * n as f64 / self.half_length as f64
    }

    /// Signed frequency index of grid slot j.
    pub fn signed_index(&self, j: usize) -> i64 {
        let m = self.m() as i64;
        let j = j as i64;
        if j < m / 2 {
            j
        } else {
            j - m
        }
    }

    /// Signed index of fiber component (ξ, k): ξL/π + 2L·K·k.
    pub fn fiber_index(&self, xi: f64, k: i64) -> i64 {
        (xi * self.half_length as f64 / PI).round() as i64 + (2 * self.half_length * self.inv_eps) as i64 * k
    }

    /// Largest cell harmonic representable on the grid for |ξ| < π/ε.
    pub fn max_harmonic(&self) -> usize {
        self.points_per_cell / 2 - 1
    }

    /// Whether waves of speed ≤ `speed` from an initial support of radius `r` stay
    /// inside the torus until `t_max`. Diagnostic only: band-limited f₂ fills the torus.
    pub fn no_wrap(&self, r: f64, speed: f64, t_max: f64) -> bool {
        r + speed * t_max <= self.half_length as f64
    }

    /// Fourier coefficients û_n (signed index order by slot) with u(x) = Σ û_n e^{iπnx/L}.
    pub fn forward(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        let m = self.m();
        if values.len() != m {
            return Err(Error::GridMismatch(format!("expected {m} values, got {}", values.len())));
        }
        let mut buf = values.to_vec();
        plan(m, true).process(&mut buf);
        let inv = 1.0 / m as f64;
        for (j, c) in buf.iter_mut().enumerate() {
            // x_j = −L + j·dx contributes the phase (−1)^n.
            let sign = if self.signed_index(j) % 2 == 0 { 1.0 } else { -1.0 };
            *c *= inv * sign;
        }
        Ok(buf)
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        let m = self.m();
        if coeffs.len() != m {
            return Err(Error::GridMismatch(format!("expected {m} coefficients, got {}", coeffs.len())));
        }
        let mut buf: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| if self.signed_index(j) % 2 == 0 { *c } else { -*c })
            .collect();
        plan(m, false).process(&mut buf);
        Ok(buf)
    }

    /// ‖u‖_{L²(−L,L)} by the trapezoidal (spectrally exact) rule.
    pub fn l2_norm(&self, values: &[Complex64]) -> f64 {
        (self.dx() * values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Spectral derivative of grid values.
    pub fn gradient(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut c = self.forward(values)?;
        let m = self.m();
        for (j, v) in c.iter_mut().enumerate() {
            let n = self.signed_index(j);
            *v *= if 2 * n.unsigned_abs() as usize == m {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.frequency(n))
            };
        }
        self.inverse(&c)
    }
}

/// Exact inverse of ε when ε = 1/K for an integer K.
pub fn inv_eps(eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::NonCommensurate(format!("eps = {eps} is not positive")));
    }
    let k = (1.0 / eps).round();
    if k < 1.0 || (1.0 / eps - k).abs() > 1e-9 * k {
        return Err(Error::NonCommensurate(format!("1/eps = {} is not an integer", 1.0 / eps)));
    }
    Ok(k as usize)
}

fn plan(m: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut p = FftPlanner::new();
    if forward {
        p.plan_fft_forward(m)
    } else {
        p.plan_fft_inverse(m)
    }
}

/// One fiber: e^{iξx} Σ_{|k|≤K} c_k e^{2πikx/ε}, coefficients ordered k = −K..=K.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub xi: f64,
    pub coeffs: Vec<Complex64>,
}

/// A field on (−L, L) stored fiber by fiber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberField {
    pub eps: f64,
    pub half_length: f64,
    pub kmax: usize,
    pub fibers: Vec<Fiber>,
}

impl FiberField {
    pub fn zeros(eps: f64, half_length: f64, kmax: usize, xis: &[f64]) -> Self {
        let fibers = xis.iter().map(|&xi| Fiber { xi, coeffs: vec![Complex64::new(0.0, 0.0); 2 * kmax + 1] }).collect();
        Self { eps, half_length, kmax, fibers }
    }

    fn check_layout(&self, o: &Self) -> Result<()> {
        let same = self.kmax == o.kmax
            && self.fibers.len() == o.fibers.len()
            && self.fibers.iter().zip(&o.fibers).all(|(a, b)| a.xi == b.xi)
            && self.eps == o.eps;
        if same {
            Ok(())
        } else {
            Err(Error::GridMismatch("fiber layouts differ".into()))
        }
    }

    fn zip(&self, o: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_layout(o)?;
        let mut out = self.clone();
        for (a, b) in out.fibers.iter_mut().zip(&o.fibers) {
            for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
                *x = f(*x, *y);
            }
        }
        Ok(out)
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.fibers.iter_mut().flat_map(|f| f.coeffs.iter_mut()).for_each(|v| *v *= c);
        out
    }

    /// Physical frequency ξ + 2πk/ε of coefficient slot i.
    pub fn frequency(&self, xi: f64, i: usize) -> f64 {
        xi + 2.0 * PI * (i as f64 - self.kmax as f64) / self.eps
    }

    /// ‖u‖_{L²(−L,L)} by Parseval.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.fibers.iter().flat_map(|f| f.coeffs.iter()).map(|c| c.norm_sqr()).sum();
        (2.0 * self.half_length * s).sqrt()
    }

    /// ∂ₓu.
    pub fn grad(&self) -> Self {
        let mut out = self.clone();
        for f in &mut out.fibers {
            let xi = f.xi;
            for (i, c) in f.coeffs.iter_mut().enumerate() {
                *c *= Complex64::new(0.0, self.frequency(xi, i));
            }
        }
        out
    }

    /// Values on the grid of `domain`; harmonics beyond the grid Nyquist are dropped.
    pub fn to_grid(&self, domain: &LineDomain) -> Result<Vec<Complex64>> {
        if inv_eps(self.eps)? != domain.inv_eps || self.half_length != domain.half_length as f64 {
            return Err(Error::GridMismatch("fiber field and domain disagree on eps or L".into()));
        }
        let m = domain.m() as i64;
        let mut c = vec![Complex64::new(0.0, 0.0); m as usize];
        for f in &self.fibers {
            for (i, v) in f.coeffs.iter().enumerate() {
                let n = domain.fiber_index(f.xi, i as i64 - self.kmax as i64);
                if 2 * n.abs() < m {
                    c[n.rem_euclid(m) as usize] += v;
                }
            }
        }
        domain.inverse(&c)
    }

    /// Project grid values onto this field's fiber layout.
    pub fn project(&self, domain: &LineDomain, values: &[Complex64]) -> Result<Self> {
        let c = domain.forward(values)?;
        let m = domain.m() as i64;
        let mut out = self.clone();
        for f in &mut out.fibers {
            let xi = f.xi;
            for (i, v) in f.coeffs.iter_mut().enumerate() {
                let n = domain.fiber_index(xi, i as i64 - self.kmax as i64);
                *v = if 2 * n.abs() < m { c[n.rem_euclid(m) as usize] } else { Complex64::new(0.0, 0.0) };
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn commensurability() {
        assert!(LineDomain::new(8, 1.0 / 16.0, 32).is_ok());
        assert!(matches!(LineDomain::new(8, 0.3, 32), Err(Error::NonCommensurate(_))));
        let d = LineDomain::new(2, 0.25, 32).unwrap();
        assert_eq!(d.m(), 2 * 2 * 4 * 32);
        assert_abs_diff_eq!(d.x(0), -2.0);
    }

    #[test]
    fn fft_round_trip_and_single_mode() {
        let d = LineDomain::new(1, 0.5, 32).unwrap();
        let n = 3i64;
        let vals: Vec<Complex64> = (0..d.m()).map(|j| Complex64::from_polar(1.0, d.frequency(n) * d.x(j))).collect();
        let c = d.forward(&vals).unwrap();
        assert_abs_diff_eq!(c[n as usize].re, 1.0, epsilon = 1e-13);
        let back = d.inverse(&c).unwrap();
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).norm() < 1e-13);
        }
        let g = d.gradient(&vals).unwrap();
        assert!((g[5] - vals[5] * Complex64::new(0.0, d.frequency(n))).norm() < 1e-11);
    }

    proptest! {
        #[test]
        fn parseval_grid_vs_fibers(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = LineDomain::new(2, 0.25, 32).unwrap();
            let xis: Vec<f64> = (1..4).map(|k| d.frequency(k)).collect();
            let mut f = FiberField::zeros(d.eps(), 2.0, 4, &xis);
            for fib in &mut f.fibers {
                for c in &mut fib.coeffs {
                    *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let vals = f.to_grid(&d).unwrap();
            prop_assert!((d.l2_norm(&vals) - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
            let back = f.project(&d, &vals).unwrap();
            prop_assert!(back.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
            let g = d.gradient(&vals).unwrap();
            prop_assert!((d.l2_norm(&g) - f.grad().l2_norm()).abs() <= 1e-10 * f.grad().l2_norm());
        }
    }
}
