//! Duhamel integrals against the time bump:
//! U(ω, t) = ∫₀ᵗ sin(ω(t−s))/ω f₁(s) ds and V = ∂ₜU = ∫₀ᵗ cos(ω(t−s)) f₁(s) ds,
//! and the reduction of ∂ₜ^j U to (U, V) plus derivatives of f₁.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::impulse::TimeBump;

/// Nodes per Gauss–Legendre panel.
pub const GAUSS_ORDER: usize = 20;
/// Successive panel doublings must agree to this (relative to max(1, |I|)).
pub const QUAD_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 12;
/// Below this frequency the ω = 0 kernel t − s is used.
const OMEGA_ZERO: f64 = 1e-9;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(GAUSS_ORDER).expect("valid degree").into_node_weight_pairs())
}

/// Composite Gauss–Legendre nodes and weights on [a, b] with n equal panels.
pub fn panel_rule(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / n as f64;
    let mut out = Vec::with_capacity(n * GAUSS_ORDER);
    for p in 0..n {
        let lo = a + p as f64 * h;
        for &(x, w) in rule() {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// Integrate a vector-valued integrand over [a, b], doubling the panel count
/// from `n0` until successive results agree to [`QUAD_TOL`].
pub fn adaptive<const K: usize>(a: f64, b: f64, n0: usize, omega: f64, g: impl Fn(f64) -> [f64; K]) -> Result<[f64; K]> {
    let eval = |n: usize| {
        let mut acc = [0.0; K];
        for (s, w) in panel_rule(a, b, n) {
            let v = g(s);
            for k in 0..K {
                acc[k] += w * v[k];
            }
        }
        acc
    };
    if b <= a {
        return Ok([0.0; K]);
    }
    let mut n = n0.max(1);
    let mut prev = eval(n);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        n *= 2;
        let cur = eval(n);
        change = (0..K).map(|k| (cur[k] - prev[k]).abs() / cur[k].abs().max(1.0)).fold(0.0, f64::max);
        prev = cur;
        if change <= QUAD_TOL {
            return Ok(prev);
        }
    }
    Err(Error::QuadratureFailure { omega, change })
}

/// Initial panel count: at least 8 per unit support and 4 per oscillation period.
pub fn initial_panels(omega: f64, len: f64) -> usize {
    (8.0 * len).ceil().max(8.0).max((4.0 * omega * len / std::f64::consts::TAU).ceil()) as usize
}

/// ∫ g over the support of the bump.
pub fn integrate_support(b: &TimeBump, g: impl Fn(f64) -> f64) -> f64 {
    adaptive(b.t0, b.t1(), initial_panels(0.0, b.width), 0.0, |s| [g(s)]).map(|v| v[0]).unwrap_or(f64::NAN)
}

/// Moments of f₁ relative to the end of its support, for evaluating U, V at t ≥ t₁.
#[derive(Clone, Copy, Debug)]
pub struct Moments {
    pub omega: f64,
    t1: f64,
    c: f64,
    s: f64,
    m0: f64,
    m1: f64,
}

impl Moments {
    pub fn new(b: &TimeBump, omega: f64) -> Result<Self> {
        let t1 = b.t1();
        let [c, s, m0, m1] = adaptive(b.t0, t1, initial_panels(omega, b.width), omega, |x| {
            let f = b.value(x);
            let (sn, cs) = (omega * (x - t1)).sin_cos();
            [cs * f, sn * f, f, (x - t1) * f]
        })?;
        Ok(Self { omega, t1, c, s, m0, m1 })
    }

    /// (U, V) at t ≥ t₁.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let tt = t - self.t1;
        if self.omega < OMEGA_ZERO {
            return (tt * self.m0 - self.m1, self.m0);
        }
        let (sn, cs) = (self.omega * tt).sin_cos();
        ((sn * self.c - cs * self.s) / self.omega, cs * self.c + sn * self.s)
    }
}

/// Duhamel kernel for one frequency, caching the post-support moments.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub bump: TimeBump,
    pub omega: f64,
    moments: Moments,
}

impl Kernel {
    pub fn new(bump: TimeBump, omega: f64) -> Result<Self> {
        Ok(Self { bump, omega, moments: Moments::new(&bump, omega)? })
    }

    /// (U(ω, t), V(ω, t)).
    pub fn uv(&self, t: f64) -> Result<(f64, f64)> {
        let b = &self.bump;
        if t <= b.t0 {
            return Ok((0.0, 0.0));
        }
        if t >= b.t1() {
            return Ok(self.moments.eval(t));
        }
        let w = self.omega;
        let [u, v] = adaptive(b.t0, t, initial_panels(w, t - b.t0), w, |s| {
            let f = b.value(s);
            let tau = t - s;
            if w < OMEGA_ZERO {
                [tau * f, f]
            } else {
                let (sn, cs) = (w * tau).sin_cos();
                [sn / w * f, cs * f]
            }
        })?;
        Ok((u, v))
    }

    /// ∂ₜ^j U(ω, t) for j ≥ 0, via U″ = f₁ − ω²U.
    pub fn derivative(&self, j: usize, t: f64) -> Result<f64> {
        let (u, v) = self.uv(t)?;
        let jet = if j >= 2 { self.bump.jet(t, j - 2) } else { Vec::new() };
        Ok(reduce(self.omega, u, v, &jet, j))
    }
}

/// ∂ₜ^j U from (U, V) and f₁ derivatives `f1[k] = f₁^{(k)}(t)` (k ≤ j − 2):
/// ∂ₜ^{2m}U = (−ω²)^m U + Σ_{i<m} (−ω²)^i f₁^{(2(m−1−i))},
/// ∂ₜ^{2m+1}U = (−ω²)^m V + Σ_{i<m} (−ω²)^i f₁^{(2(m−1−i)+1)}.
pub fn reduce(omega: f64, u: f64, v: f64, f1: &[f64], j: usize) -> f64 {
    let w2 = -omega * omega;
    let m = j / 2;
    let odd = j % 2;
    let mut acc = w2.powi(m as i32) * if odd == 1 { v } else { u };
    for i in 0..m {
        acc += w2.powi(i as i32) * f1[2 * (m - 1 - i) + odd];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// RK4 on ü + ω²u = f₁ with a fine step as an independent oracle.
    fn rk4(omega: f64, b: &TimeBump, t: f64, steps: usize) -> (f64, f64) {
        let h = t / steps as f64;
        let rhs = |s: f64, y: [f64; 2]| [y[1], b.value(s) - omega * omega * y[0]];
        let mut y = [0.0, 0.0];
        let mut s = 0.0;
        for _ in 0..steps {
            let k1 = rhs(s, y);
            let k2 = rhs(s + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = rhs(s + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = rhs(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s += h;
        }
        (y[0], y[1])
    }

    #[test]
    fn matches_direct_time_integration() {
        let b = TimeBump::default();
        for &omega in &[0.0, 2.0, 7.3] {
            let k = Kernel::new(b, omega).unwrap();
            for &t in &[0.4, 1.0, 2.5] {
                let (u, v) = k.uv(t).unwrap();
                let (ur, vr) = rk4(omega, &b, t, 40000);
                assert_abs_diff_eq!(u, ur, epsilon = 1e-9);
                assert_abs_diff_eq!(v, vr, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn moment_form_continuous_at_support_end() {
        let b = TimeBump::new(0.5, 1.0);
        let k = Kernel::new(b, 3.1).unwrap();
        let (u1, v1) = k.uv(1.5 - 1e-12).unwrap();
        let (u2, v2) = k.uv(1.5).unwrap();
        assert_abs_diff_eq!(u1, u2, epsilon = 1e-10);
        assert_abs_diff_eq!(v1, v2, epsilon = 1e-10);
        assert_eq!(k.uv(0.2).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn reduction_matches_finite_differences() {
        let b = TimeBump::default();
        let k = Kernel::new(b, 2.0).unwrap();
        let h = 1e-3;
        for &t in &[0.45, 0.7, 3.0] {
            for j in 0..4 {
                let f = |s: f64| k.derivative(j, s).unwrap();
                let fd = (8.0 * (f(t + h) - f(t - h)) - (f(t + 2.0 * h) - f(t - 2.0 * h))) / (12.0 * h);
                let exact = k.derivative(j + 1, t).unwrap();
                assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "t {t} j {j}: {fd} {exact}");
            }
        }
    }

    #[test]
    fn energy_identity_after_support() {
        let k = Kernel::new(TimeBump::default(), 4.0).unwrap();
        let e = |t: f64| {
            let (u, v) = k.uv(t).unwrap();
            0.5 * (v * v + 16.0 * u * u)
        };
        assert_abs_diff_eq!(e(1.5), e(40.0), epsilon = 1e-13);
    }
}
