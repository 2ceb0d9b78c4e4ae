//! Reference solver for ∂ₜ²u − ∂ₓ(a(x/ε)∂ₓu) = f₁(t)f₂(x) on the periodic line
//! domain: pseudo-spectral operator and Störmer–Verlet time stepping.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::domain::LineDomain;
use crate::duhamel::{adaptive, initial_panels};
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::impulse::Impulse;

/// Stability margin: dt ≤ CFL·Δx/√(sup a).
pub const CFL: f64 = 0.2;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveState {
    pub t: f64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

/// Snapshots at the requested times and an energy log (t, E).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<WaveState>,
    pub energy_log: Vec<(f64, f64)>,
    pub dt: f64,
}

/// Pseudo-spectral heterogeneous operator on a line domain.
pub struct FineOperator {
    pub domain: LineDomain,
    /// a(x_j/ε) at the grid nodes.
    pub a_eps: Vec<f64>,
    freq: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FineOperator {
    pub fn new(a: &CoefficientField, domain: &LineDomain) -> Self {
        let m = domain.m();
        let eps = domain.eps();
        let a_eps = (0..m).map(|j| a.eval(domain.x(j) / eps)).collect();
        let freq = (0..m)
            .map(|j| {
                let n = domain.signed_index(j);
                if 2 * n.unsigned_abs() as usize == m {
                    0.0
                } else {
                    domain.frequency(n)
                }
            })
            .collect();
        let mut p = FftPlanner::new();
        Self { domain: domain.clone(), a_eps, freq, fwd: p.plan_fft_forward(m), inv: p.plan_fft_inverse(m) }
    }

    pub fn gradient(&self, u: &[Complex64]) -> Vec<Complex64> {
        let m = u.len();
        let mut buf = u.to_vec();
        self.fwd.process(&mut buf);
        let s = 1.0 / m as f64;
        for (c, &k) in buf.iter_mut().zip(&self.freq) {
            *c *= Complex64::new(0.0, k * s);
        }
        self.inv.process(&mut buf);
        buf
    }

    /// −∂ₓ(a_ε ∂ₓu).
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut g = self.gradient(u);
        for (x, a) in g.iter_mut().zip(&self.a_eps) {
            *x *= -a;
        }
        self.gradient(&g)
    }

    /// E = ½∫(|v|² + a_ε|∂ₓu|²).
    pub fn energy(&self, state: &WaveState) -> f64 {
        let g = self.gradient(&state.u);
        let dx = self.domain.dx();
        0.5 * dx
            * state
                .v
                .iter()
                .zip(&g)
                .zip(&self.a_eps)
                .map(|((v, g), a)| v.norm_sqr() + a * g.norm_sqr())
                .sum::<f64>()
    }
}

/// Integrate from rest at t₀ = inf supp f₁ to each requested time.
/// Steps are shortened so that every snapshot time is hit exactly; the energy is
/// logged every `energy_stride` steps (0 disables the log).
pub fn integrate(a: &CoefficientField, domain: &LineDomain, f: &Impulse, times: &[f64], dt: f64, energy_stride: usize) -> Result<Trajectory> {
    let op = FineOperator::new(a, domain);
    let limit = CFL * domain.dx() / a.upper.sqrt();
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    if (f.half_length - domain.half_length as f64).abs() > 1e-12 {
        return Err(Error::GridMismatch("impulse and domain half-lengths differ".into()));
    }
    let m = domain.m();
    let f2: Vec<Complex64> = (0..m).map(|j| f.f2(domain.x(j))).collect();
    let force = |t: f64, out: &mut Vec<Complex64>, au: &[Complex64]| {
        let s = f.f1.value(t);
        for j in 0..m {
            out[j] = f2[j] * s - au[j];
        }
    };
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut st = WaveState { t: f.f1.t0, u: vec![C0; m], v: vec![C0; m] };
    let mut acc = vec![C0; m];
    let mut au = op.apply(&st.u);
    force(st.t, &mut acc, &au);
    let mut snapshots = Vec::new();
    let mut energy_log = Vec::new();
    let mut step = 0usize;
    for &target in &sorted {
        if target <= st.t {
            let mut s = st.clone();
            if target < f.f1.t0 {
                s.t = target;
            }
            snapshots.push(s);
            continue;
        }
        let n = ((target - st.t) / dt).ceil() as usize;
        let h = (target - st.t) / n as f64;
        let t_start = st.t;
        for i in 0..n {
            for j in 0..m {
                st.v[j] += acc[j] * (0.5 * h);
                st.u[j] += st.v[j] * h;
            }
            st.t = t_start + (i + 1) as f64 * h;
            au = op.apply(&st.u);
            force(st.t, &mut acc, &au);
            for j in 0..m {
                st.v[j] += acc[j] * (0.5 * h);
            }
            step += 1;
            if energy_stride > 0 && step.is_multiple_of(energy_stride) {
                energy_log.push((st.t, op.energy(&st)));
            }
        }
        st.t = target;
        snapshots.push(st.clone());
    }
    // Restore the requested order.
    let snapshots = times
        .iter()
        .map(|&t| snapshots[sorted.iter().position(|&s| s == t).expect("time present")].clone())
        .collect();
    Ok(Trajectory { snapshots, energy_log, dt })
}

/// Maximum relative deviation of the logged energy from its first value at or after `t_from`.
pub fn energy_drift(log: &[(f64, f64)], t_from: f64) -> f64 {
    let tail: Vec<f64> = log.iter().filter(|(t, _)| *t >= t_from).map(|p| p.1).collect();
    match tail.first() {
        Some(&e0) if e0 > 0.0 => tail.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max),
        _ => 0.0,
    }
}

/// A priori ratios ‖Du(t)‖/‖f‖_{L¹((0,t);L²)} and ‖u(t)‖/(t‖f‖_{L¹((0,t);L²)}).
#[derive(Clone, Debug, Serialize)]
pub struct AprioriReport {
    /// (t, energy ratio, L² ratio); `None` when the impulse vanishes up to t.
    pub rows: Vec<(f64, Option<f64>, Option<f64>)>,
    /// Whether the energy ratio grows by more than ×2 after the impulse ends.
    pub growing: bool,
}

pub fn apriori_check(a: &CoefficientField, domain: &LineDomain, traj: &Trajectory, f: &Impulse) -> Result<AprioriReport> {
    let op = FineOperator::new(a, domain);
    let f2 = f.f2_l2();
    let mut rows = Vec::new();
    for s in &traj.snapshots {
        let hi = s.t.min(f.f1.t1());
        let l1 = if hi > f.f1.t0 {
            adaptive(f.f1.t0, hi, initial_panels(0.0, hi - f.f1.t0), 0.0, |x| [f.f1.value(x)])?[0] * f2
        } else {
            0.0
        };
        if l1 == 0.0 {
            rows.push((s.t, None, None));
            continue;
        }
        let g = op.gradient(&s.u);
        let du = (domain.dx() * s.v.iter().zip(&g).map(|(v, g)| v.norm_sqr() + g.norm_sqr()).sum::<f64>()).sqrt();
        let u = domain.l2_norm(&s.u);
        rows.push((s.t, Some(du / l1), Some(u / (s.t.max(1.0) * l1))));
    }
    let after: Vec<f64> = rows.iter().filter(|r| r.0 >= f.f1.t1()).filter_map(|r| r.1).collect();
    let growing = match (after.first(), after.last()) {
        (Some(a), Some(b)) => *b > 2.0 * a,
        _ => false,
    };
    Ok(AprioriReport { rows, growing })
}
