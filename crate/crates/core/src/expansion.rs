//! Two-scale expansions assembled from corrector and mode data, and their errors
//! against a reference solution.
//!
//! A product εⁿψ(x/ε)·e^{iξx} is exactly one fiber of the domain, so both
//! expansions are built fiber by fiber with the cell coefficients of the
//! correctors; [`ExpansionField::to_grid`] gives the fine-grid values.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{assemble, CoefficientSpectrum};
use crate::cell::PeriodicField;
use crate::domain::{Fiber, FiberField, LineDomain};
use crate::effective::ModeSolution;
use crate::error::{Error, Result};
use crate::fine::WaveState;
use crate::hyperbolic::HyperbolicCorrectors;
use crate::impulse::{Impulse, MAX_TIME_DERIVATIVE};
use crate::spectral::SpectralCorrectors;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExpansionKind {
    Spectral,
    Hyperbolic,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionField {
    pub t: f64,
    pub ell: usize,
    pub kind: ExpansionKind,
    pub variant: String,
    pub u: FiberField,
    pub ut: FiberField,
}

impl ExpansionField {
    /// (u, ∂ₜu) on the fine grid of `domain`.
    pub fn to_grid(&self, domain: &LineDomain) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        Ok((self.u.to_grid(domain)?, self.ut.to_grid(domain)?))
    }
}

/// (L², energy-norm) error pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    /// ‖(∂ₜ, ∂ₓ)(u − approx)‖_{L²}.
    pub energy: f64,
}

fn cell_coeffs(f: &PeriodicField, kmax: usize) -> Vec<Complex64> {
    f.coefficients(kmax)
}

fn check_t(order: usize) -> Result<()> {
    if order > MAX_TIME_DERIVATIVE {
        return Err(Error::InsufficientTimeDerivatives { needed: order, available: MAX_TIME_DERIVATIVE });
    }
    Ok(())
}

/// (n, m) with n + 2m ≤ ℓ − 3.
fn zeta_keys(ell: usize) -> Vec<(usize, usize)> {
    if ell < 3 {
        return Vec::new();
    }
    (0..=(ell - 3) / 2).flat_map(|m| (0..=ell - 3 - 2 * m).map(move |n| (n, m))).collect()
}

fn axpy(acc: &mut [Complex64], c: Complex64, x: &[Complex64]) {
    for (a, x) in acc.iter_mut().zip(x) {
        *a += c * x;
    }
}

fn field_pair(eps: f64, half_length: f64, kmax: usize, fibers: Vec<(Fiber, Fiber)>) -> (FiberField, FiberField) {
    let (u, ut): (Vec<_>, Vec<_>) = fibers.into_iter().unzip();
    (FiberField { eps, half_length, kmax, fibers: u }, FiberField { eps, half_length, kmax, fibers: ut })
}

/// The spectral expansion
/// Σ_{n≤ℓ} εⁿψⁿ(x/ε)γ_ℓ(ε∂ₓ)∂ₓⁿū + ε³Σ_m(−1)ᵐε^{2m}Σ_n εⁿζ^{n,m}(x/ε)γ_ℓ(ε∂ₓ)∂ₓ^{n+1}∂ₜ^{2m}f
/// at time t, with ∂ₜū from the per-mode solution (which must follow the modes of `f`).
pub fn assemble_s(ell: usize, eps: f64, sc: &SpectralCorrectors, modes: &ModeSolution, f: &Impulse, t: f64, kmax: usize) -> Result<ExpansionField> {
    if sc.ell < ell {
        return Err(Error::MissingCorrector(format!("spectral correctors built to {} < {ell}", sc.ell)));
    }
    if modes.modes.len() != f.modes.len() {
        return Err(Error::GridMismatch("mode solution does not follow the impulse".into()));
    }
    let psi: Vec<Vec<Complex64>> = (0..=ell).map(|n| cell_coeffs(&sc.psi[n].field, kmax)).collect();
    let mut zeta = Vec::new();
    for (n, m) in zeta_keys(ell) {
        check_t(2 * m + 1)?;
        zeta.push((n, m, cell_coeffs(&sc.zeta_at(n, m)?.field, kmax)));
    }
    let jet = f.f1.jet(t, MAX_TIME_DERIVATIVE);
    let fibers = (0..f.modes.len())
        .into_par_iter()
        .map(|i| {
            let (xi, amp) = f.modes[i];
            let z = Complex64::new(0.0, eps * xi);
            let gamma = sc.gamma(ell, eps * xi);
            let ub = modes.derivative(i, 0, t)?;
            let ubt = modes.derivative(i, 1, t)?;
            let mut u = vec![C0; 2 * kmax + 1];
            let mut ut = vec![C0; 2 * kmax + 1];
            for (n, p) in psi.iter().enumerate() {
                let c = z.powu(n as u32) * gamma;
                axpy(&mut u, c * ub, p);
                axpy(&mut ut, c * ubt, p);
            }
            for (n, m, zc) in &zeta {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let c = z.powu(*n as u32 + 1) * (gamma * sign * eps.powi(2 + 2 * *m as i32)) * amp;
                axpy(&mut u, c * jet[2 * m], zc);
                axpy(&mut ut, c * jet[2 * m + 1], zc);
            }
            Ok((Fiber { xi, coeffs: u }, Fiber { xi, coeffs: ut }))
        })
        .collect::<Result<Vec<_>>>()?;
    let (u, ut) = field_pair(eps, f.half_length, kmax, fibers);
    Ok(ExpansionField { t, ell, kind: ExpansionKind::Spectral, variant: modes.symbol.variant.name().into(), u, ut })
}

/// The hyperbolic expansion Σ_{n+m≤ℓ, m even} ε^{n+m}φ^{n,m}(x/ε)∂ₓⁿ∂ₜᵐv̄ at time t.
pub fn assemble_h(ell: usize, eps: f64, hc: &HyperbolicCorrectors, modes: &ModeSolution, t: f64, kmax: usize) -> Result<ExpansionField> {
    if hc.ell < ell {
        return Err(Error::MissingCorrector(format!("hyperbolic correctors built to {} < {ell}", hc.ell)));
    }
    let mut terms = Vec::new();
    for m in (0..=ell).step_by(2) {
        for n in 0..=ell - m {
            let c = if n == 0 {
                let mut c = vec![C0; 2 * kmax + 1];
                if m == 0 {
                    c[kmax] = Complex64::new(1.0, 0.0);
                }
                c
            } else {
                cell_coeffs(&hc.phi_at(n, m), kmax)
            };
            if c.iter().any(|v| *v != C0) {
                terms.push((n, m, c));
            }
        }
    }
    let fibers = (0..modes.modes.len())
        .into_par_iter()
        .map(|i| {
            let xi = modes.modes[i].xi;
            let z = Complex64::new(0.0, eps * xi);
            let mut u = vec![C0; 2 * kmax + 1];
            let mut ut = vec![C0; 2 * kmax + 1];
            for (n, m, c) in &terms {
                let s = z.powu(*n as u32) * eps.powi(*m as i32);
                axpy(&mut u, s * modes.derivative(i, *m, t)?, c);
                axpy(&mut ut, s * modes.derivative(i, m + 1, t)?, c);
            }
            Ok((Fiber { xi, coeffs: u }, Fiber { xi, coeffs: ut }))
        })
        .collect::<Result<Vec<_>>>()?;
    let (u, ut) = field_pair(eps, modes.half_length, kmax, fibers);
    Ok(ExpansionField { t, ell, kind: ExpansionKind::Hyperbolic, variant: modes.symbol.variant.name().into(), u, ut })
}

/// Errors of `approx` against a reference given in fibered form.
pub fn error_norms(u: &FiberField, ut: &FiberField, approx: &ExpansionField) -> Result<ErrorNorms> {
    let e = u.sub(&approx.u)?;
    let et = ut.sub(&approx.ut)?;
    let g = e.grad().l2_norm();
    let v = et.l2_norm();
    Ok(ErrorNorms { l2: e.l2_norm(), energy: (g * g + v * v).sqrt() })
}

/// Errors of `approx` against a fine-grid state.
pub fn error_norms_grid(state: &WaveState, domain: &LineDomain, approx: &ExpansionField) -> Result<ErrorNorms> {
    if state.u.len() != domain.m() || (state.t - approx.t).abs() > 1e-12 {
        return Err(Error::GridMismatch("state and expansion differ in grid or time".into()));
    }
    let (u, ut) = approx.to_grid(domain)?;
    let e: Vec<Complex64> = state.u.iter().zip(&u).map(|(a, b)| a - b).collect();
    let et: Vec<Complex64> = state.v.iter().zip(&ut).map(|(a, b)| a - b).collect();
    let g = domain.l2_norm(&domain.gradient(&e)?);
    let v = domain.l2_norm(&et);
    Ok(ErrorNorms { l2: domain.l2_norm(&e), energy: (g * g + v * v).sqrt() })
}

/// Magnitudes of the pieces of (∂ₜ² − ∂ₓa(x/ε)∂ₓ)S − f, in the dual energy norm
/// ‖r‖² = 2L Σ|r̂|²/(1 + |ξ + 2πk/ε|²).
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub t: f64,
    pub eps: f64,
    pub ell: usize,
    /// Residual of the ψ-sum, the source subtracted.
    pub psi_part: f64,
    /// Residual of the ζ-sum.
    pub zeta_part: f64,
    pub total: f64,
    /// ‖f(t)‖_{L²} for scale.
    pub source_norm: f64,
}

/// Residual of the spectral expansion at time t. `modes` must solve the base
/// symbol with the plain source.
pub fn residual_spectral(ell: usize, eps: f64, sc: &SpectralCorrectors, spec: &CoefficientSpectrum, modes: &ModeSolution, f: &Impulse, t: f64, kmax: usize) -> Result<ResidualReport> {
    if sc.ell < ell {
        return Err(Error::MissingCorrector(format!("spectral correctors built to {} < {ell}", sc.ell)));
    }
    let layout = FiberField::zeros(eps, f.half_length, kmax, &[]);
    let jet = f.f1.jet(t, MAX_TIME_DERIVATIVE);
    let inv2 = 1.0 / (eps * eps);
    let mut acc = [0.0f64; 3];
    let zeta_keys = zeta_keys(ell);
    for (i, &(xi, amp)) in f.modes.iter().enumerate() {
        let op = assemble(spec, eps * xi, kmax);
        let z = Complex64::new(0.0, eps * xi);
        let gamma = sc.gamma(ell, eps * xi);
        let ub = modes.derivative(i, 0, t)?;
        let ubtt = modes.derivative(i, 2, t)?;
        // ψ-sum: P = γΣzⁿψⁿ, residual ∂ₜ²ū·P + ε⁻²L P ū − f.
        let mut p = vec![C0; 2 * kmax + 1];
        for n in 0..=ell {
            axpy(&mut p, z.powu(n as u32) * gamma, &cell_coeffs(&sc.psi[n].field, kmax));
        }
        let lp = &op.matrix * nalgebra::DVector::from_column_slice(&p);
        let mut r_psi: Vec<Complex64> = (0..p.len()).map(|k| p[k] * ubtt + lp[k] * inv2 * ub).collect();
        r_psi[kmax] -= amp * jet[0];
        let mut r_zeta = vec![C0; 2 * kmax + 1];
        for &(n, m) in &zeta_keys {
            check_t(2 * m + 2)?;
            let zc = cell_coeffs(&sc.zeta_at(n, m)?.field, kmax);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let c = z.powu(n as u32 + 1) * (gamma * sign * eps.powi(2 + 2 * m as i32)) * amp;
            let lz = &op.matrix * nalgebra::DVector::from_column_slice(&zc);
            for k in 0..zc.len() {
                r_zeta[k] += c * (zc[k] * jet[2 * m + 2] + lz[k] * inv2 * jet[2 * m]);
            }
        }
        for k in 0..p.len() {
            let w = 1.0 / (1.0 + layout.frequency(xi, k).powi(2));
            acc[0] += r_psi[k].norm_sqr() * w;
            acc[1] += r_zeta[k].norm_sqr() * w;
            acc[2] += (r_psi[k] + r_zeta[k]).norm_sqr() * w;
        }
    }
    let scale = 2.0 * f.half_length;
    Ok(ResidualReport {
        t,
        eps,
        ell,
        psi_part: (scale * acc[0]).sqrt(),
        zeta_part: (scale * acc[1]).sqrt(),
        total: (scale * acc[2]).sqrt(),
        source_norm: f.f2_l2() * jet[0].abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{BlochReference, DEFAULT_K};
    use crate::cell::CellGrid;
    use crate::domain::LineDomain;
    use crate::effective::{solve_effective, EffectiveSymbol, Source, Variant};
    use crate::field::CoefficientField;
    use crate::fit::loglog_fit;
    use crate::hyperbolic::{revamp_b, revamp_c};
    use crate::impulse::TimeBump;

    fn base_modes(b: &[f64], ell: usize, eps: f64, f: &Impulse, t: f64) -> ModeSolution {
        let sym = EffectiveSymbol::new(b, ell, eps, Variant::Base, 1.0).unwrap();
        solve_effective(&sym, f, Source::Plain, &[t]).unwrap()
    }

    fn impulse() -> Impulse {
        Impulse::random_band(TimeBump::default(), 8.0, 4.0, 3)
    }

    #[test]
    fn homogeneous_medium_gives_macroscopic_profile() {
        let a = CoefficientField::constant(1.0);
        let g = CellGrid::new(64);
        let sc = SpectralCorrectors::build(&a, &g, 4).unwrap();
        let hc = HyperbolicCorrectors::build(&a, &g, 4).unwrap();
        let f = impulse();
        for t in [0.5, 2.0] {
            let m = base_modes(&sc.b, 4, 0.125, &f, t);
            let s = assemble_s(4, 0.125, &sc, &m, &f, t, 8).unwrap();
            let h = assemble_h(4, 0.125, &hc, &m, t, 8).unwrap();
            for e in [&s, &h] {
                for (i, fib) in e.u.fibers.iter().enumerate() {
                    assert!((fib.coeffs[8] - m.derivative(i, 0, t).unwrap()).norm() < 1e-14);
                    assert!(fib.coeffs.iter().enumerate().all(|(k, c)| k == 8 || c.norm() < 1e-14));
                }
            }
        }
    }

    #[test]
    fn odd_time_orders_vanish() {
        let hc = HyperbolicCorrectors::build(&CoefficientField::test_field(), &CellGrid::new(128), 5).unwrap();
        for n in 0..=5 {
            for m in (1..=5 - n).step_by(2) {
                assert_eq!(hc.phi_at(n, m).max_abs(), 0.0);
            }
        }
    }

    /// First-order corrector χ' = ā/a − 1 with zero mean, by direct quadrature.
    fn classical_corrector(grid: &std::sync::Arc<CellGrid>) -> PeriodicField {
        let abar = 3f64.sqrt();
        let dchi = PeriodicField::from_fn(grid, |y| Complex64::new(abar / (2.0 + (std::f64::consts::TAU * y).sin()) - 1.0, 0.0));
        dchi.antiderivative().mean_free()
    }

    #[test]
    fn first_order_matches_hand_assembly() {
        let grid = CellGrid::new(256);
        let sc = SpectralCorrectors::build(&CoefficientField::test_field(), &grid, 3).unwrap();
        let chi = classical_corrector(&grid).coefficients(16);
        let chi_sq = classical_corrector(&grid).l2_norm().powi(2);
        let f = impulse();
        let eps = 1.0 / 16.0;
        let m = base_modes(&sc.b, 1, eps, &f, 1.5);
        let s = assemble_s(1, eps, &sc, &m, &f, 1.5, 16).unwrap();
        for (i, fib) in s.u.fibers.iter().enumerate() {
            let eta = eps * fib.xi;
            let gamma = 1.0 / (1.0 + eta * eta * chi_sq);
            let ub = m.derivative(i, 0, 1.5).unwrap();
            for (k, c) in fib.coeffs.iter().enumerate() {
                let mut want = Complex64::new(0.0, eta) * chi[k] * ub;
                if k == 16 {
                    want += ub;
                }
                assert!((c - want * gamma).norm() < 1e-11 * ub.norm().max(1e-300), "{k}: {c} vs {}", want * gamma);
            }
        }
    }

    #[test]
    fn second_order_hyperbolic_matches_hand_assembly() {
        let grid = CellGrid::new(256);
        let hc = HyperbolicCorrectors::build(&CoefficientField::test_field(), &grid, 2).unwrap();
        let chi = classical_corrector(&grid).coefficients(16);
        // φ^{2,0}' = −χ, since the m = 0 flux a(χ' + 1) − ā vanishes in one dimension.
        let phi2 = classical_corrector(&grid).scale(-1.0).antiderivative().mean_free().coefficients(16);
        let f = impulse();
        let eps = 1.0 / 16.0;
        let c = revamp_c(&hc.abar, 2);
        let sym = EffectiveSymbol::new(&revamp_b(&hc.abar, 2), 2, eps, Variant::Base, 1.0).unwrap();
        let m = solve_effective(&sym, &f, Source::Geometric(&c), &[2.5]).unwrap();
        let h = assemble_h(2, eps, &hc, &m, 2.5, 16).unwrap();
        for (i, fib) in h.u.fibers.iter().enumerate() {
            let v = m.derivative(i, 0, 2.5).unwrap();
            for (k, c) in fib.coeffs.iter().enumerate() {
                let z = Complex64::new(0.0, eps * fib.xi);
                let mut want = (z * chi[k] + z * z * phi2[k]) * v;
                if k == 16 {
                    want += v;
                }
                assert!((c - want).norm() < 1e-11 * v.norm(), "{k}");
            }
        }
    }

    #[test]
    fn norms_and_parseval() {
        let grid = CellGrid::new(128);
        let sc = SpectralCorrectors::build(&CoefficientField::test_field(), &grid, 3).unwrap();
        let f = Impulse::random_band(TimeBump::default(), 2.0, 4.0, 5);
        let eps = 0.25;
        let m = base_modes(&sc.b, 3, eps, &f, 0.6);
        let s = assemble_s(3, eps, &sc, &m, &f, 0.6, 12).unwrap();
        assert_eq!(error_norms(&s.u, &s.ut, &s).unwrap(), ErrorNorms::default());
        let d = LineDomain::new(2, eps, 32).unwrap();
        let (u, ut) = s.to_grid(&d).unwrap();
        let zero = ExpansionField { u: FiberField::zeros(eps, 2.0, 12, &f.modes.iter().map(|m| m.0).collect::<Vec<_>>()), ..s.clone() };
        let zero = ExpansionField { ut: zero.u.clone(), ..zero };
        let fib = error_norms(&s.u, &s.ut, &zero).unwrap();
        let grd = error_norms_grid(&WaveState { t: 0.6, u, v: ut }, &d, &zero).unwrap();
        assert!((fib.l2 - grd.l2).abs() <= 1e-12 * fib.l2);
        assert!((fib.energy - grd.energy).abs() <= 1e-12 * fib.energy);
        let wrong = LineDomain::new(2, 0.125, 32).unwrap();
        assert!(matches!(error_norms_grid(&WaveState { t: 0.6, u: vec![], v: vec![] }, &wrong, &s), Err(Error::GridMismatch(_))));
        assert!(matches!(assemble_s(4, eps, &sc, &m, &f, 0.6, 12), Err(Error::MissingCorrector(_))));
    }

    #[test]
    fn residual_rates_and_source_sum_after_support() {
        let a = CoefficientField::test_field();
        let grid = CellGrid::new(128);
        let sc = SpectralCorrectors::build(&a, &grid, 3).unwrap();
        let spec = CoefficientSpectrum::new(&a, DEFAULT_K);
        let f = Impulse::random_band(TimeBump::default(), 4.0, 4.0, 8);
        let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        for (ell, min) in [(1, 0.8), (3, 2.7)] {
            let r: Vec<f64> = eps
                .iter()
                .map(|&e| residual_spectral(ell, e, &sc, &spec, &base_modes(&sc.b, ell, e, &f, 0.5), &f, 0.5, 24).unwrap().total)
                .collect();
            assert!(loglog_fit(&eps, &r, 0.0).slope >= min, "{ell}: {r:?}");
        }
        let late = residual_spectral(3, 0.125, &sc, &spec, &base_modes(&sc.b, 3, 0.125, &f, 2.0), &f, 2.0, 24).unwrap();
        assert_eq!(late.zeta_part, 0.0);
    }

    #[test]
    fn first_order_error_stable_under_refinement() {
        let a = CoefficientField::test_field();
        let f = impulse();
        let eps = 1.0 / 32.0;
        let err = |n: usize, k: usize| {
            let sc = SpectralCorrectors::build(&a, &CellGrid::new(n), 1).unwrap();
            let r = BlochReference::new(&CoefficientSpectrum::new(&a, k), eps, &f, k, 12).unwrap();
            let (u, ut) = r.solve(2.0).unwrap();
            let s = assemble_s(1, eps, &sc, &base_modes(&sc.b, 1, eps, &f, 2.0), &f, 2.0, k).unwrap();
            error_norms(&u, &ut, &s).unwrap().energy
        };
        let (coarse, fine) = (err(128, 16), err(512, DEFAULT_K));
        assert!((coarse / fine - 1.0).abs() < 0.02, "{coarse} {fine}");
    }
}
