//! Hyperbolic (space-time) corrector hierarchy in one space dimension and the
//! revamped coefficients b̄ᵖ, c̄ᵖ obtained from it by index-set enumeration.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::cell::{solve_elliptic_sampled, solve_poisson, CellGrid, PeriodicField};
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::spectral::CompatLog;
use crate::tensor::SymTensorField;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Tolerance for the divergence of the modified m = 0 fluxes.
const TOL_DIVERGENCE: f64 = 1e-9;

/// The hyperbolic hierarchy up to total order `ell` (n + m ≤ ell).
#[derive(Clone, Debug)]
pub struct HyperbolicCorrectors {
    pub ell: usize,
    pub grid: Arc<CellGrid>,
    pub a: PeriodicField,
    /// φ^{n,m} for n + m ≤ ell.
    pub phi: BTreeMap<(usize, usize), SymTensorField>,
    /// ā^{n,m} for n ≥ 1, n + m ≤ ell.
    pub abar: BTreeMap<(usize, usize), f64>,
    /// q^{n,m} for n + m ≤ ell.
    pub q: BTreeMap<(usize, usize), PeriodicField>,
    /// σ^{n,m}; identically zero for m = 0 in one dimension.
    pub sigma_h: BTreeMap<(usize, usize), PeriodicField>,
    pub compat: CompatLog,
}

impl HyperbolicCorrectors {
    /// Build φ, ā, q for n + m ≤ ell and the flux correctors.
    pub fn build(a: &CoefficientField, grid: &Arc<CellGrid>, ell: usize) -> Result<Self> {
        Self::build_sampled(&PeriodicField::sample(grid, a), ell)
    }

    pub fn build_sampled(af: &PeriodicField, ell: usize) -> Result<Self> {
        let mut hc = build_phi_a(af, ell)?;
        build_sigma_hyp(&mut hc)?;
        Ok(hc)
    }

    /// φ^{n,m} (zero outside the stored range).
    pub fn phi_at(&self, n: usize, m: usize) -> PeriodicField {
        self.phi
            .get(&(n, m))
            .map(|t| t.field.clone())
            .unwrap_or_else(|| PeriodicField::zeros(&self.grid))
    }

    /// ā^{n,m} (zero outside the stored range).
    pub fn abar_at(&self, n: usize, m: usize) -> f64 {
        self.abar.get(&(n, m)).copied().unwrap_or(0.0)
    }

    /// Symmetry relation ā^{n,m} = (−1)^{n+1} ā^{n,m} (d = 1 form) and vanishing of
    /// the quadratic form for even n, for n ≤ nmax, m ≤ mmax.
    pub fn check_symmetry(&self, nmax: usize, mmax: usize) -> Result<SymmetryReport> {
        let scale = self.abar.values().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut entries = Vec::new();
        for n in 1..=nmax {
            for m in 0..=mmax {
                if n + m > self.ell {
                    continue;
                }
                let v = self.abar_at(n, m);
                let sign = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
                let residual = (v - sign * v).abs() / scale;
                entries.push(SymmetryEntry { n, m, value: v, residual });
            }
        }
        let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
        if let Some(e) = entries.iter().find(|e| e.residual > 1e-9) {
            return Err(Error::SymmetryViolation { n: e.n, m: e.m, residual: e.residual });
        }
        Ok(SymmetryReport { entries, max_residual })
    }

    /// Dispersion relation of the geometric effective equation for a plane wave:
    /// returns ω with −ω² − Σ ā^{n,m} ε^{n+m−1} (iξ)^{n+1} (iω)^m = 0, found by
    /// Newton iteration from ω = √ā ξ.
    pub fn dispersion_omega(&self, xi: f64, eps: f64) -> f64 {
        let g = |w: f64| {
            let mut s = -w * w;
            let mut ds = -2.0 * w;
            for (&(n, m), &v) in &self.abar {
                let x = Complex64::new(0.0, xi).powu(n as u32 + 1);
                let e = eps.powi((n + m) as i32 - 1);
                let wm = Complex64::new(0.0, w).powu(m as u32);
                s -= (v * e * x * wm).re;
                if m >= 1 {
                    let dwm = Complex64::new(0.0, 1.0) * m as f64 * Complex64::new(0.0, w).powu(m as u32 - 1);
                    ds -= (v * e * x * dwm).re;
                }
            }
            (s, ds)
        };
        let mut w = self.abar_at(1, 0).sqrt() * xi;
        for _ in 0..100 {
            let (s, ds) = g(w);
            let step = s / ds;
            w -= step;
            if step.abs() <= 1e-16 * w.abs().max(1e-300) {
                break;
            }
        }
        w
    }

    /// Plane-wave residual of the hyperbolic expansion: applies the wave operator to
    /// H^ℓ[e^{i(ξx+ωt)}] with ω from [`dispersion_omega`](Self::dispersion_omega)
    /// and compares with the boundary terms left after the corrector equations cancel.
    pub fn plane_wave_residual(&self, xi: f64, eps: f64) -> PlaneWaveResidual {
        let omega = self.dispersion_omega(xi, eps);
        let x = Complex64::new(0.0, xi);
        let w = Complex64::new(0.0, omega);
        let ell = self.ell;
        let grid = &self.grid;
        let a = &self.a;
        let mono = |n: usize, m: usize| x.powu(n as u32) * w.powu(m as u32);
        // Cell profile h of the expansion.
        let mut h = PeriodicField::zeros(grid);
        for (&(n, m), f) in &self.phi {
            h.axpy(mono(n, m) * eps.powi((n + m) as i32), &f.field);
        }
        let residual = shifted_operator(a, &h, eps * xi).scale(1.0 / (eps * eps)).add(&h.scale(w * w));
        let phi = |n: i64, m: i64| {
            if n < 0 || m < 0 || (n + m) as usize > ell {
                PeriodicField::zeros(grid)
            } else {
                self.phi_at(n as usize, m as usize)
            }
        };
        let q = |n: i64, m: i64| {
            if n < 0 || m < 0 {
                PeriodicField::zeros(grid)
            } else {
                self.q.get(&(n as usize, m as usize)).cloned().unwrap_or_else(|| PeriodicField::zeros(grid))
            }
        };
        let mut predicted = PeriodicField::zeros(grid);
        for n in 0..=(ell + 2) as i64 {
            for m in (0..=(ell + 2) as i64).step_by(2) {
                let total = (n + m) as usize;
                let coef = mono(n as usize, m as usize);
                if total == ell + 1 {
                    let t = a.mul(&phi(n - 1, m)).grad().add(&q(n - 1, m)).scale(-1.0);
                    predicted.axpy(coef * eps.powi(ell as i32 - 1), &t);
                } else if total == ell + 2 {
                    let t = phi(n, m - 2).sub(&a.mul(&phi(n - 2, m)));
                    predicted.axpy(coef * eps.powi(ell as i32), &t);
                }
            }
        }
        let diff = residual.sub(&predicted);
        PlaneWaveResidual {
            omega,
            residual_hm1: bloch_hm1_norm(&residual, xi, eps),
            residual_l2: residual.l2_norm(),
            predicted_hm1: bloch_hm1_norm(&predicted, xi, eps),
            identity_abs: bloch_hm1_norm(&diff, xi, eps),
        }
    }
}

/// −(∂_y + iη) a (∂_y + iη) h on the cell.
pub fn shifted_operator(a: &PeriodicField, h: &PeriodicField, eta: f64) -> PeriodicField {
    let ie = Complex64::new(0.0, eta);
    let d = |f: &PeriodicField| f.grad().add(&f.scale(ie));
    d(&a.mul(&d(h))).scale(-1.0)
}

/// H⁻¹ norm (per unit length) of x ↦ e^{iξx} r(x/ε).
pub fn bloch_hm1_norm(r: &PeriodicField, xi: f64, eps: f64) -> f64 {
    let co = r.coefficient_vec();
    let half = r.grid().n() as i64 / 2;
    co.iter()
        .enumerate()
        .map(|(i, c)| {
            let k = i as i64 - half;
            let kk = xi + 2.0 * std::f64::consts::PI * k as f64 / eps;
            c.norm_sqr() / (1.0 + kk * kk)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct PlaneWaveResidual {
    pub omega: f64,
    /// H⁻¹ norm of the residual.
    pub residual_hm1: f64,
    pub residual_l2: f64,
    /// H⁻¹ norm of the predicted boundary terms.
    pub predicted_hm1: f64,
    /// H⁻¹ norm of residual minus predicted boundary terms. The wave operator is
    /// applied directly, so this carries a round-off floor of order ε⁻²·N²·1e-16.
    pub identity_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryEntry {
    pub n: usize,
    pub m: usize,
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub entries: Vec<SymmetryEntry>,
    pub max_residual: f64,
}

/// φ^{n,m}, ā^{n,m}, q^{n,m} for n + m ≤ ell.
///
/// −(aφ^{n,m}′)′ = (aφ^{n−1,m})′ + q^{n−1,m}, ā^{n,m} = E[a(φ^{n,m}′ + φ^{n−1,m})],
/// q^{n,m} = a(φ^{n,m}′ + φ^{n−1,m}) − φ^{n+1,m−2} − ā^{n,m}, q^{0,m} = −φ^{1,m−2}.
/// Families are built in increasing m so that φ^{n+1,m−2} is available.
pub fn build_phi_a(af: &PeriodicField, ell: usize) -> Result<HyperbolicCorrectors> {
    assert!(ell >= 1, "ell must be at least 1");
    let grid = af.grid().clone();
    let zero = PeriodicField::zeros(&grid);
    let one = PeriodicField::constant(&grid, Complex64::new(1.0, 0.0));
    let mut phi: BTreeMap<(usize, usize), PeriodicField> = BTreeMap::new();
    let mut abar = BTreeMap::new();
    let mut q: BTreeMap<(usize, usize), PeriodicField> = BTreeMap::new();
    let mut log = CompatLog::default();
    let get = |map: &BTreeMap<(usize, usize), PeriodicField>, n: i64, m: i64| {
        if n < 0 || m < 0 {
            zero.clone()
        } else {
            map.get(&(n as usize, m as usize)).cloned().unwrap_or_else(|| zero.clone())
        }
    };
    for m in 0..=ell {
        for n in 0..=(ell - m) {
            let (ni, mi) = (n as i64, m as i64);
            if n == 0 {
                phi.insert((0, m), if m == 0 { one.clone() } else { zero.clone() });
                q.insert((0, m), get(&phi, 1, mi - 2).scale(-1.0));
                continue;
            }
            let rhs = af.mul(&get(&phi, ni - 1, mi)).grad().add(&get(&q, ni - 1, mi));
            log.check(format!("phi[{n}][{m}]"), &rhs)?;
            let f = solve_elliptic_sampled(af, &rhs, ZERO)?.real_part();
            phi.insert((n, m), f);
            let flux = af.mul(&get(&phi, ni, mi).grad().add(&get(&phi, ni - 1, mi)));
            let ab = flux.mean().re;
            abar.insert((n, m), ab);
            q.insert((n, m), flux.sub(&get(&phi, ni + 1, mi - 2)).add_constant(Complex64::new(-ab, 0.0)));
        }
    }
    Ok(HyperbolicCorrectors {
        ell,
        grid,
        a: af.clone(),
        phi: phi.into_iter().map(|((n, m), f)| ((n, m), SymTensorField::new(n, f))).collect(),
        abar,
        q,
        sigma_h: BTreeMap::new(),
        compat: log,
    })
}

/// Flux correctors: −Φ″ = q^{n,m}, σ = Φ′ for m ≥ 1; for m = 0 the modified
/// fluxes q̃^{n,0} are checked to be divergence free, which in one dimension
/// forces σ^{n,0} = 0.
pub fn build_sigma_hyp(hc: &mut HyperbolicCorrectors) -> Result<()> {
    let modified = modified_hierarchy_m0(&hc.a, hc.ell)?;
    let grid = hc.grid.clone();
    let mut sigma = BTreeMap::new();
    for (&(n, m), qf) in &hc.q {
        if m == 0 {
            // Divergence-free and mean-free in one dimension means identically zero.
            if n >= 1 {
                let qt = &modified.q_tilde[n];
                let div = qt.grad().l2_norm();
                let scale = hc.a.l2_norm();
                if div > TOL_DIVERGENCE * scale || qt.mean().norm() > TOL_DIVERGENCE * scale {
                    return Err(Error::NonDivergenceFree { n, residual: div });
                }
            }
            sigma.insert((n, m), PeriodicField::zeros(&grid));
            continue;
        }
        hc.compat.check_scaled(format!("sigma_h[{n}][{m}]"), qf, hc.a.l2_norm() * 1e-6)?;
        sigma.insert((n, m), solve_poisson(&qf.mean_free(), ZERO)?.grad());
    }
    hc.sigma_h = sigma;
    Ok(())
}

/// The modified m = 0 hierarchy: φ̃⁰ = 1, −(aφ̃ⁿ′)′ = (aφ̃ⁿ⁻¹)′ + q̃ⁿ⁻¹ with
/// q̃ⁿ = a(φ̃ⁿ′ + φ̃ⁿ⁻¹) − ãⁿ − ∂σⁿ⁻¹ and σ ≡ 0 (skew-symmetric in one dimension).
#[derive(Clone, Debug)]
pub struct ModifiedHierarchy {
    pub phi_tilde: Vec<PeriodicField>,
    pub a_tilde: Vec<f64>,
    pub q_tilde: Vec<PeriodicField>,
}

pub fn modified_hierarchy_m0(af: &PeriodicField, ell: usize) -> Result<ModifiedHierarchy> {
    let grid = af.grid().clone();
    let zero = PeriodicField::zeros(&grid);
    let mut phi = vec![PeriodicField::constant(&grid, Complex64::new(1.0, 0.0))];
    let mut at = vec![0.0];
    let mut qt = vec![zero.clone()];
    let mut log = CompatLog::default();
    for n in 1..=ell {
        let rhs = af.mul(&phi[n - 1]).grad().add(&qt[n - 1]);
        log.check(format!("phi_tilde[{n}]"), &rhs)?;
        phi.push(solve_elliptic_sampled(af, &rhs, ZERO)?.real_part());
        let prev = if n >= 1 { phi[n - 1].clone() } else { zero.clone() };
        let flux = af.mul(&phi[n].grad().add(&prev));
        let a = flux.mean().re;
        at.push(a);
        qt.push(flux.add_constant(Complex64::new(-a, 0.0)));
    }
    Ok(ModifiedHierarchy { phi_tilde: phi, a_tilde: at, q_tilde: qt })
}

/// I_k: m ∈ ℕᵏ with |m| = 2(k−1) and Σ_{j≤s} m_j ≥ 2s for s < k.
pub fn enumerate_i(k: usize) -> Vec<Vec<usize>> {
    assert!(k >= 1);
    let total = 2 * (k - 1);
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(k: usize, total: usize, cur: &mut Vec<usize>, sum: usize, out: &mut Vec<Vec<usize>>) {
        let s = cur.len();
        if s == k {
            if sum == total {
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=(total - sum) {
            let ns = sum + v;
            // Partial-sum constraint for prefixes of length s + 1 < k.
            if s + 1 < k && ns < 2 * (s + 1) {
                continue;
            }
            cur.push(v);
            rec(k, total, cur, ns, out);
            cur.pop();
        }
    }
    rec(k, total, &mut cur, 0, &mut out);
    out
}

/// J_k: m ∈ ℕᵏ with Σ_{j≤s} m_j ≥ 2s for all s ≤ k and m_j ≤ caps[j].
pub fn enumerate_j(k: usize, caps: &[usize]) -> Vec<Vec<usize>> {
    assert!(k >= 1 && caps.len() >= k);
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(k: usize, caps: &[usize], cur: &mut Vec<usize>, sum: usize, out: &mut Vec<Vec<usize>>) {
        let s = cur.len();
        if s == k {
            out.push(cur.clone());
            return;
        }
        for v in 0..=caps[s] {
            if sum + v < 2 * (s + 1) {
                continue;
            }
            cur.push(v);
            rec(k, caps, cur, sum + v, out);
            cur.pop();
        }
    }
    rec(k, caps, &mut cur, 0, &mut out);
    out
}

/// Compositions of `total` into `k` positive parts.
pub fn compositions(total: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || total < k {
        return out;
    }
    let mut cur = Vec::with_capacity(k);
    fn rec(left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        let remaining = k - cur.len() - 1;
        for v in 1..=(left - remaining) {
            cur.push(v);
            rec(left - v, k, cur, out);
            cur.pop();
        }
    }
    rec(total, k, &mut cur, &mut out);
    out
}

/// Revamped b̄ᵖ (1 ≤ p ≤ ell; index 0 unused):
/// Σ_k Σ_{m∈I_k} Σ_{n_j ≥ 1, k+|n| = p+1} Π_j ā^{n_j,m_j}.
pub fn revamp_b(abar: &BTreeMap<(usize, usize), f64>, ell: usize) -> Vec<f64> {
    let ab = |n: usize, m: usize| abar.get(&(n, m)).copied().unwrap_or(0.0);
    let mut out = vec![0.0; ell + 1];
    for (p, slot) in out.iter_mut().enumerate().skip(1) {
        let mut s = 0.0;
        for k in 1..=p {
            for m in enumerate_i(k) {
                for n in compositions(p + 1 - k, k) {
                    s += (0..k).map(|j| ab(n[j], m[j])).product::<f64>();
                }
            }
        }
        *slot = s;
    }
    out
}

/// One monomial of c̄ᵖ in the symbol calculus: `coef · ∂ₜ^{dt} (iξ)^{dx}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CTerm {
    pub dt: usize,
    pub dx: usize,
    pub coef: f64,
}

/// c̄ᵖ for 1 ≤ p ≤ ell − 2 as lists of monomials (index 0 and p > ell − 2 empty).
///
/// c̄ᵖ = Σ_k Σ_{m∈J_k, m_j ≤ ell} Σ_{n_j ≥ 1, |n|+|m| = p+k+1, n_j+m_j ≤ ell}
/// ∂ₜ^{|m|−2k} Π_j ā^{n_j,m_j} (iξ)^{n_j+1}.
pub fn revamp_c(abar: &BTreeMap<(usize, usize), f64>, ell: usize) -> Vec<Vec<CTerm>> {
    let ab = |n: usize, m: usize| abar.get(&(n, m)).copied().unwrap_or(0.0);
    let mut out = vec![Vec::new(); ell.max(2) - 1];
    for (p, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for k in 1..=p + 1 {
            let caps = vec![ell; k];
            for m in enumerate_j(k, &caps) {
                let msum: usize = m.iter().sum();
                if msum % 2 == 1 || m.iter().any(|v| v % 2 == 1) || p + k + 1 < msum {
                    continue;
                }
                let tot = p + k + 1 - msum;
                for n in compositions(tot, k) {
                    if (0..k).any(|j| n[j] + m[j] > ell) {
                        continue;
                    }
                    let v: f64 = (0..k).map(|j| ab(n[j], m[j])).product();
                    if v == 0.0 {
                        continue;
                    }
                    let dx: usize = n.iter().map(|x| x + 1).sum();
                    *acc.entry((msum - 2 * k, dx)).or_insert(0.0) += v;
                }
            }
        }
        *slot = acc.into_iter().map(|((dt, dx), coef)| CTerm { dt, dx, coef }).collect();
    }
    out
}

/// Per-p relative difference |b_spec − b_rev| / max(|b_spec|, |b_rev|, floor·|b̄¹|).
pub fn crosscheck_b(spectral_b: &[f64], revamped_b: &[f64]) -> Vec<f64> {
    let n = spectral_b.len().min(revamped_b.len());
    let floor = spectral_b.get(1).copied().unwrap_or(1.0).abs() * 1e-6;
    (1..n)
        .map(|p| {
            let d = (spectral_b[p] - revamped_b[p]).abs();
            d / spectral_b[p].abs().max(revamped_b[p].abs()).max(floor)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralCorrectors;
    use approx::assert_abs_diff_eq;

    fn test_hc(ell: usize) -> HyperbolicCorrectors {
        HyperbolicCorrectors::build(&CoefficientField::test_field(), &CellGrid::new(512), ell).unwrap()
    }

    #[test]
    fn homogeneous_medium() {
        let hc = HyperbolicCorrectors::build(&CoefficientField::constant(1.0), &CellGrid::new(64), 6).unwrap();
        assert_abs_diff_eq!(hc.abar_at(1, 0), 1.0, epsilon = 1e-14);
        for (&(n, m), f) in &hc.phi {
            if (n, m) != (0, 0) {
                assert!(f.field.max_abs() < 1e-14);
            }
        }
        for (&(n, m), &v) in &hc.abar {
            if (n, m) != (1, 0) {
                assert!(v.abs() < 1e-14);
            }
        }
        assert!(hc.sigma_h.values().all(|s| s.max_abs() < 1e-14));
    }

    #[test]
    fn structure_of_test_field_hierarchy() {
        let hc = test_hc(7);
        assert_abs_diff_eq!(hc.abar_at(1, 0), 3f64.sqrt(), epsilon = 1e-9);
        assert!(hc.phi[&(0, 0)].field.sub(&PeriodicField::constant(&hc.grid, Complex64::new(1.0, 0.0))).max_abs() == 0.0);
        for (&(n, m), f) in &hc.phi {
            if m % 2 == 1 || (n == 0 && m >= 1) {
                assert!(f.field.max_abs() == 0.0, "phi[{n}][{m}]");
            }
            if n >= 1 {
                assert!(f.field.mean().norm() < 1e-14);
            }
        }
        for (&(n, m), &v) in &hc.abar {
            if m % 2 == 1 {
                assert!(v == 0.0, "abar[{n}][{m}]");
            }
        }
        for qf in hc.q.values() {
            assert!(qf.mean().norm() < 1e-13);
        }
        // ā^{3,0} = 0 in one dimension, so ā^{1,2} = b̄³ / b̄¹.
        assert_abs_diff_eq!(hc.abar_at(1, 2), 0.0064167707258506075 / 3f64.sqrt(), epsilon = 1e-12);
        assert!(hc.compat.max_ratio() < 1e-9);
        let rep = hc.check_symmetry(4, 2).unwrap();
        assert!(rep.max_residual < 1e-9);
    }

    #[test]
    fn phi_m0_matches_elliptic_and_modified_hierarchy() {
        let hc = test_hc(6);
        let sc = SpectralCorrectors::build(&CoefficientField::test_field(), &CellGrid::new(512), 6).unwrap();
        let md = modified_hierarchy_m0(&hc.a, 6).unwrap();
        for n in 1..=6 {
            // In one dimension the m = 0 hyperbolic corrector is the classical
            // elliptic corrector: φ^{1,0} = ψ¹ and higher orders vanish.
            let phi = hc.phi_at(n, 0);
            assert!(phi.sub(&md.phi_tilde[n]).max_abs() < 1e-12);
            if n == 1 {
                assert!(phi.sub(&sc.psi[1].field).max_abs() < 1e-12);
            }
            assert!(md.q_tilde[n].max_abs() < 1e-10);
        }
    }

    #[test]
    fn index_sets() {
        assert_eq!(enumerate_i(1), vec![vec![0]]);
        assert_eq!(enumerate_i(2), vec![vec![2, 0]]);
        assert_eq!(enumerate_i(3), vec![vec![2, 2, 0], vec![3, 1, 0], vec![4, 0, 0]]);
        assert_eq!(enumerate_j(1, &[4]), vec![vec![2], vec![3], vec![4]]);
        assert_eq!(compositions(3, 2), vec![vec![1, 2], vec![2, 1]]);
        // Brute force for I_3 against the definition.
        let mut brute = Vec::new();
        for a in 0..=4 {
            for b in 0..=4 {
                for c in 0..=4 {
                    if a + b + c == 4 && a >= 2 && a + b >= 4 {
                        brute.push(vec![a, b, c]);
                    }
                }
            }
        }
        assert_eq!(enumerate_i(3), brute);
    }

    #[test]
    fn revamped_b_matches_spectral() {
        let hc = test_hc(7);
        let sc = SpectralCorrectors::build(&CoefficientField::test_field(), &CellGrid::new(512), 7).unwrap();
        let rb = revamp_b(&hc.abar, 7);
        assert_abs_diff_eq!(rb[1], hc.abar_at(1, 0), epsilon = 1e-15);
        assert_abs_diff_eq!(rb[3], hc.abar_at(3, 0) + hc.abar_at(1, 2) * hc.abar_at(1, 0), epsilon = 1e-16);
        let diffs = crosscheck_b(&sc.b, &rb);
        for (p, d) in diffs.iter().enumerate().take(6) {
            assert!(*d < 1e-8, "p = {}: {d} {} {}", p + 1, sc.b[p + 1], rb[p + 1]);
        }
        // A perturbed coefficient is caught.
        let mut bad = sc.b.clone();
        bad[3] *= 1.01;
        assert!(crosscheck_b(&bad, &rb)[2] > 1e-3);
    }

    #[test]
    fn revamped_c_low_order() {
        let hc = test_hc(5);
        let c = revamp_c(&hc.abar, 5);
        assert_eq!(c.len(), 4);
        // c̄¹: k = 1, m = (2), n = (1): ā^{1,2} (iξ)²; no time derivative.
        assert_eq!(c[1].len(), 1);
        assert_eq!((c[1][0].dt, c[1][0].dx), (0, 2));
        assert_abs_diff_eq!(c[1][0].coef, hc.abar_at(1, 2), epsilon = 1e-18);
        let none = revamp_c(&hc.abar, 2);
        assert!(none.iter().all(|v| v.is_empty()));
    }

    #[test]
    fn plane_wave_residual_identity() {
        for ell in [2, 3, 4] {
            let hc = HyperbolicCorrectors::build(&CoefficientField::test_field(), &CellGrid::new(64), ell).unwrap();
            let mut prev = f64::NAN;
            for inv in [16.0, 32.0, 64.0] {
                let r = hc.plane_wave_residual(1.3, 1.0 / inv);
                assert!(r.identity_abs < 1e-10, "ell {ell}: {}", r.identity_abs);
                if prev.is_finite() {
                    let rate = (prev / r.residual_hm1).log2();
                    assert!(rate > ell as f64 - 0.3, "ell {ell}: rate {rate}");
                }
                prev = r.residual_hm1;
            }
        }
    }
}
