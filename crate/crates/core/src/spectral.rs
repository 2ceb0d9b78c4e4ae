//! Spectral (Taylor–Bloch) corrector hierarchy in one space dimension.
//!
//! Real tensor components are built by the recursion obtained from the
//! ξ-level equations after factoring out powers of iξ. A second, complex
//! path ([`XiHierarchy`]) solves the ξ-level equations directly and serves
//! as a cross-check of the sign bookkeeping.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::cell::{fredholm_ratio, solve_elliptic_sampled, solve_poisson, CellGrid, PeriodicField, TOL_FREDHOLM};
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::tensor::SymTensorField;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Relative mean of a right-hand side recorded before a solve.
#[derive(Clone, Debug, Serialize)]
pub struct CompatRecord {
    pub label: String,
    pub ratio: f64,
}

/// Log of Fredholm compatibility checks made during a build.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CompatLog {
    pub records: Vec<CompatRecord>,
}

impl CompatLog {
    /// Record the relative mean of `rhs` and fail if it exceeds the Fredholm tolerance.
    pub fn check(&mut self, label: impl Into<String>, rhs: &PeriodicField) -> Result<()> {
        self.check_scaled(label, rhs, 0.0)
    }

    /// As [`check`](Self::check), measuring the mean against `max(‖rhs‖, scale)`.
    ///
    /// `scale` is the size of the terms that cancel to form the right-hand side,
    /// so that a right-hand side at round-off level is not reported as incompatible.
    pub fn check_scaled(&mut self, label: impl Into<String>, rhs: &PeriodicField, scale: f64) -> Result<()> {
        let label = label.into();
        let norm = rhs.l2_norm();
        let ratio = if norm >= scale { fredholm_ratio(rhs) } else { rhs.mean().norm() / scale };
        let mean = rhs.mean().norm();
        self.records.push(CompatRecord { label: label.clone(), ratio });
        if ratio > TOL_FREDHOLM && mean > 1e-15 {
            return Err(Error::IncompatibleRhs { context: label, mean, norm: rhs.l2_norm() });
        }
        Ok(())
    }

    /// Largest recorded ratio.
    pub fn max_ratio(&self) -> f64 {
        self.records.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn extend(&mut self, other: &CompatLog) {
        self.records.extend(other.records.iter().cloned());
    }
}

/// The complete spectral hierarchy up to order `ell`.
#[derive(Clone, Debug)]
pub struct SpectralCorrectors {
    pub ell: usize,
    pub grid: Arc<CellGrid>,
    /// Coefficient sampled on the cell grid.
    pub a: PeriodicField,
    /// ψⁿ for 0 ≤ n ≤ ell.
    pub psi: Vec<SymTensorField>,
    /// b̄ⁿ for 1 ≤ n ≤ ell; index 0 holds 0.
    pub b: Vec<f64>,
    /// σⁿ for 0 ≤ n ≤ ell.
    pub sigma: Vec<SymTensorField>,
    /// ρⁿ for 2 ≤ n ≤ ell.
    pub rho: BTreeMap<usize, SymTensorField>,
    /// ζ^{n,m} for n + 2m ≤ ell − 3.
    pub zeta: BTreeMap<(usize, usize), SymTensorField>,
    /// τ^{n,m}, including the n = −1 slot for m ≥ 1.
    pub tau: BTreeMap<(i64, usize), SymTensorField>,
    pub compat: CompatLog,
    gram: Vec<Vec<f64>>,
}

fn sample(grid: &Arc<CellGrid>, a: &CoefficientField) -> PeriodicField {
    PeriodicField::sample(grid, a)
}

/// ψⁿ (0 ≤ n ≤ ell) and b̄ⁿ (1 ≤ n ≤ ell, index 0 unused).
pub fn build_psi_b(
    a: &PeriodicField,
    ell: usize,
    log: &mut CompatLog,
) -> Result<(Vec<PeriodicField>, Vec<f64>)> {
    assert!(ell >= 1, "ell must be at least 1");
    let grid = a.grid().clone();
    let zero = PeriodicField::zeros(&grid);
    let mut psi = vec![PeriodicField::constant(&grid, c(1.0))];
    let mut b = vec![0.0];
    let p = |psi: &Vec<PeriodicField>, n: i64| if n < 0 { zero.clone() } else { psi[n as usize].clone() };
    let flux = |psi: &Vec<PeriodicField>, n: i64| a.mul(&p(psi, n).grad().add(&p(psi, n - 1)));
    for n in 1..=ell as i64 {
        if n >= 2 {
            b.push(flux(&psi, n - 1).mean().re);
        }
        let mut rhs = a.mul(&p(&psi, n - 1)).grad().add(&flux(&psi, n - 1));
        for k in 2..=n {
            rhs.axpy(c(-b[(k - 1) as usize]), &psi[(n - k) as usize]);
        }
        log.check(format!("psi[{n}]"), &rhs)?;
        psi.push(solve_elliptic_sampled(a, &rhs, ZERO)?.real_part());
    }
    b.push(flux(&psi, ell as i64).mean().re);
    Ok((psi, b))
}

/// Σ_{n=2}^{ell} λ̌ⁿ_ξ = Σ_{k=1}^{ell−1} ξ² b̄ᵏ (iξ)^{k−1} (real part).
pub fn lambda_taylor(b: &[f64], xi: f64, ell: usize) -> f64 {
    let z = Complex64::new(0.0, xi);
    let mut s = ZERO;
    for k in 1..ell.min(b.len()) {
        s += b[k] * z.powu(k as u32 - 1);
    }
    xi * xi * s.re
}

/// σⁿ for 0 ≤ n ≤ ell: −Φ″ = a(ψⁿ′ + ψⁿ⁻¹) − Σ_{k=2}^{n+1} b̄^{k−1}ψ^{n+1−k}, σ = Φ′.
pub fn build_flux_sigma(
    a: &PeriodicField,
    psi: &[PeriodicField],
    b: &[f64],
    log: &mut CompatLog,
) -> Result<Vec<PeriodicField>> {
    let grid = a.grid().clone();
    let ell = psi.len() - 1;
    let mut out = Vec::with_capacity(ell + 1);
    for n in 0..=ell {
        let mut rhs = psi[n].grad();
        if n >= 1 {
            rhs = rhs.add(&psi[n - 1]);
        }
        let mut rhs = a.mul(&rhs);
        let scale = rhs.l2_norm();
        for k in 2..=n + 1 {
            rhs.axpy(c(-b[k - 1]), &psi[n + 1 - k]);
        }
        if n == 0 {
            rhs = PeriodicField::zeros(&grid);
        }
        log.check_scaled(format!("sigma[{n}]"), &rhs, scale)?;
        out.push(solve_poisson(&rhs, ZERO)?.grad());
    }
    Ok(out)
}

/// ρⁿ for 2 ≤ n ≤ ell: −Ψ″ = ψⁿ⁻¹, ρ = Ψ′.
pub fn build_rho(psi: &[PeriodicField], log: &mut CompatLog) -> Result<BTreeMap<usize, PeriodicField>> {
    let ell = psi.len() - 1;
    let mut out = BTreeMap::new();
    for n in 2..=ell {
        log.check(format!("rho[{n}]"), &psi[n - 1])?;
        out.insert(n, solve_poisson(&psi[n - 1], ZERO)?.grad());
    }
    Ok(out)
}

/// S_p = Σ_{k=0}^{p} (−1)^{p−k} E[ψ^{p−k}ψ^k].
fn s_term(psi: &[PeriodicField], p: usize) -> f64 {
    (0..=p)
        .map(|k| {
            let sign = if (p - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * psi[p - k].mul(&psi[k]).mean().re
        })
        .sum()
}

/// ζ^{n,m} for n + 2m ≤ ell − 3.
///
/// Each family m is built up to n = ell − 1 − 2m. The integration constant of
/// ζ^{n−2,m} is fixed while building level n as the unique value making the
/// level-n right-hand side mean-free: adding c to ζ^{n−2,m} adds cψ¹ to
/// ζ^{n−1,m} and shifts that mean by c·b̄¹.
pub fn build_zeta(
    a: &PeriodicField,
    psi: &[PeriodicField],
    b: &[f64],
    ell: usize,
    log: &mut CompatLog,
) -> Result<BTreeMap<(usize, usize), PeriodicField>> {
    let grid = a.grid().clone();
    let zero = PeriodicField::zeros(&grid);
    let mut all: BTreeMap<(usize, usize), PeriodicField> = BTreeMap::new();
    if ell < 3 {
        return Ok(all);
    }
    let get = |z: &BTreeMap<(usize, usize), PeriodicField>, n: i64, m: usize| {
        if n < 0 {
            zero.clone()
        } else {
            z.get(&(n as usize, m)).cloned().unwrap_or_else(|| zero.clone())
        }
    };
    let psi_at = |n: usize| if n < psi.len() { psi[n].clone() } else { zero.clone() };
    let mut m = 0;
    while 2 * m + 3 <= ell {
        let top = ell - 1 - 2 * m;
        for n in 0..=top {
            let rhs = |z: &BTreeMap<(usize, usize), PeriodicField>| -> PeriodicField {
                let zm1 = get(z, n as i64 - 1, m);
                let zm2 = get(z, n as i64 - 2, m);
                let mut r = a.mul(&zm1).grad().add(&a.mul(&zm1.grad().add(&zm2)));
                if m == 0 {
                    r = r.sub(&psi_at(n + 1)).add_constant(c(s_term(psi, n + 1)));
                } else {
                    r = r.add(&get(z, n as i64, m - 1));
                }
                r
            };
            let mut r = rhs(&all);
            if n >= 2 {
                let shift = -r.mean().re / b[1];
                let k2 = (n - 2, m);
                let v = all[&k2].add_constant(c(shift));
                all.insert(k2, v);
                let k1 = (n - 1, m);
                let mut v = all[&k1].clone();
                v.axpy(c(shift), &psi[1]);
                all.insert(k1, v);
                r = rhs(&all);
            }
            log.check(format!("zeta[{n}][{m}]"), &r)?;
            let z = solve_elliptic_sampled(a, &r.mean_free(), ZERO)?.real_part();
            all.insert((n, m), z);
        }
        m += 1;
    }
    Ok(all.into_iter().filter(|((n, m), _)| n + 2 * m + 3 <= ell).collect())
}

/// τ^{n,m}: m = 0 from the mean-free flux of ζ^{n,0}; m ≥ 1 (including n = −1)
/// from the flux of ζ^{n,m} plus ζ^{n+1,m−1}.
pub fn build_tau(
    a: &PeriodicField,
    zeta: &BTreeMap<(usize, usize), PeriodicField>,
    ell: usize,
    log: &mut CompatLog,
) -> Result<BTreeMap<(i64, usize), PeriodicField>> {
    let grid = a.grid().clone();
    let zero = PeriodicField::zeros(&grid);
    let get = |n: i64, m: usize| {
        if n < 0 {
            zero.clone()
        } else {
            zeta.get(&(n as usize, m)).cloned().unwrap_or_else(|| zero.clone())
        }
    };
    let mut out = BTreeMap::new();
    if ell < 3 {
        return Ok(out);
    }
    let mut m = 0usize;
    while 2 * m + 3 <= ell {
        let start: i64 = if m == 0 { 0 } else { -1 };
        let mut n = start;
        while n + 2 * m as i64 + 3 <= ell as i64 {
            let flux = a.mul(&get(n, m).grad().add(&get(n - 1, m)));
            let rhs = if m == 0 { flux.mean_free() } else { flux.add(&get(n + 1, m - 1)) };
            log.check(format!("tau[{n}][{m}]"), &rhs)?;
            out.insert((n, m), solve_poisson(&rhs, ZERO)?.grad());
            n += 1;
        }
        m += 1;
    }
    Ok(out)
}

impl SpectralCorrectors {
    /// Build every family up to order `ell` on `grid`.
    pub fn build(a: &CoefficientField, grid: &Arc<CellGrid>, ell: usize) -> Result<Self> {
        let af = sample(grid, a);
        Self::build_sampled(&af, ell)
    }

    pub fn build_sampled(af: &PeriodicField, ell: usize) -> Result<Self> {
        let grid = af.grid().clone();
        let mut log = CompatLog::default();
        let (psi, b) = build_psi_b(af, ell, &mut log)?;
        let sigma = build_flux_sigma(af, &psi, &b, &mut log)?;
        let rho = build_rho(&psi, &mut log)?;
        let zeta = build_zeta(af, &psi, &b, ell, &mut log)?;
        let tau = build_tau(af, &zeta, ell, &mut log)?;
        let gram = (0..=ell)
            .map(|p| (0..=ell).map(|q| psi[p].mul(&psi[q]).mean().re).collect())
            .collect();
        Ok(Self {
            ell,
            grid,
            a: af.clone(),
            psi: psi.into_iter().enumerate().map(|(n, f)| SymTensorField::new(n, f)).collect(),
            b,
            sigma: sigma.into_iter().enumerate().map(|(n, f)| SymTensorField::new(n + 1, f)).collect(),
            rho: rho.into_iter().map(|(n, f)| (n, SymTensorField::new(n, f))).collect(),
            zeta: zeta.into_iter().map(|((n, m), f)| ((n, m), SymTensorField::new(n + 1, f))).collect(),
            tau: tau
                .into_iter()
                .map(|((n, m), f)| ((n, m), SymTensorField::new((n + 2) as usize, f)))
                .collect(),
            compat: log,
            gram,
        })
    }

    /// The classical homogenized coefficient ā = b̄¹.
    pub fn abar(&self) -> f64 {
        self.b[1]
    }

    /// Σ_{n≤ell} ψⁿ (iξ)ⁿ sampled on the cell.
    pub fn psi_sum(&self, ell: usize, xi: f64) -> PeriodicField {
        let z = Complex64::new(0.0, xi);
        let mut s = PeriodicField::zeros(&self.grid);
        for n in 0..=ell.min(self.ell) {
            s.axpy(z.powu(n as u32), &self.psi[n].field);
        }
        s
    }

    /// γ_ℓ(ξ) = 1 / E|Σ_{n≤ℓ} ψⁿ(iξ)ⁿ|², evaluated through the Gram matrix of ψ.
    pub fn gamma(&self, ell: usize, xi: f64) -> f64 {
        let ell = ell.min(self.ell);
        let z = Complex64::new(0.0, xi);
        let coef: Vec<Complex64> = (0..=ell).map(|n| z.powu(n as u32)).collect();
        let mut s = ZERO;
        for p in 0..=ell {
            for q in 0..=ell {
                s += coef[p].conj() * coef[q] * self.gram[p][q];
            }
        }
        1.0 / s.re
    }

    /// Taylor coefficients γ_ℓᵏ, k ≤ order, of γ_ℓ(ξ) = Σ γ_ℓᵏ ξᵏ by power-series inversion.
    pub fn gamma_taylor(&self, ell: usize, order: usize) -> Vec<f64> {
        let ell = ell.min(self.ell);
        let i = Complex64::new(0.0, 1.0);
        let mut poly = vec![0.0; order + 1];
        for p in 0..=ell {
            for q in 0..=ell {
                if p + q <= order {
                    poly[p + q] += ((-i).powu(p as u32) * i.powu(q as u32) * self.gram[p][q]).re;
                }
            }
        }
        invert_series(&poly)
    }

    /// ζ^{n,m} or an error naming the missing corrector.
    pub fn zeta_at(&self, n: usize, m: usize) -> Result<&SymTensorField> {
        self.zeta.get(&(n, m)).ok_or_else(|| Error::MissingCorrector(format!("zeta[{n}][{m}]")))
    }
}

/// Multiplicative inverse of a power series with nonzero constant term.
pub fn invert_series(p: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; p.len()];
    q[0] = 1.0 / p[0];
    for k in 1..p.len() {
        let s: f64 = (1..=k).map(|j| p[j] * q[k - j]).sum();
        q[k] = -s / p[0];
    }
    q
}

/// The spectral hierarchy computed directly at a fixed frequency ξ with complex arithmetic.
#[derive(Clone, Debug)]
pub struct XiHierarchy {
    pub xi: f64,
    pub psi: Vec<PeriodicField>,
    /// λ̌ⁿ_ξ for 0 ≤ n ≤ ell + 1 (entries 0 and 1 vanish).
    pub lambda: Vec<Complex64>,
    pub zeta: BTreeMap<(usize, usize), PeriodicField>,
    pub compat: CompatLog,
}

impl XiHierarchy {
    /// Solve the ξ-level recursions with the printed integration constants.
    pub fn build(af: &PeriodicField, ell: usize, xi: f64) -> Result<Self> {
        let grid = af.grid().clone();
        let zero = PeriodicField::zeros(&grid);
        let z = Complex64::new(0.0, xi);
        let mut log = CompatLog::default();
        let mut psi = vec![PeriodicField::constant(&grid, c(1.0))];
        let mut lambda = vec![ZERO, ZERO];
        let p = |psi: &Vec<PeriodicField>, n: i64| if n < 0 { zero.clone() } else { psi[n as usize].clone() };
        // i ξ a (ψ̌ⁿ⁻¹′ + iξ ψ̌ⁿ⁻²)
        let flux = |psi: &Vec<PeriodicField>, n: i64| {
            af.mul(&p(psi, n - 1).grad().add(&p(psi, n - 2).scale(z))).scale(z)
        };
        for n in 1..=(ell + 1) as i64 {
            if n >= 2 {
                lambda.push(-flux(&psi, n).mean());
            }
            if n as usize > ell {
                break;
            }
            let mut rhs = af.mul(&p(&psi, n - 1).scale(z)).grad().add(&flux(&psi, n));
            for k in 2..=n {
                rhs.axpy(lambda[k as usize], &psi[(n - k) as usize]);
            }
            log.check(format!("xi psi[{n}]"), &rhs)?;
            psi.push(solve_elliptic_sampled(af, &rhs, ZERO)?);
        }
        let mut zeta: BTreeMap<(usize, usize), PeriodicField> = BTreeMap::new();
        let getz = |zeta: &BTreeMap<(usize, usize), PeriodicField>, n: i64, m: usize| {
            if n < 0 {
                zero.clone()
            } else {
                zeta.get(&(n as usize, m)).cloned().unwrap_or_else(|| zero.clone())
            }
        };
        let psi_at = |n: usize| if n < psi.len() { psi[n].clone() } else { zero.clone() };
        let lam = |l: usize| if l < lambda.len() { lambda[l] } else { ZERO };
        let e = |f: &PeriodicField, g: &PeriodicField| f.conj().mul(g).mean();
        let mut m = 0usize;
        while ell >= 3 && 2 * m + 3 <= ell {
            for n in 0..=(ell - 3 - 2 * m) {
                let zm1 = getz(&zeta, n as i64 - 1, m);
                let zm2 = getz(&zeta, n as i64 - 2, m);
                let mut rhs = af
                    .mul(&zm1.scale(z))
                    .grad()
                    .add(&af.mul(&zm1.grad().add(&zm2.scale(z))).scale(z));
                // Σ_{k=1}^{n} Σ_{l=2}^{k+2} conj(λ̌^l/λ̌²) E[conj(ψ̌^{k+2−l}) ζ̌^{n−k,m}]
                let mut tail = ZERO;
                for k in 1..=n {
                    for l in 2..=k + 2 {
                        tail += (lam(l) / lam(2)).conj() * e(&psi_at(k + 2 - l), &getz(&zeta, (n - k) as i64, m));
                    }
                }
                let mean = if m == 0 {
                    let mut s = ZERO;
                    for k in 0..=n + 1 {
                        s += e(&psi_at(n + 1 - k), &psi_at(k));
                    }
                    rhs = rhs.sub(&psi_at(n + 1)).add_constant(s);
                    -tail
                } else {
                    rhs = rhs.add(&getz(&zeta, n as i64, m - 1));
                    let mut s = ZERO;
                    for k in 0..=n + 2 {
                        s += e(&psi_at(n + 2 - k), &getz(&zeta, k as i64, m - 1));
                    }
                    s / lam(2).conj() - tail
                };
                log.check(format!("xi zeta[{n}][{m}]"), &rhs)?;
                zeta.insert((n, m), solve_elliptic_sampled(af, &rhs.mean_free(), mean)?);
            }
            m += 1;
        }
        Ok(Self { xi, psi, lambda, zeta, compat: log })
    }
}

/// Largest relative discrepancy between the tensor hierarchy contracted at ξ and
/// the directly solved ξ-level hierarchy (ψ̌, λ̌, ζ̌).
pub fn dual_path_discrepancy(sc: &SpectralCorrectors, xi: f64) -> Result<f64> {
    let direct = XiHierarchy::build(&sc.a, sc.ell, xi)?;
    let z = Complex64::new(0.0, xi);
    let rel = |x: &PeriodicField, y: &PeriodicField| {
        let scale = x.l2_norm().max(y.l2_norm());
        if scale == 0.0 {
            0.0
        } else {
            x.sub(y).l2_norm() / scale
        }
    };
    let mut worst: f64 = 0.0;
    for n in 0..=sc.ell {
        worst = worst.max(rel(&sc.psi[n].contract(z), &direct.psi[n]));
    }
    for n in 2..=sc.ell + 1 {
        // λ̌ⁿ = ξ² b̄^{n−1} (iξ)^{n−2}
        let assembled = xi * xi * sc.b[n - 1] * z.powu(n as u32 - 2);
        let d = direct.lambda[n];
        let scale = assembled.norm().max(d.norm()).max(1e-300);
        // Even-order b̄ vanish; measure those against ξ² b̄¹ |ξ|^{n−2}.
        let scale = if (n - 1) % 2 == 0 { scale.max(xi * xi * sc.b[1] * xi.abs().powi(n as i32 - 2)) } else { scale };
        worst = worst.max((assembled - d).norm() / scale);
    }
    for ((n, m), zt) in &sc.zeta {
        let d = &direct.zeta[&(*n, *m)];
        worst = worst.max(rel(&zt.field.scale(z.powu(*n as u32 + 1)), d));
    }
    Ok(worst)
}
