//! Dispersive homogenized symbols, their well-posed modifications, and the
//! per-mode Duhamel solution of ∂ₜ²û + μ(ξ)û = source(ξ, t).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Fiber, FiberField};
use crate::duhamel::{adaptive, initial_panels, Kernel};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LogLogFit};
use crate::hyperbolic::CTerm;
use crate::impulse::{Impulse, TimeBump, MAX_TIME_DERIVATIVE};
use crate::jet::Jet;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Well-posedness modification of the formal effective equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    /// Formal symbol on a band where it is positive.
    Base,
    /// Source multiplied by χ(ε^α ξ).
    Filtered { alpha: f64 },
    /// μ + κ_ℓ(ε|ξ|)^ℓ ξ².
    Regularized,
    /// Boussinesq form μ^{(III)} = γ/β.
    Boussinesq,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Base, Variant::Filtered { alpha: 0.5 }, Variant::Regularized, Variant::Boussinesq];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Filtered { .. } => "filter",
            Variant::Regularized => "reg",
            Variant::Boussinesq => "bsq",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Variant::Base),
            "filter" => Ok(Variant::Filtered { alpha: 0.5 }),
            "reg" => Ok(Variant::Regularized),
            "bsq" => Ok(Variant::Boussinesq),
            _ => Err(Error::InvalidConfig(format!("unknown variant {s:?}"))),
        }
    }
}

/// Smooth cutoff: 1 on [0, 1/2], 0 on [1, ∞), exp(1 − 1/(1 − (2r − 1)²)) between.
pub fn chi(r: f64) -> f64 {
    let r = r.abs();
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let z = 2.0 * r - 1.0;
        (1.0 - 1.0 / (1.0 - z * z)).exp()
    }
}

/// g(s) = b̄¹ + Σ_{k=2}^{ℓ} b̄ᵏ Re (is)^{k−1}, so that μ = ξ² g(ε|ξ|) (odd b̄ only survive).
pub fn symbol_factor(b: &[f64], ell: usize, s: f64) -> f64 {
    let mut g = b[1];
    for (k, bk) in b.iter().enumerate().take(ell + 1).skip(2) {
        g += bk * Complex64::new(0.0, s).powu(k as u32 - 1).re;
    }
    g
}

/// μ(ξ) = ξ·(ā + Σ_{k=2}^{ℓ} b̄ᵏ(iεξ)^{k−1})ξ.
pub fn mu_base(b: &[f64], ell: usize, eps: f64, xi: f64) -> f64 {
    let mut g = b[1];
    for (k, bk) in b.iter().enumerate().take(ell + 1).skip(2) {
        g += bk * Complex64::new(0.0, eps * xi).powu(k as u32 - 1).re;
    }
    xi * xi * g
}

/// Smallest κ ≥ 0 with g(s) + κ s^ℓ ≥ λ/2 for all s ≥ 0, i.e. the maximum of
/// (λ/2 − g(s))/s^ℓ, located by a logarithmic scan and golden-section refinement.
pub fn kappa_reg(b: &[f64], ell: usize, lambda: f64) -> f64 {
    let h = |s: f64| (0.5 * lambda - symbol_factor(b, ell, s)) / s.powi(ell as i32);
    let n = 4000;
    let (lo, hi) = (1e-4f64, 1e6f64);
    let s_at = |i: usize| lo * (hi / lo).powf(i as f64 / n as f64);
    let mut best = 0;
    for i in 0..=n {
        if h(s_at(i)) > h(s_at(best)) {
            best = i;
        }
    }
    let (mut a, mut c) = (s_at(best.saturating_sub(1)).ln(), s_at((best + 1).min(n)).ln());
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = c - gr * (c - a);
        let x2 = a + gr * (c - a);
        if h(x1.exp()) > h(x2.exp()) {
            c = x2;
        } else {
            a = x1;
        }
    }
    h((0.5 * (a + c)).exp()).max(0.0)
}

/// κ₁ = 1, κ_{2j} = 0 and κ_{2j+1} the smallest nonnegative value with
/// κ_{2j+1} ā + Σ_{l=1}^{2j} κ_l b̄^{2j+2−l} Re(iσ)^{2j+1−l} ≥ 0 for σ = ±1.
pub fn kappa_bsq(b: &[f64], ell: usize) -> Vec<f64> {
    let mut kappa = vec![0.0; ell + 1];
    if ell >= 1 {
        kappa[1] = 1.0;
    }
    let abar = b[1];
    let mut n = 3;
    while n <= ell {
        let mut need = 0.0f64;
        for sigma in [1.0, -1.0] {
            let s: f64 = (1..n)
                .map(|l| kappa[l] * b.get(n + 1 - l).copied().unwrap_or(0.0) * Complex64::new(0.0, sigma).powu((n - l) as u32).re)
                .sum();
            need = need.max(-s / abar);
        }
        kappa[n] = need.max(0.0);
        n += 2;
    }
    kappa
}

/// Boussinesq symbol μ^{(III)}.
pub fn mu_bsq(b: &[f64], kappa: &[f64], ell: usize, eps: f64, xi: f64) -> f64 {
    let r = eps * xi.abs();
    let sigma = xi.signum();
    let mut num = 0.0;
    for n in 1..=ell {
        let mut t = kappa[n] * b[1];
        for l in 1..n {
            t += kappa[l] * b.get(n + 1 - l).copied().unwrap_or(0.0) * Complex64::new(0.0, sigma).powu((n - l) as u32).re;
        }
        num += t * r.powi(n as i32 - 1);
    }
    let den = 1.0 + (2..=ell).map(|l| kappa[l] * r.powi(l as i32 - 1)).sum::<f64>();
    xi * xi * num / den
}

/// Symbol of one effective equation.
#[derive(Clone, Debug, Serialize)]
pub struct EffectiveSymbol {
    pub ell: usize,
    pub eps: f64,
    pub variant: Variant,
    /// b̄ᵏ, index 0 unused.
    pub b: Vec<f64>,
    /// Ellipticity lower bound λ of the coefficient field.
    pub lambda: f64,
    pub kappa_reg: f64,
    pub kappa_bsq: Vec<f64>,
}

impl EffectiveSymbol {
    pub fn new(b: &[f64], ell: usize, eps: f64, variant: Variant, lambda: f64) -> Result<Self> {
        if b.len() < 2 {
            return Err(Error::MissingCorrector("effective coefficients b̄".into()));
        }
        let mut bb = b.to_vec();
        bb.resize(bb.len().max(ell + 2), 0.0);
        Ok(Self {
            ell,
            eps,
            variant,
            kappa_reg: kappa_reg(&bb, ell, lambda),
            kappa_bsq: kappa_bsq(&bb, ell),
            b: bb,
            lambda,
        })
    }

    pub fn mu(&self, xi: f64) -> f64 {
        match self.variant {
            Variant::Base | Variant::Filtered { .. } => mu_base(&self.b, self.ell, self.eps, xi),
            Variant::Regularized => {
                mu_base(&self.b, self.ell, self.eps, xi) + self.kappa_reg * (self.eps * xi.abs()).powi(self.ell as i32) * xi * xi
            }
            Variant::Boussinesq => mu_bsq(&self.b, &self.kappa_bsq, self.ell, self.eps, xi),
        }
    }

    /// Multiplier applied to the source.
    pub fn source_factor(&self, xi: f64) -> f64 {
        match self.variant {
            Variant::Filtered { alpha } => chi(self.eps.powf(alpha) * xi),
            _ => 1.0,
        }
    }

    /// IllPosedSymbol if μ ≤ 0 at any nonzero sampled frequency.
    pub fn check_band(&self, xis: &[f64]) -> Result<()> {
        for &xi in xis {
            if xi != 0.0 && self.source_factor(xi) > 0.0 {
                let mu = self.mu(xi);
                if !(mu > 0.0) {
                    return Err(Error::IllPosedSymbol { xi, mu });
                }
            }
        }
        Ok(())
    }
}

/// Per-mode source as Σ_r c_r f₁^{(r)}(t) f̂₂(ξ).
pub type SourceTerms = Vec<(usize, Complex64)>;

/// Source multiplier of the geometric effective equation:
/// 1 + Σ_{p=1}^{ℓ−2} ε^{p+1} Σ c·(iξ)^{dx} ∂ₜ^{dt}.
pub fn geometric_rhs(c: &[Vec<CTerm>], ell: usize, eps: f64, xi: f64) -> Result<SourceTerms> {
    let mut terms: Vec<(usize, Complex64)> = vec![(0, Complex64::new(1.0, 0.0))];
    for p in 1..=ell.saturating_sub(2) {
        for t in c.get(p).map(|v| v.as_slice()).unwrap_or(&[]) {
            if t.dt + 2 > MAX_TIME_DERIVATIVE {
                return Err(Error::InsufficientTimeDerivatives { needed: t.dt + 2, available: MAX_TIME_DERIVATIVE });
            }
            let v = eps.powi(p as i32 + 1) * t.coef * Complex64::new(0.0, xi).powu(t.dx as u32);
            match terms.iter_mut().find(|(o, _)| *o == t.dt) {
                Some(e) => e.1 += v,
                None => terms.push((t.dt, v)),
            }
        }
    }
    terms.sort_by_key(|t| t.0);
    Ok(terms)
}

/// Per-mode data of an effective solution.
#[derive(Clone, Debug)]
pub struct ModeData {
    pub xi: f64,
    /// f̂₂(ξ) times the source factor.
    pub amp: Complex64,
    pub mu: f64,
    pub source: SourceTerms,
    kernel: Kernel,
}

/// Duhamel solution of ∂ₜ²û + μû = source, mode by mode.
#[derive(Clone, Debug)]
pub struct ModeSolution {
    pub symbol: EffectiveSymbol,
    pub half_length: f64,
    pub bump: TimeBump,
    pub modes: Vec<ModeData>,
    /// Requested times and (û, ∂ₜû) per mode.
    pub times: Vec<f64>,
    pub table: Vec<Vec<(Complex64, Complex64)>>,
}

impl ModeSolution {
    /// ∂ₜ^j û(ξ_i, t), reduced to the kernel pair and analytic f₁ derivatives.
    pub fn derivative(&self, i: usize, j: usize, t: f64) -> Result<Complex64> {
        let m = &self.modes[i];
        let mut acc = C0;
        for &(r, c) in &m.source {
            let order = j + r;
            if order > MAX_TIME_DERIVATIVE + 2 {
                return Err(Error::InsufficientTimeDerivatives { needed: order, available: MAX_TIME_DERIVATIVE + 2 });
            }
            acc += c * m.kernel.derivative(order, t)?;
        }
        Ok(acc * m.amp)
    }

    /// Macroscopic field ∂ₜ^j ū(t) as a fiber field without cell harmonics.
    pub fn field(&self, j: usize, t: f64) -> Result<FiberField> {
        let fibers = (0..self.modes.len())
            .map(|i| Ok(Fiber { xi: self.modes[i].xi, coeffs: vec![self.derivative(i, j, t)?] }))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiberField { eps: self.symbol.eps, half_length: self.half_length, kmax: 0, fibers })
    }

    /// Residual ∂ₜ²û + μû − source at t, max over modes.
    pub fn ode_residual(&self, t: f64) -> Result<f64> {
        let jet = self.bump.jet(t, MAX_TIME_DERIVATIVE);
        let mut worst = 0.0f64;
        for (i, m) in self.modes.iter().enumerate() {
            let src: Complex64 = m.source.iter().map(|&(r, c)| c * jet[r]).sum::<Complex64>() * m.amp;
            let r = self.derivative(i, 2, t)? + self.derivative(i, 0, t)? * m.mu - src;
            worst = worst.max(r.norm());
        }
        Ok(worst)
    }
}

/// Source description for [`solve_effective`].
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    /// f̂ itself.
    Plain,
    /// The c̄-modified source of the geometric effective equation.
    Geometric(&'a [Vec<CTerm>]),
}

pub fn solve_effective(symbol: &EffectiveSymbol, f: &Impulse, source: Source<'_>, t_list: &[f64]) -> Result<ModeSolution> {
    let xis: Vec<f64> = f.modes.iter().map(|m| m.0).collect();
    symbol.check_band(&xis)?;
    let modes = f
        .modes
        .par_iter()
        .map(|&(xi, a)| {
            let mu = symbol.mu(xi);
            let source = match source {
                Source::Plain => vec![(0, Complex64::new(1.0, 0.0))],
                Source::Geometric(c) => geometric_rhs(c, symbol.ell, symbol.eps, xi)?,
            };
            Ok(ModeData {
                xi,
                amp: a * symbol.source_factor(xi),
                mu,
                source,
                kernel: Kernel::new(f.f1, mu.max(0.0).sqrt())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sol = ModeSolution {
        symbol: symbol.clone(),
        half_length: f.half_length,
        bump: f.f1,
        modes,
        times: t_list.to_vec(),
        table: Vec::new(),
    };
    let table = t_list
        .iter()
        .map(|&t| (0..sol.modes.len()).map(|i| Ok((sol.derivative(i, 0, t)?, sol.derivative(i, 1, t)?))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    sol.table = table;
    Ok(sol)
}

/// Pairwise L² deviations among variants over an ε sweep.
#[derive(Clone, Debug, Serialize)]
pub struct VariantComparison {
    pub ell: usize,
    pub eps: Vec<f64>,
    pub t: Vec<f64>,
    /// (variant a, variant b, per-ε per-t distances `dist[e][k]`).
    pub pairs: Vec<(String, String, Vec<Vec<f64>>)>,
    /// Per pair, log-log slope in ε of the largest deviation over t.
    pub slopes: Vec<LogLogFit>,
}

pub fn variant_compare(b: &[f64], ell: usize, lambda: f64, eps_list: &[f64], f: &Impulse, t_list: &[f64]) -> Result<VariantComparison> {
    let sols = eps_list
        .iter()
        .map(|&eps| {
            Variant::ALL
                .iter()
                .map(|&v| solve_effective(&EffectiveSymbol::new(b, ell, eps, v, lambda)?, f, Source::Plain, t_list))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = (2.0 * f.half_length).sqrt();
    let mut pairs = Vec::new();
    let mut slopes = Vec::new();
    for a in 0..4 {
        for c in a + 1..4 {
            let dist: Vec<Vec<f64>> = sols
                .iter()
                .map(|s| {
                    (0..t_list.len())
                        .map(|k| {
                            let sq: f64 = s[a].table[k].iter().zip(&s[c].table[k]).map(|(x, y)| (x.0 - y.0).norm_sqr()).sum();
                            scale * sq.sqrt()
                        })
                        .collect()
                })
                .collect();
            let worst: Vec<f64> = dist.iter().map(|d| d.iter().copied().fold(0.0, f64::max)).collect();
            slopes.push(loglog_fit(eps_list, &worst, 1e-13));
            pairs.push((Variant::ALL[a].name().to_string(), Variant::ALL[c].name().to_string(), dist));
        }
    }
    Ok(VariantComparison { ell, eps: eps_list.to_vec(), t: t_list.to_vec(), pairs, slopes })
}

/// ‖∂ₓw̄‖ of the naive inductive cascade and of its correction w̄ − w̃¹.
///
/// The cascade w̄ = Σ_{k≤ℓ} ε^{k−1} w̃^k is the order-(ℓ−1) Taylor polynomial in ε
/// of the Duhamel solution with symbol μ(ε) = ξ² Σ_k b̄ᵏ Re(iξ)^{k−1} ε^{k−1}; it is
/// evaluated by integrating the ε-series of sin(√μ τ)/√μ against f₁.
pub fn cascade_gradient_norms(b: &[f64], ell: usize, eps: f64, f: &Impulse, t: f64) -> Result<(f64, f64)> {
    let order = ell - 1;
    let mut full = 0.0;
    let mut corr = 0.0;
    for &(xi, amp) in &f.modes {
        let mut mu = Jet::constant(0.0, order);
        for k in 1..=ell.min(b.len() - 1) {
            mu.0[k - 1] = xi * xi * b[k] * Complex64::new(0.0, xi).powu(k as u32 - 1).re;
        }
        let root = mu.sqrt();
        let inv = root.recip();
        let lo = f.f1.t0;
        let hi = t.min(f.f1.t1());
        let [s0, s1] = if hi > lo {
            adaptive(lo, hi, initial_panels(root.0[0] * (1.0 + t), hi - lo), root.0[0], |s| {
                let arg = root.scale(t - s);
                let (sn, _) = arg.sin_cos();
                let k = &sn * &inv;
                let poly: f64 = k.0.iter().enumerate().map(|(i, c)| c * eps.powi(i as i32)).sum();
                [poly * f.f1.value(s), k.0[0] * f.f1.value(s)]
            })?
        } else {
            [0.0, 0.0]
        };
        full += (amp * xi * s0).norm_sqr();
        corr += (amp * xi * (s0 - s1)).norm_sqr();
    }
    let scale = 2.0 * f.half_length;
    Ok(((scale * full).sqrt(), (scale * corr).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const B3: f64 = 0.0064167707258506075;

    fn test_b() -> Vec<f64> {
        vec![0.0, 3f64.sqrt(), 0.0, B3, 0.0, -6.115e-4, 0.0, 5.71e-5]
    }

    #[test]
    fn chi_plateaus() {
        assert_eq!(chi(0.3), 1.0);
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(1.2), 0.0);
        assert!(chi(0.75) > 0.0 && chi(0.75) < 1.0);
        assert!((chi(0.5 + 1e-9) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn base_symbol() {
        let b = test_b();
        assert_abs_diff_eq!(mu_base(&b, 1, 0.1, 2.0), 4.0 * 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(mu_base(&b, 3, 0.1, 2.0), 4.0 * (3f64.sqrt() - B3 * 0.04), epsilon = 1e-14);
        let one = [0.0, 1.0, 0.0, 0.0];
        assert_abs_diff_eq!(mu_base(&one, 3, 0.3, 5.0), 25.0, epsilon = 1e-14);
        // Positivity window at ε = 1/32, R = 4.
        for i in 1..=100 {
            let xi = 4.0 * i as f64 / 100.0;
            let m = mu_base(&b, 5, 1.0 / 32.0, xi) / (xi * xi);
            assert!(m > 0.9 * 3f64.sqrt() && m < 1.1 * 3f64.sqrt());
        }
    }

    #[test]
    fn kappa_reg_closed_form() {
        let b = test_b();
        assert_eq!(kappa_reg(&[0.0, 1.0, 0.0, 0.0], 3, 1.0), 0.0);
        assert_eq!(kappa_reg(&b, 2, 1.0), 0.0);
        // ℓ = 3: max of (λ/2 − ā + b̄³s²)/s³ at s*² = 3(ā − λ/2)/b̄³, value 2b̄³/(3s*).
        let s = (3.0 * (3f64.sqrt() - 0.5) / B3).sqrt();
        let k = kappa_reg(&b, 3, 1.0);
        assert_abs_diff_eq!(k, 2.0 * B3 / (3.0 * s), epsilon = 1e-10);
        // The regularized symbol is coercive and κ is minimal.
        let sym = |kk: f64, s: f64| symbol_factor(&b, 3, s) + kk * s.powi(3);
        let min = (1..20000).map(|i| sym(k, i as f64 * 0.01)).fold(f64::INFINITY, f64::min);
        assert!(min >= 0.5 - 1e-9);
        let min2 = (1..20000).map(|i| sym(k * 0.99, i as f64 * 0.01)).fold(f64::INFINITY, f64::min);
        assert!(min2 < 0.5);
    }

    #[test]
    fn kappa_bsq_values() {
        let b = test_b();
        let k = kappa_bsq(&b, 5);
        assert_eq!(k[1], 1.0);
        assert_eq!(k[2], 0.0);
        assert_eq!(k[4], 0.0);
        assert_abs_diff_eq!(k[3], B3 / 3f64.sqrt(), epsilon = 1e-15);
        // Brute force over direction signs: the constraint is tight and satisfied.
        for n in [3usize, 5] {
            let mut worst = f64::INFINITY;
            for sigma in [1.0f64, -1.0] {
                let mut v = k[n] * b[1];
                for l in 1..n {
                    v += k[l] * b[n + 1 - l] * Complex64::new(0.0, sigma).powu((n - l) as u32).re;
                }
                worst = worst.min(v);
            }
            assert!(worst >= -1e-15 && (k[n] == 0.0 || worst.abs() < 1e-15));
        }
        // Lower bound of the Boussinesq symbol.
        for i in 1..100 {
            let xi = 0.5 * i as f64;
            let den = 1.0 + k[3] * (0.1 * xi).powi(2) + k[5] * (0.1 * xi).powi(4);
            assert!(mu_bsq(&b, &k, 5, 0.1, xi) >= xi * xi / den - 1e-12);
        }
    }

    #[test]
    fn ill_posed_band_detected() {
        let b = test_b();
        let sym = EffectiveSymbol::new(&b, 3, 1.0, Variant::Base, 1.0).unwrap();
        assert!(matches!(sym.check_band(&[20.0]), Err(Error::IllPosedSymbol { .. })));
        let reg = EffectiveSymbol::new(&b, 3, 1.0, Variant::Regularized, 1.0).unwrap();
        assert!(reg.check_band(&[20.0]).is_ok());
    }

    #[test]
    fn single_mode_matches_direct_integration() {
        // μ = 4 from a ≡ 1 and ξ = 2: compare with RK4 on ü + 4u = f₁.
        let bump = TimeBump::default();
        let f = Impulse { f1: bump, half_length: std::f64::consts::PI, radius: 2.0, modes: vec![(2.0, Complex64::new(1.0, 0.0))] };
        let sym = EffectiveSymbol::new(&[0.0, 1.0], 1, 0.1, Variant::Base, 1.0).unwrap();
        let sol = solve_effective(&sym, &f, Source::Plain, &[0.6, 3.0]).unwrap();
        let steps = 60000;
        for (k, &t) in [0.6, 3.0].iter().enumerate() {
            let h = t / steps as f64;
            let mut y = [0.0f64, 0.0];
            let rhs = |s: f64, y: [f64; 2]| [y[1], bump.value(s) - 4.0 * y[0]];
            for n in 0..steps {
                let s = n as f64 * h;
                let k1 = rhs(s, y);
                let k2 = rhs(s + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
                let k3 = rhs(s + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
                let k4 = rhs(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
                for i in 0..2 {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            assert_abs_diff_eq!(sol.table[k][0].0.re, y[0], epsilon = 1e-9);
            assert_abs_diff_eq!(sol.table[k][0].1.re, y[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn ode_residual_energy_identity_and_derivatives() {
        let f = Impulse::random_band(TimeBump::default(), 8.0, 4.0, 11);
        let sym = EffectiveSymbol::new(&test_b(), 3, 1.0 / 16.0, Variant::Base, 1.0).unwrap();
        let sol = solve_effective(&sym, &f, Source::Plain, &[]).unwrap();
        for &t in &[0.3, 0.8, 2.0] {
            assert!(sol.ode_residual(t).unwrap() < 1e-9);
        }
        // d/dt (|∂ₜû|² + μ|û|²)/2 = Re(f̂ conj ∂ₜû), checked by central differences.
        let (i, h) = (3, 1e-4);
        let m = &sol.modes[i];
        let e = |t: f64| 0.5 * (sol.derivative(i, 1, t).unwrap().norm_sqr() + m.mu * sol.derivative(i, 0, t).unwrap().norm_sqr());
        for &t in &[0.4, 0.7] {
            let lhs = (e(t + h) - e(t - h)) / (2.0 * h);
            let rhs = (m.amp * f.f1.value(t) * sol.derivative(i, 1, t).unwrap().conj()).re;
            assert!((lhs - rhs).abs() < 1e-6);
        }
        // ∂ₜ^{2m} reduction against finite differences.
        for j in [2usize, 4] {
            let t = 0.65;
            let g = |s: f64| sol.derivative(i, j - 2, s).unwrap();
            let h = 2e-3;
            let fd = (g(t + h) * 16.0 - g(t + 2.0 * h) - g(t) * 30.0 + g(t - h) * 16.0 - g(t - 2.0 * h)) / (12.0 * h * h);
            assert!((fd - sol.derivative(i, j, t).unwrap()).norm() < 1e-6 * fd.norm().max(1.0));
        }
    }

    #[test]
    fn zero_impulse_and_homogeneous_variants_agree() {
        let zero = Impulse::zero(TimeBump::default(), 8.0);
        let sym = EffectiveSymbol::new(&test_b(), 3, 0.1, Variant::Base, 1.0).unwrap();
        assert!(solve_effective(&sym, &zero, Source::Plain, &[1.0]).unwrap().table[0].is_empty());
        let f = Impulse::random_band(TimeBump::default(), 8.0, 4.0, 1);
        let cmp = variant_compare(&[0.0, 1.0, 0.0, 0.0], 3, 1.0, &[1.0 / 64.0], &f, &[2.0]).unwrap();
        for (_, _, d) in &cmp.pairs {
            assert!(d[0][0] < 1e-12);
        }
    }

    #[test]
    fn geometric_rhs_terms() {
        let c = vec![Vec::new(), vec![CTerm { dt: 0, dx: 2, coef: 0.5 }], vec![CTerm { dt: 2, dx: 4, coef: 0.25 }]];
        assert_eq!(geometric_rhs(&c, 2, 0.1, 3.0).unwrap(), vec![(0, Complex64::new(1.0, 0.0))]);
        let g = geometric_rhs(&c, 4, 0.1, 3.0).unwrap();
        assert_eq!(g.len(), 2);
        assert_abs_diff_eq!(g[0].1.re, 1.0 - 0.01 * 0.5 * 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1].1.re, 1e-3 * 0.25 * 81.0, epsilon = 1e-15);
        assert!(geometric_rhs(&[Vec::new(), Vec::new()], 4, 0.1, 3.0).unwrap().len() == 1);
    }

    #[test]
    fn cascade_first_order_is_base_solution() {
        let f = Impulse::random_band(TimeBump::default(), 8.0, 4.0, 5);
        let b = test_b();
        let (full, corr) = cascade_gradient_norms(&b, 1, 1.0 / 16.0, &f, 3.0).unwrap();
        assert_eq!(corr, 0.0);
        let sym = EffectiveSymbol::new(&b, 1, 1.0 / 16.0, Variant::Base, 1.0).unwrap();
        let sol = solve_effective(&sym, &f, Source::Plain, &[3.0]).unwrap();
        let g = (2.0 * 8.0 * sol.table[0].iter().zip(&sol.modes).map(|(u, m)| (u.0 * m.xi).norm_sqr()).sum::<f64>()).sqrt();
        assert!((full - g).abs() < 1e-9 * g);
    }
}
