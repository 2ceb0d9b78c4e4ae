//! Floquet–Bloch fibers L_η = −(∂ + iη) a (∂ + iη) on the unit cell in a
//! trigonometric Galerkin basis, ground states, the Taylor–Bloch residual, and a
//! Duhamel-by-Bloch reference solution of the heterogeneous wave equation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{CellGrid, PeriodicField};
use crate::domain::{Fiber, FiberField};
use crate::duhamel::Kernel;
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::fit::{loglog_fit, LogLogFit};
use crate::impulse::Impulse;
use crate::spectral::lambda_taylor;

/// Default Galerkin truncation |k| ≤ K.
pub const DEFAULT_K: usize = 32;
/// Default number of Bloch modes in the Duhamel reference.
pub const DEFAULT_MODES: usize = 12;
/// Smallest acceptable spectral gap above the ground state.
pub const GAP_MIN: f64 = 1e-6;
/// Truncated-mode tail above which the reference records a warning.
pub const TAIL_TOL: f64 = 1e-10;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const TAU: f64 = std::f64::consts::TAU;

/// Fourier coefficients â_j, j = −2K..=2K, of the coefficient field (index j + 2K).
#[derive(Clone, Debug)]
pub struct CoefficientSpectrum {
    pub k: usize,
    pub ahat: Vec<Complex64>,
}

impl CoefficientSpectrum {
    pub fn new(a: &CoefficientField, k: usize) -> Self {
        let n = (8 * k).next_power_of_two().max(64);
        Self::from_field(&PeriodicField::sample(&CellGrid::new(n), a), k)
    }

    pub fn from_field(af: &PeriodicField, k: usize) -> Self {
        let cv = af.coefficient_vec();
        let half = af.grid().n() as i64 / 2;
        let ahat = (-(2 * k as i64)..=2 * k as i64)
            .map(|j| {
                let i = j + half;
                if i >= 0 && (i as usize) < cv.len() && j.abs() < half {
                    cv[i as usize]
                } else {
                    C0
                }
            })
            .collect();
        Self { k, ahat }
    }

    pub fn at(&self, j: i64) -> Complex64 {
        self.ahat[(j + 2 * self.k as i64) as usize]
    }
}

/// Galerkin matrix M[k, l] = (2πk + η) â_{k−l} (2πl + η), |k|, |l| ≤ K.
#[derive(Clone, Debug)]
pub struct FiberedOperator {
    pub xi: f64,
    pub k: usize,
    pub matrix: DMatrix<Complex64>,
}

pub fn assemble(spec: &CoefficientSpectrum, xi: f64, k: usize) -> FiberedOperator {
    assert!(k >= 8 && k <= spec.k, "Galerkin truncation must satisfy 8 ≤ K ≤ spectrum K");
    let n = 2 * k + 1;
    let ki = k as i64;
    let matrix = DMatrix::from_fn(n, n, |r, c| {
        let kr = r as i64 - ki;
        let kc = c as i64 - ki;
        spec.at(kr - kc) * ((TAU * kr as f64 + xi) * (TAU * kc as f64 + xi))
    });
    FiberedOperator { xi, k, matrix }
}

impl FiberedOperator {
    pub fn dim(&self) -> usize {
        2 * self.k + 1
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().map(|v| v.norm()).fold(0.0, f64::max) / self.matrix.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// u*Mu for coefficients u (ordered −K..=K).
    pub fn quadratic_form(&self, u: &[Complex64]) -> f64 {
        let v = DVector::from_column_slice(u);
        (v.adjoint() * &self.matrix * &v)[(0, 0)].re
    }

    /// All eigenpairs sorted by eigenvalue.
    pub fn eigen(&self) -> (Vec<f64>, Vec<DVector<Complex64>>) {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        (vals, vecs)
    }

    fn residual(&self, lambda: f64, v: &DVector<Complex64>) -> f64 {
        (&self.matrix * v - v * Complex64::new(lambda, 0.0)).norm()
    }

    /// Ground pair by the Schur-complement fixed point on the constant mode:
    /// q = â₀ − v*(M_rr − qη²)⁻¹v with v = M[r, 0]/η, λ = qη², w = (1, −η(M_rr − λ)⁻¹v).
    /// Relative accuracy in λ is kept as η → 0, unlike a dense solve.
    fn schur_ground(&self) -> Result<(f64, DVector<Complex64>)> {
        let n = self.dim();
        let k = self.k;
        let eta = self.xi;
        if eta == 0.0 {
            let mut e = DVector::from_element(n, C0);
            e[k] = Complex64::new(1.0, 0.0);
            return Ok((0.0, e));
        }
        let idx: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        let mrr = DMatrix::from_fn(n - 1, n - 1, |r, c| self.matrix[(idx[r], idx[c])]);
        let v = DVector::from_fn(n - 1, |r, _| self.matrix[(idx[r], k)] / eta);
        let a0 = self.matrix[(k, k)].re / (eta * eta);
        let mut q = a0;
        let mut x = DVector::from_element(n - 1, C0);
        for it in 0..200 {
            let shifted = &mrr - DMatrix::identity(n - 1, n - 1) * Complex64::new(q * eta * eta, 0.0);
            x = shifted.lu().solve(&v).ok_or(Error::NoConvergence { iterations: it, residual: f64::NAN })?;
            let qn = a0 - v.dotc(&x).re;
            let done = (qn - q).abs() <= 1e-16 * qn.abs();
            q = qn;
            if done {
                break;
            }
        }
        let mut w = DVector::from_element(n, C0);
        w[k] = Complex64::new(1.0, 0.0);
        for (r, &i) in idx.iter().enumerate() {
            w[i] = -x[r] * eta;
        }
        let norm = w.norm();
        Ok((q * eta * eta, w / Complex64::new(norm, 0.0)))
    }
}

/// Ground eigenpair of a fiber.
#[derive(Clone, Debug, Serialize)]
pub struct BlochMode {
    pub xi: f64,
    pub eigenvalue: f64,
    pub coeffs: Vec<Complex64>,
    /// Cell mean of the normalized eigenfunction (its constant coefficient).
    pub mean: Complex64,
    pub residual: f64,
    pub gap: f64,
}

pub fn ground_state(op: &FiberedOperator) -> Result<BlochMode> {
    let (vals, _) = op.eigen();
    let (lambda, w) = op.schur_ground()?;
    let gap = vals[1] - lambda;
    if gap < GAP_MIN {
        return Err(Error::DegenerateGroundState { xi: op.xi, gap });
    }
    let residual = op.residual(lambda, &w);
    Ok(BlochMode { xi: op.xi, eigenvalue: lambda, mean: w[op.k], coeffs: w.iter().copied().collect(), residual, gap })
}

/// Lowest `m` eigenpairs with the ground pair refined.
#[derive(Clone, Debug)]
pub struct BlochBasis {
    pub xi: f64,
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<DVector<Complex64>>,
    /// Components ⟨w_j, 1⟩ of the constant function.
    pub weights: Vec<Complex64>,
    /// ℓ² norm of the constant function's components on the discarded modes.
    pub tail_weight: f64,
}

pub fn fiber_basis(op: &FiberedOperator, m: usize) -> Result<BlochBasis> {
    let (mut vals, mut vecs) = op.eigen();
    let (lambda, w) = op.schur_ground()?;
    if vals[1] - lambda < GAP_MIN {
        return Err(Error::DegenerateGroundState { xi: op.xi, gap: vals[1] - lambda });
    }
    vals[0] = lambda;
    vecs[0] = w;
    let m = m.min(op.dim());
    let k = op.k;
    let weights: Vec<Complex64> = vecs.iter().map(|v| v[k].conj()).collect();
    let tail_weight = weights[m..].iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    vals.truncate(m);
    vecs.truncate(m);
    Ok(BlochBasis { xi: op.xi, eigenvalues: vals, vectors: vecs, weights: weights[..m].to_vec(), tail_weight })
}

/// Samples of |λ_ξ − λ_Taylor(ξ)| and their log-log slope.
#[derive(Clone, Debug, Serialize)]
pub struct TaylorResidual {
    pub ell: usize,
    pub xis: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fit: LogLogFit,
}

/// Taylor–Bloch residual of the ground eigenvalue against ξ²Σ b̄ᵏ(iξ)^{k−1}, k < ell.
pub fn taylor_residual(spec: &CoefficientSpectrum, b: &[f64], ell: usize, xis: &[f64]) -> Result<TaylorResidual> {
    let residuals = xis
        .par_iter()
        .map(|&xi| {
            let g = ground_state(&assemble(spec, xi, spec.k))?;
            Ok((g.eigenvalue - lambda_taylor(b, xi, ell)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let ax: Vec<f64> = xis.iter().map(|x| x.abs()).collect();
    let fit = loglog_fit(&ax, &residuals, 0.0);
    Ok(TaylorResidual { ell, xis: xis.to_vec(), residuals, fit })
}

/// Log-spaced sample points in [lo, hi].
pub fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Clone, Debug)]
struct RefFiber {
    xi: f64,
    amp: Complex64,
    basis: BlochBasis,
    kernels: Vec<Kernel>,
}

/// Duhamel-by-Bloch reference u_ε: per spatial mode ξ of f₂, the constant source
/// is expanded in the lowest Bloch modes of L_{εξ} and each is propagated with
/// the kernel sin(ω(t − s))/ω, ω = √ν/ε.
#[derive(Clone, Debug)]
pub struct BlochReference {
    pub eps: f64,
    pub k: usize,
    pub m_modes: usize,
    pub half_length: f64,
    fibers: Vec<RefFiber>,
    /// L² bound for the discarded-mode contribution, per unit of ‖f₁‖_{L¹}.
    pub tail_estimate: f64,
    pub warnings: Vec<String>,
}

impl BlochReference {
    pub fn new(spec: &CoefficientSpectrum, eps: f64, f: &Impulse, k: usize, m_modes: usize) -> Result<Self> {
        let fibers = f
            .modes
            .par_iter()
            .map(|&(xi, amp)| {
                let basis = fiber_basis(&assemble(spec, eps * xi, k), m_modes)?;
                let kernels = basis
                    .eigenvalues
                    .iter()
                    .map(|&nu| Kernel::new(f.f1, nu.max(0.0).sqrt() / eps))
                    .collect::<Result<Vec<_>>>()?;
                Ok(RefFiber { xi, amp, basis, kernels })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut tail_sq = 0.0;
        for fb in &fibers {
            let next = fb.basis.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt() / eps;
            let bound = if next > 0.0 { fb.basis.tail_weight / next } else { fb.basis.tail_weight };
            tail_sq += fb.amp.norm_sqr() * bound * bound;
        }
        let tail_estimate = (2.0 * f.half_length * tail_sq).sqrt();
        let mut warnings = Vec::new();
        if tail_estimate > TAIL_TOL {
            warnings.push(format!("mode truncation tail {tail_estimate:.3e} exceeds {TAIL_TOL:.0e}"));
        }
        Ok(Self { eps, k, m_modes, half_length: f.half_length, fibers, tail_estimate, warnings })
    }

    pub fn xis(&self) -> Vec<f64> {
        self.fibers.iter().map(|f| f.xi).collect()
    }

    /// (u_ε(t), ∂ₜu_ε(t)) as fiber fields with harmonics |k| ≤ K.
    pub fn solve(&self, t: f64) -> Result<(FiberField, FiberField)> {
        let n = 2 * self.k + 1;
        let per = self
            .fibers
            .par_iter()
            .map(|fb| {
                let mut u = vec![C0; n];
                let mut ut = vec![C0; n];
                for (j, v) in fb.basis.vectors.iter().enumerate() {
                    let (d, dd) = fb.kernels[j].uv(t)?;
                    let w = fb.basis.weights[j] * fb.amp;
                    for i in 0..n {
                        u[i] += v[i] * w * d;
                        ut[i] += v[i] * w * dd;
                    }
                }
                Ok((Fiber { xi: fb.xi, coeffs: u }, Fiber { xi: fb.xi, coeffs: ut }))
            })
            .collect::<Result<Vec<_>>>()?;
        let (u, ut): (Vec<Fiber>, Vec<Fiber>) = per.into_iter().unzip();
        let mk = |fibers| FiberField { eps: self.eps, half_length: self.half_length, kmax: self.k, fibers };
        Ok((mk(u), mk(ut)))
    }
}

/// Solution of the heterogeneous wave equation at time t by Duhamel-by-Bloch.
#[derive(Clone, Debug)]
pub struct BlochSolution {
    pub t: f64,
    pub u: FiberField,
    pub ut: FiberField,
    pub tail_estimate: f64,
    pub warnings: Vec<String>,
}

pub fn bloch_duhamel(a: &CoefficientField, eps: f64, f: &Impulse, t: f64, m_modes: usize) -> Result<BlochSolution> {
    let spec = CoefficientSpectrum::new(a, DEFAULT_K);
    let r = BlochReference::new(&spec, eps, f, DEFAULT_K, m_modes)?;
    let (u, ut) = r.solve(t)?;
    Ok(BlochSolution { t, u, ut, tail_estimate: r.tail_estimate, warnings: r.warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impulse::TimeBump;
    use crate::spectral::SpectralCorrectors;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn test_spec() -> CoefficientSpectrum {
        CoefficientSpectrum::new(&CoefficientField::test_field(), DEFAULT_K)
    }

    #[test]
    fn homogeneous_fiber_is_diagonal() {
        let spec = CoefficientSpectrum::new(&CoefficientField::constant(1.0), 16);
        let op = assemble(&spec, 0.4, 16);
        for r in 0..op.dim() {
            for c in 0..op.dim() {
                let expect = if r == c { (TAU * (r as f64 - 16.0) + 0.4).powi(2) } else { 0.0 };
                assert_abs_diff_eq!(op.matrix[(r, c)].re, expect, epsilon = 1e-10);
                assert!(op.matrix[(r, c)].im.abs() < 1e-12);
            }
        }
        let g = ground_state(&op).unwrap();
        assert_abs_diff_eq!(g.eigenvalue, 0.16, epsilon = 1e-14);
        assert_abs_diff_eq!(g.mean.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hermitian_and_nonnegative() {
        let spec = test_spec();
        for &xi in &[0.0, 0.1, -0.7, 2.5] {
            let op = assemble(&spec, xi, DEFAULT_K);
            assert!(op.hermiticity_residual() <= 1e-12);
            let (vals, _) = op.eigen();
            assert!(vals[0] >= -1e-10);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn ground_state_at_zero() {
        let g = ground_state(&assemble(&test_spec(), 0.0, DEFAULT_K)).unwrap();
        assert_eq!(g.eigenvalue, 0.0);
        assert_abs_diff_eq!(g.mean.re, 1.0);
        assert!(g.residual < 1e-12);
    }

    #[test]
    fn ground_state_matches_dense_solve_at_doubled_k() {
        let spec = CoefficientSpectrum::new(&CoefficientField::test_field(), 64);
        let g = ground_state(&assemble(&spec, 0.1, 32)).unwrap();
        let (vals, _) = assemble(&spec, 0.1, 64).eigen();
        assert!((g.eigenvalue - vals[0]).abs() < 1e-10);
        assert!(g.residual < 1e-9);
        // K refinement of the refined ground state.
        let g64 = ground_state(&assemble(&spec, 0.1, 64)).unwrap();
        assert!((g.eigenvalue - g64.eigenvalue).abs() < 1e-10);
    }

    #[test]
    fn gap_and_mean_near_one() {
        let spec = test_spec();
        let mut gap0 = f64::INFINITY;
        for i in 0..=30 {
            let xi = 0.3 * i as f64 / 30.0;
            let g = ground_state(&assemble(&spec, xi, DEFAULT_K)).unwrap();
            gap0 = gap0.min(g.gap);
            // Distance of the normalized ground state from the constant is O(|ξ|).
            let w: Vec<Complex64> = g.coeffs.iter().map(|c| c / g.mean).collect();
            let dist: f64 = w.iter().enumerate().map(|(i, c)| if i == DEFAULT_K { (c - 1.0).norm_sqr() } else { c.norm_sqr() }).sum::<f64>().sqrt();
            assert!(dist <= 0.2 * xi + 1e-14, "xi {xi}: {dist}");
        }
        assert!(gap0 > 30.0, "gap {gap0}");
    }

    #[test]
    fn ground_eigenvalue_matches_homogenized_coefficient() {
        let g = ground_state(&assemble(&test_spec(), 1e-3, DEFAULT_K)).unwrap();
        assert!((g.eigenvalue / 1e-6 - 3f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn taylor_slopes() {
        let sc = SpectralCorrectors::build(&CoefficientField::test_field(), &CellGrid::new(512), 6).unwrap();
        let xis = log_samples(1e-3, 1e-1, 9);
        let r2 = taylor_residual(&test_spec(), &sc.b, 2, &xis).unwrap();
        let r4 = taylor_residual(&test_spec(), &sc.b, 4, &xis).unwrap();
        assert!((r2.fit.slope - 4.0).abs() < 0.3, "{:?}", r2);
        assert!((r4.fit.slope - 6.0).abs() < 0.3, "{:?}", r4);
        let one = taylor_residual(&CoefficientSpectrum::new(&CoefficientField::constant(1.0), 16), &[0.0, 1.0, 0.0], 2, &xis).unwrap();
        assert!(one.residuals.iter().all(|r| *r < 1e-15));
    }

    #[test]
    fn homogeneous_reference_is_exact() {
        let f = Impulse::single_mode(TimeBump::default(), 8.0, 5, Complex64::new(1.0, 0.5));
        let sol = bloch_duhamel(&CoefficientField::constant(1.0), 1.0 / 8.0, &f, 2.3, 12).unwrap();
        let xi = f.modes[0].0;
        let (u, _) = Kernel::new(TimeBump::default(), xi).unwrap().uv(2.3).unwrap();
        let c = sol.u.fibers[0].coeffs[DEFAULT_K];
        assert!((c - f.modes[0].1 * u).norm() < 1e-13);
        assert!(sol.u.fibers[0].coeffs.iter().enumerate().all(|(i, c)| i == DEFAULT_K || c.norm() < 1e-13));
        let zero = bloch_duhamel(&CoefficientField::constant(1.0), 1.0 / 8.0, &Impulse::zero(TimeBump::default(), 8.0), 2.0, 12).unwrap();
        assert_eq!(zero.u.l2_norm(), 0.0);
    }

    #[test]
    fn mode_truncation_converges() {
        let f = Impulse::random_band(TimeBump::default(), 8.0, 4.0, 3);
        let a = CoefficientField::test_field();
        let s8 = bloch_duhamel(&a, 1.0 / 16.0, &f, 2.0, 8).unwrap();
        let s16 = bloch_duhamel(&a, 1.0 / 16.0, &f, 2.0, 16).unwrap();
        let change = s8.u.sub(&s16.u).unwrap().l2_norm();
        assert!(change <= s8.tail_estimate.max(1e-14), "{change} vs {}", s8.tail_estimate);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn quadratic_form_matches_quadrature(seed in 0u64..10_000, xi in -3.0f64..3.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = 12usize;
            let spec = CoefficientSpectrum::new(&CoefficientField::test_field(), k);
            let op = assemble(&spec, xi, k);
            let u: Vec<Complex64> = (0..2 * k + 1).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            // Quadrature of ∫ a |(∂ + iξ)u|² on a fine grid (exact for trigonometric polynomials).
            let n = 256;
            let mut q = 0.0;
            for j in 0..n {
                let y = j as f64 / n as f64;
                let mut du = C0;
                for (i, c) in u.iter().enumerate() {
                    let kk = i as f64 - k as f64;
                    du += c * Complex64::new(0.0, TAU * kk + xi) * Complex64::from_polar(1.0, TAU * kk * y);
                }
                q += (2.0 + (TAU * y).sin()) * du.norm_sqr() / n as f64;
            }
            prop_assert!((op.quadratic_form(&u) - q).abs() <= 1e-9 * q);
        }
    }
}
