//! Spectral calculus on the discretized unit cell Q = (−1/2, 1/2) and periodic
//! elliptic solvers.
//!
//! Fields are sampled at y_j = −1/2 + j/N. Because node 0 sits at −1/2, the
//! Fourier coefficient of e^{2πiky} equals the raw DFT bin times (−1)^k / N.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::CoefficientField;

/// Relative tolerance on the mean of a right-hand side (Fredholm alternative).
pub const TOL_FREDHOLM: f64 = 1e-9;

const CG_TOL: f64 = 1e-14;
const CG_MAX_ITER: usize = 2000;

/// Uniform grid on the unit cell with cached FFT plans.
pub struct CellGrid {
    n: usize,
    dealias: bool,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CellGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CellGrid").field("n", &self.n).field("dealias", &self.dealias).finish()
    }
}

impl CellGrid {
    /// Grid with `n` points (a power of two, at least 8) and de-aliased products.
    pub fn new(n: usize) -> Arc<Self> {
        Self::with_dealias(n, true)
    }

    pub fn with_dealias(n: usize, dealias: bool) -> Arc<Self> {
        assert!(n.is_power_of_two() && n >= 8, "cell grid size must be a power of two >= 8");
        let mut planner = FftPlanner::new();
        let m = 3 * n / 2;
        Arc::new(Self {
            n,
            dealias,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(m),
            inv_pad: planner.plan_fft_inverse(m),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Node y_j = −1/2 + j/N.
    pub fn node(&self, j: usize) -> f64 {
        -0.5 + j as f64 / self.n as f64
    }

    /// Signed wavenumber index of DFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    fn forward(&self, v: &mut [Complex64]) {
        self.fwd.process(v);
    }

    fn inverse(&self, v: &mut [Complex64]) {
        self.inv.process(v);
        let s = 1.0 / self.n as f64;
        v.iter_mut().for_each(|x| *x *= s);
    }

    /// Apply a Fourier multiplier `m(k)` (k the signed wavenumber index).
    fn multiplier(&self, values: &[Complex64], m: impl Fn(i64) -> Complex64) -> Vec<Complex64> {
        let mut v = values.to_vec();
        self.forward(&mut v);
        for (j, x) in v.iter_mut().enumerate() {
            *x *= m(self.wavenumber(j));
        }
        self.inverse(&mut v);
        v
    }

    fn nyquist(&self) -> i64 {
        -(self.n as i64) / 2
    }

    /// Pointwise product with 3/2-rule de-aliasing when enabled.
    fn product(&self, f: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
        if !self.dealias {
            return f.iter().zip(g).map(|(a, b)| a * b).collect();
        }
        let n = self.n;
        let m = 3 * n / 2;
        let pad = |src: &[Complex64]| {
            let mut s = src.to_vec();
            self.forward(&mut s);
            let mut p = vec![Complex64::new(0.0, 0.0); m];
            for (j, &c) in s.iter().enumerate() {
                let k = self.wavenumber(j);
                if k == self.nyquist() {
                    // Split the Nyquist bin symmetrically over ±N/2.
                    p[(m as i64 + k) as usize] += 0.5 * c;
                    p[n / 2] += 0.5 * c;
                } else {
                    p[k.rem_euclid(m as i64) as usize] += c;
                }
            }
            self.inv_pad.process(&mut p);
            p.iter_mut().for_each(|x| *x /= n as f64);
            p
        };
        let pf = pad(f);
        let pg = pad(g);
        let mut prod: Vec<Complex64> = pf.iter().zip(&pg).map(|(a, b)| a * b).collect();
        self.fwd_pad.process(&mut prod);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (j, &c) in prod.iter().enumerate() {
            let k = if j < m / 2 { j as i64 } else { j as i64 - m as i64 };
            let half = (n / 2) as i64;
            if k.abs() < half {
                out[k.rem_euclid(n as i64) as usize] += c;
            } else if k.abs() == half {
                out[half as usize] += c;
            }
        }
        // Forward transform on the padded grid scales by m; return to an n-point signal.
        let s = 1.0 / m as f64 * (n as f64);
        out.iter_mut().for_each(|x| *x *= s);
        self.inverse(&mut out);
        out
    }
}

/// A complex scalar field sampled on a [`CellGrid`].
#[derive(Clone, Debug)]
pub struct PeriodicField {
    grid: Arc<CellGrid>,
    values: Vec<Complex64>,
}

impl PeriodicField {
    pub fn new(grid: &Arc<CellGrid>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.n(), "field length must match grid");
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &Arc<CellGrid>) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: &Arc<CellGrid>, c: Complex64) -> Self {
        Self::new(grid, vec![c; grid.n()])
    }

    pub fn from_real_fn(grid: &Arc<CellGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self::new(grid, (0..grid.n()).map(|j| Complex64::new(f(grid.node(j)), 0.0)).collect())
    }

    pub fn from_fn(grid: &Arc<CellGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        Self::new(grid, (0..grid.n()).map(|j| f(grid.node(j))).collect())
    }

    /// Sample a coefficient field at the grid nodes.
    pub fn sample(grid: &Arc<CellGrid>, a: &CoefficientField) -> Self {
        Self::from_real_fn(grid, |y| a.eval(y))
    }

    /// Build from true Fourier coefficients `c(k)` for k in −N/2..N/2.
    pub fn from_coefficients(grid: &Arc<CellGrid>, c: impl Fn(i64) -> Complex64) -> Self {
        let n = grid.n();
        let mut v: Vec<Complex64> = (0..n)
            .map(|j| {
                let k = grid.wavenumber(j);
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                c(k) * sign * n as f64
            })
            .collect();
        grid.inverse(&mut v);
        Self::new(grid, v)
    }

    pub fn grid(&self) -> &Arc<CellGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Node average.
    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// Root-mean-square over the cell (L² norm on a unit-volume cell).
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// H¹ norm (L² of the field plus L² of its derivative).
    pub fn h1_norm(&self) -> f64 {
        (self.l2_norm().powi(2) + self.grad().l2_norm().powi(2)).sqrt()
    }

    /// True Fourier coefficients, indexed by signed wavenumber index k ∈ [−N/2, N/2).
    pub fn coefficient_vec(&self) -> Vec<Complex64> {
        let n = self.grid.n();
        let mut v = self.values.clone();
        self.grid.forward(&mut v);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (j, c) in v.into_iter().enumerate() {
            let k = self.grid.wavenumber(j);
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            out[(k + n as i64 / 2) as usize] = c * sign / n as f64;
        }
        out
    }

    /// True Fourier coefficients for |k| ≤ kmax (zero beyond the grid band), ordered −kmax..=kmax.
    pub fn coefficients(&self, kmax: usize) -> Vec<Complex64> {
        let all = self.coefficient_vec();
        let half = self.grid.n() as i64 / 2;
        (-(kmax as i64)..=kmax as i64)
            .map(|k| if k > -half && k < half { all[(k + half) as usize] } else { Complex64::new(0.0, 0.0) })
            .collect()
    }

    /// Spectral derivative d/dy (Nyquist mode zeroed).
    pub fn grad(&self) -> Self {
        let ny = self.grid.nyquist();
        let v = self.grid.multiplier(&self.values, |k| {
            if k == ny {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * PI * k as f64)
            }
        });
        Self::new(&self.grid, v)
    }

    /// Divergence; in one dimension identical to [`grad`](Self::grad).
    pub fn div(&self) -> Self {
        self.grad()
    }

    /// Mean-zero antiderivative of a mean-zero field.
    pub fn antiderivative(&self) -> Self {
        let ny = self.grid.nyquist();
        let v = self.grid.multiplier(&self.values, |k| {
            if k == 0 || k == ny {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / (2.0 * PI * k as f64))
            }
        });
        Self::new(&self.grid, v)
    }

    /// Product on the grid (de-aliased when the grid requests it).
    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.grid, self.grid.product(&self.values, &other.values))
    }

    /// Plain pointwise product without de-aliasing.
    pub fn mul_pointwise(&self, other: &Self) -> Self {
        Self::new(&self.grid, self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect())
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        Self::new(&self.grid, self.values.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.grid, self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(&self.grid, self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// self += c·other.
    pub fn axpy(&mut self, c: impl Into<Complex64>, other: &Self) {
        let c = c.into();
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += c * b);
    }

    pub fn add_constant(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        Self::new(&self.grid, self.values.iter().map(|v| v + c).collect())
    }

    pub fn conj(&self) -> Self {
        Self::new(&self.grid, self.values.iter().map(|v| v.conj()).collect())
    }

    /// Subtract the mean.
    pub fn mean_free(&self) -> Self {
        let m = self.mean();
        self.add_constant(-m)
    }

    /// Largest imaginary part magnitude.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Drop imaginary parts.
    pub fn real_part(&self) -> Self {
        Self::new(&self.grid, self.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect())
    }
}

/// Node average of a field.
pub fn cell_mean(f: &PeriodicField) -> Complex64 {
    f.mean()
}

/// Means below this are round-off of a right-hand side that vanishes identically.
const FREDHOLM_ABS_FLOOR: f64 = 1e-12;

fn check_fredholm(rhs: &PeriodicField, context: &str) -> Result<()> {
    let mean = rhs.mean().norm();
    let norm = rhs.l2_norm();
    if mean > TOL_FREDHOLM * norm && mean > FREDHOLM_ABS_FLOOR {
        return Err(Error::IncompatibleRhs { context: context.into(), mean, norm });
    }
    Ok(())
}

/// Relative Fredholm mean |E[rhs]| / ‖rhs‖ (0 for a vanishing right-hand side).
pub fn fredholm_ratio(rhs: &PeriodicField) -> f64 {
    let norm = rhs.l2_norm();
    if norm == 0.0 {
        0.0
    } else {
        rhs.mean().norm() / norm
    }
}

/// Apply −(a u′)′ with `a` given as a sampled field.
pub fn apply_elliptic(a: &PeriodicField, u: &PeriodicField) -> PeriodicField {
    a.mul(&u.grad()).grad().scale(-1.0)
}

/// Solve −(a u′)′ = rhs on the periodic cell with cell mean `mean_target`.
///
/// Preconditioned conjugate gradients on the mean-free subspace; the
/// preconditioner is the inverse Laplacian scaled by 1/E[a].
pub fn solve_elliptic(
    a: &CoefficientField,
    rhs: &PeriodicField,
    mean_target: Complex64,
) -> Result<PeriodicField> {
    let grid = rhs.grid().clone();
    let af = PeriodicField::sample(&grid, a);
    solve_elliptic_sampled(&af, rhs, mean_target)
}

/// As [`solve_elliptic`] with the coefficient already sampled on the grid.
pub fn solve_elliptic_sampled(
    a: &PeriodicField,
    rhs: &PeriodicField,
    mean_target: Complex64,
) -> Result<PeriodicField> {
    check_fredholm(rhs, "solve_elliptic")?;
    let grid = rhs.grid().clone();
    let ny = grid.nyquist();
    let b = project(&rhs.mean_free());
    let bnorm = b.l2_norm();
    if bnorm == 0.0 {
        return Ok(PeriodicField::constant(&grid, mean_target));
    }
    let abar = a.mean().re;
    let precond = |r: &PeriodicField| {
        PeriodicField::new(
            &grid,
            grid.multiplier(r.values(), |k| {
                if k == 0 || k == ny {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(1.0 / (abar * (2.0 * PI * k as f64).powi(2)), 0.0)
                }
            }),
        )
    };
    let dot = |x: &PeriodicField, y: &PeriodicField| {
        x.values().iter().zip(y.values()).map(|(p, q)| p.conj() * q).sum::<Complex64>()
    };
    let mut x = PeriodicField::zeros(&grid);
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rnorm = r.l2_norm();
    for _ in 0..CG_MAX_ITER {
        if rnorm <= CG_TOL * bnorm {
            let u = project(&x.mean_free());
            return Ok(u.add_constant(mean_target));
        }
        let ap = project(&apply_elliptic(a, &p));
        let alpha = rz / dot(&p, &ap);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        rnorm = r.l2_norm();
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.add(&p.scale(beta));
    }
    if rnorm <= 1e-11 * bnorm {
        let u = project(&x.mean_free());
        return Ok(u.add_constant(mean_target));
    }
    Err(Error::NoConvergence { iterations: CG_MAX_ITER, residual: rnorm / bnorm })
}

/// Remove the Nyquist component (it is invisible to the spectral derivative).
fn project(f: &PeriodicField) -> PeriodicField {
    let grid = f.grid().clone();
    let ny = grid.nyquist();
    PeriodicField::new(
        &grid,
        grid.multiplier(f.values(), |k| {
            if k == ny {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        }),
    )
}

/// Closed-form one-dimensional solve: u′ = (C − R)/a with R the antiderivative
/// of rhs and C = E[R/a]/E[1/a] enforcing periodicity of u.
pub fn solve_elliptic_1d_exact(
    a: &CoefficientField,
    rhs: &PeriodicField,
    mean_target: Complex64,
) -> Result<PeriodicField> {
    check_fredholm(rhs, "solve_elliptic_1d_exact")?;
    let grid = rhs.grid().clone();
    let inv_a = PeriodicField::from_real_fn(&grid, |y| 1.0 / a.eval(y));
    let r = rhs.mean_free().antiderivative();
    let c = r.mul_pointwise(&inv_a).mean() / inv_a.mean();
    let du = r.scale(-1.0).add_constant(c).mul_pointwise(&inv_a);
    Ok(du.mean_free().antiderivative().add_constant(mean_target))
}

/// Solve −u″ = rhs by Fourier division.
pub fn solve_poisson(rhs: &PeriodicField, mean_target: Complex64) -> Result<PeriodicField> {
    check_fredholm(rhs, "solve_poisson")?;
    let grid = rhs.grid().clone();
    let ny = grid.nyquist();
    let v = grid.multiplier(rhs.values(), |k| {
        if k == 0 || k == ny {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0 / (2.0 * PI * k as f64).powi(2), 0.0)
        }
    });
    Ok(PeriodicField::new(&grid, v).add_constant(mean_target))
}
