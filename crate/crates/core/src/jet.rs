//! Truncated real power series a₀ + a₁δ + … + a_K δ^K.

use std::ops::{Add, Mul, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Jet(v)
    }

    /// c + s·δ.
    pub fn linear(c: f64, s: f64, order: usize) -> Self {
        let mut j = Self::constant(c, order);
        if order >= 1 {
            j.0[1] = s;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// k-th derivative at δ = 0, i.e. k!·a_k.
    pub fn derivative(&self, k: usize) -> f64 {
        let f: f64 = (1..=k).map(|i| i as f64).product();
        self.0[k] * f
    }

    pub fn scale(&self, c: f64) -> Self {
        Jet(self.0.iter().map(|v| v * c).collect())
    }

    pub fn recip(&self) -> Self {
        let a = &self.0;
        let n = a.len();
        let mut r = vec![0.0; n];
        r[0] = 1.0 / a[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| a[j] * r[k - j]).sum();
            r[k] = -s / a[0];
        }
        Jet(r)
    }

    pub fn exp(&self) -> Self {
        let a = &self.0;
        let n = a.len();
        let mut e = vec![0.0; n];
        e[0] = a[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    /// Square root; requires a₀ > 0.
    pub fn sqrt(&self) -> Self {
        let a = &self.0;
        let n = a.len();
        let mut r = vec![0.0; n];
        r[0] = a[0].sqrt();
        for k in 1..n {
            let s: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
            r[k] = (a[k] - s) / (2.0 * r[0]);
        }
        Jet(r)
    }

    /// (sin, cos) of the series.
    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.0;
        let n = a.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..n {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 1..=k {
                ds += j as f64 * a[j] * c[k - j];
                dc -= j as f64 * a[j] * s[k - j];
            }
            s[k] = ds / k as f64;
            c[k] = dc / k as f64;
        }
        (Jet(s), Jet(c))
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let n = self.0.len().min(o.0.len());
        let mut r = vec![0.0; n];
        for (i, a) in self.0.iter().enumerate().take(n) {
            for (j, b) in o.0.iter().enumerate().take(n - i) {
                r[i + j] += a * b;
            }
        }
        Jet(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn elementary_functions() {
        let x = Jet::linear(0.3, 1.0, 6);
        let e = x.exp();
        for k in 0..=6 {
            assert_abs_diff_eq!(e.derivative(k), 0.3f64.exp(), epsilon = 1e-12);
        }
        let (s, c) = x.sin_cos();
        assert_abs_diff_eq!(s.derivative(3), -(0.3f64.cos()), epsilon = 1e-12);
        assert_abs_diff_eq!(c.derivative(2), -(0.3f64.cos()), epsilon = 1e-12);
        let r = Jet::linear(2.0, 1.0, 4).recip();
        assert_abs_diff_eq!(r.derivative(2), 2.0 / 8.0, epsilon = 1e-14);
        let q = Jet::linear(4.0, 1.0, 3).sqrt();
        assert_abs_diff_eq!(q.derivative(1), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(q.derivative(2), -1.0 / 32.0, epsilon = 1e-14);
        let p = &q * &q;
        assert_abs_diff_eq!(p.0[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.0[2], 0.0, epsilon = 1e-14);
    }
}
