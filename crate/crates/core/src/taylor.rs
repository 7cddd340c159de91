//! Univariate truncated Taylor series ("jets") and iterated Laplacians.
//!
//! Powers of the Laplacian at a point are recovered from one-dimensional
//! Taylor coefficients along Gaussian-distributed directions: if `c₂ₙ(g)` is
//! the `t^{2n}` coefficient of `f(x + t g)` then
//!
//! ```text
//! Δⁿ f(x) = 2ⁿ n! · E_{g ~ N(0, I)} [c₂ₙ(g)]
//! ```
//!
//! in any dimension. `c₂ₙ` is a polynomial of degree `2n` in `g`, so a tensor
//! Gauss–Hermite rule with `n + 1` nodes per axis evaluates the expectation
//! exactly.

use std::ops::{Add, Mul, Sub};

use crate::quadrature::gauss_hermite;
use crate::{Error, Result};

/// Coefficients `c₀ … c_order` of a truncated power series in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Jet { coeffs }
    }

    /// Polynomial with the given low coefficients, padded or truncated to `order`.
    pub fn from_coeffs(low: &[f64], order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        for (c, v) in coeffs.iter_mut().zip(low) {
            *c = *v;
        }
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn scale(mut self, s: f64) -> Self {
        for c in &mut self.coeffs {
            *c *= s;
        }
        self
    }

    pub fn add_scalar(mut self, s: f64) -> Self {
        self.coeffs[0] += s;
        self
    }

    pub fn exp(&self) -> Self {
        let n = self.coeffs.len();
        let a = &self.coeffs;
        let mut h = vec![0.0; n];
        h[0] = a[0].exp();
        for m in 1..n {
            let mut acc = 0.0;
            for j in 1..=m {
                acc += j as f64 * a[j] * h[m - j];
            }
            h[m] = acc / m as f64;
        }
        Jet { coeffs: h }
    }

    /// Square root; the constant term must be positive.
    pub fn sqrt(&self) -> Result<Self> {
        let a = &self.coeffs;
        if !(a[0] > 0.0) {
            return Err(Error::Domain(format!("sqrt of jet with constant term {}", a[0])));
        }
        let n = a.len();
        let mut s = vec![0.0; n];
        s[0] = a[0].sqrt();
        for m in 1..n {
            let mut acc = a[m];
            for j in 1..m {
                acc -= s[j] * s[m - j];
            }
            s[m] = acc / (2.0 * s[0]);
        }
        Ok(Jet { coeffs: s })
    }

    pub fn recip(&self) -> Result<Self> {
        Jet::constant(1.0, self.order()).div(self)
    }

    pub fn div(&self, rhs: &Jet) -> Result<Self> {
        let b = &rhs.coeffs;
        if b[0] == 0.0 {
            return Err(Error::Domain("division by jet with zero constant term".into()));
        }
        let n = self.coeffs.len().min(b.len());
        let mut c = vec![0.0; n];
        for m in 0..n {
            let mut acc = self.coeffs[m];
            for j in 1..=m {
                acc -= b[j] * c[m - j];
            }
            c[m] = acc / b[0];
        }
        Ok(Jet { coeffs: c })
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        Jet { coeffs: (0..n).map(|i| self.coeffs[i] + rhs.coeffs[i]).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        Jet { coeffs: (0..n).map(|i| self.coeffs[i] - rhs.coeffs[i]).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let mut c = vec![0.0; n];
        for (i, ci) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.coeffs[j] * rhs.coeffs[i - j];
            }
            *ci = acc;
        }
        Jet { coeffs: c }
    }
}

/// `Δⁿ f(x)` for `n = 0..=max_power`, where `line_jet(g)` returns the jet of
/// `t ↦ f(x + t g)` to order at least `2·max_power`.
pub fn laplacian_powers<F>(dim: usize, max_power: usize, mut line_jet: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Jet>,
{
    if dim == 0 {
        return Err(Error::InvalidParams("dimension must be positive".into()));
    }
    let rule = gauss_hermite(max_power + 1);
    // nodes/weights for the standard normal distribution
    let nodes: Vec<f64> = rule.nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect();
    let weights: Vec<f64> =
        rule.weights.iter().map(|w| w / std::f64::consts::PI.sqrt()).collect();
    let p = nodes.len();

    let mut expectations = vec![0.0; max_power + 1];
    let mut index = vec![0usize; dim];
    let mut dir = vec![0.0; dim];
    loop {
        let mut weight = 1.0;
        for (d, &i) in index.iter().enumerate() {
            dir[d] = nodes[i];
            weight *= weights[i];
        }
        let jet = line_jet(&dir)?;
        if jet.order() < 2 * max_power {
            return Err(Error::InvalidParams(format!(
                "line jet of order {} cannot resolve Laplacian power {max_power}",
                jet.order()
            )));
        }
        for (n, e) in expectations.iter_mut().enumerate() {
            *e += weight * jet.coeffs()[2 * n];
        }
        // advance the tensor-product counter
        let mut d = 0;
        loop {
            if d == dim {
                return Ok(finish(expectations));
            }
            index[d] += 1;
            if index[d] < p {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
}

fn finish(mut expectations: Vec<f64>) -> Vec<f64> {
    let mut factor = 1.0;
    for (n, e) in expectations.iter_mut().enumerate() {
        if n > 0 {
            factor *= 2.0 * n as f64;
        }
        *e *= factor;
    }
    expectations
}
