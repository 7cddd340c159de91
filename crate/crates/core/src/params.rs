//! Interaction constants of the DPI potential and the constants derived from
//! them.
//!
//! The potential has a strength `u0` and two Gaussian ranges, a short one
//! `alpha_s` and a long one `alpha_l`. Rewriting it in terms of the density
//! introduces an insertion parameter β, an effective long width γ, the
//! regularisation width ε of the Gaussian delta, and the heat-operator
//! coefficient ω:
//!
//! ```text
//! ε = α_s / √2
//! β = ½ [1 + √(1 − 4 α_s² / α_ℓ²)]
//! γ = √2 α_s / [1 − √(1 − 4 α_s² / α_ℓ²)]^{1/2}
//! ω = ½ ε² γ² / (2ε² + γ²)
//! C = (4π ε² β)^{-3/4} · (π / (1/(2ε²) + 1/γ²))^{3/2}
//! ```

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Strength and ranges of the DPI potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpiParams {
    /// Interaction strength; the sign is free.
    pub u0: f64,
    /// Short range, > 0.
    pub alpha_s: f64,
    /// Long range, ≥ 2·alpha_s.
    pub alpha_l: f64,
}

impl DpiParams {
    pub fn new(u0: f64, alpha_s: f64, alpha_l: f64) -> Result<Self> {
        let p = DpiParams { u0, alpha_s, alpha_l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.u0.is_finite() {
            return Err(Error::InvalidParams(format!("u0 must be finite, got {}", self.u0)));
        }
        if !(self.alpha_s > 0.0 && self.alpha_s.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha_s must be positive and finite, got {}",
                self.alpha_s
            )));
        }
        if !(self.alpha_l > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha_l must be positive, got {}",
                self.alpha_l
            )));
        }
        let disc = self.discriminant();
        if disc < 0.0 {
            return Err(Error::InvalidParams(format!(
                "insertion discriminant 1 - 4*alpha_s^2/alpha_l^2 = {disc:.6e} is negative \
                 (alpha_l = {} < 2*alpha_s = {})",
                self.alpha_l,
                2.0 * self.alpha_s
            )));
        }
        Ok(())
    }

    /// `1 − 4α_s²/α_ℓ²`, the quantity under the square root of β and γ.
    pub fn discriminant(&self) -> f64 {
        let ratio = self.alpha_s / self.alpha_l;
        1.0 - 4.0 * ratio * ratio
    }

    /// Ratio α_s/α_ℓ, the small parameter of the equivalence regime.
    pub fn range_ratio(&self) -> f64 {
        self.alpha_s / self.alpha_l
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive_params(self)
    }
}

/// Constants derived from [`DpiParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Width of the Gaussian delta regularisation, `2ε² = α_s²`.
    pub epsilon: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    /// Constant multiplying the heat-operator series.
    pub prefactor_c: f64,
    /// `u0 · C · ω`, the coefficient of the quantum-potential-shaped term.
    /// Matching Bohm's `−ℏ²/2m` needs `u0 < 0`.
    pub quantum_coupling: f64,
}

pub fn derive_params(p: &DpiParams) -> Result<DerivedParams> {
    p.validate()?;
    let epsilon = p.alpha_s / std::f64::consts::SQRT_2;
    let root = p.discriminant().sqrt();
    let beta = 0.5 * (1.0 + root);
    // √2 α_s / √(1 − root) rewritten with 1 − root = x / (1 + root), x = 4α_s²/α_ℓ²
    let gamma = p.alpha_l * beta.sqrt();
    let eps2 = epsilon * epsilon;
    let gamma2 = gamma * gamma;
    let omega = 0.5 * eps2 * gamma2 / (2.0 * eps2 + gamma2);
    let prefactor_c = closed_prefactor(eps2, beta, gamma2);
    Ok(DerivedParams {
        epsilon,
        beta,
        gamma,
        omega,
        prefactor_c,
        quantum_coupling: p.u0 * prefactor_c * omega,
    })
}

fn closed_prefactor(eps2: f64, beta: f64, gamma2: f64) -> f64 {
    (4.0 * PI * eps2 * beta).powf(-0.75) * (PI / (0.5 / eps2 + 1.0 / gamma2)).powf(1.5)
}

impl DerivedParams {
    /// Peak value `(πε²)^{-3/2}` of one regularised delta kernel.
    pub fn kernel_peak(&self) -> f64 {
        (PI * self.epsilon * self.epsilon).powf(-1.5)
    }

    /// `2ε² + γ²`, the squared width of the closed-form numerator kernels.
    pub fn closed_width2(&self) -> f64 {
        2.0 * self.epsilon * self.epsilon + self.gamma * self.gamma
    }

    /// `(4β)^{-3/4}`, the prefactor of the density-integral form.
    pub fn integral_prefactor(&self) -> f64 {
        (4.0 * self.beta).powf(-0.75)
    }

    /// `(4β)^{-3/4} (π/(1/(2ε²)+1/γ²))^{3/4}`, the prefactor written in front of
    /// the radially discretised series.
    pub fn radial_prefactor(&self) -> f64 {
        let eps2 = self.epsilon * self.epsilon;
        let gamma2 = self.gamma * self.gamma;
        (4.0 * self.beta).powf(-0.75) * (PI / (0.5 / eps2 + 1.0 / gamma2)).powf(0.75)
    }
}

/// ℏ, particle mass and Newton's constant for the dynamics and QP reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub g_newton: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64, g_newton: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("mass", mass), ("g_newton", g_newton)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PhysicalConstants { hbar, mass, g_newton })
    }

    /// `ℏ²/2m`.
    pub fn qp_strength(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.0, mass: 1.0, g_newton: 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn derived(alpha_s: f64, alpha_l: f64) -> DerivedParams {
        DpiParams::new(1.0, alpha_s, alpha_l).unwrap().derive().unwrap()
    }

    #[test]
    fn degenerate_discriminant() {
        let d = derived(1.0, 2.0);
        assert_eq!(d.beta, 0.5);
        assert_relative_eq!(d.gamma, 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(d.epsilon, 0.5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(d.omega, 1.0 / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn reference_values_at_ratio_quarter() {
        // 30-digit evaluation of the defining formulas
        let d = derived(1.0, 4.0);
        assert_relative_eq!(d.beta, 0.933_012_701_892_219_3, max_relative = 1e-14);
        assert_relative_eq!(d.gamma, 3.863_703_305_156_273, max_relative = 1e-14);
        assert_relative_eq!(d.omega, 0.234_304_569_926_329_6, max_relative = 1e-14);
        assert_relative_eq!(d.prefactor_c, 1.341_020_344_326_536, max_relative = 1e-13);
        assert_relative_eq!(d.quantum_coupling, 0.314_207_195_039_887_5, max_relative = 1e-13);
    }

    #[test]
    fn gamma_matches_literal_formula() {
        for alpha_l in [2.0, 2.5, 3.0, 5.0, 10.0] {
            let p = DpiParams::new(1.0, 1.0, alpha_l).unwrap();
            let root = p.discriminant().sqrt();
            let literal = 2f64.sqrt() / (1.0 - root).sqrt();
            assert_relative_eq!(p.derive().unwrap().gamma, literal, max_relative = 1e-12);
        }
    }

    #[test]
    fn long_range_limit() {
        let d = derived(1.0, 1.0e6);
        assert_relative_eq!(d.beta, 1.0, max_relative = 1e-11);
        assert_relative_eq!(d.gamma, 1.0e6, max_relative = 1e-11);
        assert_relative_eq!(d.omega, 0.25, max_relative = 1e-11);
    }

    #[test]
    fn rejects_short_long_range() {
        let err = DpiParams::new(1.0, 1.0, 1.9).unwrap_err();
        assert!(err.to_string().contains("discriminant"), "{err}");
        assert!(DpiParams::new(1.0, -1.0, 4.0).is_err());
        assert!(DpiParams::new(1.0, 0.0, 4.0).is_err());
    }

    #[test]
    fn monotone_in_long_range() {
        let mut prev = derived(1.0, 2.0);
        for i in 1..400 {
            let d = derived(1.0, 2.0 + 0.05 * f64::from(i));
            assert!(d.beta >= prev.beta);
            assert!(d.omega >= prev.omega);
            assert!(d.gamma >= 2f64.sqrt() * 1.0);
            assert!((0.5..=1.0).contains(&d.beta));
            prev = d;
        }
    }

    #[test]
    fn length_scaling_audit() {
        let base = derived(1.0, 4.0);
        let lambda = 3.0;
        let scaled = derived(lambda, 4.0 * lambda);
        assert_relative_eq!(scaled.beta, base.beta, max_relative = 1e-14);
        assert_relative_eq!(scaled.epsilon, lambda * base.epsilon, max_relative = 1e-14);
        assert_relative_eq!(scaled.gamma, lambda * base.gamma, max_relative = 1e-14);
        assert_relative_eq!(scaled.omega, lambda * lambda * base.omega, max_relative = 1e-14);
        assert_relative_eq!(
            scaled.prefactor_c,
            lambda.powf(1.5) * base.prefactor_c,
            max_relative = 1e-13
        );
    }

    #[test]
    fn coupling_carries_sign_of_u0() {
        let p = DpiParams::new(-2.0, 1.0, 4.0).unwrap();
        let d = p.derive().unwrap();
        assert!(d.quantum_coupling < 0.0);
        assert_relative_eq!(d.quantum_coupling, -2.0 * d.prefactor_c * d.omega);
    }

    #[test]
    fn constants_must_be_positive() {
        assert!(PhysicalConstants::new(1.0, 0.0, 1.0).is_err());
        assert_eq!(PhysicalConstants::new(1.0, 2.0, 1.0).unwrap().qp_strength(), 0.25);
    }
}
