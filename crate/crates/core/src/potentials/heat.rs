use serde::{Deserialize, Serialize};

use crate::ensemble::DensityFloor;
use crate::quadrature::{hermite_3d_estimate, Estimate};
use crate::{DensityModel, DerivedParams, DpiParams, Error, PhysicalConstants, Result, Vec3};

/// `u0·C·Σ_{n≤j} (ωⁿ/n!) Δⁿ√ρ/√ρ` for every `j = 0..=order`.
pub fn heat_series_partial_sums(
    params: &DpiParams,
    derived: &DerivedParams,
    model: &DensityModel,
    x: &Vec3,
    order: usize,
    floor: &DensityFloor,
) -> Result<Vec<f64>> {
    let ratios = model.sqrt_laplacian_power_ratios(x, order, floor)?;
    Ok(series_partial_sums(params.u0 * derived.prefactor_c, derived.omega, &ratios))
}

pub(super) fn series_partial_sums(scale: f64, omega: f64, ratios: &[f64]) -> Vec<f64> {
    let mut coeff = 1.0;
    let mut total = 0.0;
    ratios
        .iter()
        .enumerate()
        .map(|(n, r)| {
            if n > 0 {
                coeff *= omega / n as f64;
            }
            total += coeff * r;
            scale * total
        })
        .collect()
}

/// The heat series truncated after the `ωᵏ` term. `k = 1` is the constant
/// plus the quantum-potential-shaped term.
pub fn heat_series(
    params: &DpiParams,
    derived: &DerivedParams,
    model: &DensityModel,
    x: &Vec3,
    order: usize,
    floor: &DensityFloor,
) -> Result<f64> {
    let sums = heat_series_partial_sums(params, derived, model, x, order, floor)?;
    Ok(*sums.last().expect("at least the constant term"))
}

/// `(e^{ωΔ}√ρ)(x)`: convolution of `√ρ` with `(4πω)^{-3/2} e^{-y²/4ω}`, by a
/// tensor Gauss–Hermite rule with `points` nodes per axis.
pub fn heat_kernel_convolution(
    model: &DensityModel,
    omega: f64,
    x: &Vec3,
    points: usize,
) -> Result<Estimate> {
    let ratio = heat_kernel_ratio(model, omega, x, points, &DensityFloor { log_ratio: f64::NEG_INFINITY })?;
    let root = (0.5 * model.log_density(x)?).exp();
    Ok(Estimate { value: ratio.value * root, error: ratio.error * root })
}

/// `(e^{ωΔ}√ρ)(x) / √ρ(x)`, evaluated in log-scaled form so it stays accurate
/// where `ρ(x)` itself underflows. Comparable with the heat series divided
/// by `u0·C`.
pub fn heat_kernel_ratio(
    model: &DensityModel,
    omega: f64,
    x: &Vec3,
    points: usize,
    floor: &DensityFloor,
) -> Result<Estimate> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParams(format!("heat coefficient must be positive, got {omega}")));
    }
    if points == 0 {
        return Err(Error::InvalidParams("quadrature needs at least one point".into()));
    }
    let log_rho_x = model.log_density(x)?;
    model.check_floor(log_rho_x, floor)?;
    let step = 2.0 * omega.sqrt();
    let norm = std::f64::consts::PI.powf(-1.5);
    let e = hermite_3d_estimate(points, |u| match model.log_density(&(x + u * step)) {
        Ok(l) => (0.5 * (l - log_rho_x)).exp(),
        Err(_) => 0.0,
    });
    Ok(Estimate { value: norm * e.value, error: norm * e.error })
}

/// Compares the Gaussian heat action written with matched exponents and unit
/// amplitude against the exact semigroup action on `e^{-d²/2ε²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatActionReport {
    pub epsilon: f64,
    pub gamma: f64,
    pub omega: f64,
    /// `−1/(2ε²) + ω/ε⁴`.
    pub claimed_exponent: f64,
    /// `−1/(2ε² + γ²)`.
    pub target_exponent: f64,
    pub exponent_relative_error: f64,
    /// `−1/(2ε² + 4ω)`, the exponent of the exact action.
    pub exact_exponent: f64,
    /// `(2ε²/(2ε² + 4ω))^{3/2}`.
    pub exact_amplitude: f64,
    /// Claimed amplitude (one) over the exact amplitude.
    pub amplitude_ratio: f64,
}

pub fn gaussian_heat_action_check(derived: &DerivedParams) -> HeatActionReport {
    let eps2 = derived.epsilon * derived.epsilon;
    let gamma2 = derived.gamma * derived.gamma;
    let omega = derived.omega;
    let claimed = -0.5 / eps2 + omega / (eps2 * eps2);
    let target = -1.0 / (2.0 * eps2 + gamma2);
    let exact_amplitude = (2.0 * eps2 / (2.0 * eps2 + 4.0 * omega)).powf(1.5);
    HeatActionReport {
        epsilon: derived.epsilon,
        gamma: derived.gamma,
        omega,
        claimed_exponent: claimed,
        target_exponent: target,
        exponent_relative_error: ((claimed - target) / target).abs(),
        exact_exponent: -1.0 / (2.0 * eps2 + 4.0 * omega),
        exact_amplitude,
        amplitude_ratio: 1.0 / exact_amplitude,
    }
}

/// Bohm's quantum potential `Q = −(ℏ²/2m) Δ√ρ/√ρ`.
pub fn bohm_qp(
    constants: &PhysicalConstants,
    model: &DensityModel,
    x: &Vec3,
    floor: &DensityFloor,
) -> Result<f64> {
    Ok(-constants.qp_strength() * model.sqrt_laplacian_ratio(x, floor)?)
}
