use std::f64::consts::PI;

use crate::ensemble::DensityFloor;
use crate::quadrature::{gauss_hermite, hermite_3d_estimate, monte_carlo_normal, Estimate};
use crate::sum::Compensated;
use crate::{DensityModel, DerivedParams, DpiParams, Error, ParticleConfiguration, Result, Vec3};

use super::QuadratureSpec;

/// Kernel sums `Σ_k e^{-(d_k² − m)/w²}` for several widths at once, shifted by
/// the nearest squared distance `m` so deep tails keep full precision.
pub(super) fn shifted_kernel_sums(d2: &[f64], m: f64, widths2: &[f64]) -> Vec<f64> {
    let mut acc = vec![Compensated::default(); widths2.len()];
    for &dk in d2 {
        for (a, w2) in acc.iter_mut().zip(widths2) {
            a.add((-(dk - m) / w2).exp());
        }
    }
    acc.iter().map(Compensated::value).collect()
}

/// The direct potential from squared distances in a space of `dims3` copies
/// of R³ (one per particle kind). `m` is the smallest entry of `d2`.
pub(super) fn direct_from_squared(
    params: &DpiParams,
    derived: &DerivedParams,
    dims3: usize,
    d2: &[f64],
    floor: &DensityFloor,
) -> Result<f64> {
    if d2.is_empty() {
        return Err(Error::Structure("the direct potential needs at least one particle".into()));
    }
    let m = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let eps2 = derived.epsilon * derived.epsilon;
    let as2 = params.alpha_s * params.alpha_s;
    let al2 = params.alpha_l * params.alpha_l;
    let sums = shifted_kernel_sums(d2, m, &[as2, al2, eps2]);
    let log_ratio = sums[2].ln() - m / eps2;
    if log_ratio.is_nan() || log_ratio < floor.log_ratio {
        return Err(Error::DegenerateDensity { log_ratio });
    }
    let log_peak = -1.5 * dims3 as f64 * (PI * eps2).ln();
    let log_shift = m / eps2 - m / as2 - m / al2 - log_peak;
    Ok(params.u0 * log_shift.exp() * sums[0] * sums[1] / sums[2])
}

/// `U(x) = u0 · Σe^{-d²/α_s²} · Σe^{-d²/α_ℓ²} / Σδ_ε`, `d = |x − x_j|`.
pub fn dpi_direct(
    params: &DpiParams,
    derived: &DerivedParams,
    config: &ParticleConfiguration,
    x: &Vec3,
    floor: &DensityFloor,
) -> Result<f64> {
    let d2: Vec<f64> = config.positions().iter().map(|a| (x - a).norm_squared()).collect();
    direct_from_squared(params, derived, 1, &d2, floor)
}

/// `U(x) = u0 · C · Σ_j e^{-d_j²/(2ε²+γ²)} / √ρ(x)` with ρ the ε-mixture of
/// the configuration.
pub fn dpi_closed(
    params: &DpiParams,
    derived: &DerivedParams,
    config: &ParticleConfiguration,
    x: &Vec3,
    floor: &DensityFloor,
) -> Result<f64> {
    if config.is_empty() {
        return Err(Error::Structure("the closed form needs at least one particle".into()));
    }
    let d2: Vec<f64> = config.positions().iter().map(|a| (x - a).norm_squared()).collect();
    let m = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let eps2 = derived.epsilon * derived.epsilon;
    let w2 = derived.closed_width2();
    let sums = shifted_kernel_sums(&d2, m, &[w2, eps2]);
    let log_ratio = sums[1].ln() - m / eps2;
    if log_ratio.is_nan() || log_ratio < floor.log_ratio {
        return Err(Error::DegenerateDensity { log_ratio });
    }
    let half_log_peak = -0.75 * (PI * eps2).ln();
    let log_shift = m / (2.0 * eps2) - m / w2 - half_log_peak;
    Ok(params.u0 * derived.prefactor_c * log_shift.exp() * sums[0] / sums[1].sqrt())
}

/// `U(x) = u0 (4β)^{-3/4} ∫ √(ρ(x+y)/ρ(x)) e^{-y²/γ²} d³y` for an arbitrary
/// density. The estimate's error is the quadrature's own error indicator;
/// callers compare it with their tolerance.
pub fn dpi_integral(
    params: &DpiParams,
    derived: &DerivedParams,
    model: &DensityModel,
    x: &Vec3,
    spec: &QuadratureSpec,
    floor: &DensityFloor,
) -> Result<Estimate> {
    let log_rho_x = model.log_density(x)?;
    model.check_floor(log_rho_x, floor)?;
    let gamma = derived.gamma;
    let scale = params.u0 * derived.integral_prefactor();
    let ratio = |y: Vec3| -> f64 {
        match model.log_density(&(x + y)) {
            Ok(l) => (0.5 * (l - log_rho_x)).exp(),
            // the shell centre is a measure-zero singular point
            Err(_) => 0.0,
        }
    };
    let raw = match *spec {
        QuadratureSpec::GaussHermite { points } => {
            if points == 0 {
                return Err(Error::InvalidParams("quadrature needs at least one point".into()));
            }
            let e = hermite_3d_estimate(points, |u| ratio(u * gamma));
            let g3 = gamma.powi(3);
            Estimate { value: e.value * g3, error: e.error * g3 }
        }
        QuadratureSpec::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParams("Monte Carlo needs at least two samples".into()));
            }
            let e = monte_carlo_normal(samples, seed, |u| ratio(u * (gamma / std::f64::consts::SQRT_2)));
            let norm = (PI * gamma * gamma).powf(1.5);
            Estimate { value: e.value * norm, error: e.error * norm }
        }
        QuadratureSpec::KernelCentered { points } => {
            kernel_centered(derived, model, x, log_rho_x, points)?
        }
    };
    Ok(Estimate { value: scale * raw.value, error: scale.abs() * raw.error })
}

/// Splits ρ into its kernels and integrates each `√δ_k`-shaped piece of the
/// integrand with a rule centred on the kernel. Kernels whose bound on the
/// contribution is below `e^{-45}` of the largest are skipped.
fn kernel_centered(
    derived: &DerivedParams,
    model: &DensityModel,
    x: &Vec3,
    log_rho_x: f64,
    points: usize,
) -> Result<Estimate> {
    let DensityModel::GaussianMixture { config, epsilon } = model else {
        return Err(Error::Unsupported("kernel-centred quadrature needs a Gaussian mixture".into()));
    };
    if points == 0 {
        return Err(Error::InvalidParams("quadrature needs at least one point".into()));
    }
    let eps = *epsilon;
    let eps2 = eps * eps;
    let gamma2 = derived.gamma * derived.gamma;
    let width2 = 2.0 * eps2 + gamma2;
    let log_bounds: Vec<f64> =
        config.positions().iter().map(|a| -(x - a).norm_squared() / width2).collect();
    let top = log_bounds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let active: Vec<Vec3> = config
        .positions()
        .iter()
        .zip(&log_bounds)
        .filter(|(_, &b)| b > top - 45.0)
        .map(|(a, _)| *a)
        .collect();
    let log_peak = -1.5 * (PI * eps2).ln();
    let step = std::f64::consts::SQRT_2 * eps;

    let integrate = |n: usize| -> Result<f64> {
        let rule = gauss_hermite(n);
        let mut acc = Compensated::default();
        for a in &active {
            for (i, &ux) in rule.nodes.iter().enumerate() {
                for (j, &uy) in rule.nodes.iter().enumerate() {
                    for (k, &uz) in rule.nodes.iter().enumerate() {
                        let u = Vec3::new(ux, uy, uz);
                        let z = a + u * step;
                        let log_rho_z = model.log_density(&z)?;
                        let w = rule.weights[i] * rule.weights[j] * rule.weights[k];
                        let exponent = log_peak - u.norm_squared() - (z - x).norm_squared() / gamma2
                            - 0.5 * log_rho_z
                            - 0.5 * log_rho_x;
                        acc.add(w * exponent.exp());
                    }
                }
            }
        }
        Ok(acc.value() * step.powi(3))
    };
    let fine = integrate(points)?;
    let coarse_points = (points * 3 / 4).max(1);
    let error = if coarse_points == points { 0.0 } else { (fine - integrate(coarse_points)?).abs() };
    Ok(Estimate { value: fine, error })
}
