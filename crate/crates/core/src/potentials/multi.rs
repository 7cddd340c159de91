use std::f64::consts::PI;

use crate::ensemble::DensityFloor;
use crate::sum::compensated_sum;
use crate::taylor::{laplacian_powers, Jet};
use crate::{
    DensityModel, DerivedParams, DpiParams, Error, MultiKindConfiguration, Result, Vec3,
};

use super::dpi::direct_from_squared;
use super::heat::series_partial_sums;

/// The direct potential in the configuration space of `m` kinds: every kernel
/// sum runs over particle index `i` of the product over kinds, so the
/// exponents use `Σ_l |x_l − a_i^{(l)}|²` and the delta normalisation is
/// `(πε²)^{-3m/2}`.
pub fn dpi_direct_multi(
    params: &DpiParams,
    derived: &DerivedParams,
    config: &MultiKindConfiguration,
    points: &[Vec3],
    floor: &DensityFloor,
) -> Result<f64> {
    let d2 = config.joint_squared_distances(points)?;
    direct_from_squared(params, derived, config.kind_count(), &d2, floor)
}

/// Configuration-space densities accepted by [`heat_series_multi`].
#[derive(Debug, Clone, PartialEq)]
pub enum JointDensity {
    /// `Π_l ρ_l(x_l)`; the multi-Laplacian series factorises.
    Product(Vec<DensityModel>),
    /// `Σ_i Π_l δ_ε(x_l − a_i^{(l)})`, a Gaussian mixture in `R^{3m}`.
    Mixture { config: MultiKindConfiguration, epsilon: f64 },
}

impl JointDensity {
    pub fn kind_count(&self) -> usize {
        match self {
            JointDensity::Product(parts) => parts.len(),
            JointDensity::Mixture { config, .. } => config.kind_count(),
        }
    }

    /// `(Δ₁ + ⋯ + Δ_m)ⁿ √ρ / √ρ` for `n = 0..=max_power`.
    pub fn sqrt_laplacian_power_ratios(
        &self,
        points: &[Vec3],
        max_power: usize,
        floor: &DensityFloor,
    ) -> Result<Vec<f64>> {
        if points.len() != self.kind_count() {
            return Err(Error::Structure(format!(
                "{} probe points for {} kinds",
                points.len(),
                self.kind_count()
            )));
        }
        match self {
            JointDensity::Product(parts) => {
                // exp(ωΣΔ_l) = Π exp(ωΔ_l): multiply the per-kind series in ω
                let mut total = vec![0.0; max_power + 1];
                total[0] = 1.0;
                for (model, x) in parts.iter().zip(points) {
                    let ratios = model.sqrt_laplacian_power_ratios(x, max_power, floor)?;
                    let factor = exp_coefficients(&ratios);
                    total = truncated_product(&total, &factor);
                }
                Ok(from_exp_coefficients(&total))
            }
            JointDensity::Mixture { config, epsilon } => {
                mixture_power_ratios(config, *epsilon, points, max_power, floor)
            }
        }
    }
}

/// `rₙ/n!`, the coefficients of `ωⁿ` in `e^{ωΔ}√ρ/√ρ`.
fn exp_coefficients(ratios: &[f64]) -> Vec<f64> {
    let mut fact = 1.0;
    ratios
        .iter()
        .enumerate()
        .map(|(n, r)| {
            if n > 0 {
                fact *= n as f64;
            }
            r / fact
        })
        .collect()
}

fn from_exp_coefficients(coeffs: &[f64]) -> Vec<f64> {
    let mut fact = 1.0;
    coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| {
            if n > 0 {
                fact *= n as f64;
            }
            c * fact
        })
        .collect()
}

fn truncated_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len()).map(|n| (0..=n).map(|j| a[j] * b[n - j]).sum()).collect()
}

fn mixture_power_ratios(
    config: &MultiKindConfiguration,
    epsilon: f64,
    points: &[Vec3],
    max_power: usize,
    floor: &DensityFloor,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParams(format!("kernel width must be positive, got {epsilon}")));
    }
    let eps2 = epsilon * epsilon;
    let d2 = config.joint_squared_distances(points)?;
    let m = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let log_sum = compensated_sum(d2.iter().map(|dk| (-(dk - m) / eps2).exp())).ln();
    let log_ratio = log_sum - m / eps2;
    if log_ratio < floor.log_ratio {
        return Err(Error::DegenerateDensity { log_ratio });
    }
    let kinds = config.kind_count();
    let offsets: Vec<Vec<f64>> = (0..config.particles_per_kind())
        .map(|i| {
            (0..kinds)
                .flat_map(|l| {
                    let o = points[l] - config.kind(l)[i];
                    [o.x, o.y, o.z]
                })
                .collect()
        })
        .collect();
    let order = 2 * max_power;
    let mut ratios = laplacian_powers(3 * kinds, max_power, |g| {
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let mut rho = Jet::constant(0.0, order);
        for (offset, &dk) in offsets.iter().zip(&d2) {
            let shifted = (dk - m) / eps2;
            if shifted > 745.0 {
                continue;
            }
            let dot: f64 = g.iter().zip(offset).map(|(a, b)| a * b).sum();
            let q = Jet::from_coeffs(&[-shifted, -2.0 * dot / eps2, -g2 / eps2], order);
            rho = &rho + &q.exp();
        }
        let s = rho.sqrt()?;
        let s0 = s.value();
        Ok(s.scale(1.0 / s0))
    })?;
    ratios[0] = 1.0;
    Ok(ratios)
}

/// `u0 · C^m · Σ_{n≤k} (ωⁿ/n!) (Δ₁+⋯+Δ_m)ⁿ√ρ / √ρ`.
pub fn heat_series_multi(
    params: &DpiParams,
    derived: &DerivedParams,
    joint: &JointDensity,
    points: &[Vec3],
    order: usize,
    floor: &DensityFloor,
) -> Result<f64> {
    let ratios = joint.sqrt_laplacian_power_ratios(points, order, floor)?;
    let m = joint.kind_count() as i32;
    let scale = params.u0 * derived.prefactor_c.powi(m);
    let sums = series_partial_sums(scale, derived.omega, &ratios);
    Ok(*sums.last().expect("at least the constant term"))
}

/// `(πε²)^{3m/2}`, the direct potential at the joint location of a single
/// particle per kind with `u0 = 1`.
pub fn joint_delta_volume(epsilon: f64, kinds: usize) -> f64 {
    (PI * epsilon * epsilon).powf(1.5 * kinds as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{dpi_direct, heat_series};
    use crate::ParticleConfiguration;
    use approx::assert_relative_eq;

    fn setup() -> (DpiParams, DerivedParams) {
        let p = DpiParams::new(0.7, 1.0, 4.0).unwrap();
        (p, p.derive().unwrap())
    }

    #[test]
    fn two_kinds_at_joint_location() {
        let (p, d) = setup();
        let cfg = MultiKindConfiguration::new(vec![vec![Vec3::zeros()], vec![Vec3::new(1.0, 2.0, 3.0)]])
            .unwrap();
        let u = dpi_direct_multi(&p, &d, &cfg, &[Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)], &DensityFloor::default())
            .unwrap();
        assert_relative_eq!(u, p.u0 * joint_delta_volume(d.epsilon, 2), max_relative = 1e-13);
    }

    #[test]
    fn single_kind_reduction() {
        let (p, d) = setup();
        let positions = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.5, -0.3, 0.2), Vec3::new(-1.0, 1.0, 0.5)];
        let cfg = ParticleConfiguration::new(positions.clone()).unwrap();
        let multi = MultiKindConfiguration::new(vec![positions]).unwrap();
        let floor = DensityFloor::default();
        let x = Vec3::new(0.4, 0.1, -0.3);
        let single = dpi_direct(&p, &d, &cfg, &x, &floor).unwrap();
        let joint = dpi_direct_multi(&p, &d, &multi, &[x], &floor).unwrap();
        assert_relative_eq!(single, joint, max_relative = 1e-14);

        let model = DensityModel::gaussian_mixture(cfg, d.epsilon).unwrap();
        let h = heat_series(&p, &d, &model, &x, 2, &floor).unwrap();
        let mixture = JointDensity::Mixture { config: multi, epsilon: d.epsilon };
        let hm = heat_series_multi(&p, &d, &mixture, &[x], 2, &floor).unwrap();
        assert_relative_eq!(h, hm, max_relative = 1e-12);
    }

    #[test]
    fn product_of_identical_gaussians_separates() {
        let (p, d) = setup();
        let floor = DensityFloor::default();
        let g = DensityModel::single_gaussian(Vec3::zeros(), 1.0).unwrap();
        let points = [Vec3::new(0.3, 0.0, 0.0), Vec3::new(0.3, 0.0, 0.0)];
        let joint = JointDensity::Product(vec![g.clone(), g]);
        let u = heat_series_multi(&p, &d, &joint, &points, 1, &floor).unwrap();
        // per-kind ratio r² − 3 for ε = 1
        let ratio = 0.09 - 3.0;
        let expected = p.u0 * d.prefactor_c.powi(2) * (1.0 + 2.0 * d.omega * ratio);
        assert_relative_eq!(u, expected, max_relative = 1e-12);
    }

    #[test]
    fn mixture_and_product_agree_for_one_particle_per_kind() {
        let (_, d) = setup();
        let floor = DensityFloor::default();
        let a = Vec3::new(0.1, 0.2, 0.3);
        let b = Vec3::new(-0.5, 0.0, 0.4);
        let points = [Vec3::new(0.0, 0.5, 0.0), Vec3::new(0.2, -0.1, 0.1)];
        let product = JointDensity::Product(vec![
            DensityModel::single_gaussian(a, d.epsilon).unwrap(),
            DensityModel::single_gaussian(b, d.epsilon).unwrap(),
        ]);
        let mixture = JointDensity::Mixture {
            config: MultiKindConfiguration::new(vec![vec![a], vec![b]]).unwrap(),
            epsilon: d.epsilon,
        };
        let rp = product.sqrt_laplacian_power_ratios(&points, 3, &floor).unwrap();
        let rm = mixture.sqrt_laplacian_power_ratios(&points, 3, &floor).unwrap();
        for (x, y) in rp.iter().zip(&rm) {
            assert_relative_eq!(x, y, max_relative = 1e-11);
        }
    }
}
