//! Shared fixtures for the criterion benches.

use dpi_core::ensemble::sample_configuration;
use dpi_core::{DensityModel, DerivedParams, DpiParams, ParticleConfiguration, Vec3};

/// `α_s = 1`, `α_ℓ = 10`, `u0 = −1`.
pub fn reference_params() -> (DpiParams, DerivedParams) {
    let p = DpiParams::new(-1.0, 1.0, 10.0).expect("valid reference parameters");
    let d = p.derive().expect("derivable reference parameters");
    (p, d)
}

/// `n` particles drawn from a unit-width Gaussian blob of spread 4.
pub fn blob(n: usize, seed: u64) -> ParticleConfiguration {
    let target = DensityModel::single_gaussian(Vec3::zeros(), 4.0 * std::f64::consts::SQRT_2)
        .expect("valid target");
    sample_configuration(&target, n, seed).expect("sampling a Gaussian target")
}

/// Probe points on a line through the blob.
pub fn probes(count: usize) -> Vec<Vec3> {
    (0..count).map(|i| Vec3::new(0.37 * i as f64, 0.11, -0.05 * i as f64)).collect()
}
