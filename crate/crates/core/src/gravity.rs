//! Radial discretisation of the heat series and power-law tail fits.
//!
//! On a radial grid of unit `ε_g = √ω` the heat series collapses to a chain of
//! density samples at the shrinking radii `(1 − 2n/M)·r`, with `M` the number
//! of grid steps between the probe and the origin:
//!
//! ```text
//! U(r) = u0 · P · Σ_{n=0}^{M/2−1} (1/n!) √ρ((1 − 2n/M) r) / √ρ(r),   M = ⌊r/ε_g⌋ (even)
//! ```
//!
//! For `√ρ = const` the chain is the partial exponential sum `Σ_{n<M/2} 1/n!`;
//! for `√ρ ∝ 1/r` it is the coefficient `S(M)` of [`series_coefficient`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sum::Compensated;
use crate::{DensityModel, DerivedParams, Error, Result, Vec3};

/// `S(M) = Σ_{n=0}^{M/2−1} 1 / (n! (1 − 2n/M))` for even `M ≥ 2`.
pub fn series_coefficient(m: usize) -> Result<f64> {
    if m < 2 || m % 2 == 1 {
        return Err(Error::InvalidParams(format!("series length M must be even and >= 2, got {m}")));
    }
    let mut acc = Compensated::default();
    let mut inv_fact = 1.0;
    for n in 0..m / 2 {
        if n > 0 {
            inv_fact /= n as f64;
        }
        acc.add(inv_fact / (1.0 - 2.0 * n as f64 / m as f64));
    }
    Ok(acc.value())
}

/// `M(r) = ⌊r/ε_g⌋` rounded down to even, at least 2.
pub fn series_length(r: f64, grid_unit: f64) -> usize {
    let m = (r / grid_unit).floor().max(2.0) as usize;
    (m - m % 2).max(2)
}

/// Radii and density of a radial-series run.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSeriesSpec {
    /// Radial grid unit, normally `√ω`.
    pub grid_unit: f64,
    pub r_values: Vec<f64>,
    /// Sampled along the +x axis from the origin.
    pub density: DensityModel,
}

impl RadialSeriesSpec {
    /// Uses the canonical grid unit `√ω`.
    pub fn new(derived: &DerivedParams, r_values: Vec<f64>, density: DensityModel) -> Result<Self> {
        let spec = RadialSeriesSpec { grid_unit: derived.omega.sqrt(), r_values, density };
        spec.validate()?;
        Ok(spec)
    }

    /// `r_count` radii spaced logarithmically over `[lo, hi]` in grid units.
    pub fn log_spaced(
        derived: &DerivedParams,
        lo: f64,
        hi: f64,
        r_count: usize,
        density: DensityModel,
    ) -> Result<Self> {
        if r_count < 2 || !(hi > lo && lo > 0.0) {
            return Err(Error::InvalidParams("log spacing needs 0 < lo < hi and at least two radii".into()));
        }
        let unit = derived.omega.sqrt();
        let r_values = (0..r_count)
            .map(|i| unit * lo * (hi / lo).powf(i as f64 / (r_count - 1) as f64))
            .collect();
        RadialSeriesSpec::new(derived, r_values, density)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_unit > 0.0 && self.grid_unit.is_finite()) {
            return Err(Error::InvalidParams(format!("grid unit must be positive, got {}", self.grid_unit)));
        }
        if self.r_values.is_empty() {
            return Err(Error::InvalidParams("no radii given".into()));
        }
        // a hair of slack so log-spaced endpoints at exactly 10 units pass
        let min = 10.0 * self.grid_unit * (1.0 - 1e-12);
        if let Some(r) = self.r_values.iter().find(|r| !(**r >= min && r.is_finite())) {
            return Err(Error::InvalidParams(format!(
                "radius {r} is below 10 grid units ({})",
                10.0 * self.grid_unit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialPoint {
    pub r: f64,
    pub m: usize,
    pub u: f64,
    /// Terms dropped because the sample radius hit a singular point of the density.
    pub excluded_terms: usize,
}

/// `U(r)` at every radius of the spec, in input order.
pub fn radial_series_potential(
    spec: &RadialSeriesSpec,
    derived: &DerivedParams,
    u0: f64,
) -> Result<Vec<RadialPoint>> {
    spec.validate()?;
    let prefactor = u0 * derived.radial_prefactor();
    spec.r_values
        .par_iter()
        .map(|&r| {
            let m = series_length(r, spec.grid_unit);
            let at = |radius: f64| spec.density.log_density(&Vec3::new(radius, 0.0, 0.0));
            let log_rho_r = at(r)?;
            if !log_rho_r.is_finite() {
                return Err(Error::DegenerateDensity { log_ratio: log_rho_r });
            }
            let mut acc = Compensated::default();
            let mut inv_fact = 1.0;
            let mut excluded = 0;
            for n in 0..m / 2 {
                if n > 0 {
                    inv_fact /= n as f64;
                }
                let radius = (1.0 - 2.0 * n as f64 / m as f64) * r;
                match at(radius) {
                    Ok(l) => acc.add(inv_fact * (0.5 * (l - log_rho_r)).exp()),
                    Err(Error::Domain(_)) => excluded += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(RadialPoint { r, m, u: prefactor * acc.value(), excluded_terms: excluded })
        })
        .collect()
}

/// Least-squares fit of `log|U| = log|A| + p log r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFitReport {
    pub exponent: f64,
    /// Signed amplitude `A` (the sign of `U` over the range).
    pub prefactor: f64,
    pub r_squared: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    /// `(r, log|U| − fitted log|U|)` for every fitted point.
    pub residuals: Vec<(f64, f64)>,
}

impl TailFitReport {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, e)| e.abs()).fold(0.0, f64::max)
    }
}

pub fn fit_power_law(curve: &[(f64, f64)], r_min: f64, r_max: f64) -> Result<TailFitReport> {
    let used: Vec<(f64, f64)> =
        curve.iter().copied().filter(|(r, _)| *r >= r_min && *r <= r_max).collect();
    if used.len() < 5 {
        return Err(Error::InvalidParams(format!(
            "power-law fit needs at least 5 points in [{r_min}, {r_max}], found {}",
            used.len()
        )));
    }
    if used.iter().any(|(r, u)| !(*r > 0.0) || *u == 0.0 || !u.is_finite()) {
        return Err(Error::Domain("fit needs positive radii and finite nonzero values".into()));
    }
    let sign = used[0].1.signum();
    if used.iter().any(|(_, u)| u.signum() != sign) {
        return Err(Error::Domain("U changes sign within the fit range; refusing a power-law fit".into()));
    }
    let xs: Vec<f64> = used.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, u)| u.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all fit radii coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<(f64, f64)> = used
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|((r, _), (x, y))| (*r, y - (intercept + slope * x)))
        .collect();
    let ss_res: f64 = residuals.iter().map(|(_, e)| e * e).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(TailFitReport {
        exponent: slope,
        prefactor: sign * intercept.exp(),
        r_squared,
        r_min,
        r_max,
        points: used.len(),
        residuals,
    })
}

/// Newton coupling read off a fitted `A/r` tail by pairing it with `−G·m/r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoupling {
    pub g_eff: f64,
    /// `A < 0`, i.e. the sign of the `−G·m/r` term.
    pub attractive: bool,
}

impl EffectiveCoupling {
    pub fn sign_note(&self) -> &'static str {
        if self.attractive {
            "attractive"
        } else {
            "repulsive under this U0 convention"
        }
    }
}

pub fn effective_coupling(fit: &TailFitReport, mass: f64) -> Result<EffectiveCoupling> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidParams(format!("mass must be positive, got {mass}")));
    }
    if (fit.exponent + 1.0).abs() > 0.1 {
        return Err(Error::Domain(format!(
            "fitted exponent {:.4} is not within 0.1 of -1; no Newtonian coupling to extract",
            fit.exponent
        )));
    }
    Ok(EffectiveCoupling { g_eff: fit.prefactor.abs() / mass, attractive: fit.prefactor < 0.0 })
}
