//! Particle configurations and density fields.
//!
//! Every [`DensityModel`] evaluates `ρ`, `∇ρ` and `∇²ρ` in closed form. Kernel
//! sums are evaluated relative to the nearest kernel (the common factor is
//! carried as a log-scale), so ratio quantities such as `∇²√ρ/√ρ` stay
//! accurate far into the Gaussian tails where `ρ` itself would underflow.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sum::Compensated;
use crate::taylor::{laplacian_powers, Jet};
use crate::{Error, Result, Vec3};

/// Kernel exponents beyond this contribute nothing representable.
const NEGLIGIBLE_EXPONENT: f64 = 745.0;

/// Positions of an ensemble, optionally labelled by particle kind.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleConfiguration {
    positions: Vec<Vec3>,
    kinds: Option<Vec<u32>>,
}

impl ParticleConfiguration {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParams(format!("particle {i} has a non-finite coordinate")));
        }
        Ok(ParticleConfiguration { positions, kinds: None })
    }

    pub fn with_kinds(positions: Vec<Vec3>, kinds: Vec<u32>) -> Result<Self> {
        if kinds.len() != positions.len() {
            return Err(Error::Structure(format!(
                "{} kind labels for {} particles",
                kinds.len(),
                positions.len()
            )));
        }
        let mut config = ParticleConfiguration::new(positions)?;
        config.kinds = Some(kinds);
        Ok(config)
    }

    pub fn empty() -> Self {
        ParticleConfiguration::default()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn kinds(&self) -> Option<&[u32]> {
        self.kinds.as_deref()
    }

    pub fn translated(&self, shift: &Vec3) -> Self {
        ParticleConfiguration {
            positions: self.positions.iter().map(|p| p + shift).collect(),
            kinds: self.kinds.clone(),
        }
    }

    /// Applies `x ↦ A x + b` to every particle.
    pub fn transformed(&self, rotation: &crate::Mat3, shift: &Vec3) -> Self {
        ParticleConfiguration {
            positions: self.positions.iter().map(|p| rotation * p + shift).collect(),
            kinds: self.kinds.clone(),
        }
    }

    /// Distance from `x` to the closest particle, `+∞` for an empty configuration.
    pub fn nearest_distance(&self, x: &Vec3) -> f64 {
        self.positions.iter().map(|p| (x - p).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Smallest pairwise separation, `+∞` with fewer than two particles.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }
}

/// `m` kinds with the same particle count `N` each; `kinds[l][i]` is particle
/// `i` of kind `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiKindConfiguration {
    kinds: Vec<Vec<Vec3>>,
}

impl MultiKindConfiguration {
    pub fn new(kinds: Vec<Vec<Vec3>>) -> Result<Self> {
        let Some(first) = kinds.first() else {
            return Err(Error::Structure("at least one particle kind is required".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::Structure("each kind needs at least one particle".into()));
        }
        if let Some((l, k)) = kinds.iter().enumerate().find(|(_, k)| k.len() != n) {
            return Err(Error::Structure(format!(
                "kind {l} has {} particles, kind 0 has {n}",
                k.len()
            )));
        }
        if kinds.iter().flatten().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParams("non-finite coordinate".into()));
        }
        Ok(MultiKindConfiguration { kinds })
    }

    /// Groups a labelled configuration by ascending kind label.
    pub fn from_labelled(config: &ParticleConfiguration) -> Result<Self> {
        let Some(labels) = config.kinds() else {
            return MultiKindConfiguration::new(vec![config.positions().to_vec()]);
        };
        let mut distinct: Vec<u32> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let kinds = distinct
            .iter()
            .map(|&kind| {
                labels
                    .iter()
                    .zip(config.positions())
                    .filter(|(l, _)| **l == kind)
                    .map(|(_, p)| *p)
                    .collect()
            })
            .collect();
        MultiKindConfiguration::new(kinds)
    }

    pub fn kind_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn particles_per_kind(&self) -> usize {
        self.kinds[0].len()
    }

    pub fn kind(&self, l: usize) -> &[Vec3] {
        &self.kinds[l]
    }

    /// Squared configuration-space distance `Σ_l |x_l − a_i^{(l)}|²` for every `i`.
    pub fn joint_squared_distances(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        if points.len() != self.kinds.len() {
            return Err(Error::Structure(format!(
                "{} probe points for {} kinds",
                points.len(),
                self.kinds.len()
            )));
        }
        Ok((0..self.particles_per_kind())
            .map(|i| {
                self.kinds.iter().zip(points).map(|(k, x)| (x - k[i]).norm_squared()).sum()
            })
            .collect())
    }

    /// Permutes particle indices with the same permutation in every kind.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.particles_per_kind() {
            return Err(Error::Structure("permutation length mismatch".into()));
        }
        MultiKindConfiguration::new(
            self.kinds.iter().map(|k| order.iter().map(|&i| k[i]).collect()).collect(),
        )
    }
}

/// Relative density floor: the density is degenerate where
/// `ln(ρ/peak) < log_ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityFloor {
    pub log_ratio: f64,
}

impl DensityFloor {
    pub fn relative(ratio: f64) -> Self {
        DensityFloor { log_ratio: ratio.ln() }
    }
}

impl Default for DensityFloor {
    /// `10⁻³⁰⁰ × peak`, where an unscaled evaluation of ρ would underflow.
    fn default() -> Self {
        DensityFloor::relative(1e-300)
    }
}

/// Density value with its first and second derivatives, all multiplied by
/// `exp(-log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledDerivatives {
    pub log_scale: f64,
    pub rho: f64,
    pub grad: Vec3,
    pub lap: f64,
}

impl ScaledDerivatives {
    pub fn log_density(&self) -> f64 {
        self.log_scale + self.rho.ln()
    }

    /// `∇²√ρ / √ρ = ∇²ρ/(2ρ) − |∇ρ|²/(4ρ²)`.
    pub fn sqrt_laplacian_ratio(&self) -> f64 {
        self.lap / (2.0 * self.rho) - self.grad.norm_squared() / (4.0 * self.rho * self.rho)
    }

    fn rescaled(&self, log_scale: f64) -> (f64, Vec3, f64) {
        let f = (self.log_scale - log_scale).exp();
        (self.rho * f, self.grad * f, self.lap * f)
    }
}

/// Density fields used throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    /// `Σ_k (πε²)^{-3/2} exp(-|x − a_k|²/ε²)`; each kernel integrates to one.
    GaussianMixture { config: ParticleConfiguration, epsilon: f64 },
    /// `ζ² (1 − e^{-ξ/r})²`, `r = |x − center|`.
    RadialShell { zeta: f64, xi: f64, center: Vec3 },
    Uniform { rho0: f64 },
    /// Pointwise sum of densities.
    Superposition(Vec<DensityModel>),
    /// `factor · inner`.
    Scaled { factor: f64, inner: Box<DensityModel> },
}

impl DensityModel {
    pub fn gaussian_mixture(config: ParticleConfiguration, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("kernel width must be positive, got {epsilon}")));
        }
        Ok(DensityModel::GaussianMixture { config, epsilon })
    }

    /// A single kernel, i.e. an isotropic normal density with standard
    /// deviation `epsilon/√2`.
    pub fn single_gaussian(center: Vec3, epsilon: f64) -> Result<Self> {
        DensityModel::gaussian_mixture(ParticleConfiguration::new(vec![center])?, epsilon)
    }

    pub fn radial_shell(zeta: f64, xi: f64) -> Result<Self> {
        if !(zeta > 0.0 && xi > 0.0 && zeta.is_finite() && xi.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "radial shell needs zeta > 0 and xi > 0, got zeta={zeta}, xi={xi}"
            )));
        }
        Ok(DensityModel::RadialShell { zeta, xi, center: Vec3::zeros() })
    }

    pub fn uniform(rho0: f64) -> Result<Self> {
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(Error::InvalidParams(format!("uniform density must be positive, got {rho0}")));
        }
        Ok(DensityModel::Uniform { rho0 })
    }

    pub fn superposition(parts: Vec<DensityModel>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParams("empty superposition".into()));
        }
        Ok(DensityModel::Superposition(parts))
    }

    /// Largest value a single component can take; the floor is relative to it.
    pub fn peak(&self) -> f64 {
        match self {
            DensityModel::GaussianMixture { epsilon, .. } => (PI * epsilon * epsilon).powf(-1.5),
            DensityModel::RadialShell { zeta, .. } => zeta * zeta,
            DensityModel::Uniform { rho0 } => *rho0,
            DensityModel::Superposition(parts) => parts.iter().map(|p| p.peak()).fold(0.0, f64::max),
            DensityModel::Scaled { factor, inner } => factor * inner.peak(),
        }
    }

    pub fn translated(&self, shift: &Vec3) -> Self {
        match self {
            DensityModel::GaussianMixture { config, epsilon } => {
                DensityModel::GaussianMixture { config: config.translated(shift), epsilon: *epsilon }
            }
            DensityModel::RadialShell { zeta, xi, center } => {
                DensityModel::RadialShell { zeta: *zeta, xi: *xi, center: center + shift }
            }
            DensityModel::Uniform { rho0 } => DensityModel::Uniform { rho0: *rho0 },
            DensityModel::Superposition(parts) => {
                DensityModel::Superposition(parts.iter().map(|p| p.translated(shift)).collect())
            }
            DensityModel::Scaled { factor, inner } => {
                DensityModel::Scaled { factor: *factor, inner: Box::new(inner.translated(shift)) }
            }
        }
    }

    /// Multiplies the density by `c > 0`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParams(format!("scale must be positive, got {c}")));
        }
        Ok(match self {
            DensityModel::Scaled { factor, inner } => {
                DensityModel::Scaled { factor: factor * c, inner: inner.clone() }
            }
            other => DensityModel::Scaled { factor: c, inner: Box::new(other.clone()) },
        })
    }

    /// ρ(x) together with ∇ρ and ∇²ρ in scaled form.
    pub fn scaled_derivatives(&self, x: &Vec3) -> Result<ScaledDerivatives> {
        match self {
            DensityModel::GaussianMixture { config, epsilon } => {
                mixture_derivatives(config.positions(), *epsilon, x)
            }
            DensityModel::RadialShell { zeta, xi, center } => shell_derivatives(*zeta, *xi, center, x),
            DensityModel::Uniform { rho0 } => Ok(ScaledDerivatives {
                log_scale: rho0.ln(),
                rho: if *rho0 > 0.0 { 1.0 } else { 0.0 },
                grad: Vec3::zeros(),
                lap: 0.0,
            }),
            DensityModel::Superposition(parts) => {
                let evaluated: Vec<ScaledDerivatives> =
                    parts.iter().map(|p| p.scaled_derivatives(x)).collect::<Result<_>>()?;
                combine_scaled(&evaluated)
            }
            DensityModel::Scaled { factor, inner } => {
                let mut d = inner.scaled_derivatives(x)?;
                d.log_scale += factor.ln();
                Ok(d)
            }
        }
    }

    pub fn log_density(&self, x: &Vec3) -> Result<f64> {
        match self {
            DensityModel::GaussianMixture { config, epsilon } => {
                Ok(mixture_log_density(config.positions(), *epsilon, x))
            }
            DensityModel::Scaled { factor, inner } => Ok(factor.ln() + inner.log_density(x)?),
            _ => Ok(self.scaled_derivatives(x)?.log_density()),
        }
    }

    pub fn density(&self, x: &Vec3) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Fails with [`Error::DegenerateDensity`] when `ρ(x)` is below the floor.
    pub fn check_floor(&self, log_density: f64, floor: &DensityFloor) -> Result<()> {
        let log_ratio = log_density - self.peak().ln();
        if log_ratio.is_nan() || log_ratio < floor.log_ratio {
            return Err(Error::DegenerateDensity { log_ratio });
        }
        Ok(())
    }

    /// Derivatives at `x`, refusing probes below the floor.
    pub fn checked_derivatives(&self, x: &Vec3, floor: &DensityFloor) -> Result<ScaledDerivatives> {
        let d = self.scaled_derivatives(x)?;
        self.check_floor(d.log_density(), floor)?;
        Ok(d)
    }

    /// `∇²√ρ / √ρ` at `x`.
    pub fn sqrt_laplacian_ratio(&self, x: &Vec3, floor: &DensityFloor) -> Result<f64> {
        Ok(self.checked_derivatives(x, floor)?.sqrt_laplacian_ratio())
    }

    /// `∇²√ρ` at `x`.
    pub fn sqrt_density_laplacian(&self, x: &Vec3, floor: &DensityFloor) -> Result<f64> {
        let d = self.checked_derivatives(x, floor)?;
        Ok(d.sqrt_laplacian_ratio() * (0.5 * d.log_density()).exp())
    }

    /// Jet of `ρ(x + t·dir)` scaled by `exp(-log_scale)`.
    fn density_line_jet(&self, x: &Vec3, dir: &Vec3, order: usize) -> Result<(f64, Jet)> {
        match self {
            DensityModel::GaussianMixture { config, epsilon } => {
                mixture_line_jet(config.positions(), *epsilon, x, dir, order)
            }
            DensityModel::RadialShell { zeta, xi, center } => {
                let g = shell_profile_jet(*xi, &(x - center), dir, order)?;
                Ok((2.0 * zeta.ln(), &g * &g))
            }
            DensityModel::Uniform { rho0 } => Ok((rho0.ln(), Jet::constant(1.0, order))),
            DensityModel::Superposition(parts) => {
                let jets: Vec<(f64, Jet)> = parts
                    .iter()
                    .map(|p| p.density_line_jet(x, dir, order))
                    .collect::<Result<_>>()?;
                let scale = jets.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
                let mut total = Jet::constant(0.0, order);
                for (s, jet) in &jets {
                    if s.is_finite() {
                        total = &total + &jet.clone().scale((s - scale).exp());
                    }
                }
                Ok((scale, total))
            }
            DensityModel::Scaled { factor, inner } => {
                let (s, jet) = inner.density_line_jet(x, dir, order)?;
                Ok((s + factor.ln(), jet))
            }
        }
    }

    /// Jet of `√ρ(x + t·dir) / √ρ(x)`.
    pub fn normalized_sqrt_line_jet(&self, x: &Vec3, dir: &Vec3, order: usize) -> Result<Jet> {
        if let DensityModel::RadialShell { xi, center, .. } = self {
            // √ρ = ζ(1 − e^{-ξ/r}) directly, without squaring and rooting
            let g = shell_profile_jet(*xi, &(x - center), dir, order)?;
            let g0 = g.value();
            return Ok(g.scale(1.0 / g0));
        }
        let (_, rho) = self.density_line_jet(x, dir, order)?;
        let s = rho.sqrt()?;
        let s0 = s.value();
        Ok(s.scale(1.0 / s0))
    }

    /// `Δⁿ√ρ(x) / √ρ(x)` for `n = 0..=max_power` (the `n = 0` entry is 1).
    pub fn sqrt_laplacian_power_ratios(
        &self,
        x: &Vec3,
        max_power: usize,
        floor: &DensityFloor,
    ) -> Result<Vec<f64>> {
        self.check_floor(self.log_density(x)?, floor)?;
        let mut ratios = laplacian_powers(3, max_power, |g| {
            self.normalized_sqrt_line_jet(x, &Vec3::new(g[0], g[1], g[2]), 2 * max_power)
        })?;
        // the normalised jet is exactly 1 at t = 0; drop the quadrature rounding
        ratios[0] = 1.0;
        Ok(ratios)
    }
}

fn nearest_sq(positions: &[Vec3], x: &Vec3) -> (Vec<f64>, f64) {
    let d2: Vec<f64> = positions.iter().map(|a| (x - a).norm_squared()).collect();
    let m = d2.iter().copied().fold(f64::INFINITY, f64::min);
    (d2, m)
}

fn mixture_log_density(positions: &[Vec3], epsilon: f64, x: &Vec3) -> f64 {
    if positions.is_empty() {
        return f64::NEG_INFINITY;
    }
    let eps2 = epsilon * epsilon;
    let (d2, m) = nearest_sq(positions, x);
    let mut acc = Compensated::default();
    for dk in d2 {
        acc.add((-(dk - m) / eps2).exp());
    }
    -1.5 * (PI * eps2).ln() - m / eps2 + acc.value().ln()
}

fn mixture_derivatives(positions: &[Vec3], epsilon: f64, x: &Vec3) -> Result<ScaledDerivatives> {
    let eps2 = epsilon * epsilon;
    let peak = (PI * eps2).powf(-1.5);
    if positions.is_empty() {
        return Ok(ScaledDerivatives {
            log_scale: f64::NEG_INFINITY,
            rho: 0.0,
            grad: Vec3::zeros(),
            lap: 0.0,
        });
    }
    let (d2, m) = nearest_sq(positions, x);
    let mut rho = Compensated::default();
    let mut lap = Compensated::default();
    let mut grad = [Compensated::default(); 3];
    for (a, &dk) in positions.iter().zip(&d2) {
        let w = (-(dk - m) / eps2).exp();
        if w == 0.0 {
            continue;
        }
        let offset = x - a;
        rho.add(w);
        lap.add(w * (4.0 * dk / (eps2 * eps2) - 6.0 / eps2));
        for (c, acc) in grad.iter_mut().enumerate() {
            acc.add(-2.0 * offset[c] / eps2 * w);
        }
    }
    Ok(ScaledDerivatives {
        log_scale: peak.ln() - m / eps2,
        rho: rho.value(),
        grad: Vec3::new(grad[0].value(), grad[1].value(), grad[2].value()),
        lap: lap.value(),
    })
}

fn mixture_line_jet(
    positions: &[Vec3],
    epsilon: f64,
    x: &Vec3,
    dir: &Vec3,
    order: usize,
) -> Result<(f64, Jet)> {
    let eps2 = epsilon * epsilon;
    if positions.is_empty() {
        return Err(Error::Domain("empty mixture has no density".into()));
    }
    let (d2, m) = nearest_sq(positions, x);
    let g2 = dir.norm_squared();
    let mut total = Jet::constant(0.0, order);
    for (a, &dk) in positions.iter().zip(&d2) {
        let shifted = (dk - m) / eps2;
        if shifted > NEGLIGIBLE_EXPONENT {
            continue;
        }
        let q = Jet::from_coeffs(&[-shifted, -2.0 * dir.dot(&(x - a)) / eps2, -g2 / eps2], order);
        total = &total + &q.exp();
    }
    Ok(((PI * eps2).powf(-1.5).ln() - m / eps2, total))
}

/// Jet of `1 − exp(−ξ / |offset + t·dir|)`.
fn shell_profile_jet(xi: f64, offset: &Vec3, dir: &Vec3, order: usize) -> Result<Jet> {
    let r2 = Jet::from_coeffs(&[offset.norm_squared(), 2.0 * offset.dot(dir), dir.norm_squared()], order);
    if !(r2.value() > 0.0) {
        return Err(Error::Domain("radial shell evaluated at its centre".into()));
    }
    let inv_r = r2.sqrt()?.recip()?;
    let u = inv_r.scale(-xi);
    let u0 = u.value();
    let e = u.exp();
    // 1 − e^u, with the constant term formed without cancellation
    let mut coeffs: Vec<f64> = e.coeffs().iter().map(|c| -c).collect();
    coeffs[0] = -u0.exp_m1();
    Ok(Jet::from_coeffs(&coeffs, order))
}

fn shell_derivatives(zeta: f64, xi: f64, center: &Vec3, x: &Vec3) -> Result<ScaledDerivatives> {
    let offset = x - center;
    let r = offset.norm();
    if !(r > 0.0) {
        return Err(Error::Domain("radial shell evaluated at its centre (r = 0)".into()));
    }
    let e = (-xi / r).exp();
    let g = -(-xi / r).exp_m1();
    let g1 = -e * xi / (r * r);
    let g2 = e * xi * (2.0 * r - xi) / r.powi(4);
    let z2 = zeta * zeta;
    let rho = z2 * g * g;
    let d1 = 2.0 * z2 * g * g1;
    let d2 = 2.0 * z2 * (g1 * g1 + g * g2);
    Ok(ScaledDerivatives { log_scale: 0.0, rho, grad: offset * (d1 / r), lap: d2 + 2.0 * d1 / r })
}

fn combine_scaled(parts: &[ScaledDerivatives]) -> Result<ScaledDerivatives> {
    let log_scale = parts
        .iter()
        .filter(|p| p.rho > 0.0)
        .map(|p| p.log_scale)
        .fold(f64::NEG_INFINITY, f64::max);
    if !log_scale.is_finite() {
        return Ok(ScaledDerivatives { log_scale, rho: 0.0, grad: Vec3::zeros(), lap: 0.0 });
    }
    let mut rho = 0.0;
    let mut grad = Vec3::zeros();
    let mut lap = 0.0;
    for p in parts.iter().filter(|p| p.log_scale.is_finite()) {
        let (r, g, l) = p.rescaled(log_scale);
        rho += r;
        grad += g;
        lap += l;
    }
    Ok(ScaledDerivatives { log_scale, rho, grad, lap })
}

/// Draws `n` i.i.d. positions from a normalisable target; deterministic for a
/// fixed seed.
pub fn sample_configuration(target: &DensityModel, n: usize, seed: u64) -> Result<ParticleConfiguration> {
    let mut kernels: Vec<(Vec3, f64)> = Vec::new();
    collect_kernels(target, &mut kernels)?;
    if n == 0 {
        return Ok(ParticleConfiguration::empty());
    }
    if kernels.is_empty() {
        return Err(Error::Unsupported("cannot sample from a mixture without kernels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let (center, epsilon) = kernels[rng.random_range(0..kernels.len())];
        // a unit kernel is the normal density with variance ε²/2 per axis
        let normal = Normal::new(0.0, epsilon / std::f64::consts::SQRT_2)
            .map_err(|e| Error::InvalidParams(e.to_string()))?;
        positions.push(Vec3::new(
            center.x + normal.sample(&mut rng),
            center.y + normal.sample(&mut rng),
            center.z + normal.sample(&mut rng),
        ));
    }
    ParticleConfiguration::new(positions)
}

fn collect_kernels(model: &DensityModel, out: &mut Vec<(Vec3, f64)>) -> Result<()> {
    match model {
        DensityModel::GaussianMixture { config, epsilon } => {
            out.extend(config.positions().iter().map(|p| (*p, *epsilon)));
            Ok(())
        }
        DensityModel::Superposition(parts) => parts.iter().try_for_each(|p| collect_kernels(p, out)),
        // a positive factor does not change the normalised target
        DensityModel::Scaled { inner, .. } => collect_kernels(inner, out),
        DensityModel::RadialShell { .. } => {
            Err(Error::Unsupported("no sampler for the radial shell (not normalisable)".into()))
        }
        DensityModel::Uniform { .. } => {
            Err(Error::Unsupported("no sampler for the uniform density (not normalisable)".into()))
        }
    }
}

/// Relative gap `|Σ√δ_ε − √(Σδ_ε)| / √(Σδ_ε)` at each probe, comparing the
/// sum of square-rooted kernels with the square root of the summed density.
pub fn sqrt_sum_vs_sum_sqrt_gap(
    config: &ParticleConfiguration,
    epsilon: f64,
    probes: &[Vec3],
    floor: &DensityFloor,
) -> Result<Vec<f64>> {
    if config.is_empty() {
        return Err(Error::Structure("the gap needs at least one particle".into()));
    }
    let eps2 = epsilon * epsilon;
    probes
        .iter()
        .map(|x| {
            let (d2, m) = nearest_sq(config.positions(), x);
            let log_ratio = -m / eps2;
            if log_ratio < floor.log_ratio {
                return Err(Error::DegenerateDensity { log_ratio });
            }
            let mut sum_sqrt = Compensated::default();
            let mut sum = Compensated::default();
            for dk in d2 {
                let s = (-(dk - m) / (2.0 * eps2)).exp();
                sum_sqrt.add(s);
                sum.add(s * s);
            }
            let root = sum.value().sqrt();
            Ok((sum_sqrt.value() - root).abs() / root)
        })
        .collect()
}
