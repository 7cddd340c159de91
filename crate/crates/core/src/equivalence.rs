//! Sweeps quantifying how closely the potential forms agree.
//!
//! The headline comparison is the chain direct → closed → heat series over a
//! grid of range ratios `t = α_s/α_ℓ`, probe separations `s` (in units of
//! `α_s`) and ensemble sizes `N`. Each cell samples its own configuration,
//! places probes on spheres of radius `s·α_s` around randomly chosen
//! particles and aggregates relative gaps by median and 90th percentile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_configuration, DensityFloor};
use crate::potentials::{
    bohm_qp, dpi_closed, dpi_direct, dpi_integral, heat_series_partial_sums, PotentialProbe,
};
use crate::quadrature::hermite_3d;
use crate::{
    DensityModel, DerivedParams, DpiParams, Error, ParticleConfiguration, PhysicalConstants,
    QuadratureSpec, Result, Vec3,
};

/// Relative error of a Gauss–Hermite evaluation of
/// `∫ e^{-|y + βd|²/α_s²} d³y` against `(πα_s²)^{3/2}`.
pub fn verify_insertion_identity(beta: f64, d: &Vec3, alpha_s: f64, points: usize) -> Result<f64> {
    if !(alpha_s > 0.0 && alpha_s.is_finite()) {
        return Err(Error::InvalidParams(format!("alpha_s must be positive, got {alpha_s}")));
    }
    if points == 0 {
        return Err(Error::InvalidParams("quadrature needs at least one point".into()));
    }
    let c = d * (beta / alpha_s);
    let c2 = c.norm_squared();
    // with y = α_s u the weight e^{-u²} leaves e^{-2u·c − c²}
    let value = alpha_s.powi(3) * hermite_3d(points, |u| (-2.0 * u.dot(&c) - c2).exp());
    if !value.is_finite() {
        return Err(Error::Numerical(format!("insertion integral is {value}")));
    }
    let exact = (std::f64::consts::PI * alpha_s * alpha_s).powf(1.5);
    Ok((value - exact).abs() / exact)
}

/// Deterministic seed derivation (SplitMix64 over the parts).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Grid and sampling settings of an equivalence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Values of `t = α_s/α_ℓ`; each sets `α_ℓ = α_s/t`.
    pub ratios: Vec<f64>,
    /// Probe separations in units of `α_s`.
    pub separations: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Truncation order of the compared heat series.
    pub order: usize,
    pub probes_per_cell: usize,
    pub seed: u64,
    /// Standard deviation of the sampling target per axis, in units of `α_s`.
    #[serde(default = "default_spread")]
    pub spread: f64,
    /// Quadrature for the integral form; `None` skips it.
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    /// Probes per cell (the first ones) that also get the integral form.
    #[serde(default = "default_integral_probes")]
    pub integral_probes: usize,
    /// Relative error estimate above which an integral counts as unconverged.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub floor: DensityFloor,
    #[serde(default)]
    pub constants: PhysicalConstants,
}

fn default_spread() -> f64 {
    4.0
}

fn default_integral_probes() -> usize {
    4
}

fn default_tolerance() -> f64 {
    1e-6
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidParams(format!("{name} must be a nonempty list of positive values")));
            }
            Ok(())
        };
        positive("ratios", &self.ratios)?;
        positive("separations", &self.separations)?;
        if let Some(bad) = self.ratios.iter().find(|t| **t > 0.5) {
            return Err(Error::InvalidParams(format!(
                "range ratio {bad} exceeds 1/2, the insertion discriminant would be negative"
            )));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::InvalidParams("sizes must be a nonempty list of N >= 1".into()));
        }
        if self.probes_per_cell == 0 {
            return Err(Error::InvalidParams("probes_per_cell must be positive".into()));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::InvalidParams("spread must be positive".into()));
        }
        Ok(())
    }
}

/// Median and 90th percentile of a gap over the valid probes of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub median: f64,
    pub p90: f64,
    pub count: usize,
}

impl GapStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let rank = ((0.9 * n as f64).ceil() as usize).clamp(1, n);
        Some(GapStats { median, p90: v[rank - 1], count: n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub ratio: f64,
    pub separation: f64,
    pub n: usize,
    pub alpha_l: f64,
    pub probes: usize,
    pub degenerate: usize,
    /// Probes dropped because `|u_closed|` is below `10⁻³⁰·|u0·C|`.
    pub ill_conditioned: usize,
    pub integral_evaluated: usize,
    pub integral_unconverged: usize,
    pub direct_vs_closed: Option<GapStats>,
    pub closed_vs_series: Option<GapStats>,
    /// `|series_{k+1} − series_k| / |closed|`, the size of the next correction.
    pub series_step: Option<GapStats>,
    pub integral_vs_closed: Option<GapStats>,
    /// Set when no probe of the cell was valid.
    pub empty: bool,
    #[serde(skip)]
    pub records: Vec<PotentialProbe>,
}

/// One consecutive comparison of medians along a grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneStep {
    pub metric: String,
    /// `"separation"` (increasing `s`) or `"ratio"` (decreasing `t`).
    pub axis: String,
    pub n: usize,
    /// Value of the grid coordinate held fixed.
    pub held: f64,
    pub from: f64,
    pub to: f64,
    pub median_from: Option<f64>,
    pub median_to: Option<f64>,
    pub decreases: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepVerdicts {
    pub all_finite: bool,
    pub direct_vs_closed_monotone: bool,
    pub closed_vs_series_monotone: bool,
    /// Every evaluated integral agrees with the closed form within the tolerance.
    pub integral_matches_closed: Option<bool>,
    pub worst_integral_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub u0: f64,
    pub alpha_s: f64,
    pub order: usize,
    pub seed: u64,
    pub cells: Vec<SweepCell>,
    pub steps: Vec<MonotoneStep>,
    pub verdicts: SweepVerdicts,
}

struct CellKey {
    ratio: f64,
    separation: f64,
    n: usize,
}

/// Runs every `(N, t, s)` cell; cells run in parallel and are assembled in
/// grid order, so the report is identical for a fixed seed. `u0` and `α_s`
/// come from `params`; `α_ℓ` is set per cell.
pub fn run_equivalence_sweep(spec: &SweepSpec, params: &DpiParams) -> Result<SweepReport> {
    spec.validate()?;
    params.validate()?;
    let mut keys = Vec::new();
    for &n in &spec.sizes {
        for &ratio in &spec.ratios {
            for &separation in &spec.separations {
                keys.push(CellKey { ratio, separation, n });
            }
        }
    }
    let cells: Vec<SweepCell> =
        keys.par_iter().map(|k| run_cell(spec, params, k)).collect::<Result<_>>()?;
    let steps = monotone_steps(spec, &cells);
    let verdicts = verdicts(spec, &cells, &steps);
    Ok(SweepReport { u0: params.u0, alpha_s: params.alpha_s, order: spec.order, seed: spec.seed, cells, steps, verdicts })
}

/// The configuration used for ensemble size `n`; shared by all cells with that `n`.
pub fn sweep_configuration(spec: &SweepSpec, alpha_s: f64, n: usize) -> Result<ParticleConfiguration> {
    let sigma = spec.spread * alpha_s;
    let target = DensityModel::single_gaussian(Vec3::zeros(), std::f64::consts::SQRT_2 * sigma)?;
    sample_configuration(&target, n, derive_seed(spec.seed, &[0xC0F1, n as u64]))
}

/// Probe centres and unit directions for ensemble size `n`, shared across `s` and `t`.
fn probe_layout(spec: &SweepSpec, n: usize) -> Vec<(usize, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[0x9B0BE, n as u64]));
    (0..spec.probes_per_cell)
        .map(|_| {
            let particle = rng.random_range(0..n);
            let dir: [f64; 3] = UnitSphere.sample(&mut rng);
            (particle, Vec3::new(dir[0], dir[1], dir[2]))
        })
        .collect()
}

fn run_cell(spec: &SweepSpec, base: &DpiParams, key: &CellKey) -> Result<SweepCell> {
    let params = DpiParams::new(base.u0, base.alpha_s, base.alpha_s / key.ratio)?;
    let derived = params.derive()?;
    let config = sweep_configuration(spec, params.alpha_s, key.n)?;
    let model = DensityModel::gaussian_mixture(config.clone(), derived.epsilon)?;
    let scale = (params.u0 * derived.prefactor_c).abs();
    let radius = key.separation * params.alpha_s;

    let mut cell = SweepCell {
        ratio: key.ratio,
        separation: key.separation,
        n: key.n,
        alpha_l: params.alpha_l,
        probes: spec.probes_per_cell,
        degenerate: 0,
        ill_conditioned: 0,
        integral_evaluated: 0,
        integral_unconverged: 0,
        direct_vs_closed: None,
        closed_vs_series: None,
        series_step: None,
        integral_vs_closed: None,
        empty: false,
        records: Vec::new(),
    };
    let mut gaps = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (i, (particle, dir)) in probe_layout(spec, key.n).into_iter().enumerate() {
        let x = config.positions()[particle] + dir * radius;
        let want_integral = spec.quadrature.filter(|_| i < spec.integral_probes);
        let probe = match probe_point(&params, &derived, &spec.constants, &config, &model, &x, spec.order + 1, want_integral.as_ref(), &spec.floor) {
            Ok(p) => p,
            Err(e) if e.is_degenerate() => {
                cell.degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if !(probe.u_closed.abs() >= 1e-30 * scale) {
            cell.ill_conditioned += 1;
            continue;
        }
        let closed = probe.u_closed;
        let rel = |v: f64| (v - closed).abs() / closed.abs();
        gaps[0].push(rel(probe.u_direct));
        gaps[1].push(rel(probe.u_series[spec.order]));
        gaps[2].push((probe.u_series[spec.order + 1] - probe.u_series[spec.order]).abs() / closed.abs());
        if let Some(est) = probe.u_integral {
            cell.integral_evaluated += 1;
            if !(est.relative_error() <= spec.tolerance) {
                cell.integral_unconverged += 1;
            }
            gaps[3].push(rel(est.value));
        }
        cell.records.push(probe);
    }
    cell.direct_vs_closed = GapStats::from_values(&gaps[0]);
    cell.closed_vs_series = GapStats::from_values(&gaps[1]);
    cell.series_step = GapStats::from_values(&gaps[2]);
    cell.integral_vs_closed = GapStats::from_values(&gaps[3]);
    cell.empty = cell.records.is_empty();
    Ok(cell)
}

/// Evaluates every form at `x`. The heat series is summed to `order`; the
/// integral form only when a quadrature is given.
#[allow(clippy::too_many_arguments)]
pub fn probe_point(
    params: &DpiParams,
    derived: &DerivedParams,
    constants: &PhysicalConstants,
    config: &ParticleConfiguration,
    model: &DensityModel,
    x: &Vec3,
    order: usize,
    quadrature: Option<&QuadratureSpec>,
    floor: &DensityFloor,
) -> Result<PotentialProbe> {
    let u_direct = dpi_direct(params, derived, config, x, floor)?;
    let u_closed = dpi_closed(params, derived, config, x, floor)?;
    let u_series = heat_series_partial_sums(params, derived, model, x, order, floor)?;
    let qp = bohm_qp(constants, model, x, floor)?;
    let u_integral = match quadrature {
        Some(q) => Some(dpi_integral(params, derived, model, x, q, floor)?),
        None => None,
    };
    Ok(PotentialProbe {
        x: [x.x, x.y, x.z],
        u_direct,
        u_integral,
        u_closed,
        u_series,
        qp,
        nearest_particle_distance: config.nearest_distance(x),
    })
}

fn median_of(cells: &[SweepCell], n: usize, ratio: f64, separation: f64, metric: usize) -> Option<f64> {
    let cell = cells.iter().find(|c| c.n == n && c.ratio == ratio && c.separation == separation)?;
    let stats = match metric {
        0 => cell.direct_vs_closed,
        _ => cell.closed_vs_series,
    };
    stats.map(|s| s.median)
}

fn monotone_steps(spec: &SweepSpec, cells: &[SweepCell]) -> Vec<MonotoneStep> {
    let mut separations = spec.separations.clone();
    separations.sort_by(f64::total_cmp);
    let mut ratios = spec.ratios.clone();
    // decreasing t is the direction of the regime
    ratios.sort_by(|a, b| b.total_cmp(a));
    let mut steps = Vec::new();
    for (metric, name) in [(0, "direct_vs_closed"), (1, "closed_vs_series")] {
        for &n in &spec.sizes {
            let mut push = |axis: &str, held: f64, from: f64, to: f64, a: Option<f64>, b: Option<f64>| {
                let decreases = matches!((a, b), (Some(a), Some(b)) if b < a);
                steps.push(MonotoneStep {
                    metric: name.into(),
                    axis: axis.into(),
                    n,
                    held,
                    from,
                    to,
                    median_from: a,
                    median_to: b,
                    decreases,
                });
            };
            for &t in &ratios {
                for w in separations.windows(2) {
                    let a = median_of(cells, n, t, w[0], metric);
                    let b = median_of(cells, n, t, w[1], metric);
                    push("separation", t, w[0], w[1], a, b);
                }
            }
            for &s in &separations {
                for w in ratios.windows(2) {
                    let a = median_of(cells, n, w[0], s, metric);
                    let b = median_of(cells, n, w[1], s, metric);
                    push("ratio", s, w[0], w[1], a, b);
                }
            }
        }
    }
    steps
}

fn verdicts(spec: &SweepSpec, cells: &[SweepCell], steps: &[MonotoneStep]) -> SweepVerdicts {
    let finite = |s: &Option<GapStats>| s.map(|g| g.median.is_finite()).unwrap_or(false);
    let all_finite = cells.iter().all(|c| finite(&c.direct_vs_closed) && finite(&c.closed_vs_series));
    let monotone = |metric: &str| steps.iter().filter(|s| s.metric == metric).all(|s| s.decreases);
    let integral_gaps: Vec<f64> = cells
        .iter()
        .flat_map(|c| {
            c.records.iter().filter_map(|p| p.u_integral.map(|e| (e.value - p.u_closed).abs() / p.u_closed.abs()))
        })
        .collect();
    let worst = integral_gaps.iter().copied().fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
    SweepVerdicts {
        all_finite,
        direct_vs_closed_monotone: monotone("direct_vs_closed"),
        closed_vs_series_monotone: monotone("closed_vs_series"),
        integral_matches_closed: worst.map(|w| w <= spec.tolerance),
        worst_integral_gap: worst,
    }
}

/// Leading correction size `|ω² Δ²√ρ / 2| / |ω Δ√ρ|` at one probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionMagnitude {
    /// `None` when both terms vanish (0/0).
    pub ratio: Option<f64>,
    /// The ratio exceeds one or is undefined, so the truncated series is not trustworthy.
    pub untrustworthy: bool,
}

pub fn correction_magnitude(
    model: &DensityModel,
    derived: &DerivedParams,
    probes: &[Vec3],
    floor: &DensityFloor,
) -> Result<Vec<CorrectionMagnitude>> {
    let omega = derived.omega;
    probes
        .iter()
        .map(|x| {
            let r = model.sqrt_laplacian_power_ratios(x, 2, floor)?;
            let num = (0.5 * omega * omega * r[2]).abs();
            let den = (omega * r[1]).abs();
            let ratio = if den == 0.0 {
                if num == 0.0 { None } else { Some(f64::INFINITY) }
            } else {
                Some(num / den)
            };
            Ok(CorrectionMagnitude { ratio, untrustworthy: ratio.is_none_or(|v| v > 1.0) })
        })
        .collect()
}

/// Median QP-ratio gap between a sampled mixture and its smoothed target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRow {
    pub n: usize,
    pub median_gap: f64,
    pub valid: usize,
}

/// Samples `N` particles from a Gaussian target of kernel width `target_width`
/// for each size, and compares `Δ√ρ/√ρ` of the ε-mixture with that of the
/// target convolved with one kernel (width `√(target_width² + ε²)`) at
/// `probes`. Gaps are absolute and scaled by the squared smoothed width.
pub fn large_n_smoothing(
    target_width: f64,
    epsilon: f64,
    sizes: &[usize],
    probes: &[Vec3],
    seed: u64,
    floor: &DensityFloor,
) -> Result<Vec<SmoothingRow>> {
    let target = DensityModel::single_gaussian(Vec3::zeros(), target_width)?;
    let width2 = target_width * target_width + epsilon * epsilon;
    let smoothed = DensityModel::single_gaussian(Vec3::zeros(), width2.sqrt())?;
    sizes
        .par_iter()
        .map(|&n| {
            let config = sample_configuration(&target, n, derive_seed(seed, &[0x5A0, n as u64]))?;
            let mixture = DensityModel::gaussian_mixture(config, epsilon)?;
            let mut gaps = Vec::new();
            for x in probes {
                match mixture.sqrt_laplacian_ratio(x, floor) {
                    Ok(r) => gaps.push((r - smoothed.sqrt_laplacian_ratio(x, floor)?).abs() * width2),
                    Err(e) if e.is_degenerate() => {}
                    Err(e) => return Err(e),
                }
            }
            let stats = GapStats::from_values(&gaps)
                .ok_or_else(|| Error::Numerical(format!("no valid probe for N = {n}")))?;
            Ok(SmoothingRow { n, median_gap: stats.median, valid: stats.count })
        })
        .collect()
}
