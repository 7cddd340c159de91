//! Relational kinetic terms, the product Lagrangian, cosmological scalings,
//! invariance checks and an integrator for the approximate local Lagrangian
//!
//! ```text
//! L = ½ m Σ v_i² − Σ_i Q(a_i) + G m Σ_{i<j} 1/|a_i − a_j|,   Q = −(ℏ²/2m) Δ√ρ/√ρ
//! ```
//!
//! Pair sums run over unordered pairs throughout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::DensityFloor;
use crate::potentials::dpi_direct;
use crate::sum::Compensated;
use crate::{
    DensityModel, DerivedParams, DpiParams, Error, Mat3, ParticleConfiguration, PhysicalConstants,
    Result, Vec3,
};

/// Positions and velocities on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    positions: Vec<Vec<Vec3>>,
    velocities: Vec<Vec<Vec3>>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, positions: Vec<Vec<Vec3>>, velocities: Vec<Vec<Vec3>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
        }
        if positions.is_empty() {
            return Err(Error::Structure("a trajectory needs at least one sample".into()));
        }
        if positions.len() != velocities.len() {
            return Err(Error::Structure("positions and velocities differ in sample count".into()));
        }
        let n = positions[0].len();
        for (p, v) in positions.iter().zip(&velocities) {
            if p.len() != n || v.len() != n {
                return Err(Error::Structure("particle count changes along the trajectory".into()));
            }
            if p.iter().chain(v).any(|x| !x.iter().all(|c| c.is_finite())) {
                return Err(Error::Numerical("non-finite coordinate in trajectory".into()));
            }
        }
        Ok(Trajectory { t0, dt, positions, velocities })
    }

    /// Velocities by central differences (one-sided at the ends).
    pub fn from_positions(t0: f64, dt: f64, positions: Vec<Vec<Vec3>>) -> Result<Self> {
        let count = positions.len();
        let velocities = (0..count)
            .map(|k| {
                let (a, b, span) = match (k, count) {
                    (_, 1) => (0, 0, 1.0),
                    (0, _) => (0, 1, dt),
                    (k, c) if k + 1 == c => (k - 1, k, dt),
                    (k, _) => (k - 1, k + 1, 2.0 * dt),
                };
                positions[b].iter().zip(&positions[a]).map(|(p, q)| (p - q) / span).collect()
            })
            .collect();
        Trajectory::new(t0, dt, positions, velocities)
    }

    /// Samples `path(t)` at `t0 + k·dt` for `k = 0..=steps`.
    pub fn sample_path<F>(path: F, t0: f64, dt: f64, steps: usize) -> Result<Self>
    where
        F: Fn(f64) -> Vec<Vec3>,
    {
        let positions = (0..=steps).map(|k| path(t0 + k as f64 * dt)).collect();
        Trajectory::from_positions(t0, dt, positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn particle_count(&self) -> usize {
        self.positions[0].len()
    }

    pub fn positions(&self, k: usize) -> &[Vec3] {
        &self.positions[k]
    }

    pub fn velocities(&self, k: usize) -> &[Vec3] {
        &self.velocities[k]
    }

    pub fn configuration(&self, k: usize) -> Result<ParticleConfiguration> {
        ParticleConfiguration::new(self.positions[k].clone())
    }

    /// Applies `x → A_k x + B_k` to sample `k`, recomputing velocities by
    /// central differences.
    pub fn transformed(&self, rotations: &[Mat3], translations: &[Vec3]) -> Result<Self> {
        if rotations.len() != self.len() || translations.len() != self.len() {
            return Err(Error::Structure("transform samples do not match the trajectory".into()));
        }
        let positions = self
            .positions
            .iter()
            .zip(rotations.iter().zip(translations))
            .map(|(p, (a, b))| p.iter().map(|x| a * x + b).collect())
            .collect();
        Trajectory::from_positions(self.t0, self.dt, positions)
    }
}

/// `(Σ_{i<j} ḋ_ij²)^{1/2}` from three samples, with `ḋ_ij = r̂_ij · (Δr_ij / span)`
/// and central differences over `span`.
fn kinetic_from_samples(prev: &[Vec3], cur: &[Vec3], next: &[Vec3], span: f64) -> Result<f64> {
    let n = cur.len();
    if n < 2 {
        return Err(Error::Structure("the pairwise kinetic term needs at least two particles".into()));
    }
    let mut acc = Compensated::default();
    for i in 0..n {
        for j in i + 1..n {
            let r = cur[i] - cur[j];
            let d = r.norm();
            if !(d > 0.0) {
                return Err(Error::Domain(format!("particles {i} and {j} coincide")));
            }
            let rate = (next[i] - next[j] - (prev[i] - prev[j])) / span;
            let ddot = r.dot(&rate) / d;
            acc.add(ddot * ddot);
        }
    }
    Ok(acc.value().sqrt())
}

/// The relational kinetic term at an interior sample.
pub fn kinetic_pairwise(traj: &Trajectory, k: usize) -> Result<f64> {
    if k == 0 || k + 1 >= traj.len() {
        return Err(Error::InvalidParams(format!(
            "sample {k} is not interior to a trajectory of {} samples",
            traj.len()
        )));
    }
    kinetic_from_samples(traj.positions(k - 1), traj.positions(k), traj.positions(k + 1), 2.0 * traj.dt)
}

/// `P = Σ_i U(a_i)` with the direct potential.
pub fn potential_sum(
    config: &ParticleConfiguration,
    params: &DpiParams,
    derived: &DerivedParams,
    floor: &DensityFloor,
) -> Result<f64> {
    let mut acc = Compensated::default();
    for a in config.positions() {
        acc.add(dpi_direct(params, derived, config, a, floor)?);
    }
    Ok(acc.value())
}

/// `L = K · P` at an interior sample.
pub fn product_lagrangian(
    traj: &Trajectory,
    k: usize,
    params: &DpiParams,
    derived: &DerivedParams,
    floor: &DensityFloor,
) -> Result<f64> {
    let kinetic = kinetic_pairwise(traj, k)?;
    let potential = potential_sum(&traj.configuration(k)?, params, derived, floor)?;
    Ok(kinetic * potential)
}

/// Trapezoid action `Σ w_k K_k P_k Δt_k` over the interior samples of a grid
/// with sample times `times`; uniform grids are the special case.
fn action_on_grid(
    positions: &[Vec<Vec3>],
    times: &[f64],
    params: &DpiParams,
    derived: &DerivedParams,
    floor: &DensityFloor,
) -> Result<f64> {
    if positions.len() < 3 {
        return Err(Error::InvalidParams("the action needs at least three samples".into()));
    }
    let last = positions.len() - 2;
    let mut values = Vec::with_capacity(last);
    for k in 1..=last {
        let kinetic =
            kinetic_from_samples(&positions[k - 1], &positions[k], &positions[k + 1], times[k + 1] - times[k - 1])?;
        let config = ParticleConfiguration::new(positions[k].clone())?;
        values.push(kinetic * potential_sum(&config, params, derived, floor)?);
    }
    let mut acc = Compensated::default();
    for (w, k) in values.windows(2).zip(1..) {
        acc.add(0.5 * (w[0] + w[1]) * (times[k + 1] - times[k]));
    }
    Ok(acc.value())
}

/// Discretised action of the product Lagrangian: trapezoid rule over the
/// interior samples.
pub fn discretized_action(
    traj: &Trajectory,
    params: &DpiParams,
    derived: &DerivedParams,
    floor: &DensityFloor,
) -> Result<f64> {
    let times: Vec<f64> = (0..traj.len()).map(|k| traj.time(k)).collect();
    action_on_grid(&traj.positions, &times, params, derived, floor)
}

/// The action of an analytic path over `[t_start, t_end]` before and after the
/// reparametrisation `τ = C(t)`. Both are sampled at the same numerical step
/// `(t_end − t_start)/steps` in their own time, with one ghost sample on each
/// side so the integration ranges coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparametrizationGap {
    pub action: f64,
    pub reparametrized_action: f64,
    pub relative_gap: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn reparametrization_gap<P, C, Ci>(
    path: P,
    c: C,
    c_inv: Ci,
    t_start: f64,
    t_end: f64,
    steps: usize,
    params: &DpiParams,
    derived: &DerivedParams,
    floor: &DensityFloor,
) -> Result<ReparametrizationGap>
where
    P: Fn(f64) -> Vec<Vec3>,
    C: Fn(f64) -> f64,
    Ci: Fn(f64) -> f64,
{
    if steps < 2 || !(t_end > t_start) {
        return Err(Error::InvalidParams("need t_end > t_start and at least two steps".into()));
    }
    let dt = (t_end - t_start) / steps as f64;
    let run = |start: f64, count: usize, step: f64, at: &dyn Fn(f64) -> Vec<Vec3>| -> Result<f64> {
        let times: Vec<f64> = (0..count + 3).map(|k| start + (k as f64 - 1.0) * step).collect();
        let positions: Vec<Vec<Vec3>> = times.iter().map(|&t| at(t)).collect();
        action_on_grid(&positions, &times, params, derived, floor)
    };
    let action = run(t_start, steps, dt, &path)?;
    let (tau_start, tau_end) = (c(t_start), c(t_end));
    if !(tau_end > tau_start) {
        return Err(Error::InvalidParams("reparametrisation must be increasing".into()));
    }
    let tau_steps = ((tau_end - tau_start) / dt).round().max(2.0) as usize;
    let tau_dt = (tau_end - tau_start) / tau_steps as f64;
    let reparametrized = run(tau_start, tau_steps, tau_dt, &|tau| path(c_inv(tau)))?;
    Ok(ReparametrizationGap {
        action,
        reparametrized_action: reparametrized,
        relative_gap: (reparametrized - action).abs() / action.abs(),
    })
}

/// Sampled Leibnitz transformation aligned with a trajectory grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub rotations: Vec<Mat3>,
    pub translations: Vec<Vec3>,
    /// New time `C(t_k)` at each sample; strictly increasing.
    pub reparametrization: Vec<f64>,
}

impl TransformSpec {
    pub fn validate(&self, samples: usize) -> Result<()> {
        if self.rotations.len() != samples
            || self.translations.len() != samples
            || self.reparametrization.len() != samples
        {
            return Err(Error::Structure(format!("transform must have {samples} samples")));
        }
        for (k, a) in self.rotations.iter().enumerate() {
            let defect = (a.transpose() * a - Mat3::identity()).abs().max();
            if !(defect <= 1e-12) {
                return Err(Error::InvalidParams(format!(
                    "rotation at sample {k} is not orthogonal (|AᵀA − I| = {defect:.3e})"
                )));
            }
        }
        if self.translations.iter().any(|b| !b.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParams("non-finite translation".into()));
        }
        if self.reparametrization.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("reparametrisation must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeibnitzReport {
    /// `|K_transformed − K|` at each interior sample.
    pub kinetic_gaps: Vec<f64>,
    pub max_kinetic_gap: f64,
    /// Largest gap relative to the largest `K` along the trajectory.
    pub max_relative_kinetic_gap: f64,
    pub action: f64,
    /// Action of the rigidly moved trajectory.
    pub transformed_action: f64,
    /// Action of the original positions on the grid `τ_k = C(t_k)`.
    pub reparametrized_action: f64,
}

/// Compares kinetic terms and actions before and after the transformation.
pub fn check_leibnitz_invariance(
    traj: &Trajectory,
    transform: &TransformSpec,
    params: &DpiParams,
    derived: &DerivedParams,
    floor: &DensityFloor,
) -> Result<LeibnitzReport> {
    transform.validate(traj.len())?;
    if traj.len() < 3 {
        return Err(Error::InvalidParams("the check needs at least three samples".into()));
    }
    let moved = traj.transformed(&transform.rotations, &transform.translations)?;
    let mut gaps = Vec::with_capacity(traj.len() - 2);
    let mut scale: f64 = 0.0;
    for k in 1..traj.len() - 1 {
        let original = kinetic_pairwise(traj, k)?;
        scale = scale.max(original);
        gaps.push((kinetic_pairwise(&moved, k)? - original).abs());
    }
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(LeibnitzReport {
        max_kinetic_gap: max_gap,
        max_relative_kinetic_gap: if scale > 0.0 { max_gap / scale } else { max_gap },
        kinetic_gaps: gaps,
        action: discretized_action(traj, params, derived, floor)?,
        transformed_action: discretized_action(&moved, params, derived, floor)?,
        reparametrized_action: action_on_grid(&traj.positions, &transform.reparametrization, params, derived, floor)?,
    })
}

/// Shell radius, expansion rate and mean density of the toy universe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosmologyState {
    pub r: f64,
    pub r_dot: f64,
    pub rho_universe: f64,
}

impl CosmologyState {
    pub fn new(r: f64, r_dot: f64, rho_universe: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParams(format!("shell radius must be positive, got {r}")));
        }
        if !r_dot.is_finite() {
            return Err(Error::InvalidParams("expansion rate must be finite".into()));
        }
        if !(rho_universe > 0.0 && rho_universe.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "universe density must be positive, got {rho_universe}"
            )));
        }
        Ok(CosmologyState { r, r_dot, rho_universe })
    }
}

/// `const · [1 + Σv²/(30 Ṙ²)]`, the shell-universe kinetic term to first order.
pub fn shell_kinetic(cosmo: &CosmologyState, velocities: &[Vec3], const_factor: f64) -> Result<f64> {
    if cosmo.r_dot == 0.0 {
        return Err(Error::InvalidParams("shell kinetic term needs a nonzero expansion rate".into()));
    }
    let v2: f64 = velocities.iter().map(|v| v.norm_squared()).sum();
    Ok(const_factor * (1.0 + v2 / (30.0 * cosmo.r_dot * cosmo.r_dot)))
}

/// `ℏ(t) = ℏ(t0) · Ṙ(t)/Ṙ(t0)`.
pub fn hbar_scaling(now: &CosmologyState, reference: &CosmologyState, hbar_ref: f64) -> Result<f64> {
    if reference.r_dot == 0.0 {
        return Err(Error::InvalidParams("reference expansion rate is zero".into()));
    }
    Ok(hbar_ref * (now.r_dot / reference.r_dot))
}

/// `G(t) = G(t0) · √(ρ(t0)/ρ(t))`.
pub fn g_scaling(now: &CosmologyState, reference: &CosmologyState, g_ref: f64) -> Result<f64> {
    if !(now.rho_universe > 0.0 && reference.rho_universe > 0.0) {
        return Err(Error::InvalidParams("universe densities must be positive".into()));
    }
    Ok(g_ref * (reference.rho_universe / now.rho_universe).sqrt())
}

/// Density entering the quantum potential of the integrator.
#[derive(Debug, Clone, PartialEq)]
pub enum QpDensity {
    /// No quantum potential.
    None,
    /// Gaussian mixture of width `epsilon` centred on the particles themselves.
    SelfConsistent { epsilon: f64 },
    /// A fixed density field; Gaussian mixtures (possibly scaled) and uniform
    /// densities are supported.
    External(DensityModel),
}

/// Couplings and QP density of the approximate local Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveLagrangian {
    pub constants: PhysicalConstants,
    /// Multiplies the quantum potential; 0 switches it off.
    pub qp_weight: f64,
    /// Multiplies the gravity term; 0 switches it off.
    pub gravity_weight: f64,
    pub qp: QpDensity,
    /// Steps that bring two particles closer than this are rejected.
    pub min_separation: f64,
}

impl EffectiveLagrangian {
    pub fn new(constants: PhysicalConstants, qp: QpDensity) -> Self {
        EffectiveLagrangian { constants, qp_weight: 1.0, gravity_weight: 1.0, qp, min_separation: 1e-9 }
    }

    fn qp_strength(&self) -> f64 {
        self.qp_weight * self.constants.qp_strength()
    }

    fn g_coupling(&self) -> f64 {
        self.gravity_weight * self.constants.g_newton * self.constants.mass
    }

    /// `Σ_i Q(a_i)` and `−G m Σ_{i<j} 1/r_ij`.
    pub fn potential_energy(&self, positions: &[Vec3]) -> Result<(f64, f64)> {
        let quantum = match (&self.qp, self.qp_strength() == 0.0) {
            (QpDensity::None, _) | (_, true) => 0.0,
            (QpDensity::SelfConsistent { epsilon }, _) => {
                let mut acc = Compensated::default();
                for x in positions {
                    acc.add(mixture_qp_state(positions, *epsilon, x).ratio());
                }
                -self.qp_strength() * acc.value()
            }
            (QpDensity::External(model), _) => {
                let floor = DensityFloor { log_ratio: f64::NEG_INFINITY };
                let mut acc = Compensated::default();
                for x in positions {
                    acc.add(model.sqrt_laplacian_ratio(x, &floor)?);
                }
                -self.qp_strength() * acc.value()
            }
        };
        let mut gravity = Compensated::default();
        if self.g_coupling() != 0.0 {
            for i in 0..positions.len() {
                for j in i + 1..positions.len() {
                    gravity.add(-1.0 / (positions[i] - positions[j]).norm());
                }
            }
        }
        Ok((quantum, self.g_coupling() * gravity.value()))
    }

    /// Accelerations `−∇_i V / m` for every particle.
    pub fn accelerations(&self, positions: &[Vec3]) -> Result<Vec<Vec3>> {
        let s = self.qp_strength();
        let g = self.g_coupling();
        let mass = self.constants.mass;
        let qp_forces: Vec<Vec3> = match (&self.qp, s == 0.0) {
            (QpDensity::None, _) | (_, true) => vec![Vec3::zeros(); positions.len()],
            (QpDensity::SelfConsistent { epsilon }, _) => self_consistent_forces(positions, *epsilon, s),
            (QpDensity::External(model), _) => positions
                .par_iter()
                .map(|x| Ok(external_ratio_gradient(model, x)? * s))
                .collect::<Result<_>>()?,
        };
        Ok(positions
            .par_iter()
            .enumerate()
            .map(|(i, a)| {
                let mut f = qp_forces[i];
                if g != 0.0 {
                    for (j, b) in positions.iter().enumerate() {
                        if j != i {
                            let r = a - b;
                            f -= r * (g / r.norm().powi(3));
                        }
                    }
                }
                f / mass
            })
            .collect())
    }
}

/// Kernel sums of a mixture at one point, unscaled (the nearest kernel is
/// within reach of the evaluation points used here).
struct MixtureState {
    rho: f64,
    grad: Vec3,
    hess: Mat3,
    lap: f64,
    grad_lap: Vec3,
}

impl MixtureState {
    fn ratio(&self) -> f64 {
        self.lap / (2.0 * self.rho) - self.grad.norm_squared() / (4.0 * self.rho * self.rho)
    }

    /// Partial derivatives of the ratio with respect to `(ρ, ∇ρ, Δρ)`.
    fn sensitivities(&self) -> (f64, Vec3, f64) {
        let r2 = self.rho * self.rho;
        let d_rho = -self.lap / (2.0 * r2) + self.grad.norm_squared() / (2.0 * r2 * self.rho);
        let d_grad = -self.grad / (2.0 * r2);
        (d_rho, d_grad, 1.0 / (2.0 * self.rho))
    }
}

/// Derivatives of `exp(−|o|²/ε²)` (unit peak): value, gradient, Hessian,
/// Laplacian and gradient of the Laplacian.
fn kernel_terms(o: &Vec3, c: f64) -> (f64, Vec3, Mat3, f64, Vec3) {
    let o2 = o.norm_squared();
    let w = (-c * o2).exp();
    let grad = o * (-2.0 * c * w);
    let hess = (o * o.transpose() * (4.0 * c * c) - Mat3::identity() * (2.0 * c)) * w;
    let lap = (4.0 * c * c * o2 - 6.0 * c) * w;
    let grad_lap = o * ((20.0 * c * c - 8.0 * c * c * c * o2) * w);
    (w, grad, hess, lap, grad_lap)
}

fn mixture_qp_state(centres: &[Vec3], epsilon: f64, x: &Vec3) -> MixtureState {
    let c = 1.0 / (epsilon * epsilon);
    let mut s = MixtureState { rho: 0.0, grad: Vec3::zeros(), hess: Mat3::zeros(), lap: 0.0, grad_lap: Vec3::zeros() };
    for a in centres {
        let (w, g, h, l, gl) = kernel_terms(&(x - a), c);
        s.rho += w;
        s.grad += g;
        s.hess += h;
        s.lap += l;
        s.grad_lap += gl;
    }
    s
}

/// Gradient of the ratio at `x` carried by one kernel at offset `o`.
fn kernel_ratio_gradient(state: &MixtureState, o: &Vec3, c: f64) -> Vec3 {
    let (d_rho, d_grad, d_lap) = state.sensitivities();
    let (_, g, h, _, gl) = kernel_terms(o, c);
    g * d_rho + h * d_grad + gl * d_lap
}

/// `F_k = s [Σ_j ∇^{(j)}R(a_k) − Σ_i ∇^{(k)}R(a_i)]`: the first sum moves the
/// evaluation point, the second moves kernel `k` under every evaluation.
fn self_consistent_forces(positions: &[Vec3], epsilon: f64, s: f64) -> Vec<Vec3> {
    let c = 1.0 / (epsilon * epsilon);
    let states: Vec<MixtureState> =
        positions.par_iter().map(|x| mixture_qp_state(positions, epsilon, x)).collect();
    positions
        .par_iter()
        .enumerate()
        .map(|(k, ak)| {
            let mut own = Vec3::zeros();
            let state = &states[k];
            let (d_rho, d_grad, d_lap) = state.sensitivities();
            own += state.grad * d_rho + state.hess * d_grad + state.grad_lap * d_lap;
            let mut moved = Vec3::zeros();
            for (i, ai) in positions.iter().enumerate() {
                moved += kernel_ratio_gradient(&states[i], &(ai - ak), c);
            }
            (own - moved) * s
        })
        .collect()
}

/// `∇(Δ√ρ/√ρ)` of a fixed density; `Q = −s·ratio` makes the force `s·∇ratio`.
fn external_ratio_gradient(model: &DensityModel, x: &Vec3) -> Result<Vec3> {
    match model {
        DensityModel::Uniform { .. } => Ok(Vec3::zeros()),
        DensityModel::Scaled { inner, .. } => external_ratio_gradient(inner, x),
        DensityModel::GaussianMixture { config, epsilon } => {
            // rescale by the nearest kernel so far probes keep their precision
            let centres = config.positions();
            let nearest = centres
                .iter()
                .min_by(|a, b| (x - *a).norm_squared().total_cmp(&(x - *b).norm_squared()))
                .ok_or_else(|| Error::Domain("empty mixture has no quantum potential".into()))?;
            let shifted: Vec<Vec3> = centres.iter().map(|a| a - nearest).collect();
            let local = x - nearest;
            let state = mixture_qp_state(&shifted, *epsilon, &local);
            let (d_rho, d_grad, d_lap) = state.sensitivities();
            if !(state.rho > 0.0) {
                return Err(Error::DegenerateDensity { log_ratio: f64::NEG_INFINITY });
            }
            Ok(state.grad * d_rho + state.hess * d_grad + state.grad_lap * d_lap)
        }
        _ => Err(Error::Unsupported(
            "analytic QP force is available for Gaussian mixtures and uniform densities".into(),
        )),
    }
}

/// Kinetic, quantum and gravitational energy after a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub kinetic: f64,
    pub quantum: f64,
    pub gravity: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub trajectory: Trajectory,
    pub ledger: Vec<EnergyRecord>,
}

impl Integration {
    /// Largest `|E_k − E_0| / |E_0|` along the run.
    pub fn max_relative_energy_drift(&self) -> f64 {
        let e0 = self.ledger[0].total;
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        self.ledger.iter().map(|r| (r.total - e0).abs() / scale).fold(0.0, f64::max)
    }
}

/// Velocity-Verlet integration of `m·ä_i = −∇_i V` for `steps` steps of `dt`.
pub fn integrate_effective(
    lagrangian: &EffectiveLagrangian,
    positions: &[Vec3],
    velocities: &[Vec3],
    steps: usize,
    dt: f64,
) -> Result<Integration> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
    }
    if positions.len() != velocities.len() || positions.is_empty() {
        return Err(Error::Structure("need one velocity per particle and at least one particle".into()));
    }
    if let QpDensity::SelfConsistent { epsilon } = lagrangian.qp {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("kernel width must be positive, got {epsilon}")));
        }
    }
    check_separation(positions, lagrangian.min_separation, 0)?;
    let mass = lagrangian.constants.mass;
    let energy = |step: usize, x: &[Vec3], v: &[Vec3]| -> Result<EnergyRecord> {
        let kinetic = 0.5 * mass * v.iter().map(|u| u.norm_squared()).sum::<f64>();
        let (quantum, gravity) = lagrangian.potential_energy(x)?;
        Ok(EnergyRecord { step, t: step as f64 * dt, kinetic, quantum, gravity, total: kinetic + quantum + gravity })
    };

    let mut x = positions.to_vec();
    let mut v = velocities.to_vec();
    let mut a = lagrangian.accelerations(&x)?;
    let mut xs = vec![x.clone()];
    let mut vs = vec![v.clone()];
    let mut ledger = vec![energy(0, &x, &v)?];
    for step in 1..=steps {
        for ((xi, vi), ai) in x.iter_mut().zip(v.iter_mut()).zip(&a) {
            *vi += ai * (0.5 * dt);
            *xi += *vi * dt;
        }
        check_separation(&x, lagrangian.min_separation, step)?;
        a = lagrangian.accelerations(&x)?;
        for (vi, ai) in v.iter_mut().zip(&a) {
            *vi += ai * (0.5 * dt);
        }
        if x.iter().chain(&v).any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Numerical(format!("non-finite state at step {step}")));
        }
        ledger.push(energy(step, &x, &v)?);
        xs.push(x.clone());
        vs.push(v.clone());
    }
    Ok(Integration { trajectory: Trajectory::new(0.0, dt, xs, vs)?, ledger })
}

fn check_separation(positions: &[Vec3], min: f64, step: usize) -> Result<()> {
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = (positions[i] - positions[j]).norm();
            if !(d > min) {
                return Err(Error::Numerical(format!(
                    "close approach at step {step}: particles {i} and {j} at distance {d:.3e} (minimum {min:.3e})"
                )));
            }
        }
    }
    Ok(())
}
