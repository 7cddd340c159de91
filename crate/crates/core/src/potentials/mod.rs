//! Potential evaluators.
//!
//! The DPI potential is available in four forms that agree only in the regime
//! of separations large against `α_s` and `α_s ≪ α_ℓ`:
//!
//! * [`dpi_direct`]: the defining product of kernel sums over `1/ρ`,
//! * [`dpi_integral`]: the density-integral form, by quadrature,
//! * [`dpi_closed`]: the Gaussian-integrated form,
//! * [`heat_series`]: the truncated heat-operator series, constant plus a term
//!   shaped like Bohm's quantum potential plus higher corrections.
//!
//! [`bohm_qp`] evaluates the quantum potential itself. The `_multi` variants
//! work in the configuration space of several particle kinds.

mod dpi;
mod heat;
mod multi;

use serde::{Deserialize, Serialize};

pub use dpi::{dpi_closed, dpi_direct, dpi_integral};
pub use heat::{
    bohm_qp, gaussian_heat_action_check, heat_kernel_convolution, heat_kernel_ratio, heat_series,
    heat_series_partial_sums, HeatActionReport,
};
pub use multi::{dpi_direct_multi, heat_series_multi, joint_delta_volume, JointDensity};

pub use crate::quadrature::Estimate;
use crate::Vec3;

/// How to evaluate the density-integral form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum QuadratureSpec {
    /// Tensor Gauss–Hermite rule about the probe, scaled by γ.
    GaussHermite { points: usize },
    /// Plain Monte Carlo against the `e^{-y²/γ²}` weight.
    MonteCarlo { samples: usize, seed: u64 },
    /// Gauss–Hermite rules centred on each kernel of a Gaussian mixture,
    /// scaled by the kernel width. Resolves the integrand when `γ ≫ ε`.
    KernelCentered { points: usize },
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::GaussHermite { points: 40 }
    }
}

/// Every potential form evaluated at one probe point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProbe {
    pub x: [f64; 3],
    pub u_direct: f64,
    pub u_integral: Option<Estimate>,
    pub u_closed: f64,
    /// Partial sums of the heat series by truncation order; entry 0 is `u0·C`.
    pub u_series: Vec<f64>,
    pub qp: f64,
    pub nearest_particle_distance: f64,
}

impl PotentialProbe {
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x[0], self.x[1], self.x[2])
    }
}
