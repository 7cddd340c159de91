//! The experiment file schema.
//!
//! One TOML file describes one experiment. The top level names the `kind`,
//! the interaction constants and an optional seed and output directory; the
//! section named after the kind carries the experiment settings. Unknown keys
//! are rejected so typos surface as parse errors instead of silent defaults.

use std::path::{Path, PathBuf};

use dpi_core::{DensityFloor, DpiParams, PhysicalConstants, QuadratureSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Verify,
    Compare,
    Gravity,
    Evolve,
    Cosmo,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Verify => "verify",
            Kind::Compare => "compare",
            Kind::Gravity => "gravity",
            Kind::Evolve => "evolve",
            Kind::Cosmo => "cosmo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Master seed; required by experiments with a stochastic step.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory, relative to the working directory. `--out` wins.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    pub params: DpiParams,
    #[serde(default)]
    pub constants: PhysicalConstants,
    /// Relative density floor `ρ/ρ_peak` below which probes are degenerate.
    #[serde(default)]
    pub density_floor: Option<f64>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub compare: Option<CompareSection>,
    #[serde(default)]
    pub gravity: Option<GravitySection>,
    #[serde(default)]
    pub evolve: Option<EvolveSection>,
    #[serde(default)]
    pub cosmo: Option<CosmoSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub betas: Vec<f64>,
    /// Lengths of the shift vector `d`.
    pub distances: Vec<f64>,
    pub alpha_s_values: Vec<f64>,
    /// Direction of `d`; normalised before use.
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
    #[serde(default = "default_verify_points")]
    pub points: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub ratios: Vec<f64>,
    pub separations: Vec<f64>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_order")]
    pub order: usize,
    pub probes_per_cell: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default = "default_integral_probes")]
    pub integral_probes: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravitySection {
    pub zeta: f64,
    /// Shell structure length as a fraction of `r_min`.
    pub xi_fraction: f64,
    /// Radii in units of the grid spacing `√ω`.
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    /// Optional uniform background added to the shell density.
    #[serde(default)]
    pub rho0: Option<f64>,
    /// Mass used to turn the fitted prefactor into an effective coupling.
    #[serde(default = "default_mass")]
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpChoice {
    None,
    SelfConsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    pub steps: usize,
    pub dt: f64,
    #[serde(default = "default_qp")]
    pub qp: QpChoice,
    /// Kernel width of the self-consistent density; defaults to `ε`.
    #[serde(default)]
    pub qp_epsilon: Option<f64>,
    #[serde(default = "default_weight")]
    pub qp_weight: f64,
    #[serde(default = "default_weight")]
    pub gravity_weight: f64,
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
    /// Optional Leibnitz check on the produced trajectory.
    #[serde(default)]
    pub leibnitz: Option<LeibnitzSection>,
}

/// `A(t)` is a rotation about `axis` by `angular_rate·t`, `B(t) = drift·t`
/// and `C(t) = time_scale·t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeibnitzSection {
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    pub angular_rate: f64,
    #[serde(default)]
    pub drift: [f64; 3],
    #[serde(default = "default_weight")]
    pub time_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosmoPoint {
    pub r: f64,
    pub r_dot: f64,
    pub rho_universe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosmoSection {
    pub reference: CosmoPoint,
    pub states: Vec<CosmoPoint>,
    #[serde(default = "default_weight")]
    pub hbar_ref: f64,
    #[serde(default = "default_weight")]
    pub g_ref: f64,
    /// Particle velocities for the shell-model kinetic term.
    #[serde(default)]
    pub velocities: Vec<[f64; 3]>,
    #[serde(default = "default_weight")]
    pub kinetic_constant: f64,
}

fn default_direction() -> [f64; 3] {
    [1.0, 2.0, 2.0]
}
fn default_verify_points() -> usize {
    40
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_order() -> usize {
    1
}
fn default_spread() -> f64 {
    4.0
}
fn default_integral_probes() -> usize {
    4
}
fn default_mass() -> f64 {
    1.0
}
fn default_qp() -> QpChoice {
    QpChoice::None
}
fn default_weight() -> f64 {
    1.0
}
fn default_min_separation() -> f64 {
    1e-9
}
fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// A parsed config together with the hash that identifies the experiment.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub hash: String,
    pub source: PathBuf,
}

impl Loaded {
    pub fn read(path: &Path, seed_override: Option<u64>) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path, seed_override)
    }

    pub fn parse(text: &str, path: &Path, seed_override: Option<u64>) -> Result<Self, Failure> {
        let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| Failure::Parse(e.message().to_owned()))?;
        if seed_override.is_some() {
            config.seed = seed_override;
        }
        Ok(Loaded { hash: config_hash(&config), config, source: path.to_owned() })
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let c = &self.config;
        c.params.validate().map_err(|e| Failure::Validation(e.to_string()))?;
        PhysicalConstants::new(c.constants.hbar, c.constants.mass, c.constants.g_newton)
            .map_err(|e| Failure::Validation(e.to_string()))?;
        if let Some(f) = c.density_floor {
            if !(f > 0.0 && f < 1.0) {
                return Err(Failure::Validation(format!("density_floor must lie in (0, 1), got {f}")));
            }
        }
        let present = [
            (Kind::Verify, c.verify.is_some()),
            (Kind::Compare, c.compare.is_some()),
            (Kind::Gravity, c.gravity.is_some()),
            (Kind::Evolve, c.evolve.is_some()),
            (Kind::Cosmo, c.cosmo.is_some()),
        ];
        for (kind, there) in present {
            if kind == c.kind && !there {
                return Err(Failure::Validation(format!("kind '{}' needs a [{}] section", kind.name(), kind.name())));
            }
            if kind != c.kind && there {
                return Err(Failure::Validation(format!(
                    "section [{}] does not belong to a '{}' experiment",
                    kind.name(),
                    c.kind.name()
                )));
            }
        }
        if c.kind == Kind::Compare && c.seed.is_none() {
            return Err(Failure::Validation("the compare experiment samples configurations and needs a seed".into()));
        }
        Ok(())
    }

    pub fn floor(&self) -> DensityFloor {
        self.config.density_floor.map(DensityFloor::relative).unwrap_or_default()
    }
}

/// SHA-256 of the effective config in canonical JSON form. The output
/// directory is left out, so moving an experiment does not change its hash.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serialises");
    let digest = Sha256::digest(&canonical);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "cosmo"
[params]
u0 = -1.0
alpha_s = 1.0
alpha_l = 4.0
[cosmo]
reference = { r = 1.0, r_dot = 1.0, rho_universe = 1.0 }
states = [{ r = 2.0, r_dot = 2.0, rho_universe = 4.0 }]
"#;

    #[test]
    fn hash_ignores_output_but_not_seed() {
        let a = Loaded::parse(MINIMAL, Path::new("a.toml"), None).unwrap();
        let with_out = format!("output = \"elsewhere\"\n{MINIMAL}");
        let b = Loaded::parse(&with_out, Path::new("b.toml"), None).unwrap();
        assert_eq!(a.hash, b.hash);
        let c = Loaded::parse(MINIMAL, Path::new("a.toml"), Some(3)).unwrap();
        assert_ne!(a.hash, c.hash);
        assert_eq!(a.hash.len(), 64);
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let text = MINIMAL.replace("alpha_l", "alpha_long");
        assert!(matches!(Loaded::parse(&text, Path::new("x"), None), Err(Failure::Parse(_))));
    }

    #[test]
    fn missing_section_is_a_validation_error() {
        let text = MINIMAL.replace("kind = \"cosmo\"", "kind = \"gravity\"");
        let loaded = Loaded::parse(&text, Path::new("x"), None).unwrap();
        assert!(matches!(loaded.validate(), Err(Failure::Validation(_))));
    }

    #[test]
    fn range_violation_is_a_validation_error() {
        let text = MINIMAL.replace("alpha_l = 4.0", "alpha_l = 1.5");
        let loaded = Loaded::parse(&text, Path::new("x"), None).unwrap();
        assert!(matches!(loaded.validate(), Err(Failure::Validation(_))));
    }
}
