//! The five experiment kinds. Each one computes every artifact in memory and
//! hands them back; nothing touches the disk until the whole run succeeded.

use dpi_core::dynamics::{check_leibnitz_invariance, g_scaling, hbar_scaling, integrate_effective, shell_kinetic};
use dpi_core::equivalence::{run_equivalence_sweep, verify_insertion_identity, GapStats};
use dpi_core::gravity::{effective_coupling, fit_power_law, radial_series_potential, series_coefficient};
use dpi_core::io::{energy_table, fmt_f64, probe_table, trajectory_table, Table};
use dpi_core::potentials::gaussian_heat_action_check;
use dpi_core::{
    CosmologyState, DensityModel, DerivedParams, EffectiveLagrangian, Mat3, QpDensity, RadialSeriesSpec, SweepSpec,
    TransformSpec, Vec3,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CompareSection, CosmoSection, EvolveSection, GravitySection, Kind, Loaded, QpChoice, VerifySection};
use crate::Failure;

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn table(name: &str, loaded: &Loaded, mut table: Table) -> Result<Self, Failure> {
        let mut comments = provenance(loaded);
        comments.append(&mut table.comments);
        table.comments = comments;
        let mut bytes = Vec::new();
        table.write_to(&mut bytes).map_err(Failure::from)?;
        Ok(Artifact { name: name.to_owned(), bytes })
    }

    fn json(name: &str, loaded: &Loaded, body: Value) -> Self {
        let mut doc = json!({ "config_hash": loaded.hash, "kind": loaded.config.kind.name() });
        if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
            doc.extend(body);
        }
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("json serialises");
        bytes.push(b'\n');
        Artifact { name: name.to_owned(), bytes }
    }
}

fn provenance(loaded: &Loaded) -> Vec<(String, String)> {
    let p = &loaded.config.params;
    vec![
        ("config_hash".into(), loaded.hash.clone()),
        ("kind".into(), loaded.config.kind.name().into()),
        ("u0".into(), fmt_f64(p.u0)),
        ("alpha_s".into(), fmt_f64(p.alpha_s)),
        ("alpha_l".into(), fmt_f64(p.alpha_l)),
    ]
}

fn check_list(name: &str, values: &[f64], positive: bool) -> Result<(), Failure> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite() || (positive && *v <= 0.0)) {
        let what = if positive { "positive" } else { "finite" };
        return Err(Failure::Validation(format!("{name} must be a nonempty list of {what} values")));
    }
    Ok(())
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub fn run(loaded: &Loaded, derived: &DerivedParams) -> Result<Vec<Artifact>, Failure> {
    let c = &loaded.config;
    // validate() guarantees the section of the chosen kind is present
    match c.kind {
        Kind::Verify => verify(loaded, c.verify.as_ref().expect("validated"), derived),
        Kind::Compare => compare(loaded, c.compare.as_ref().expect("validated")),
        Kind::Gravity => gravity(loaded, c.gravity.as_ref().expect("validated"), derived),
        Kind::Evolve => evolve(loaded, c.evolve.as_ref().expect("validated"), derived),
        Kind::Cosmo => cosmo(loaded, c.cosmo.as_ref().expect("validated")),
    }
}

/// One line per planned step, used by `describe`.
pub fn plan(loaded: &Loaded) -> Vec<String> {
    let c = &loaded.config;
    match c.kind {
        Kind::Verify => {
            let s = c.verify.as_ref().expect("validated");
            vec![
                format!(
                    "insertion identity on {} x {} x {} (beta, |d|, alpha_s) cases, {}-point Gauss-Hermite per axis",
                    s.betas.len(),
                    s.distances.len(),
                    s.alpha_s_values.len(),
                    s.points
                ),
                format!("pass when every relative error is below {:e}", s.tolerance),
                "heat-action exponent and amplitude check for the configured parameters".into(),
                "writes identity.csv, verify.json".into(),
            ]
        }
        Kind::Compare => {
            let s = c.compare.as_ref().expect("validated");
            let integral = match &s.quadrature {
                Some(q) => format!("integral form on the first {} probes with {q:?}", s.integral_probes),
                None => "integral form skipped".into(),
            };
            vec![
                format!(
                    "equivalence sweep over N = {:?}, t = {:?}, s = {:?} ({} cells)",
                    s.sizes,
                    s.ratios,
                    s.separations,
                    s.sizes.len() * s.ratios.len() * s.separations.len()
                ),
                format!("{} probes per cell, heat series to order {}", s.probes_per_cell, s.order),
                integral,
                format!("seed {}", c.seed.unwrap_or_default()),
                "writes sweep.csv, probes.csv, summary.json".into(),
            ]
        }
        Kind::Gravity => {
            let s = c.gravity.as_ref().expect("validated");
            vec![
                format!(
                    "radial series for the shell density (zeta = {}, xi = {} r_min) at {} radii in [{}, {}] grid units",
                    s.zeta, s.xi_fraction, s.points, s.r_min, s.r_max
                ),
                match s.rho0 {
                    Some(r) => format!("uniform background rho0 = {r}"),
                    None => "no uniform background".into(),
                },
                "log-log power-law fit over the full range, effective coupling if the exponent is near -1".into(),
                "writes tail.csv, fit.json".into(),
            ]
        }
        Kind::Evolve => {
            let s = c.evolve.as_ref().expect("validated");
            vec![
                format!("{} particles, {} velocity-Verlet steps of dt = {}", s.positions.len(), s.steps, s.dt),
                format!(
                    "quantum potential: {:?} (weight {}), gravity weight {}",
                    s.qp, s.qp_weight, s.gravity_weight
                ),
                match &s.leibnitz {
                    Some(l) => format!(
                        "Leibnitz check: rotation rate {} about {:?}, drift {:?}, time scale {}",
                        l.angular_rate, l.axis, l.drift, l.time_scale
                    ),
                    None => "no Leibnitz check".into(),
                },
                "writes trajectory.csv, energy.csv, evolve.json".into(),
            ]
        }
        Kind::Cosmo => {
            let s = c.cosmo.as_ref().expect("validated");
            vec![
                format!("hbar and G scalings for {} states against the reference", s.states.len()),
                format!("shell kinetic term for {} particle velocities", s.velocities.len()),
                "writes cosmo.csv, cosmo.json".into(),
            ]
        }
    }
}

fn verify(loaded: &Loaded, s: &VerifySection, derived: &DerivedParams) -> Result<Vec<Artifact>, Failure> {
    check_list("betas", &s.betas, false)?;
    check_list("distances", &s.distances, false)?;
    check_list("alpha_s_values", &s.alpha_s_values, true)?;
    let dir = vec3(&s.direction);
    if dir.norm() <= 0.0 || !dir.iter().all(|v| v.is_finite()) {
        return Err(Failure::Validation("direction must be a finite nonzero vector".into()));
    }
    let dir = dir.normalize();
    let mut cases = Vec::new();
    for &beta in &s.betas {
        for &d in &s.distances {
            for &alpha_s in &s.alpha_s_values {
                cases.push((beta, d, alpha_s));
            }
        }
    }
    let errors: Vec<f64> = cases
        .par_iter()
        .map(|&(beta, d, alpha_s)| verify_insertion_identity(beta, &(dir * d), alpha_s, s.points))
        .collect::<Result<_, _>>()?;

    let mut table = Table::new(&["beta", "distance", "alpha_s", "relative_error"]);
    for (&(beta, d, alpha_s), e) in cases.iter().zip(&errors) {
        table.rows.push(vec![fmt_f64(beta), fmt_f64(d), fmt_f64(alpha_s), fmt_f64(*e)]);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let heat = gaussian_heat_action_check(derived);
    let identity_pass = worst < s.tolerance;
    let summary = json!({
        "identity": {
            "cases": cases.len(),
            "points": s.points,
            "max_relative_error": worst,
            "tolerance": s.tolerance,
            "pass": identity_pass,
        },
        "heat_action": heat,
        "heat_exponent_pass": heat.exponent_relative_error < 1e-12,
        "pass": identity_pass && heat.exponent_relative_error < 1e-12,
    });
    Ok(vec![Artifact::table("identity.csv", loaded, table)?, Artifact::json("verify.json", loaded, summary)])
}

fn compare(loaded: &Loaded, s: &CompareSection) -> Result<Vec<Artifact>, Failure> {
    let spec = SweepSpec {
        ratios: s.ratios.clone(),
        separations: s.separations.clone(),
        sizes: s.sizes.clone(),
        order: s.order,
        probes_per_cell: s.probes_per_cell,
        seed: loaded.config.seed.expect("validated"),
        spread: s.spread,
        quadrature: s.quadrature,
        integral_probes: s.integral_probes,
        tolerance: s.tolerance,
        floor: loaded.floor(),
        constants: loaded.config.constants,
    };
    spec.validate()?;
    let report = run_equivalence_sweep(&spec, &loaded.config.params)?;

    let stat = |g: &Option<GapStats>| match g {
        Some(g) => [fmt_f64(g.median), fmt_f64(g.p90)],
        None => [String::new(), String::new()],
    };
    let mut cells = Table::new(&[
        "n",
        "ratio",
        "separation",
        "alpha_l",
        "probes",
        "degenerate",
        "ill_conditioned",
        "integral_evaluated",
        "integral_unconverged",
        "direct_vs_closed_median",
        "direct_vs_closed_p90",
        "closed_vs_series_median",
        "closed_vs_series_p90",
        "series_step_median",
        "series_step_p90",
        "integral_vs_closed_median",
        "integral_vs_closed_p90",
        "empty",
    ]);
    cells.comment("order", s.order.to_string()).comment("seed", spec.seed.to_string());
    let mut probes = Vec::new();
    let (mut col_n, mut col_t, mut col_s) = (Vec::new(), Vec::new(), Vec::new());
    for cell in &report.cells {
        let mut row = vec![
            cell.n.to_string(),
            fmt_f64(cell.ratio),
            fmt_f64(cell.separation),
            fmt_f64(cell.alpha_l),
            cell.probes.to_string(),
            cell.degenerate.to_string(),
            cell.ill_conditioned.to_string(),
            cell.integral_evaluated.to_string(),
            cell.integral_unconverged.to_string(),
        ];
        for g in [&cell.direct_vs_closed, &cell.closed_vs_series, &cell.series_step, &cell.integral_vs_closed] {
            row.extend(stat(g));
        }
        row.push(cell.empty.to_string());
        cells.push(row)?;
        for p in &cell.records {
            probes.push(p.clone());
            col_n.push(cell.n.to_string());
            col_t.push(fmt_f64(cell.ratio));
            col_s.push(fmt_f64(cell.separation));
        }
    }
    let probe_rows = probe_table(&probes, &[("n", col_n), ("ratio", col_t), ("separation", col_s)])?;
    let v = &report.verdicts;
    let summary = json!({
        "seed": spec.seed,
        "order": s.order,
        "verdicts": v,
        "pass": v.all_finite
            && v.direct_vs_closed_monotone
            && v.closed_vs_series_monotone
            && v.integral_matches_closed.unwrap_or(true),
        "steps": report.steps,
        "cells": report.cells,
    });
    Ok(vec![
        Artifact::table("sweep.csv", loaded, cells)?,
        Artifact::table("probes.csv", loaded, probe_rows)?,
        Artifact::json("summary.json", loaded, summary),
    ])
}

fn gravity(loaded: &Loaded, s: &GravitySection, derived: &DerivedParams) -> Result<Vec<Artifact>, Failure> {
    check_list("zeta", &[s.zeta], true)?;
    check_list("xi_fraction", &[s.xi_fraction], true)?;
    check_list("mass", &[s.mass], true)?;
    if s.points < 5 {
        return Err(Failure::Validation(format!("the fit needs at least 5 radii, got {}", s.points)));
    }
    let unit = derived.omega.sqrt();
    let shell = DensityModel::radial_shell(s.zeta, s.xi_fraction * s.r_min * unit)?;
    let density = match s.rho0 {
        Some(rho0) => DensityModel::superposition(vec![shell, DensityModel::uniform(rho0)?])?,
        None => shell,
    };
    let spec = RadialSeriesSpec::log_spaced(derived, s.r_min, s.r_max, s.points, density)?;
    let curve = radial_series_potential(&spec, derived, loaded.config.params.u0)?;
    let pairs: Vec<(f64, f64)> = curve.iter().map(|p| (p.r, p.u)).collect();
    let fit = fit_power_law(&pairs, 0.0, f64::INFINITY)?;

    let mut table = Table::new(&["r", "r_grid_units", "m", "u", "excluded_terms", "fit_residual"]);
    table.comment("grid_unit", fmt_f64(unit));
    for (p, (_, res)) in curve.iter().zip(&fit.residuals) {
        table.rows.push(vec![
            fmt_f64(p.r),
            fmt_f64(p.r / unit),
            p.m.to_string(),
            fmt_f64(p.u),
            p.excluded_terms.to_string(),
            fmt_f64(*res),
        ]);
    }
    let coupling = match effective_coupling(&fit, s.mass) {
        Ok(c) => json!({ "g_eff": c.g_eff, "attractive": c.attractive, "note": c.sign_note() }),
        Err(e) => json!({ "refused": e.to_string() }),
    };
    let in_band = (-1.05..=-0.95).contains(&fit.exponent);
    let summary = json!({
        "grid_unit": unit,
        "xi": s.xi_fraction * s.r_min * unit,
        "fit": {
            "exponent": fit.exponent,
            "prefactor": fit.prefactor,
            "r_squared": fit.r_squared,
            "points": fit.points,
            "max_abs_residual": fit.max_abs_residual(),
        },
        "effective_coupling": coupling,
        "series_coefficient_10": series_coefficient(10)?,
        "inverse_distance_pass": in_band && fit.r_squared > 0.999,
    });
    Ok(vec![Artifact::table("tail.csv", loaded, table)?, Artifact::json("fit.json", loaded, summary)])
}

fn evolve(loaded: &Loaded, s: &EvolveSection, derived: &DerivedParams) -> Result<Vec<Artifact>, Failure> {
    if s.positions.len() != s.velocities.len() || s.positions.is_empty() {
        return Err(Failure::Validation("need the same nonzero number of positions and velocities".into()));
    }
    if s.steps == 0 {
        return Err(Failure::Validation("steps must be positive".into()));
    }
    let positions: Vec<Vec3> = s.positions.iter().map(vec3).collect();
    let velocities: Vec<Vec3> = s.velocities.iter().map(vec3).collect();
    let qp = match s.qp {
        QpChoice::None => QpDensity::None,
        QpChoice::SelfConsistent => QpDensity::SelfConsistent { epsilon: s.qp_epsilon.unwrap_or(derived.epsilon) },
    };
    let mut lagrangian = EffectiveLagrangian::new(loaded.config.constants, qp);
    lagrangian.qp_weight = s.qp_weight;
    lagrangian.gravity_weight = s.gravity_weight;
    lagrangian.min_separation = s.min_separation;
    let run = integrate_effective(&lagrangian, &positions, &velocities, s.steps, s.dt)?;

    let leibnitz = match &s.leibnitz {
        None => Value::Null,
        Some(l) => {
            let axis = vec3(&l.axis);
            if axis.norm().is_nan() || axis.norm() <= 0.0 {
                return Err(Failure::Validation("rotation axis must be nonzero".into()));
            }
            if l.time_scale.is_nan() || l.time_scale <= 0.0 {
                return Err(Failure::Validation("time_scale must be positive".into()));
            }
            let axis = nalgebra::Unit::new_normalize(axis);
            let traj = &run.trajectory;
            let times: Vec<f64> = (0..traj.len()).map(|k| traj.time(k)).collect();
            let transform = TransformSpec {
                rotations: times
                    .iter()
                    .map(|t| *nalgebra::Rotation3::from_axis_angle(&axis, l.angular_rate * t).matrix())
                    .collect::<Vec<Mat3>>(),
                translations: times.iter().map(|t| vec3(&l.drift) * *t).collect(),
                reparametrization: times.iter().map(|t| l.time_scale * t).collect(),
            };
            let report = check_leibnitz_invariance(
                traj,
                &transform,
                &loaded.config.params,
                derived,
                &loaded.floor(),
            )?;
            json!({
                "max_kinetic_gap": report.max_kinetic_gap,
                "max_relative_kinetic_gap": report.max_relative_kinetic_gap,
                "action": report.action,
                "transformed_action": report.transformed_action,
                "reparametrized_action": report.reparametrized_action,
            })
        }
    };
    let last = run.trajectory.configuration(run.trajectory.len() - 1)?;
    let summary = json!({
        "steps": s.steps,
        "dt": s.dt,
        "max_relative_energy_drift": run.max_relative_energy_drift(),
        "initial_energy": run.ledger[0].total,
        "final_energy": run.ledger[run.ledger.len() - 1].total,
        "final_min_separation": last.min_separation(),
        "leibnitz": leibnitz,
    });
    Ok(vec![
        Artifact::table("trajectory.csv", loaded, trajectory_table(&run.trajectory))?,
        Artifact::table("energy.csv", loaded, energy_table(&run.ledger))?,
        Artifact::json("evolve.json", loaded, summary),
    ])
}

fn cosmo(loaded: &Loaded, s: &CosmoSection) -> Result<Vec<Artifact>, Failure> {
    let state = |p: &crate::config::CosmoPoint| CosmologyState::new(p.r, p.r_dot, p.rho_universe);
    let reference = state(&s.reference)?;
    let states: Vec<CosmologyState> = s.states.iter().map(state).collect::<Result<_, _>>()?;
    if states.is_empty() {
        return Err(Failure::Validation("cosmo needs at least one state".into()));
    }
    let velocities: Vec<Vec3> = s.velocities.iter().map(vec3).collect();

    let mut table = Table::new(&["index", "r", "r_dot", "rho_universe", "hbar", "g", "shell_kinetic"]);
    let mut hbars = Vec::with_capacity(states.len());
    let mut gs = Vec::with_capacity(states.len());
    for (i, st) in states.iter().enumerate() {
        let hbar = hbar_scaling(st, &reference, s.hbar_ref)?;
        let g = g_scaling(st, &reference, s.g_ref)?;
        // the shell term is undefined for a frozen shell; leave it blank there
        let kinetic = if st.r_dot != 0.0 {
            fmt_f64(shell_kinetic(st, &velocities, s.kinetic_constant)?)
        } else {
            String::new()
        };
        table.rows.push(vec![
            i.to_string(),
            fmt_f64(st.r),
            fmt_f64(st.r_dot),
            fmt_f64(st.rho_universe),
            fmt_f64(hbar),
            fmt_f64(g),
            kinetic,
        ]);
        hbars.push(hbar);
        gs.push(g);
    }
    // composing reference -> k -> k+1 must agree with reference -> k+1
    let mut worst_hbar: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    for k in 0..states.len().saturating_sub(1) {
        let (a, b) = (&states[k], &states[k + 1]);
        if a.r_dot != 0.0 {
            let composed = hbar_scaling(b, a, hbars[k])?;
            worst_hbar = worst_hbar.max(rel(composed, hbars[k + 1]));
        }
        let composed = g_scaling(b, a, gs[k])?;
        worst_g = worst_g.max(rel(composed, gs[k + 1]));
    }
    let summary = json!({
        "states": states.len(),
        "hbar": hbars,
        "g": gs,
        "cocycle_max_relative_deviation": { "hbar": worst_hbar, "g": worst_g },
    });
    Ok(vec![Artifact::table("cosmo.csv", loaded, table)?, Artifact::json("cosmo.json", loaded, summary)])
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
