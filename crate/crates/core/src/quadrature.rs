//! Gauss–Hermite rules and a seeded Monte Carlo estimator.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Nodes and weights for `∫ e^{-u²} f(u) du`.
#[derive(Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cached Gauss–Hermite rule with `points` nodes (at least one).
pub fn gauss_hermite(points: usize) -> Arc<HermiteRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
    let points = points.max(1);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(points)
        .or_insert_with(|| {
            let rule = GaussHermite::new(NonZeroUsize::new(points).expect("points >= 1"));
            let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
            Arc::new(HermiteRule { nodes, weights })
        })
        .clone()
}

/// A quadrature value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            self.error
        } else {
            self.error / self.value.abs()
        }
    }
}

/// `∫_{R³} e^{-|u|²} f(u) d³u` with a tensor rule of `points` nodes per axis.
pub fn hermite_3d<F: FnMut(Vec3) -> f64>(points: usize, mut f: F) -> f64 {
    let rule = gauss_hermite(points);
    let mut acc = crate::sum::Compensated::default();
    for (i, &xi) in rule.nodes.iter().enumerate() {
        for (j, &yj) in rule.nodes.iter().enumerate() {
            let wij = rule.weights[i] * rule.weights[j];
            for (k, &zk) in rule.nodes.iter().enumerate() {
                acc.add(wij * rule.weights[k] * f(Vec3::new(xi, yj, zk)));
            }
        }
    }
    acc.value()
}

/// Tensor rule at `points` and at a coarser companion rule; the difference is
/// the reported error.
pub fn hermite_3d_estimate<F: FnMut(Vec3) -> f64>(points: usize, mut f: F) -> Estimate {
    let fine = hermite_3d(points, &mut f);
    let coarse_points = (points * 3 / 4).max(1);
    if coarse_points == points {
        return Estimate { value: fine, error: 0.0 };
    }
    let coarse = hermite_3d(coarse_points, &mut f);
    Estimate { value: fine, error: (fine - coarse).abs() }
}

/// Mean of `f(u)` over `u ~ N(0, I₃)` with its standard error.
pub fn monte_carlo_normal<F: FnMut(Vec3) -> f64>(samples: usize, seed: u64, mut f: F) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let u = Vec3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let v = f(u);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let error = if samples > 1 {
        (m2 / ((samples - 1) as f64) / samples as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Estimate { value: mean, error }
}
