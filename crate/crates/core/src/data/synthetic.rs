use rand::Rng;

use super::{Dataset, Example};
use crate::rng;
use crate::scalar::Scalar;

/// Parameters of the bundled two-class binary-feature generator, a stand-in
/// for sparse 0/1 datasets such as a9a when the real file is not available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoClassSpec {
    pub examples: usize,
    pub features: usize,
    /// Probability that an example is labelled +1.
    pub positive_rate: f64,
    /// Mean number of active features per example.
    pub active: f64,
    /// How strongly feature frequencies differ between the classes, in [0, 1).
    pub separation: f64,
    pub seed: u64,
}

impl Default for TwoClassSpec {
    fn default() -> Self {
        Self { examples: 2000, features: 40, positive_rate: 0.3, active: 8.0, separation: 0.5, seed: 0 }
    }
}

/// Draws a reproducible dataset of 0/1 features whose per-class activation
/// rates differ; the classes overlap, so the unregularized problem has a
/// finite minimizer.
pub fn two_class<F: Scalar>(spec: &TwoClassSpec) -> Dataset<F> {
    let mut rng = rng::seeded(spec.seed);
    let d = spec.features.max(1);
    let base = (spec.active / d as f64).clamp(0.0, 1.0);
    let tilt: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) * spec.separation).collect();
    let examples = (0..spec.examples)
        .map(|_| {
            let positive = rng.random_bool(spec.positive_rate.clamp(0.0, 1.0));
            let sign = if positive { 1.0 } else { -1.0 };
            let features = (0..d)
                .filter_map(|j| {
                    let p = (base * (1.0 + sign * tilt[j])).clamp(0.0, 1.0);
                    rng.random_bool(p).then_some((j as u32, F::one()))
                })
                .collect();
            Example { features, label: F::lit(sign) }
        })
        .collect();
    Dataset { examples, num_features: d }
}
