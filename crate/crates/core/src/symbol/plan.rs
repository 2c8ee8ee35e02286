use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Parameters a [`SamplingPlan`] is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub radii: usize,
    /// random directions on top of the structured ones
    pub directions: usize,
    pub seed: u64,
    pub snap_den: u64,
    pub snap_tol: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            r_min: 10.0,
            r_max: 1e6,
            radii: 40,
            directions: 256,
            seed: 0,
            snap_den: 12,
            snap_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("need 0 < r_min < r_max, got [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("need at least 3 radii, got {0}")]
    TooFewRadii(usize),
    #[error("num_vars must be positive")]
    NoVariables,
    #[error("snap denominator must be positive")]
    BadSnapDen,
}

/// Rays `r·θ` along which symbols are sampled.
///
/// Directions are the coordinate axes, every sign pattern of `(1,…,1)/√n`
/// (for `n ≤ 10`), and `config.directions` seeded random unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub num_vars: usize,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub config: PlanConfig,
}

impl SamplingPlan {
    pub fn new(num_vars: usize, config: PlanConfig) -> Result<Self, PlanError> {
        if num_vars == 0 {
            return Err(PlanError::NoVariables);
        }
        if !(config.r_min > 0.0 && config.r_max > config.r_min && config.r_max.is_finite()) {
            return Err(PlanError::BadRange(config.r_min, config.r_max));
        }
        if config.radii < 3 {
            return Err(PlanError::TooFewRadii(config.radii));
        }
        if config.snap_den == 0 {
            return Err(PlanError::BadSnapDen);
        }
        let step = (config.r_max / config.r_min).ln() / (config.radii - 1) as f64;
        let radii = (0..config.radii)
            .map(|i| {
                if i == config.radii - 1 {
                    config.r_max
                } else {
                    config.r_min * (step * i as f64).exp()
                }
            })
            .collect();

        let mut directions = Vec::new();
        for i in 0..num_vars {
            let mut e = vec![0.0; num_vars];
            e[i] = 1.0;
            directions.push(e);
        }
        if num_vars > 1 && num_vars <= 10 {
            let c = 1.0 / (num_vars as f64).sqrt();
            for mask in 0u32..(1 << num_vars) {
                directions.push(
                    (0..num_vars)
                        .map(|k| if mask >> k & 1 == 1 { -c } else { c })
                        .collect(),
                );
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        while directions.len() < config.directions + num_vars + structured(num_vars) {
            let v: Vec<f64> = (0..num_vars).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                directions.push(v.iter().map(|x| x / norm).collect());
            }
        }
        Ok(SamplingPlan {
            num_vars,
            radii,
            directions,
            config,
        })
    }

    pub fn with_defaults(num_vars: usize, seed: u64) -> Self {
        Self::new(
            num_vars,
            PlanConfig {
                seed,
                ..PlanConfig::default()
            },
        )
        .expect("default plan is valid")
    }

    /// Same plan with another seed, for fresh-sample verification.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self::new(
            self.num_vars,
            PlanConfig {
                seed,
                ..self.config.clone()
            },
        )
        .expect("reseeding keeps a valid plan")
    }

    pub fn num_samples(&self) -> usize {
        self.radii.len() * self.directions.len()
    }

    /// The sample point `radius · direction`.
    pub fn point(&self, direction: usize, radius: usize) -> Vec<f64> {
        let r = self.radii[radius];
        self.directions[direction].iter().map(|x| r * x).collect()
    }
}

fn structured(n: usize) -> usize {
    if n > 1 && n <= 10 {
        1 << n
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_invariants() {
        for n in 1..=4 {
            let p = SamplingPlan::with_defaults(n, 7);
            for d in &p.directions {
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
            assert!(p.radii.windows(2).all(|w| w[1] > w[0]));
            assert_eq!(p.radii.len(), 40);
            assert_eq!(p.radii[0], 10.0);
            assert_eq!(*p.radii.last().unwrap(), 1e6);
            assert_eq!(p.directions.len(), 256 + n + structured(n));
        }
    }

    #[test]
    fn seeded_determinism() {
        let a = SamplingPlan::with_defaults(3, 11);
        let b = SamplingPlan::with_defaults(3, 11);
        let c = SamplingPlan::with_defaults(3, 12);
        assert_eq!(a, b);
        assert_ne!(a.directions, c.directions);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = PlanConfig {
            r_min: 5.0,
            r_max: 1.0,
            ..PlanConfig::default()
        };
        assert!(SamplingPlan::new(2, bad).is_err());
        assert!(SamplingPlan::new(0, PlanConfig::default()).is_err());
    }
}
