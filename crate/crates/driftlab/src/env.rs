//! Drifting data-generating processes.
//!
//! An environment holds the current optimal parameter(s), advances them under
//! a [`DriftSpec`], and emits per-agent data samples:
//!
//! * linear regression: `d = u' w_opt + v` with Gaussian regressors and noise,
//! * logistic: labels in {-1, +1} drawn with probability `1/(1+exp(-h' w_opt))`
//!   given Gaussian features, paired with an explicit ridge weight so the
//!   regularized cost is strongly convex.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};

/// Feature covariance, restricted to the shapes the simulations use.
#[derive(Debug, Clone)]
pub enum Covariance {
    Identity(usize),
    Diagonal(DVector<f64>),
}

impl Covariance {
    pub fn dimension(&self) -> usize {
        match self {
            Covariance::Identity(m) => *m,
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Covariance::Diagonal(d) = self {
            if d.iter().any(|&x| x <= 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Covariance::Identity(m) => DMatrix::identity(*m, *m),
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Covariance::Identity(m) => *m as f64,
            Covariance::Diagonal(d) => d.sum(),
        }
    }

    pub fn lambda_min(&self) -> f64 {
        match self {
            Covariance::Identity(_) => 1.0,
            Covariance::Diagonal(d) => d.min(),
        }
    }

    pub fn lambda_max(&self) -> f64 {
        match self {
            Covariance::Identity(_) => 1.0,
            Covariance::Diagonal(d) => d.max(),
        }
    }

    /// Draw `x ~ N(0, R)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            Covariance::Identity(m) => {
                DVector::from_fn(*m, |_, _| rng.sample::<f64, _>(StandardNormal))
            }
            Covariance::Diagonal(d) => DVector::from_iterator(
                d.len(),
                d.iter()
                    .map(|&v| v.sqrt() * rng.sample::<f64, _>(StandardNormal)),
            ),
        }
    }
}

/// One per-agent observation.
#[derive(Debug, Clone)]
pub struct DataSample {
    pub features: DVector<f64>,
    /// Regression response, or the +/-1 label for logistic data.
    pub response: f64,
}

/// Draw `count` independent targets with i.i.d. `N(0, scale^2)` entries.
pub fn gaussian_targets<R: Rng + ?Sized>(
    dimension: usize,
    count: usize,
    scale: f64,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| DVector::from_fn(dimension, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Environment flavor plus its statistics.
#[derive(Debug, Clone)]
pub enum EnvKind {
    LinearRegression {
        regressor_cov: Covariance,
        noise_variance: f64,
    },
    Logistic {
        feature_cov: Covariance,
        ridge: f64,
    },
}

/// A drifting data-generating process for `agents` agents.
///
/// `targets` holds either one shared optimum (all agents observe data from
/// the same model) or one optimum per agent. Targets mutate only through
/// [`Environment::drift_step`].
#[derive(Debug, Clone)]
pub struct Environment {
    kind: EnvKind,
    targets: Vec<DVector<f64>>,
    drift: DriftSpec,
    agents: usize,
}

impl Environment {
    pub fn new(
        kind: EnvKind,
        targets: Vec<DVector<f64>>,
        drift: DriftSpec,
        agents: usize,
    ) -> Result<Self> {
        let dim = match &kind {
            EnvKind::LinearRegression { regressor_cov, .. } => {
                regressor_cov.validate()?;
                regressor_cov.dimension()
            }
            EnvKind::Logistic { feature_cov, ridge } => {
                feature_cov.validate()?;
                if *ridge <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "logistic ridge weight must be positive, got {ridge}"
                    )));
                }
                feature_cov.dimension()
            }
        };
        if let EnvKind::LinearRegression { noise_variance, .. } = &kind {
            if *noise_variance < 0.0 {
                return Err(Error::NegativeVariance(*noise_variance));
            }
        }
        if targets.is_empty() || (targets.len() != 1 && targets.len() != agents) {
            return Err(Error::InvalidParameter(format!(
                "need 1 shared target or one per agent ({agents}), got {}",
                targets.len()
            )));
        }
        for t in &targets {
            if t.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.len(),
                });
            }
        }
        if drift.dimension() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: drift.dimension(),
            });
        }
        Ok(Self {
            kind,
            targets,
            drift,
            agents,
        })
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.targets[0].len()
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn targets(&self) -> &[DVector<f64>] {
        &self.targets
    }

    /// Current optimum observed by agent `k`.
    pub fn target_for(&self, k: usize) -> &DVector<f64> {
        if self.targets.len() == 1 {
            &self.targets[0]
        } else {
            &self.targets[k]
        }
    }

    /// Advance every optimum by one random-walk step.
    pub fn drift_step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.drift.advance(&mut self.targets, rng);
    }

    /// Draw one observation for agent `k` from the current optimum.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> DataSample {
        let target = self.target_for(k);
        match &self.kind {
            EnvKind::LinearRegression {
                regressor_cov,
                noise_variance,
            } => {
                let u = regressor_cov.draw(rng);
                let v = noise_variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
                let d = u.dot(target) + v;
                DataSample {
                    features: u,
                    response: d,
                }
            }
            EnvKind::Logistic { feature_cov, .. } => {
                let h = feature_cov.draw(rng);
                let p_plus = 1.0 / (1.0 + (-h.dot(target)).exp());
                let label = if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 };
                DataSample {
                    features: h,
                    response: label,
                }
            }
        }
    }

    /// One observation per agent, drawn in agent order.
    pub fn sample_all<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<DataSample> {
        (0..self.agents).map(|k| self.sample(k, rng)).collect()
    }

    /// Second moment of the per-step increment of the stacked reference
    /// vector (one copy per agent; a shared target moves under every agent
    /// at once, so both sharing modes scale with the agent count).
    pub fn stacked_drift_moment(&self) -> f64 {
        self.drift.stacked_second_moment_bound(self.agents)
    }
}
