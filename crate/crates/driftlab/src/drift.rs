//! Random-walk drift of the optimal parameter.
//!
//! The tracked parameter moves once per iteration by a Gaussian increment
//! `q ~ N(mean, sigma_q^2 I)`. The analysis layer only consumes the second
//! moment of the increment, `xi^2 = E||q||^2 = ||mean||^2 + M sigma_q^2`,
//! so the drift law is summarized by that bound plus a mode flag saying
//! whether all tracked parameters in a network share one draw per step or
//! each draws independently.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Whether the per-step increment is shared by all fixed points or drawn
/// independently for each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    Common,
    Independent,
}

/// Increment law of the random walk followed by the optimal parameter(s).
#[derive(Debug, Clone)]
pub struct DriftSpec {
    mean: DVector<f64>,
    variance: f64,
    mode: DriftMode,
}

impl DriftSpec {
    pub fn new(mean: DVector<f64>, variance: f64, mode: DriftMode) -> Result<Self> {
        if variance < 0.0 {
            return Err(Error::NegativeVariance(variance));
        }
        Ok(Self {
            mean,
            variance,
            mode,
        })
    }

    /// Stationary case: no motion at all.
    pub fn none(dimension: usize) -> Self {
        Self {
            mean: DVector::zeros(dimension),
            variance: 0.0,
            mode: DriftMode::Common,
        }
    }

    /// Zero-mean isotropic increments.
    pub fn zero_mean(dimension: usize, variance: f64, mode: DriftMode) -> Result<Self> {
        Self::new(DVector::zeros(dimension), variance, mode)
    }

    /// Constant-bias increments `N(bias * 1, variance I)`.
    pub fn biased(dimension: usize, bias: f64, variance: f64, mode: DriftMode) -> Result<Self> {
        Self::new(
            DVector::from_element(dimension, bias),
            variance,
            mode,
        )
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn mode(&self) -> DriftMode {
        self.mode
    }

    pub fn is_zero_mean(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0)
    }

    pub fn is_static(&self) -> bool {
        self.variance == 0.0 && self.is_zero_mean()
    }

    /// Second moment of a single increment:
    /// `E||q||^2 = ||mean||^2 + M sigma_q^2`.
    ///
    /// Exact for Gaussian increments with isotropic covariance.
    pub fn second_moment_bound(&self) -> f64 {
        self.mean.norm_squared() + self.dimension() as f64 * self.variance
    }

    /// Second moment of the concatenation of the increments received by `k`
    /// fixed points in one step. Both modes give `k` times the single-point
    /// moment: independent mode sums k i.i.d. draws, common mode repeats one
    /// draw k times.
    pub fn stacked_second_moment_bound(&self, k: usize) -> f64 {
        k as f64 * self.second_moment_bound()
    }

    /// Draw one increment.
    pub fn draw_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let sd = self.variance.sqrt();
        DVector::from_iterator(
            self.dimension(),
            self.mean
                .iter()
                .map(|&m| m + sd * rng.sample::<f64, _>(StandardNormal)),
        )
    }

    /// Advance a set of fixed points by one drift step, honoring the mode.
    pub fn advance<R: Rng + ?Sized>(&self, targets: &mut [DVector<f64>], rng: &mut R) {
        if self.is_static() {
            return;
        }
        match self.mode {
            DriftMode::Common => {
                let q = self.draw_increment(rng);
                for t in targets.iter_mut() {
                    *t += &q;
                }
            }
            DriftMode::Independent => {
                for t in targets.iter_mut() {
                    *t += self.draw_increment(rng);
                }
            }
        }
    }
}
