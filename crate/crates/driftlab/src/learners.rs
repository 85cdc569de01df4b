//! One-step update rules.
//!
//! All learners are pure functions of (iterates, samples): LMS and
//! single-agent stochastic gradient for one agent, and two-phase
//! adapt-then-combine rounds for networks. Rounds are synchronous -- every
//! agent adapts from its pre-combination iterate, then every agent convexly
//! combines its neighbors' intermediates.
//!
//! Sign convention: the LMS update moves *down* the instantaneous quadratic,
//! `w + mu * u * (d - u'w)`, which is the stochastic gradient descent step for
//! the per-sample cost `0.5 (d - u'w)^2`.

use nalgebra::{DMatrix, DVector};

use crate::env::DataSample;

/// Per-sample loss/gradient pair for the supported cost families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientModel {
    /// `Q(w; u, d) = 0.5 (d - u'w)^2`
    LeastSquares,
    /// `Q(w; h, y) = ln(1 + exp(-y h'w)) + ridge ||w||^2`, labels y in {-1,+1}
    Logistic { ridge: f64 },
}

impl GradientModel {
    pub fn loss(&self, w: &DVector<f64>, sample: &DataSample) -> f64 {
        match self {
            GradientModel::LeastSquares => {
                let e = sample.response - sample.features.dot(w);
                0.5 * e * e
            }
            GradientModel::Logistic { ridge } => {
                let margin = sample.response * sample.features.dot(w);
                // ln(1 + exp(-m)) computed stably for large |m|
                let softplus = if margin > 0.0 {
                    (-margin).exp().ln_1p()
                } else {
                    -margin + margin.exp().ln_1p()
                };
                softplus + ridge * w.norm_squared()
            }
        }
    }

    pub fn gradient(&self, w: &DVector<f64>, sample: &DataSample) -> DVector<f64> {
        match self {
            GradientModel::LeastSquares => {
                let e = sample.response - sample.features.dot(w);
                &sample.features * (-e)
            }
            GradientModel::Logistic { ridge } => {
                let y = sample.response;
                let margin = y * sample.features.dot(w);
                // -y h / (1 + exp(margin)), stable sigmoid of -margin
                let weight = if margin > 0.0 {
                    let e = (-margin).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + margin.exp())
                };
                &sample.features * (-y * weight) + w * (2.0 * ridge)
            }
        }
    }
}

/// Least-mean-square update: `w + mu * u * (d - u'w)`.
///
/// Operations are ordered so the result is bit-identical to
/// [`sgd_step`] with [`GradientModel::LeastSquares`].
pub fn lms_step(w: &DVector<f64>, u: &DVector<f64>, d: f64, mu: f64) -> DVector<f64> {
    let innovation = d - u.dot(w);
    w + (u * innovation) * mu
}

/// Stochastic gradient step `w - mu * grad Q(w; sample)`.
pub fn sgd_step(
    w: &DVector<f64>,
    model: &GradientModel,
    sample: &DataSample,
    mu: f64,
) -> DVector<f64> {
    w - model.gradient(w, sample) * mu
}

/// One synchronous adapt-then-combine round.
///
/// `gradient(k, w)` evaluates agent k's (stochastic or exact) gradient at `w`.
/// `combination` is left-stochastic: the new iterate of agent k is
/// `sum_l combination[(l, k)] * phi_l`.
pub fn adapt_then_combine<F>(
    states: &[DVector<f64>],
    combination: &DMatrix<f64>,
    mu: f64,
    mut gradient: F,
) -> Vec<DVector<f64>>
where
    F: FnMut(usize, &DVector<f64>) -> DVector<f64>,
{
    let k = states.len();
    debug_assert_eq!(combination.nrows(), k);
    let intermediates: Vec<DVector<f64>> = states
        .iter()
        .enumerate()
        .map(|(agent, w)| w - gradient(agent, w) * mu)
        .collect();
    (0..k)
        .map(|agent| {
            let mut next = DVector::zeros(states[0].len());
            for (l, phi) in intermediates.iter().enumerate() {
                let weight = combination[(l, agent)];
                if weight != 0.0 {
                    next += phi * weight;
                }
            }
            next
        })
        .collect()
}

/// Diffusion round driven by per-agent samples.
pub fn diffusion_step(
    states: &[DVector<f64>],
    samples: &[DataSample],
    combination: &DMatrix<f64>,
    mu: f64,
    model: &GradientModel,
) -> Vec<DVector<f64>> {
    adapt_then_combine(states, combination, mu, |agent, w| {
        model.gradient(w, &samples[agent])
    })
}

/// Multitask round: identical two-phase structure, with the step-size
/// dependent weights from [`crate::graphs::multitask_weights`] in place of
/// the diffusion combination matrix.
pub fn multitask_step(
    states: &[DVector<f64>],
    samples: &[DataSample],
    weights: &DMatrix<f64>,
    mu: f64,
    model: &GradientModel,
) -> Vec<DVector<f64>> {
    diffusion_step(states, samples, weights, mu, model)
}
