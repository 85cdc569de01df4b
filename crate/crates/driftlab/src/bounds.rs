//! Mean-square contraction certificates and tracking bounds.
//!
//! A stochastic update is summarized by a certificate `(Gamma, Delta)`:
//! per step, the expected squared deviation from the (possibly moving)
//! fixed point contracts by at least `Gamma < 1` up to an additive driving
//! term `Delta`. Under random-walk drift with increment second moment
//! `xi^2`, the steady-state deviation obeys
//!
//! ```text
//! biased drift:    xi^2 / (1 - sqrt(Gamma))^2 + Delta / (1 - sqrt(Gamma))
//! zero-mean drift: (xi^2 + Delta) / (1 - Gamma)
//! ```
//!
//! and the transient follows the matching scalar recursions. Certificates
//! for the concrete learners:
//!
//! * LMS with Gaussian regressors: exact `gamma = ||I - 2 mu R + mu^2 E[uu'uu']||`
//!   with the Isserlis fourth moment `E[uu'uu'] = R tr(R) + 2 R^2`, and
//!   `delta = mu^2 tr(R) sigma_v^2`; a small-step surrogate
//!   `1 - 2 mu lambda_min(R)` is reported alongside.
//! * Diffusion over a network: `Gamma = 1 - 2 mu nu + mu^2 dlip^2 (1 + 4 alpha^2)`,
//!   `Delta = mu^2 N sigma_s^2 + mu^2 c1 alpha^2 N D^2`, with a fixed-point
//!   bias of `mu^2 c2 N D^2 / (1 - lambda2)` relative to the Perron-weighted
//!   objective's minimizer.
//! * Multitask diffusion: `Gamma = 1 - 2 mu nu + mu^2 (dlip^2 + 3 beta^2)`,
//!   `Delta = mu^2 N sigma_s^2 + 3 mu^2 c1 beta^2 N D^2`, with bias
//!   `mu^2 (c2 eta^2 / (1 + c2 eta^2))^2`.
//!
//! The constants `c1`, `c2` are problem-independent but not pinned by the
//! analysis; they default to 1 and everything downstream asserts scaling
//! laws in `mu`, never absolute levels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Which derivation produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateSource {
    Lms,
    Diffusion,
    Multitask,
    Manual,
}

impl CertificateSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateSource::Lms => "lms",
            CertificateSource::Diffusion => "diffusion",
            CertificateSource::Multitask => "multitask",
            CertificateSource::Manual => "manual",
        }
    }
}

/// A `(Gamma, Delta)` pair with provenance. `0 <= Gamma < 1`, `Delta >= 0`
/// enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCertificate {
    gamma: f64,
    delta: f64,
    source: CertificateSource,
}

impl ContractionCertificate {
    pub fn new(gamma: f64, delta: f64, source: CertificateSource) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::NotContractive { gamma });
        }
        if delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "driving term must be nonnegative, got {delta}"
            )));
        }
        Ok(Self {
            gamma,
            delta,
            source,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn source(&self) -> CertificateSource {
        self.source
    }
}

/// Steady-state deviation bound for a certified mapping under drift of
/// second moment `xi2`. Transient terms omitted.
pub fn steady_state_bound(cert: &ContractionCertificate, xi2: f64, zero_mean: bool) -> f64 {
    let gamma = cert.gamma();
    if zero_mean {
        (xi2 + cert.delta()) / (1.0 - gamma)
    } else {
        let gap = 1.0 - gamma.sqrt();
        xi2 / (gap * gap) + cert.delta() / gap
    }
}

/// Deviation bound after `iterations` steps, starting from `initial_msd`.
///
/// Iterates `b <- sqrt(Gamma) b + xi2/(1 - sqrt(Gamma)) + Delta` (biased) or
/// `b <- Gamma b + xi2 + Delta` (zero-mean); converges to
/// [`steady_state_bound`] as the iteration count grows.
pub fn transient_bound(
    cert: &ContractionCertificate,
    xi2: f64,
    zero_mean: bool,
    initial_msd: f64,
    iterations: u64,
) -> f64 {
    let (rate, inject) = if zero_mean {
        (cert.gamma(), xi2 + cert.delta())
    } else {
        let root = cert.gamma().sqrt();
        (root, xi2 / (1.0 - root) + cert.delta())
    };
    let mut b = initial_msd;
    for _ in 0..iterations {
        let next = rate * b + inject;
        if next == b {
            break;
        }
        b = next;
    }
    b
}

fn check_symmetric(r: &DMatrix<f64>) -> Result<()> {
    let n = r.nrows();
    if n != r.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.ncols(),
        });
    }
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((r[(i, j)] - r[(j, i)]).abs());
        }
    }
    if worst > 1e-10 {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

fn symmetric_extreme_eigs(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Spectral norm of a symmetric matrix.
fn symmetric_spectral_norm(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = symmetric_extreme_eigs(m);
    lo.abs().max(hi.abs())
}

/// Fourth moment `E[u u' u u']` of `u ~ N(0, R)`: `R tr(R) + 2 R^2`
/// (Isserlis identity for real zero-mean Gaussian vectors).
pub fn gaussian_fourth_moment(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(r)?;
    Ok(r * r.trace() + (r * r) * 2.0)
}

/// LMS certificate: the exact spectral-norm contraction rate together with
/// its small-step surrogate.
#[derive(Debug, Clone, Copy)]
pub struct LmsCertificate {
    certificate: ContractionCertificate,
    small_mu_gamma: f64,
}

impl LmsCertificate {
    pub fn certificate(&self) -> &ContractionCertificate {
        &self.certificate
    }

    pub fn gamma(&self) -> f64 {
        self.certificate.gamma()
    }

    pub fn delta(&self) -> f64 {
        self.certificate.delta()
    }

    /// First-order surrogate `1 - 2 mu lambda_min(R)`.
    pub fn small_mu_gamma(&self) -> f64 {
        self.small_mu_gamma
    }
}

/// Raw LMS contraction quantities without the stability check; `gamma` may
/// reach or exceed 1 (for instance at `mu = 0`, where no adaptation occurs).
pub fn lms_gamma_delta(r: &DMatrix<f64>, sigma_v2: f64, mu: f64) -> Result<(f64, f64)> {
    check_symmetric(r)?;
    let fourth = gaussian_fourth_moment(r)?;
    let n = r.nrows();
    let map = DMatrix::identity(n, n) - r * (2.0 * mu) + fourth * (mu * mu);
    let gamma = symmetric_spectral_norm(&map);
    let delta = mu * mu * r.trace() * sigma_v2;
    Ok((gamma, delta))
}

/// Certified LMS contraction for Gaussian regressors with covariance `r` and
/// measurement-noise variance `sigma_v2`. Fails when the exact rate is not
/// below 1, i.e. the step-size is outside the stability range.
pub fn lms_certificate(r: &DMatrix<f64>, sigma_v2: f64, mu: f64) -> Result<LmsCertificate> {
    let (gamma, delta) = lms_gamma_delta(r, sigma_v2, mu)?;
    let certificate = ContractionCertificate::new(gamma, delta, CertificateSource::Lms)?;
    let (lambda_min, _) = symmetric_extreme_eigs(r);
    Ok(LmsCertificate {
        certificate,
        small_mu_gamma: 1.0 - 2.0 * mu * lambda_min,
    })
}

/// Leading-order LMS tracking deviation.
///
/// Zero-mean drift: `mu^-1 xi2 / (2 lambda_min) + mu tr(R) sigma_v^2 / (2 lambda_min)`;
/// biased drift: `mu^-2 xi2 / lambda_min^2 + mu tr(R) sigma_v^2 / lambda_min`.
pub fn lms_tracking_msd(
    r: &DMatrix<f64>,
    sigma_v2: f64,
    mu: f64,
    xi2: f64,
    zero_mean: bool,
) -> Result<f64> {
    check_symmetric(r)?;
    let (lambda_min, _) = symmetric_extreme_eigs(r);
    let trace = r.trace();
    Ok(if zero_mean {
        xi2 / (mu * 2.0 * lambda_min) + mu * trace * sigma_v2 / (2.0 * lambda_min)
    } else {
        xi2 / (mu * mu * lambda_min * lambda_min) + mu * trace * sigma_v2 / lambda_min
    })
}

/// Global problem constants entering the network certificates.
///
/// `nu` and `hessian_max` bound the local Hessians (`nu I <= H <= hessian_max I`);
/// `alpha2`, `beta2`, `sigma_s2` describe the gradient noise; `d2` bounds the
/// squared distance between local minimizers; `agents` is the network size.
/// `c1`, `c2` are the unpinned problem-independent constants, default 1.
#[derive(Debug, Clone, Copy)]
pub struct ProblemConstants {
    pub nu: f64,
    pub hessian_max: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub sigma_s2: f64,
    pub d2: f64,
    pub agents: usize,
    pub c1: f64,
    pub c2: f64,
}

impl ProblemConstants {
    pub fn new(nu: f64, hessian_max: f64, agents: usize) -> Result<Self> {
        if !(nu > 0.0 && nu <= hessian_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < nu <= hessian_max, got nu={nu}, hessian_max={hessian_max}"
            )));
        }
        Ok(Self {
            nu,
            hessian_max,
            alpha2: 0.0,
            beta2: 0.0,
            sigma_s2: 0.0,
            d2: 0.0,
            agents,
            c1: 1.0,
            c2: 1.0,
        })
    }

    pub fn with_gradient_noise(mut self, alpha2: f64, beta2: f64, sigma_s2: f64) -> Self {
        self.alpha2 = alpha2;
        self.beta2 = beta2;
        self.sigma_s2 = sigma_s2;
        self
    }

    pub fn with_disagreement(mut self, d2: f64) -> Self {
        self.d2 = d2;
        self
    }

    pub fn with_constants(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    /// Validate the noise parameters are nonnegative.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha2", self.alpha2),
            ("beta2", self.beta2),
            ("sigma_s2", self.sigma_s2),
            ("d2", self.d2),
            ("c1", self.c1),
            ("c2", self.c2),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Maximum pairwise squared distance between local minimizers.
pub fn disagreement_bound(targets: &[DVector<f64>]) -> f64 {
    let mut d2 = 0.0_f64;
    for i in 0..targets.len() {
        for j in (i + 1)..targets.len() {
            d2 = d2.max((&targets[i] - &targets[j]).norm_squared());
        }
    }
    d2
}

/// A network certificate together with the squared bias of the mapping's
/// fixed point relative to the network objective's minimizer.
#[derive(Debug, Clone, Copy)]
pub struct NetworkCertificate {
    certificate: ContractionCertificate,
    bias_bound: f64,
}

impl NetworkCertificate {
    pub fn certificate(&self) -> &ContractionCertificate {
        &self.certificate
    }

    pub fn gamma(&self) -> f64 {
        self.certificate.gamma()
    }

    pub fn delta(&self) -> f64 {
        self.certificate.delta()
    }

    pub fn bias_bound(&self) -> f64 {
        self.bias_bound
    }
}

/// Raw diffusion contraction quantities without the stability check.
pub fn diffusion_gamma_delta(pc: &ProblemConstants, mu: f64) -> (f64, f64) {
    let n = pc.agents as f64;
    let gamma =
        1.0 - 2.0 * mu * pc.nu + mu * mu * pc.hessian_max * pc.hessian_max * (1.0 + 4.0 * pc.alpha2);
    let delta = mu * mu * n * pc.sigma_s2 + mu * mu * pc.c1 * pc.alpha2 * n * pc.d2;
    (gamma, delta)
}

/// Diffusion certificate; `lambda2` is the combination matrix's mixing rate,
/// needed for the fixed-point bias term.
pub fn diffusion_certificate(
    pc: &ProblemConstants,
    mu: f64,
    lambda2: f64,
) -> Result<NetworkCertificate> {
    pc.validate()?;
    let (gamma, delta) = diffusion_gamma_delta(pc, mu);
    let certificate = ContractionCertificate::new(gamma, delta, CertificateSource::Diffusion)?;
    let bias_bound = mu * mu * pc.c2 * pc.agents as f64 * pc.d2 / (1.0 - lambda2);
    Ok(NetworkCertificate {
        certificate,
        bias_bound,
    })
}

/// Per-agent steady-state tracking deviation of diffusion.
pub fn diffusion_tracking_msd(
    pc: &ProblemConstants,
    mu: f64,
    xi2: f64,
    lambda2: f64,
    zero_mean: bool,
) -> f64 {
    let nu = pc.nu;
    let noise = pc.sigma_s2 + pc.c1 * pc.alpha2 * pc.d2;
    let bias = mu * mu * 2.0 * pc.c2 * pc.d2 / (1.0 - lambda2);
    if zero_mean {
        xi2 / (mu * nu) + mu * noise / nu + bias
    } else {
        2.0 * xi2 / (mu * mu * nu * nu) + 2.0 * mu * noise / (nu * nu) + bias
    }
}

/// Raw multitask contraction quantities without the stability check.
pub fn multitask_gamma_delta(pc: &ProblemConstants, mu: f64) -> (f64, f64) {
    let n = pc.agents as f64;
    let gamma =
        1.0 - 2.0 * mu * pc.nu + mu * mu * (pc.hessian_max * pc.hessian_max + 3.0 * pc.beta2);
    let delta = mu * mu * n * pc.sigma_s2 + 3.0 * mu * mu * pc.c1 * pc.beta2 * n * pc.d2;
    (gamma, delta)
}

/// Multitask certificate; the coupling-induced bias carries the unresolved
/// `O(eta^2)` factor instantiated as `c2 eta^2`.
pub fn multitask_certificate(
    pc: &ProblemConstants,
    mu: f64,
    eta: f64,
) -> Result<NetworkCertificate> {
    pc.validate()?;
    let (gamma, delta) = multitask_gamma_delta(pc, mu);
    let certificate = ContractionCertificate::new(gamma, delta, CertificateSource::Multitask)?;
    let coupling = pc.c2 * eta * eta;
    let ratio = coupling / (1.0 + coupling);
    let bias_bound = mu * mu * ratio * ratio;
    Ok(NetworkCertificate {
        certificate,
        bias_bound,
    })
}

/// Per-agent steady-state tracking deviation of multitask diffusion; the
/// `O(mu^2)` remainder is instantiated as `c2 mu^2`.
pub fn multitask_tracking_msd(
    pc: &ProblemConstants,
    mu: f64,
    xi2: f64,
    zero_mean: bool,
) -> f64 {
    let nu = pc.nu;
    let remainder = pc.c2 * mu * mu;
    if zero_mean {
        xi2 / (mu * nu) + mu * (pc.sigma_s2 + 3.0 * pc.c1 * pc.beta2 * pc.d2) / nu + remainder
    } else {
        2.0 * xi2 / (mu * mu * nu * nu)
            + mu * (2.0 * pc.sigma_s2 + 6.0 * pc.c1 * pc.beta2 * pc.d2) / (nu * nu)
            + remainder
    }
}

/// One row of a bound report.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub algorithm: String,
    pub mu: f64,
    pub eta: f64,
    pub xi2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub bound_zero_mean: f64,
    pub bound_biased: f64,
}

impl BoundRow {
    pub const CSV_HEADER: &'static str =
        "algorithm,mu,eta,xi2,gamma,delta,bound_zm,bound_biased";

    pub fn from_certificate(
        algorithm: &str,
        cert: &ContractionCertificate,
        mu: f64,
        eta: f64,
        xi2: f64,
    ) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            mu,
            eta,
            xi2,
            gamma: cert.gamma(),
            delta: cert.delta(),
            bound_zero_mean: steady_state_bound(cert, xi2, true),
            bound_biased: steady_state_bound(cert, xi2, false),
        }
    }

    pub fn to_csv(&self) -> String {
        use crate::harness::g17;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.algorithm,
            g17(self.mu),
            g17(self.eta),
            g17(self.xi2),
            g17(self.gamma),
            g17(self.delta),
            g17(self.bound_zero_mean),
            g17(self.bound_biased),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn manual(gamma: f64, delta: f64) -> ContractionCertificate {
        ContractionCertificate::new(gamma, delta, CertificateSource::Manual).unwrap()
    }

    #[test]
    fn steady_state_hand_computed_values() {
        // biased: 0.1/(1-0.5)^2 + 0.05/(1-0.5) = 0.4 + 0.1 = 0.5
        let b = steady_state_bound(&manual(0.25, 0.05), 0.1, false);
        assert!((b - 0.5).abs() < 1e-15);
        // zero-mean: (0.1 + 0.05) / 0.5 = 0.3
        let z = steady_state_bound(&manual(0.5, 0.05), 0.1, true);
        assert!((z - 0.3).abs() < 1e-15);
        // stationary noiseless
        assert_eq!(steady_state_bound(&manual(0.7, 0.0), 0.0, true), 0.0);
        assert_eq!(steady_state_bound(&manual(0.7, 0.0), 0.0, false), 0.0);
    }

    #[test]
    fn certificate_rejects_gamma_at_or_above_one() {
        assert!(ContractionCertificate::new(1.0, 0.0, CertificateSource::Manual).is_err());
        assert!(ContractionCertificate::new(1.5, 0.0, CertificateSource::Manual).is_err());
        assert!(ContractionCertificate::new(-0.1, 0.0, CertificateSource::Manual).is_err());
    }

    #[test]
    fn transient_base_case_and_geometric_decay() {
        let cert = manual(0.36, 0.0);
        assert_eq!(transient_bound(&cert, 0.0, true, 2.5, 0), 2.5);
        // zero-mean, no injection: Gamma^i * initial
        let b = transient_bound(&cert, 0.0, true, 2.5, 5);
        assert!((b - 2.5 * 0.36_f64.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn transient_converges_to_steady_state() {
        let cert = manual(0.9, 0.02);
        for zero_mean in [true, false] {
            let limit = steady_state_bound(&cert, 0.3, zero_mean);
            let b = transient_bound(&cert, 0.3, zero_mean, 7.0, 10_000);
            assert!(
                (b - limit).abs() < 1e-9,
                "zero_mean={zero_mean}: {b} vs {limit}"
            );
        }
    }

    proptest! {
        #[test]
        fn zero_mean_bound_never_exceeds_biased(
            gamma in 0.0..0.999f64,
            delta in 0.0..10.0f64,
            xi2 in 0.0..10.0f64,
        ) {
            let cert = manual(gamma, delta);
            prop_assert!(
                steady_state_bound(&cert, xi2, true)
                    <= steady_state_bound(&cert, xi2, false) + 1e-12
            );
        }

        #[test]
        fn transient_is_monotone_in_inputs(
            gamma in 0.0..0.99f64,
            delta in 0.0..1.0f64,
            xi2 in 0.0..1.0f64,
            b0 in 0.0..10.0f64,
            zero_mean in proptest::bool::ANY,
        ) {
            let base = transient_bound(&manual(gamma, delta), xi2, zero_mean, b0, 50);
            let more_b0 = transient_bound(&manual(gamma, delta), xi2, zero_mean, b0 + 1.0, 50);
            let more_xi = transient_bound(&manual(gamma, delta), xi2 + 1.0, zero_mean, b0, 50);
            let more_delta = transient_bound(&manual(gamma, delta + 1.0), xi2, zero_mean, b0, 50);
            prop_assert!(more_b0 >= base);
            prop_assert!(more_xi >= base);
            prop_assert!(more_delta >= base);
        }
    }

    #[test]
    fn fourth_moment_identity_covariance() {
        let m = 3;
        let f = gaussian_fourth_moment(&DMatrix::identity(m, m)).unwrap();
        let expect = DMatrix::identity(m, m) * (m as f64 + 2.0);
        assert!((f - expect).norm() < 1e-14);
    }

    #[test]
    fn fourth_moment_scalar_case() {
        let sigma2 = 1.7;
        let f = gaussian_fourth_moment(&DMatrix::from_element(1, 1, sigma2)).unwrap();
        assert!((f[(0, 0)] - 3.0 * sigma2 * sigma2).abs() < 1e-12);
    }

    #[test]
    fn fourth_moment_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(gaussian_fourth_moment(&m).is_err());
    }

    // Monte Carlo oracle for the Isserlis identity on a well-correlated SPD
    // matrix (entries kept away from zero so the entrywise tolerance is
    // meaningful).
    #[test]
    fn fourth_moment_matches_monte_carlo() {
        let m = 4;
        let mut r = DMatrix::from_element(m, m, 0.5);
        for i in 0..m {
            r[(i, i)] = 1.0 + 0.1 * i as f64;
        }
        let exact = gaussian_fourth_moment(&r).unwrap();
        let chol = r.clone().cholesky().expect("SPD").l();
        let mut rng = stream_rng(42, 0, 0);
        let n = 1_000_000;
        let mut acc = DMatrix::zeros(m, m);
        for _ in 0..n {
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let u = &chol * z;
            let norm2 = u.norm_squared();
            for i in 0..m {
                for j in 0..m {
                    acc[(i, j)] += u[i] * u[j] * norm2;
                }
            }
        }
        acc /= n as f64;
        for i in 0..m {
            for j in 0..m {
                let rel = (acc[(i, j)] - exact[(i, j)]).abs() / exact[(i, j)].abs();
                assert!(
                    rel < 0.02,
                    "entry ({i},{j}): mc {} vs exact {} (rel {rel})",
                    acc[(i, j)],
                    exact[(i, j)]
                );
            }
        }
    }

    #[test]
    fn lms_certificate_white_input_example() {
        // R = I_2, mu = 0.01: gamma = 1 - 0.02 + 0.0001 * 4 = 0.9804
        let r = DMatrix::identity(2, 2);
        let cert = lms_certificate(&r, 1.0, 0.01).unwrap();
        assert!((cert.gamma() - 0.9804).abs() < 1e-12);
        assert!((cert.delta() - 0.0002).abs() < 1e-15);
        assert!((cert.small_mu_gamma() - 0.98).abs() < 1e-15);
    }

    #[test]
    fn lms_zero_step_is_not_contractive() {
        let r = DMatrix::identity(3, 3);
        let (gamma, delta) = lms_gamma_delta(&r, 1.0, 0.0).unwrap();
        assert_eq!(gamma, 1.0);
        assert_eq!(delta, 0.0);
        assert!(lms_certificate(&r, 1.0, 0.0).is_err());
    }

    #[test]
    fn lms_exact_gamma_close_to_surrogate_for_small_mu() {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.6, 0.3]));
        for mu in [1e-3, 1e-2] {
            let cert = lms_certificate(&r, 0.5, mu).unwrap();
            let slack = cert.gamma() - cert.small_mu_gamma();
            assert!(slack >= 0.0, "exact gamma below surrogate at mu={mu}");
            // the gap is the second-order term, O(mu^2)
            assert!(slack < 20.0 * mu * mu, "slack {slack} too large at mu={mu}");
        }
    }

    #[test]
    fn lms_tracking_stationary_white_input() {
        // xi2 = 0, zero-mean, R = I_M: mu M sigma_v^2 / 2
        let m = 4;
        let r = DMatrix::identity(m, m);
        let v = lms_tracking_msd(&r, 0.3, 0.01, 0.0, true).unwrap();
        assert!((v - 0.01 * m as f64 * 0.3 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn lms_tracking_power_laws() {
        let r = DMatrix::identity(3, 3);
        // doubling mu with sigma_v^2 = 0 halves the zero-mean value
        let a = lms_tracking_msd(&r, 0.0, 0.01, 0.5, true).unwrap();
        let b = lms_tracking_msd(&r, 0.0, 0.02, 0.5, true).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        // biased: mu/10 multiplies the value by 100
        let c = lms_tracking_msd(&r, 0.0, 0.01, 0.5, false).unwrap();
        let d = lms_tracking_msd(&r, 0.0, 0.001, 0.5, false).unwrap();
        assert!((d / c - 100.0).abs() < 1e-9);
    }

    #[test]
    fn diffusion_certificate_hand_example() {
        // nu=1, dlip=2, alpha2=0, mu=0.1, sigma_s2=0, d2=0: Gamma=0.84, Delta=0
        let pc = ProblemConstants::new(1.0, 2.0, 5).unwrap();
        let cert = diffusion_certificate(&pc, 0.1, 0.5).unwrap();
        assert!((cert.gamma() - 0.84).abs() < 1e-15);
        assert_eq!(cert.delta(), 0.0);
        assert_eq!(cert.bias_bound(), 0.0);
    }

    #[test]
    fn diffusion_gamma_minimizer_matches_vertex() {
        let pc = ProblemConstants::new(0.8, 1.5, 4)
            .unwrap()
            .with_gradient_noise(0.3, 0.0, 0.1);
        let vertex = pc.nu / (pc.hessian_max * pc.hessian_max * (1.0 + 4.0 * pc.alpha2));
        // numeric minimization over a fine grid
        let mut best = (f64::INFINITY, 0.0);
        let mut mu = 1e-4;
        while mu < 0.5 {
            if let Ok(cert) = diffusion_certificate(&pc, mu, 0.5) {
                if cert.gamma() < best.0 {
                    best = (cert.gamma(), mu);
                }
            }
            mu *= 1.001;
        }
        assert!(
            (best.1 - vertex).abs() / vertex < 2e-3,
            "grid minimizer {} vs vertex {vertex}",
            best.1
        );
    }

    #[test]
    fn diffusion_certificate_rejects_large_mu() {
        let pc = ProblemConstants::new(1.0, 2.0, 5).unwrap();
        assert!(diffusion_certificate(&pc, 1.0, 0.5).is_err());
    }

    #[test]
    fn diffusion_tracking_exact_gradients_has_only_power_terms() {
        // alpha2 = sigma_s2 = 0, biased: O(mu^-2) + O(mu^2) only
        let pc = ProblemConstants::new(1.0, 2.0, 5).unwrap().with_disagreement(0.7);
        let lambda2 = 0.4;
        let mu = 0.05;
        let v = diffusion_tracking_msd(&pc, mu, 0.2, lambda2, false);
        let expect = 2.0 * 0.2 / (mu * mu) + mu * mu * 2.0 * 0.7 / 0.6;
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn diffusion_tracking_zero_mean_no_disagreement() {
        let pc = ProblemConstants::new(2.0, 3.0, 5)
            .unwrap()
            .with_gradient_noise(0.0, 0.0, 0.9);
        let v = diffusion_tracking_msd(&pc, 0.01, 0.04, 0.3, true);
        let expect = 0.04 / (0.01 * 2.0) + 0.01 * 0.9 / 2.0;
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn multitask_certificate_hand_example() {
        // nu=1, dlip=2, beta2=1, mu=0.1, sigma_s2=1, N=20, d2=0:
        // Gamma = 1 - 0.2 + 0.01*(4+3) = 0.87, Delta = 0.01*20 = 0.2
        let pc = ProblemConstants::new(1.0, 2.0, 20)
            .unwrap()
            .with_gradient_noise(0.0, 1.0, 1.0);
        let cert = multitask_certificate(&pc, 0.1, 0.5).unwrap();
        assert!((cert.gamma() - 0.87).abs() < 1e-15);
        assert!((cert.delta() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn multitask_matches_diffusion_when_beta_zero() {
        let pc = ProblemConstants::new(1.0, 2.0, 6).unwrap();
        let m = multitask_certificate(&pc, 0.05, 1.0).unwrap();
        let d = diffusion_certificate(&pc, 0.05, 0.5).unwrap();
        assert_eq!(m.gamma(), d.gamma());
    }

    #[test]
    fn multitask_bias_vanishes_with_coupling() {
        let pc = ProblemConstants::new(1.0, 2.0, 6).unwrap();
        let small = multitask_certificate(&pc, 0.01, 1e-6).unwrap();
        assert!(small.bias_bound() < 1e-20);
        let zero = multitask_certificate(&pc, 0.01, 0.0).unwrap();
        assert_eq!(zero.bias_bound(), 0.0);
    }

    #[test]
    fn multitask_tracking_zero_drift_form() {
        let pc = ProblemConstants::new(1.0, 2.0, 8)
            .unwrap()
            .with_gradient_noise(0.0, 0.5, 0.3)
            .with_disagreement(0.2);
        let mu = 0.02;
        let v = multitask_tracking_msd(&pc, mu, 0.0, true);
        let expect = mu * (0.3 + 3.0 * 0.5 * 0.2) + mu * mu;
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn multitask_tracking_biased_power_law() {
        let pc = ProblemConstants::new(1.0, 2.0, 8).unwrap();
        let a = multitask_tracking_msd(&pc, 0.01, 0.5, false);
        let b = multitask_tracking_msd(&pc, 0.001, 0.5, false);
        // drift term dominates at these step-sizes
        assert!((b / a - 100.0).abs() < 0.2);
    }

    #[test]
    fn multitask_tracking_has_interior_minimum_under_drift() {
        let pc = ProblemConstants::new(1.0, 2.0, 8)
            .unwrap()
            .with_gradient_noise(0.0, 0.5, 1.0);
        let grid: Vec<f64> = (0..60).map(|i| 1e-4 * 10f64.powf(i as f64 / 20.0)).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&mu| multitask_tracking_msd(&pc, mu, 1e-4, true))
            .collect();
        let (argmin, _) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(argmin > 0 && argmin < grid.len() - 1, "minimum at edge");
    }

    #[test]
    fn certificates_degenerate_correctly_as_mu_vanishes() {
        let r = DMatrix::identity(3, 3);
        let pc = ProblemConstants::new(1.0, 2.0, 5)
            .unwrap()
            .with_gradient_noise(0.1, 0.1, 0.5)
            .with_disagreement(0.3);
        for mu in [1e-3, 1e-5, 1e-7] {
            let lms = lms_certificate(&r, 1.0, mu).unwrap();
            let diff = diffusion_certificate(&pc, mu, 0.5).unwrap();
            let multi = multitask_certificate(&pc, mu, 1.0).unwrap();
            for (gamma, delta) in [
                (lms.gamma(), lms.delta()),
                (diff.gamma(), diff.delta()),
                (multi.gamma(), multi.delta()),
            ] {
                assert!(gamma < 1.0 && 1.0 - gamma < 3.0 * mu);
                assert!(delta >= 0.0 && delta < 100.0 * mu * mu);
            }
        }
    }

    // The certificate route (steady_state_bound with Gamma, Delta) and the
    // closed-form tracking expressions must carry the same leading powers of
    // mu: their ratio stays bounded across three decades for each isolated
    // term.
    #[test]
    fn certificate_and_tracking_routes_share_leading_orders() {
        let n = 5;
        let drift_pc = ProblemConstants::new(1.0, 2.0, n).unwrap();
        let noise_pc = ProblemConstants::new(1.0, 2.0, n)
            .unwrap()
            .with_gradient_noise(0.0, 0.0, 0.8);
        let cases: [(&ProblemConstants, f64, bool); 3] = [
            (&drift_pc, 0.01, true),  // drift term, zero-mean: mu^-1
            (&drift_pc, 0.01, false), // drift term, biased: mu^-2
            (&noise_pc, 0.0, true),   // noise term: mu^+1
        ];
        for (pc, xi2, zero_mean) in cases {
            let mut ratios = Vec::new();
            let mut mu = 1e-4;
            while mu <= 0.1000001 {
                let cert = diffusion_certificate(pc, mu, 0.5).unwrap();
                let via_certificate =
                    steady_state_bound(cert.certificate(), xi2, zero_mean) / n as f64;
                let closed_form = diffusion_tracking_msd(pc, mu, xi2, 0.5, zero_mean);
                ratios.push(via_certificate / closed_form);
                mu *= 10.0;
            }
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0_f64, f64::max);
            assert!(
                hi / lo < 3.0,
                "ratio drift {lo}..{hi} signals mismatched mu-orders"
            );
        }
    }

    #[test]
    fn bound_row_csv_shape() {
        let cert = manual(0.9, 0.01);
        let row = BoundRow::from_certificate("lms", &cert, 0.01, 0.0, 0.001, );
        let line = row.to_csv();
        assert_eq!(line.split(',').count(), 8);
        assert!(line.starts_with("lms,"));
        assert_eq!(
            BoundRow::CSV_HEADER.split(',').count(),
            line.split(',').count()
        );
    }
}
