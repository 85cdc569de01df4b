//! Monte Carlo experiment engine.
//!
//! A run simulates `replicas` independent copies of {drift step; sample;
//! learner step} for `iterations` rounds, records the per-agent-normalized
//! squared deviation from the current true parameter after every round, and
//! averages across replicas. Replica seeds are derived from the master seed
//! by index and results are reduced in index order, so output is bit-identical
//! for any worker count.
//!
//! Deviation is always measured against the drifting generating model; for
//! decentralized strategies this folds the small fixed-point bias of the
//! algorithm into the reported error.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bounds::{
    self, disagreement_bound, lms_certificate, steady_state_bound, ProblemConstants,
};
use crate::env::{EnvKind, Environment};
use crate::error::{Error, Result};
use crate::graphs::Network;
use crate::learners::{diffusion_step, lms_step, multitask_step, sgd_step, GradientModel};
use crate::rng::{self, stream};

/// Format a float with 17 significant digits (round-trip exact for f64).
pub fn g17(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

/// `10 log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Inverse of [`to_db`].
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Lms,
    Sgd,
    Diffusion,
    Multitask,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Lms => "lms",
            Algorithm::Sgd => "sgd",
            Algorithm::Diffusion => "diffusion",
            Algorithm::Multitask => "multitask",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lms" => Ok(Algorithm::Lms),
            "sgd" => Ok(Algorithm::Sgd),
            "diffusion" => Ok(Algorithm::Diffusion),
            "multitask" => Ok(Algorithm::Multitask),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm '{other}' (expected lms|sgd|diffusion|multitask)"
            ))),
        }
    }

    pub fn is_decentralized(&self) -> bool {
        matches!(self, Algorithm::Diffusion | Algorithm::Multitask)
    }
}

/// Iteration budget, either fixed or scaled inversely with the step-size
/// (slow learners need proportionally longer runs to pass their transient).
#[derive(Debug, Clone, Copy)]
pub enum IterationSchedule {
    Fixed(usize),
    InverseMu { coeff: f64, min: usize, max: usize },
}

impl IterationSchedule {
    pub fn iterations(&self, mu: f64) -> usize {
        match self {
            IterationSchedule::Fixed(t) => *t,
            IterationSchedule::InverseMu { coeff, min, max } => {
                ((coeff / mu).ceil() as usize).clamp(*min, *max)
            }
        }
    }
}

/// Everything one experiment needs. The environment holds the initial
/// optimum/optima; replicas clone it and evolve their own drift paths.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub environment: Environment,
    pub network: Network,
    pub mu: f64,
    pub eta: f64,
    pub schedule: IterationSchedule,
    pub replicas: usize,
    pub window_fraction: f64,
    pub master_seed: u64,
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "step-size must be positive, got {}",
                self.mu
            )));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("need at least one replica".into()));
        }
        if self.schedule.iterations(self.mu) == 0 {
            return Err(Error::InvalidParameter("need at least one iteration".into()));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "window fraction must lie in (0,1), got {}",
                self.window_fraction
            )));
        }
        if self.algorithm.is_decentralized() {
            if self.network.agents() != self.environment.agents() {
                return Err(Error::DimensionMismatch {
                    expected: self.environment.agents(),
                    got: self.network.agents(),
                });
            }
        } else if self.environment.agents() != 1 {
            return Err(Error::InvalidParameter(format!(
                "{} is a single-agent rule but the environment has {} agents",
                self.algorithm.as_str(),
                self.environment.agents()
            )));
        }
        if matches!(self.algorithm, Algorithm::Lms)
            && !matches!(self.environment.kind(), EnvKind::LinearRegression { .. })
        {
            return Err(Error::InvalidParameter(
                "lms requires a linear-regression environment".into(),
            ));
        }
        Ok(())
    }

    fn gradient_model(&self) -> GradientModel {
        match self.environment.kind() {
            EnvKind::LinearRegression { .. } => GradientModel::LeastSquares,
            EnvKind::Logistic { ridge, .. } => GradientModel::Logistic { ridge: *ridge },
        }
    }

    /// Stable fingerprint of the resolved configuration.
    pub fn fingerprint(&self) -> u64 {
        let env = match self.environment.kind() {
            EnvKind::LinearRegression {
                regressor_cov,
                noise_variance,
            } => format!(
                "linreg dim={} trace={} noise={}",
                self.environment.dimension(),
                regressor_cov.trace(),
                noise_variance
            ),
            EnvKind::Logistic { feature_cov, ridge } => format!(
                "logistic dim={} trace={} ridge={}",
                self.environment.dimension(),
                feature_cov.trace(),
                ridge
            ),
        };
        let drift = self.environment.drift();
        let topology = rng::fnv1a(
            crate::graphs::edge_list_string(self.network.adjacency()).as_bytes(),
        );
        let text = format!(
            "{} mu={} eta={} T={} R={} omega={} seed={} agents={} {} drift_mean={:?} drift_var={} mode={:?} topology={topology:016x}",
            self.algorithm.as_str(),
            self.mu,
            self.eta,
            self.schedule.iterations(self.mu),
            self.replicas,
            self.window_fraction,
            self.master_seed,
            self.environment.agents(),
            env,
            drift.mean().as_slice(),
            drift.variance(),
            drift.mode(),
        );
        rng::fnv1a(text.as_bytes())
    }
}

/// Monte-Carlo-averaged squared deviation per iteration.
#[derive(Debug, Clone)]
pub struct MsdTrajectory {
    values: Vec<f64>,
    config_hash: u64,
    seed: u64,
    diverged_replicas: usize,
    surviving_replicas: usize,
}

impl MsdTrajectory {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn diverged_replicas(&self) -> usize {
        self.diverged_replicas
    }

    pub fn surviving_replicas(&self) -> usize {
        self.surviving_replicas
    }

    /// CSV with header `iter,msd,msd_db`; `iter` counts completed rounds.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48 + 16);
        out.push_str("iter,msd,msd_db\n");
        for (i, &v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, g17(v), g17(to_db(v))));
        }
        out
    }
}

/// Steady-state extraction result.
#[derive(Debug, Clone, Copy)]
pub struct SteadyState {
    pub value: f64,
    /// False when the two trailing windows disagree by more than 1 dB,
    /// i.e. the transient had not passed.
    pub settled: bool,
}

enum ReplicaOutcome {
    Finished(Vec<f64>),
    Diverged,
}

fn simulate_replica(cfg: &ExperimentConfig, replica: u64) -> ReplicaOutcome {
    let mut env = cfg.environment.clone();
    let mut rng = rng::stream_rng(cfg.master_seed, stream::REPLICA, replica);
    let agents = env.agents();
    let dim = env.dimension();
    let model = cfg.gradient_model();
    let iterations = cfg.schedule.iterations(cfg.mu);

    // combination weights are fixed for the whole run
    let weights: Option<DMatrix<f64>> = match cfg.algorithm {
        Algorithm::Diffusion => Some(cfg.network.combination().clone()),
        Algorithm::Multitask => Some(
            cfg.network
                .multitask_weights(cfg.mu, cfg.eta)
                .expect("validated before dispatch"),
        ),
        _ => None,
    };

    let mut iterates = vec![DVector::<f64>::zeros(dim); agents];
    let mut msd = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        env.drift_step(&mut rng);
        let samples = env.sample_all(&mut rng);
        match cfg.algorithm {
            Algorithm::Lms => {
                iterates[0] = lms_step(
                    &iterates[0],
                    &samples[0].features,
                    samples[0].response,
                    cfg.mu,
                );
            }
            Algorithm::Sgd => {
                iterates[0] = sgd_step(&iterates[0], &model, &samples[0], cfg.mu);
            }
            Algorithm::Diffusion => {
                iterates = diffusion_step(
                    &iterates,
                    &samples,
                    weights.as_ref().unwrap(),
                    cfg.mu,
                    &model,
                );
            }
            Algorithm::Multitask => {
                iterates = multitask_step(
                    &iterates,
                    &samples,
                    weights.as_ref().unwrap(),
                    cfg.mu,
                    &model,
                );
            }
        }
        let mut dev = 0.0;
        for (k, w) in iterates.iter().enumerate() {
            dev += (env.target_for(k) - w).norm_squared();
        }
        let value = dev / agents as f64;
        if !value.is_finite() {
            return ReplicaOutcome::Diverged;
        }
        msd.push(value);
    }
    ReplicaOutcome::Finished(msd)
}

/// Run one experiment: simulate all replicas and average their squared
/// deviation trajectories. Replicas whose iterates blow up are dropped and
/// counted in the result. Deterministic given the master seed, independent
/// of `workers`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MsdTrajectory> {
    cfg.validate()?;
    if cfg.algorithm == Algorithm::Multitask {
        // surface an over-large coupling as a config error up front
        cfg.network.multitask_weights(cfg.mu, cfg.eta)?;
    }
    let replicas = cfg.replicas;
    let outcomes: Vec<ReplicaOutcome> = if cfg.workers == 1 {
        (0..replicas as u64)
            .map(|r| simulate_replica(cfg, r))
            .collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if cfg.workers > 0 {
            builder = builder.num_threads(cfg.workers);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..replicas as u64)
                .into_par_iter()
                .map(|r| simulate_replica(cfg, r))
                .collect()
        })
    };

    let iterations = cfg.schedule.iterations(cfg.mu);
    let mut sum = vec![0.0_f64; iterations];
    let mut diverged = 0usize;
    // reduce strictly in replica order so averaging is schedule-independent
    for outcome in &outcomes {
        match outcome {
            ReplicaOutcome::Finished(traj) => {
                for (acc, v) in sum.iter_mut().zip(traj.iter()) {
                    *acc += v;
                }
            }
            ReplicaOutcome::Diverged => diverged += 1,
        }
    }
    let surviving = replicas - diverged;
    let values = if surviving > 0 {
        sum.into_iter().map(|s| s / surviving as f64).collect()
    } else {
        vec![f64::NAN; iterations]
    };
    Ok(MsdTrajectory {
        values,
        config_hash: cfg.fingerprint(),
        seed: cfg.master_seed,
        diverged_replicas: diverged,
        surviving_replicas: surviving,
    })
}

/// Mean of the trailing `window_fraction` of the trajectory, with a
/// two-window settlement check: the trailing window and the one before it
/// must agree within 1 dB. Windows that have both decayed to numerical
/// nothing (relative to the trajectory peak) count as settled.
pub fn steady_state_msd(traj: &MsdTrajectory, window_fraction: f64) -> Result<SteadyState> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "window fraction must lie in (0,1), got {window_fraction}"
        )));
    }
    let values = traj.values();
    let t = values.len();
    if t == 0 {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let w = ((window_fraction * t as f64).ceil() as usize).clamp(1, t);
    let last_mean = values[t - w..].iter().sum::<f64>() / w as f64;
    let settled = if t >= 2 * w {
        let prev_mean = values[t - 2 * w..t - w].iter().sum::<f64>() / w as f64;
        let peak = values.iter().cloned().fold(0.0_f64, f64::max);
        let negligible = 1e-30 * peak;
        if last_mean <= negligible && prev_mean <= negligible {
            true
        } else if last_mean > 0.0 && prev_mean > 0.0 {
            (to_db(last_mean) - to_db(prev_mean)).abs() <= 1.0
        } else {
            last_mean == prev_mean
        }
    } else {
        false
    };
    Ok(SteadyState {
        value: last_mean,
        settled,
    })
}

/// One row of a step-size sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub mu: f64,
    pub steady_msd: f64,
    pub bound_zero_mean: f64,
    pub bound_biased: f64,
    pub settled: bool,
    pub diverged_replicas: usize,
    pub certificate_valid: bool,
}

/// A completed step-size sweep.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const CSV_HEADER: &'static str =
        "mu,steady_msd,steady_msd_db,bound_zm,bound_biased,settled_flag";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                g17(row.mu),
                g17(row.steady_msd),
                g17(to_db(row.steady_msd)),
                g17(row.bound_zero_mean),
                g17(row.bound_biased),
                u8::from(row.settled),
            ));
        }
        out
    }

    pub fn any_diverged(&self) -> bool {
        self.rows.iter().any(|r| r.diverged_replicas > 0)
    }

    pub fn mus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mu).collect()
    }

    pub fn steady_msds(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.steady_msd).collect()
    }
}

/// Default problem constants derived from the environment statistics.
///
/// Least squares: `nu = lambda_min(R)`, `hessian_max = lambda_max(R)`,
/// `sigma_s2 = tr(R) sigma_v^2`, `beta2 = lambda_max^2 + lambda_max tr(R)`
/// (white-Gaussian regressor identity), `alpha2 = beta2 / nu^2`. Logistic:
/// the ridge term pins `nu = 2 rho`, the sigmoid slope caps the Hessian at
/// `lambda_max/4 + 2 rho`; the gradient-noise parameters are heuristic
/// defaults at trend level only.
pub fn derived_problem_constants(env: &Environment) -> ProblemConstants {
    let agents = env.agents();
    let d2 = disagreement_bound(env.targets());
    match env.kind() {
        EnvKind::LinearRegression {
            regressor_cov,
            noise_variance,
        } => {
            let lo = regressor_cov.lambda_min();
            let hi = regressor_cov.lambda_max();
            let trace = regressor_cov.trace();
            let beta2 = hi * hi + hi * trace;
            ProblemConstants::new(lo, hi, agents)
                .expect("positive definite covariance")
                .with_gradient_noise(beta2 / (lo * lo), beta2, trace * noise_variance)
                .with_disagreement(d2)
        }
        EnvKind::Logistic { feature_cov, ridge } => {
            let nu = 2.0 * ridge;
            let hi = feature_cov.lambda_max() / 4.0 + 2.0 * ridge;
            let trace = feature_cov.trace();
            let beta2 = 2.0 * (trace / 4.0 + 2.0 * ridge).powi(2);
            ProblemConstants::new(nu, hi.max(nu), agents)
                .expect("ridge positive")
                .with_gradient_noise(beta2 / (nu * nu), beta2, trace / 4.0)
                .with_disagreement(d2)
        }
    }
}

/// Steady-state bound pair (zero-mean, biased) for the configured
/// algorithm at step-size `mu`. NaN when the certificate is out of range.
pub fn evaluate_bounds(cfg: &ExperimentConfig, mu: f64) -> (f64, f64, bool) {
    let xi2 = cfg.environment.stacked_drift_moment();
    match (cfg.algorithm, cfg.environment.kind()) {
        (Algorithm::Lms | Algorithm::Sgd, EnvKind::LinearRegression { regressor_cov, noise_variance }) => {
            match lms_certificate(&regressor_cov.matrix(), *noise_variance, mu) {
                Ok(cert) => (
                    steady_state_bound(cert.certificate(), xi2, true),
                    steady_state_bound(cert.certificate(), xi2, false),
                    true,
                ),
                Err(_) => (f64::NAN, f64::NAN, false),
            }
        }
        (Algorithm::Multitask, _) => {
            let pc = derived_problem_constants(&cfg.environment);
            let valid = bounds::multitask_certificate(&pc, mu, cfg.eta).is_ok();
            (
                bounds::multitask_tracking_msd(&pc, mu, xi2, true),
                bounds::multitask_tracking_msd(&pc, mu, xi2, false),
                valid,
            )
        }
        _ => {
            // diffusion, or single-agent sgd on a logistic cost (the one-agent
            // special case of diffusion)
            let pc = derived_problem_constants(&cfg.environment);
            let lambda2 = cfg.network.lambda2();
            let valid = bounds::diffusion_certificate(&pc, mu, lambda2).is_ok();
            (
                bounds::diffusion_tracking_msd(&pc, mu, xi2, lambda2, true),
                bounds::diffusion_tracking_msd(&pc, mu, xi2, lambda2, false),
                valid,
            )
        }
    }
}

/// Sweep the step-size grid: one experiment per `mu`, each with a seed
/// derived from the common master, plus bound evaluations per row.
pub fn sweep_stepsize(cfg: &ExperimentConfig, mu_grid: &[f64]) -> Result<SweepTable> {
    if mu_grid.is_empty() {
        return Err(Error::InvalidParameter("empty step-size grid".into()));
    }
    let mut rows = Vec::with_capacity(mu_grid.len());
    for (index, &mu) in mu_grid.iter().enumerate() {
        let mut run_cfg = cfg.clone();
        run_cfg.mu = mu;
        run_cfg.master_seed = rng::derive_seed(cfg.master_seed, stream::SWEEP, index as u64);
        let traj = run_experiment(&run_cfg)?;
        let steady = steady_state_msd(&traj, cfg.window_fraction)?;
        let (bound_zm, bound_biased, certificate_valid) = evaluate_bounds(cfg, mu);
        rows.push(SweepRow {
            mu,
            steady_msd: steady.value,
            bound_zero_mean: bound_zm,
            bound_biased,
            settled: steady.settled,
            diverged_replicas: traj.diverged_replicas(),
            certificate_valid,
        });
    }
    Ok(SweepTable { rows })
}

/// Least-squares slope of `10 log10(msd)` against `log10(mu)`, in dB per
/// decade, without any span requirement. Used for sub-range fits that may
/// cover less than a decade; the slope is still expressed per decade.
pub fn slope_db_per_decade(mu_values: &[f64], msd_values: &[f64]) -> Result<f64> {
    if mu_values.len() != msd_values.len() || mu_values.len() < 2 {
        return Err(Error::DegenerateSlopeFit);
    }
    if mu_values.iter().any(|&m| m.is_nan() || m <= 0.0) {
        return Err(Error::InvalidParameter("step sizes must be positive".into()));
    }
    let xs: Vec<f64> = mu_values.iter().map(|&m| m.log10()).collect();
    let ys: Vec<f64> = msd_values.iter().map(|&v| to_db(v)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter(
            "slope fit requires positive finite deviations".into(),
        ));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateSlopeFit);
    }
    Ok(sxy / sxx)
}

/// Least-squares slope of `10 log10(msd)` against `log10(mu)`, in dB per
/// decade. Requires at least three points spanning at least one decade.
pub fn fit_decade_slope(mu_values: &[f64], msd_values: &[f64]) -> Result<f64> {
    if mu_values.len() != msd_values.len() || mu_values.len() < 3 {
        return Err(Error::DegenerateSlopeFit);
    }
    let lo = mu_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mu_values.iter().copied().fold(0.0_f64, f64::max);
    if lo.is_nan() || lo <= 0.0 || hi / lo < 10.0 * (1.0 - 1e-9) {
        return Err(Error::DegenerateSlopeFit);
    }
    slope_db_per_decade(mu_values, msd_values)
}

/// Geometric decay rate of a transient: per-iteration ratio fitted by least
/// squares on `ln msd` over `[start, end)`. Returns the per-step factor.
pub fn fit_decay_rate(msd: &[f64], start: usize, end: usize) -> Result<f64> {
    if end <= start + 2 || end > msd.len() {
        return Err(Error::DegenerateSlopeFit);
    }
    let window = &msd[start..end];
    if window.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::InvalidParameter(
            "decay fit requires positive deviations".into(),
        ));
    }
    let n = window.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = window.iter().map(|v| v.ln()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, v) in window.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (v.ln() - mean_y);
    }
    Ok((sxy / sxx).exp())
}
