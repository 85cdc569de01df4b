//! Flat sectioned key-value configuration files.
//!
//! ```text
//! [environment]
//! kind = linear_regression      # linear_regression | logistic
//! dimension = 3
//! noise_variance = 1.0          # linear_regression only
//! # ridge = 0.05                # logistic only
//! covariance = identity         # identity | diag:v1,v2,...
//! target = shared_gaussian      # zero | shared_gaussian | per_agent_gaussian | smooth
//! target_scale = 1.0
//!
//! [drift]
//! mode = common                 # common | independent
//! variance = 2e-5               # comma list fans the sweep out per value
//! mean = 0.0                    # per-coordinate increment bias
//!
//! [network]
//! agents = 5
//! edge_probability = 0.4
//! rule = uniform                # uniform | metropolis
//! # edge_list = graph.edges     # import a fixed topology instead
//!
//! [learner]
//! algorithm = diffusion         # lms | sgd | diffusion | multitask
//! step_size = logspace:1e-3:1e-1:9
//! eta = 0.0                     # multitask coupling strength
//!
//! [harness]
//! iterations = 20000            # or iterations_per_mu = 30 (T = coeff/mu,
//! replicas = 50                 #    clamped to [iterations_min, iterations_max])
//! window_fraction = 0.25
//! seed = 1234
//! ```
//!
//! Unknown sections or keys are rejected so typos surface as errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use driftlab::drift::{DriftMode, DriftSpec};
use driftlab::env::{gaussian_targets, Covariance, EnvKind, Environment};
use driftlab::graphs::{read_edge_list, smooth_signal, CombinationRule, Network};
use driftlab::harness::{Algorithm, ExperimentConfig, IterationSchedule};
use driftlab::rng::{self, stream};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<driftlab::Error> for ConfigError {
    fn from(e: driftlab::Error) -> Self {
        ConfigError(e.to_string())
    }
}

type SectionMap = BTreeMap<String, BTreeMap<String, String>>;

const SECTIONS: &[&str] = &["environment", "drift", "network", "learner", "harness"];

fn parse_sections(text: &str) -> Result<SectionMap, ConfigError> {
    let mut sections: SectionMap = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError(format!(
                    "line {}: unknown section [{name}]",
                    lineno + 1
                )));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let Some(section) = &current else {
            return Err(ConfigError(format!(
                "line {}: key outside of any [section]",
                lineno + 1
            )));
        };
        let prev = sections
            .get_mut(section)
            .unwrap()
            .insert(key.trim().to_string(), value.trim().to_string());
        if prev.is_some() {
            return Err(ConfigError(format!(
                "line {}: duplicate key `{}` in [{section}]",
                lineno + 1,
                key.trim()
            )));
        }
    }
    Ok(sections)
}

/// Section view with known-key checking.
struct Section<'a> {
    name: &'a str,
    map: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.map.and_then(|m| m.get(key)).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.get(key).ok_or_else(|| {
            ConfigError(format!(
                "missing required key `{key}` in section [{}]",
                self.name
            ))
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s.parse::<T>().map(Some).map_err(|_| {
                ConfigError(format!("key `{key}` in [{}]: cannot parse `{s}`", self.name))
            }),
        }
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn check_known(&self, known: &[&str]) -> Result<(), ConfigError> {
        if let Some(map) = self.map {
            for key in map.keys() {
                if !known.contains(&key.as_str()) {
                    return Err(ConfigError(format!(
                        "unknown key `{key}` in section [{}]",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn parse_step_sizes(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |s: &str| ConfigError(format!("step_size: cannot parse `{s}`"));
    let grid = if let Some(rest) = spec.strip_prefix("logspace:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(ConfigError(
                "step_size logspace form is logspace:lo:hi:count".into(),
            ));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad(parts[0]))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad(parts[1]))?;
        let n: usize = parts[2].parse().map_err(|_| bad(parts[2]))?;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(ConfigError(
                "step_size logspace needs 0 < lo < hi and count >= 2".into(),
            ));
        }
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
    } else {
        spec.split(',')
            .map(|tok| tok.trim().parse::<f64>().map_err(|_| bad(tok)))
            .collect::<Result<Vec<f64>, _>>()?
    };
    if grid.iter().any(|&m| m.is_nan() || m <= 0.0) {
        return Err(ConfigError("step sizes must be positive".into()));
    }
    Ok(grid)
}

fn parse_f64_list(spec: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("{key}: cannot parse `{tok}`")))
        })
        .collect()
}

#[derive(Debug, Clone)]
enum TargetInit {
    Zero,
    SharedGaussian,
    PerAgentGaussian,
    Smooth,
}

#[derive(Debug, Clone)]
enum NetworkSource {
    Random { edge_probability: f64 },
    EdgeList(PathBuf),
}

/// Fully validated configuration, ready to build experiments.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub algorithm: Algorithm,
    dimension: usize,
    env_is_logistic: bool,
    noise_variance: f64,
    ridge: f64,
    covariance_diag: Option<Vec<f64>>,
    target: TargetInit,
    target_scale: f64,
    smooth_bandwidth: Option<usize>,
    drift_mode: DriftMode,
    pub drift_variances: Vec<f64>,
    drift_mean: f64,
    agents: usize,
    network_source: Option<NetworkSource>,
    rule: CombinationRule,
    pub step_sizes: Vec<f64>,
    pub eta: f64,
    schedule: IterationSchedule,
    pub replicas: usize,
    pub window_fraction: f64,
    pub seed: u64,
    pub small_mu_max: Option<f64>,
    pub large_mu_min: Option<f64>,
}

impl ResolvedConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let sections = parse_sections(text)?;
        let section = |name: &str| Section {
            name: match name {
                "environment" => "environment",
                "drift" => "drift",
                "network" => "network",
                "learner" => "learner",
                _ => "harness",
            },
            map: sections.get(name),
        };

        let environment = section("environment");
        environment.check_known(&[
            "kind",
            "dimension",
            "noise_variance",
            "ridge",
            "covariance",
            "target",
            "target_scale",
            "smooth_bandwidth",
        ])?;
        if !sections.contains_key("environment") {
            return Err(ConfigError("missing section [environment]".into()));
        }
        let kind = environment.require("kind")?;
        let env_is_logistic = match kind {
            "linear_regression" => false,
            "logistic" => true,
            other => {
                return Err(ConfigError(format!(
                    "environment kind must be linear_regression or logistic, got `{other}`"
                )))
            }
        };
        let dimension: usize = environment
            .require("dimension")?
            .parse()
            .map_err(|_| ConfigError("dimension: expected a positive integer".into()))?;
        if dimension == 0 {
            return Err(ConfigError("dimension must be positive".into()));
        }
        let noise_variance = environment.parse_or("noise_variance", 1.0)?;
        let ridge = environment.parse_or("ridge", 0.05)?;
        let covariance_diag = match environment.get("covariance") {
            None | Some("identity") => None,
            Some(spec) => {
                let rest = spec.strip_prefix("diag:").ok_or_else(|| {
                    ConfigError("covariance must be `identity` or `diag:v1,v2,...`".into())
                })?;
                let diag = parse_f64_list(rest, "covariance")?;
                if diag.len() != dimension {
                    return Err(ConfigError(format!(
                        "covariance diagonal has {} entries, dimension is {dimension}",
                        diag.len()
                    )));
                }
                Some(diag)
            }
        };
        let target = match environment.get("target").unwrap_or("shared_gaussian") {
            "zero" => TargetInit::Zero,
            "shared_gaussian" => TargetInit::SharedGaussian,
            "per_agent_gaussian" => TargetInit::PerAgentGaussian,
            "smooth" => TargetInit::Smooth,
            other => {
                return Err(ConfigError(format!(
                    "target must be zero|shared_gaussian|per_agent_gaussian|smooth, got `{other}`"
                )))
            }
        };
        let target_scale = environment.parse_or("target_scale", 1.0)?;
        let smooth_bandwidth = environment.parse("smooth_bandwidth")?;

        let drift = section("drift");
        drift.check_known(&["mode", "variance", "mean"])?;
        let drift_mode = match drift.get("mode").unwrap_or("common") {
            "common" => DriftMode::Common,
            "independent" => DriftMode::Independent,
            other => {
                return Err(ConfigError(format!(
                    "drift mode must be common or independent, got `{other}`"
                )))
            }
        };
        let drift_variances = match drift.get("variance") {
            None => vec![0.0],
            Some(spec) => parse_f64_list(spec, "variance")?,
        };
        if drift_variances.is_empty() || drift_variances.iter().any(|&v| v < 0.0) {
            return Err(ConfigError("drift variances must be nonnegative".into()));
        }
        let drift_mean = drift.parse_or("mean", 0.0)?;

        let learner = section("learner");
        learner.check_known(&["algorithm", "step_size", "eta"])?;
        if !sections.contains_key("learner") {
            return Err(ConfigError("missing section [learner]".into()));
        }
        let algorithm = Algorithm::parse(learner.require("algorithm")?)?;
        let step_sizes = parse_step_sizes(learner.require("step_size")?)?;
        let eta = learner.parse_or("eta", 0.0)?;
        if eta < 0.0 {
            return Err(ConfigError("eta must be nonnegative".into()));
        }

        let network = section("network");
        network.check_known(&["agents", "edge_probability", "rule", "edge_list"])?;
        let (agents, network_source, rule) = if algorithm.is_decentralized() {
            if !sections.contains_key("network") {
                return Err(ConfigError(format!(
                    "algorithm {} needs a [network] section",
                    algorithm.as_str()
                )));
            }
            let agents: usize = network
                .require("agents")?
                .parse()
                .map_err(|_| ConfigError("agents: expected a positive integer".into()))?;
            if agents < 2 {
                return Err(ConfigError("network needs at least 2 agents".into()));
            }
            let rule = match network.get("rule").unwrap_or("uniform") {
                "uniform" => CombinationRule::Uniform,
                "metropolis" => CombinationRule::Metropolis,
                other => {
                    return Err(ConfigError(format!(
                        "rule must be uniform or metropolis, got `{other}`"
                    )))
                }
            };
            let source = match network.get("edge_list") {
                Some(p) => NetworkSource::EdgeList(PathBuf::from(p)),
                None => NetworkSource::Random {
                    edge_probability: network.parse_or("edge_probability", 0.4)?,
                },
            };
            (agents, Some(source), rule)
        } else {
            (1, None, CombinationRule::Uniform)
        };

        let harness = section("harness");
        harness.check_known(&[
            "iterations",
            "iterations_per_mu",
            "iterations_min",
            "iterations_max",
            "replicas",
            "window_fraction",
            "seed",
            "small_mu_max",
            "large_mu_min",
        ])?;
        let schedule = match harness.parse::<f64>("iterations_per_mu")? {
            Some(coeff) => {
                if coeff <= 0.0 {
                    return Err(ConfigError("iterations_per_mu must be positive".into()));
                }
                IterationSchedule::InverseMu {
                    coeff,
                    min: harness.parse_or("iterations_min", 1000)?,
                    max: harness.parse_or("iterations_max", 1_000_000)?,
                }
            }
            None => IterationSchedule::Fixed(harness.parse_or("iterations", 10_000)?),
        };
        let replicas = harness.parse_or("replicas", 50)?;
        let window_fraction = harness.parse_or("window_fraction", 0.25)?;
        let seed = harness.parse_or("seed", 0xD81F7u64)?;
        let small_mu_max = harness.parse("small_mu_max")?;
        let large_mu_min = harness.parse("large_mu_min")?;

        if matches!(target, TargetInit::Smooth) && !algorithm.is_decentralized() {
            return Err(ConfigError(
                "smooth targets need a decentralized algorithm with a network".into(),
            ));
        }
        if env_is_logistic && matches!(algorithm, Algorithm::Lms) {
            return Err(ConfigError(
                "lms requires a linear_regression environment".into(),
            ));
        }

        Ok(ResolvedConfig {
            algorithm,
            dimension,
            env_is_logistic,
            noise_variance,
            ridge,
            covariance_diag,
            target,
            target_scale,
            smooth_bandwidth,
            drift_mode,
            drift_variances,
            drift_mean,
            agents,
            network_source,
            rule,
            step_sizes,
            eta,
            schedule,
            replicas,
            window_fraction,
            seed,
            small_mu_max,
            large_mu_min,
        })
    }

    /// Build one experiment per drift variance. All experiments share the
    /// network and initial targets (both derived from the seed); only the
    /// increment law differs.
    pub fn build(&self, seed_override: Option<u64>, workers: usize) -> Result<Built, ConfigError> {
        let seed = seed_override.unwrap_or(self.seed);
        let network = match &self.network_source {
            None => Network::singleton(),
            Some(NetworkSource::EdgeList(path)) => {
                let adjacency = read_edge_list(path)
                    .map_err(|e| ConfigError(format!("edge list {}: {e}", path.display())))?;
                if adjacency.nrows() != self.agents {
                    return Err(ConfigError(format!(
                        "edge list has {} nodes, config says {} agents",
                        adjacency.nrows(),
                        self.agents
                    )));
                }
                Network::new(adjacency, self.rule)?
            }
            Some(NetworkSource::Random { edge_probability }) => {
                let mut rng = rng::stream_rng(seed, stream::GRAPH, 0);
                Network::random(self.agents, *edge_probability, self.rule, &mut rng)?
            }
        };

        let mut target_rng = rng::stream_rng(seed, stream::TARGETS, 0);
        let targets: Vec<DVector<f64>> = match self.target {
            TargetInit::Zero => vec![DVector::zeros(self.dimension)],
            TargetInit::SharedGaussian => {
                gaussian_targets(self.dimension, 1, self.target_scale, &mut target_rng)
            }
            TargetInit::PerAgentGaussian => gaussian_targets(
                self.dimension,
                self.agents,
                self.target_scale,
                &mut target_rng,
            ),
            TargetInit::Smooth => {
                let bandwidth = self
                    .smooth_bandwidth
                    .unwrap_or_else(|| (self.agents as f64 / 4.0).ceil() as usize)
                    .clamp(1, self.agents);
                smooth_signal(
                    network.laplacian(),
                    bandwidth,
                    self.dimension,
                    self.target_scale,
                    &mut target_rng,
                )?
            }
        };

        let covariance = match &self.covariance_diag {
            None => Covariance::Identity(self.dimension),
            Some(diag) => Covariance::Diagonal(DVector::from_vec(diag.clone())),
        };
        let kind = if self.env_is_logistic {
            EnvKind::Logistic {
                feature_cov: covariance,
                ridge: self.ridge,
            }
        } else {
            EnvKind::LinearRegression {
                regressor_cov: covariance,
                noise_variance: self.noise_variance,
            }
        };

        let mut experiments = Vec::new();
        for &variance in &self.drift_variances {
            let drift = DriftSpec::new(
                DVector::from_element(self.dimension, self.drift_mean),
                variance,
                self.drift_mode,
            )?;
            let environment = Environment::new(kind.clone(), targets.clone(), drift, self.agents)?;
            let cfg = ExperimentConfig {
                algorithm: self.algorithm,
                environment,
                network: network.clone(),
                mu: self.step_sizes[0],
                eta: self.eta,
                schedule: self.schedule,
                replicas: self.replicas,
                window_fraction: self.window_fraction,
                master_seed: seed,
                workers,
            };
            cfg.validate()?;
            experiments.push(VariantExperiment { variance, cfg });
        }
        Ok(Built {
            network,
            experiments,
            seed,
        })
    }

    /// Canonical reprint of the resolved values, embedded in manifests.
    pub fn canonical_dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "[environment]");
        let _ = writeln!(
            out,
            "kind = {}",
            if self.env_is_logistic {
                "logistic"
            } else {
                "linear_regression"
            }
        );
        let _ = writeln!(out, "dimension = {}", self.dimension);
        if self.env_is_logistic {
            let _ = writeln!(out, "ridge = {}", self.ridge);
        } else {
            let _ = writeln!(out, "noise_variance = {}", self.noise_variance);
        }
        match &self.covariance_diag {
            None => {
                let _ = writeln!(out, "covariance = identity");
            }
            Some(d) => {
                let list: Vec<String> = d.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "covariance = diag:{}", list.join(","));
            }
        }
        let _ = writeln!(
            out,
            "target = {}",
            match self.target {
                TargetInit::Zero => "zero",
                TargetInit::SharedGaussian => "shared_gaussian",
                TargetInit::PerAgentGaussian => "per_agent_gaussian",
                TargetInit::Smooth => "smooth",
            }
        );
        let _ = writeln!(out, "target_scale = {}", self.target_scale);
        if let Some(b) = self.smooth_bandwidth {
            let _ = writeln!(out, "smooth_bandwidth = {b}");
        }
        let _ = writeln!(out, "\n[drift]");
        let _ = writeln!(
            out,
            "mode = {}",
            match self.drift_mode {
                DriftMode::Common => "common",
                DriftMode::Independent => "independent",
            }
        );
        let vars: Vec<String> = self.drift_variances.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "variance = {}", vars.join(","));
        let _ = writeln!(out, "mean = {}", self.drift_mean);
        if self.network_source.is_some() {
            let _ = writeln!(out, "\n[network]");
            let _ = writeln!(out, "agents = {}", self.agents);
            match &self.network_source {
                Some(NetworkSource::Random { edge_probability }) => {
                    let _ = writeln!(out, "edge_probability = {edge_probability}");
                }
                Some(NetworkSource::EdgeList(p)) => {
                    let _ = writeln!(out, "edge_list = {}", p.display());
                }
                None => {}
            }
            let _ = writeln!(
                out,
                "rule = {}",
                match self.rule {
                    CombinationRule::Uniform => "uniform",
                    CombinationRule::Metropolis => "metropolis",
                }
            );
        }
        let _ = writeln!(out, "\n[learner]");
        let _ = writeln!(out, "algorithm = {}", self.algorithm.as_str());
        let mus: Vec<String> = self.step_sizes.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "step_size = {}", mus.join(","));
        let _ = writeln!(out, "eta = {}", self.eta);
        let _ = writeln!(out, "\n[harness]");
        match self.schedule {
            IterationSchedule::Fixed(t) => {
                let _ = writeln!(out, "iterations = {t}");
            }
            IterationSchedule::InverseMu { coeff, min, max } => {
                let _ = writeln!(out, "iterations_per_mu = {coeff}");
                let _ = writeln!(out, "iterations_min = {min}");
                let _ = writeln!(out, "iterations_max = {max}");
            }
        }
        let _ = writeln!(out, "replicas = {}", self.replicas);
        let _ = writeln!(out, "window_fraction = {}", self.window_fraction);
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(v) = self.small_mu_max {
            let _ = writeln!(out, "small_mu_max = {v}");
        }
        if let Some(v) = self.large_mu_min {
            let _ = writeln!(out, "large_mu_min = {v}");
        }
        out
    }
}

/// One experiment per drift variance.
#[derive(Debug, Clone)]
pub struct VariantExperiment {
    pub variance: f64,
    pub cfg: ExperimentConfig,
}

/// Output of [`ResolvedConfig::build`].
#[derive(Debug, Clone)]
pub struct Built {
    pub network: Network,
    pub experiments: Vec<VariantExperiment>,
    pub seed: u64,
}
