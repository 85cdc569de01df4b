//! `driftlab` command line: run experiments, sweep step-sizes, tabulate
//! bounds. Exit codes: 0 success, 2 configuration error, 3 numerical
//! divergence during simulation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use driftlab::bounds::{
    diffusion_certificate, diffusion_gamma_delta, lms_certificate, lms_gamma_delta,
    multitask_certificate, multitask_gamma_delta, BoundRow,
};
use driftlab::env::EnvKind;
use driftlab::graphs::edge_list_string;
use driftlab::harness::{
    self, derived_problem_constants, g17, run_experiment, steady_state_msd, sweep_stepsize,
    to_db, Algorithm, ExperimentConfig, SweepTable,
};
use driftlab_cli::config::{ConfigError, ResolvedConfig};
use driftlab_cli::manifest::RunManifest;
use driftlab_cli::svg::{line_chart, Series};

const EXIT_OK: i32 = 0;
const EXIT_RUNTIME: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_DIVERGENCE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "driftlab",
    version,
    about = "Simulate online stochastic learners tracking drifting optima and evaluate their steady-state bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (created if absent)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Override the seed from the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replica simulation (0 = all cores)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write an SVG chart next to each CSV
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its deviation trajectory
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one experiment per step-size and write the sweep table plus
    /// fitted dB-per-decade slopes
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tabulate contraction certificates and steady-state bounds over the
    /// configured step-size grid (no simulation)
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Emit rows with non-contractive certificates (flagged) instead of
        /// failing
        #[arg(long)]
        allow_unstable: bool,
    },
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

impl From<driftlab::Error> for CliError {
    fn from(e: driftlab::Error) -> Self {
        match e {
            driftlab::Error::InvalidParameter(_)
            | driftlab::Error::DimensionMismatch { .. }
            | driftlab::Error::NegativeVariance(_)
            | driftlab::Error::WeightsOutOfRange(_)
            | driftlab::Error::GraphNotConnected { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { common } => cmd_run(&common),
        Command::Sweep { common } => cmd_sweep(&common),
        Command::Bounds {
            common,
            allow_unstable,
        } => cmd_bounds(&common, allow_unstable),
    };
    match code {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("driftlab: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn load(common: &CommonArgs) -> Result<ResolvedConfig, CliError> {
    let cfg = ResolvedConfig::from_file(&common.config)?;
    std::fs::create_dir_all(&common.out)?;
    Ok(cfg)
}

fn variant_suffix(total: usize, index: usize) -> String {
    if total == 1 {
        String::new()
    } else {
        format!("_s{index}")
    }
}

fn write_network_export(
    out: &Path,
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    if cfg.algorithm.is_decentralized() {
        let path = out.join("network.edges");
        std::fs::write(&path, edge_list_string(cfg.network.adjacency()))?;
        manifest.add_output("network.edges");
    }
    Ok(())
}

fn cmd_run(common: &CommonArgs) -> Result<i32, CliError> {
    let started = Instant::now();
    let resolved = load(common)?;
    if resolved.step_sizes.len() != 1 {
        return Err(CliError::Config(
            "run expects a single step_size; use `sweep` for grids".into(),
        ));
    }
    let built = resolved.build(common.seed, common.workers)?;
    let mut manifest = RunManifest::new(
        "run",
        &common.config,
        &common.out,
        built.seed,
        common.workers,
        &resolved,
    );
    write_network_export(&common.out, &built.experiments[0].cfg, &mut manifest)?;
    let mut diverged = false;
    let total = built.experiments.len();
    for (index, variant) in built.experiments.iter().enumerate() {
        let suffix = variant_suffix(total, index);
        let (_, _, certificate_valid) = harness::evaluate_bounds(&variant.cfg, variant.cfg.mu);
        if !certificate_valid {
            eprintln!(
                "driftlab: warning: mu={} outside certificate stability range",
                variant.cfg.mu
            );
        }
        let traj = run_experiment(&variant.cfg)?;
        if traj.diverged_replicas() > 0 {
            eprintln!(
                "driftlab: {} of {} replicas diverged (variance {})",
                traj.diverged_replicas(),
                variant.cfg.replicas,
                variant.variance
            );
            diverged = true;
        }
        let name = format!("trajectory{suffix}.csv");
        std::fs::write(common.out.join(&name), traj.to_csv())?;
        manifest.add_output(&name);
        if common.svg {
            let series = [Series {
                label: "msd (dB)".into(),
                points: traj
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| ((i + 1) as f64, to_db(v)))
                    .collect(),
            }];
            let chart = line_chart("deviation trajectory", "iteration", "MSD (dB)", false, &series);
            let svg_name = format!("trajectory{suffix}.svg");
            std::fs::write(common.out.join(&svg_name), chart)?;
            manifest.add_output(&svg_name);
        }
        let steady = steady_state_msd(&traj, variant.cfg.window_fraction)?;
        println!(
            "run{suffix}: T={} steady_msd={} ({:.2} dB) settled={}",
            traj.len(),
            g17(steady.value),
            to_db(steady.value),
            steady.settled
        );
    }
    manifest.duration = started.elapsed();
    manifest.write(&common.out.join("manifest.txt"))?;
    Ok(if diverged { EXIT_DIVERGENCE } else { EXIT_OK })
}

/// Slope sub-ranges: configured cutoffs when present, otherwise the first
/// and last thirds of the grid (at least three points each).
fn slope_ranges(resolved: &ResolvedConfig) -> (Vec<usize>, Vec<usize>) {
    let grid = &resolved.step_sizes;
    let n = grid.len();
    let small: Vec<usize> = match resolved.small_mu_max {
        Some(cut) => (0..n).filter(|&i| grid[i] <= cut).collect(),
        None => (0..n.min(3.max(n / 3))).collect(),
    };
    let large: Vec<usize> = match resolved.large_mu_min {
        Some(cut) => (0..n).filter(|&i| grid[i] >= cut).collect(),
        None => (n.saturating_sub(3.max(n / 3))..n).collect(),
    };
    (small, large)
}

fn cmd_sweep(common: &CommonArgs) -> Result<i32, CliError> {
    let started = Instant::now();
    let resolved = load(common)?;
    if resolved.step_sizes.len() < 2 {
        return Err(CliError::Config(
            "sweep expects a step_size grid with at least 2 values".into(),
        ));
    }
    let built = resolved.build(common.seed, common.workers)?;
    let mut manifest = RunManifest::new(
        "sweep",
        &common.config,
        &common.out,
        built.seed,
        common.workers,
        &resolved,
    );
    write_network_export(&common.out, &built.experiments[0].cfg, &mut manifest)?;

    let (small_idx, large_idx) = slope_ranges(&resolved);
    let mut slopes_csv = String::from("variance,range,mu_min,mu_max,slope_db_per_decade\n");
    let mut diverged = false;
    let total = built.experiments.len();
    let mut chart_series = Vec::new();

    for (index, variant) in built.experiments.iter().enumerate() {
        let suffix = variant_suffix(total, index);
        let table = sweep_stepsize(&variant.cfg, &resolved.step_sizes)?;
        diverged |= table.any_diverged();
        for row in table.rows.iter().filter(|r| !r.certificate_valid) {
            eprintln!(
                "driftlab: warning: mu={} outside certificate stability range",
                row.mu
            );
        }
        let name = format!("sweep{suffix}.csv");
        std::fs::write(common.out.join(&name), table.to_csv())?;
        manifest.add_output(&name);

        let mus = table.mus();
        let msds = table.steady_msds();
        for (range, idx) in [("small_mu", &small_idx), ("large_mu", &large_idx)] {
            if idx.len() < 2 {
                continue;
            }
            let sub_mu: Vec<f64> = idx.iter().map(|&i| mus[i]).collect();
            let sub_msd: Vec<f64> = idx.iter().map(|&i| msds[i]).collect();
            let slope = harness::slope_db_per_decade(&sub_mu, &sub_msd)
                .map(g17)
                .unwrap_or_else(|_| "nan".into());
            slopes_csv.push_str(&format!(
                "{},{},{},{},{}\n",
                g17(variant.variance),
                range,
                g17(sub_mu[0]),
                g17(*sub_mu.last().unwrap()),
                slope
            ));
        }
        let full_slope = harness::fit_decade_slope(&mus, &msds)
            .map(g17)
            .unwrap_or_else(|_| "nan".into());
        slopes_csv.push_str(&format!(
            "{},full,{},{},{}\n",
            g17(variant.variance),
            g17(mus[0]),
            g17(*mus.last().unwrap()),
            full_slope
        ));

        chart_series.push(Series {
            label: format!("variance {}", variant.variance),
            points: mus
                .iter()
                .zip(msds.iter())
                .map(|(&m, &v)| (m, to_db(v)))
                .collect(),
        });
        print_sweep_summary(&suffix, &table);
    }

    std::fs::write(common.out.join("slopes.csv"), &slopes_csv)?;
    manifest.add_output("slopes.csv");
    if common.svg {
        let chart = line_chart("steady-state deviation", "log10 step size", "MSD (dB)", true, &chart_series);
        std::fs::write(common.out.join("sweep.svg"), chart)?;
        manifest.add_output("sweep.svg");
    }
    manifest.duration = started.elapsed();
    manifest.write(&common.out.join("manifest.txt"))?;
    Ok(if diverged { EXIT_DIVERGENCE } else { EXIT_OK })
}

fn print_sweep_summary(suffix: &str, table: &SweepTable) {
    for row in &table.rows {
        println!(
            "sweep{suffix}: mu={:<12.6e} steady={:<14.6e} ({:>8.2} dB) settled={} diverged={}",
            row.mu,
            row.steady_msd,
            to_db(row.steady_msd),
            u8::from(row.settled),
            row.diverged_replicas
        );
    }
}

fn cmd_bounds(common: &CommonArgs, allow_unstable: bool) -> Result<i32, CliError> {
    let started = Instant::now();
    let resolved = load(common)?;
    let built = resolved.build(common.seed, common.workers)?;
    let mut manifest = RunManifest::new(
        "bounds",
        &common.config,
        &common.out,
        built.seed,
        common.workers,
        &resolved,
    );

    let mut csv = String::from(BoundRow::CSV_HEADER);
    csv.push_str(",stable\n");
    let mut any_unstable = false;

    for variant in &built.experiments {
        let cfg = &variant.cfg;
        let xi2 = cfg.environment.stacked_drift_moment();
        for &mu in &resolved.step_sizes {
            let (row, stable) = bound_row_for(cfg, mu, resolved.eta, xi2);
            if !stable {
                any_unstable = true;
                if !allow_unstable {
                    return Err(CliError::Config(format!(
                        "certificate not contractive at mu={mu}; rerun with --allow-unstable to tabulate anyway"
                    )));
                }
            }
            csv.push_str(&format!("{},{}\n", row.to_csv(), u8::from(stable)));
        }
    }

    std::fs::write(common.out.join("bounds.csv"), &csv)?;
    manifest.add_output("bounds.csv");
    manifest.duration = started.elapsed();
    manifest.write(&common.out.join("manifest.txt"))?;
    if any_unstable {
        eprintln!("driftlab: warning: some rows are outside the certificate stability range");
    }
    Ok(EXIT_OK)
}

/// Build one bound-report row; `stable` reports whether the certificate is
/// contractive at this step-size. Non-contractive rows carry the raw gamma
/// and delta with NaN bounds.
fn bound_row_for(cfg: &ExperimentConfig, mu: f64, eta: f64, xi2: f64) -> (BoundRow, bool) {
    let algorithm = cfg.algorithm.as_str();
    let unstable_row = |gamma: f64, delta: f64| BoundRow {
        algorithm: algorithm.to_string(),
        mu,
        eta,
        xi2,
        gamma,
        delta,
        bound_zero_mean: f64::NAN,
        bound_biased: f64::NAN,
    };
    match (cfg.algorithm, cfg.environment.kind()) {
        (
            Algorithm::Lms | Algorithm::Sgd,
            EnvKind::LinearRegression {
                regressor_cov,
                noise_variance,
            },
        ) => {
            let r = regressor_cov.matrix();
            match lms_certificate(&r, *noise_variance, mu) {
                Ok(cert) => (
                    BoundRow::from_certificate(algorithm, cert.certificate(), mu, eta, xi2),
                    true,
                ),
                Err(_) => {
                    let (gamma, delta) =
                        lms_gamma_delta(&r, *noise_variance, mu).unwrap_or((f64::NAN, f64::NAN));
                    (unstable_row(gamma, delta), false)
                }
            }
        }
        (Algorithm::Multitask, _) => {
            let pc = derived_problem_constants(&cfg.environment);
            match multitask_certificate(&pc, mu, eta) {
                Ok(cert) => (
                    BoundRow::from_certificate(algorithm, cert.certificate(), mu, eta, xi2),
                    true,
                ),
                Err(_) => {
                    let (gamma, delta) = multitask_gamma_delta(&pc, mu);
                    (unstable_row(gamma, delta), false)
                }
            }
        }
        _ => {
            let pc = derived_problem_constants(&cfg.environment);
            let lambda2 = cfg.network.lambda2();
            match diffusion_certificate(&pc, mu, lambda2) {
                Ok(cert) => (
                    BoundRow::from_certificate(algorithm, cert.certificate(), mu, eta, xi2),
                    true,
                ),
                Err(_) => {
                    let (gamma, delta) = diffusion_gamma_delta(&pc, mu);
                    (unstable_row(gamma, delta), false)
                }
            }
        }
    }
}
