//! `battsize` command-line interface.
//!
//! Subcommands: `size`, `analyze`, `simulate`, `oracle`, `sweep`,
//! `validate`. Exit codes: 0 success, 1 domain/solver error, 2 usage error.
//! All floating-point output carries 12 significant digits; every
//! subcommand is deterministic given identical flags and seeds.

mod render;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use battsize::ctmc_oracle;
use battsize::queue_analytics::{analyze_node, NodeRates};
use battsize::simulator::{run_experiment, SimulationConfig};
use battsize::sizing::{size_battery, to_physical_capacity, DesignTargets};
use battsize::sweep;

pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Environment variable naming the default directory for relative
/// `--output` paths. All science parameters must be explicit flags.
pub const OUT_DIR_ENV: &str = "BATTSIZE_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "battsize",
    version,
    about = "Battery sizing and validation for energy-harvesting sensor nodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Csv,
    JsonText,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when omitted. Relative paths resolve against
    /// $BATTSIZE_OUT_DIR when that is set.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal battery capacity for given depletion/overflow targets.
    Size {
        /// Data-to-energy arrival ratio; alternative to --lambda-d/--lambda-e.
        #[arg(long, conflicts_with_all = ["lambda_d", "lambda_e"])]
        gamma: Option<f64>,
        #[arg(long, requires = "lambda_e")]
        lambda_d: Option<f64>,
        #[arg(long, requires = "lambda_d")]
        lambda_e: Option<f64>,
        /// Acceptable depletion probability.
        #[arg(long)]
        alpha: f64,
        /// Acceptable overflow probability.
        #[arg(long)]
        beta: f64,
        /// Physical size of one energy packet; reports capacity in the same unit.
        #[arg(long)]
        ep_size: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Closed-form steady state of the decoupled model at a given capacity.
    Analyze {
        #[arg(long)]
        lambda_d: f64,
        #[arg(long)]
        lambda_e: f64,
        #[arg(long)]
        lambda_c: f64,
        #[arg(long)]
        capacity: u32,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte-Carlo estimates with confidence intervals.
    Simulate {
        #[arg(long)]
        lambda_d: f64,
        #[arg(long)]
        lambda_e: f64,
        #[arg(long)]
        lambda_c: f64,
        #[arg(long)]
        capacity: u32,
        /// Simulated seconds per replication.
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        #[arg(long, default_value_t = 0.1)]
        warmup_fraction: f64,
        #[arg(long, default_value_t = 30)]
        replications: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exact joint-chain stationary marginals.
    Oracle {
        #[arg(long)]
        lambda_d: f64,
        #[arg(long)]
        lambda_e: f64,
        #[arg(long)]
        lambda_c: f64,
        #[arg(long)]
        capacity: u32,
        /// Stationary mass allowed at the data truncation level.
        #[arg(long, default_value_t = ctmc_oracle::DEFAULT_MASS_BUDGET)]
        dmax_budget: f64,
        #[arg(long, default_value_t = ctmc_oracle::DEFAULT_DMAX_CAP)]
        dmax_cap: u32,
        /// Write the full joint distribution as CSV (columns d,e,probability).
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sizing-curve tables (CSV), optionally with an SVG chart.
    Sweep {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Comma-separated gamma grid; defaults to 0.05..0.95 step 0.05.
        #[arg(long, value_delimiter = ',')]
        gamma_grid: Option<Vec<f64>>,
        /// Comma-separated alpha grid; defaults to 0.01,0.02,0.05,0.1,0.2,0.3.
        #[arg(long, value_delimiter = ',')]
        alpha_grid: Option<Vec<f64>>,
        /// Comma-separated beta grid; same default as --alpha-grid.
        #[arg(long, value_delimiter = ',')]
        beta_grid: Option<Vec<f64>>,
        /// Fixed gamma for k-beta tables (default 0.95).
        #[arg(long)]
        gamma: Option<f64>,
        /// Fixed alpha for compare tables (default 0.05).
        #[arg(long)]
        alpha: Option<f64>,
        /// Also emit a minimal SVG line chart to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Analytic vs oracle vs simulation comparison grid.
    Validate {
        #[arg(long, value_delimiter = ',')]
        gamma_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        k_grid: Vec<u32>,
        #[arg(long, default_value_t = 1.0)]
        lambda_c: f64,
        /// lambda_E / lambda_C used to lift gamma points to absolute rates.
        #[arg(long, default_value_t = sweep::DEFAULT_GAMMA_E)]
        gamma_e: f64,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        #[arg(long, default_value_t = 0.1)]
        warmup_fraction: f64,
        #[arg(long, default_value_t = 30)]
        replications: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = ctmc_oracle::DEFAULT_MASS_BUDGET)]
        dmax_budget: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    KAlpha,
    KBeta,
    Compare,
}

/// Errors mapped to exit codes: `Usage` -> 2, `Domain` -> 1.
enum CliError {
    Usage(String),
    Domain(String),
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn domain(err: impl std::fmt::Display) -> CliError {
    CliError::Domain(err.to_string())
}

fn check_unit_interval(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} must be positive and finite, got {v}")))
    }
}

fn node_rates(lambda_d: f64, lambda_e: f64, lambda_c: f64) -> Result<NodeRates, CliError> {
    NodeRates::new(lambda_d, lambda_e, lambda_c).map_err(|e| usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Size {
            gamma,
            lambda_d,
            lambda_e,
            alpha,
            beta,
            ep_size,
            out,
        } => cmd_size(gamma, lambda_d, lambda_e, alpha, beta, ep_size, &out),
        Command::Analyze {
            lambda_d,
            lambda_e,
            lambda_c,
            capacity,
            out,
        } => cmd_analyze(lambda_d, lambda_e, lambda_c, capacity, &out),
        Command::Simulate {
            lambda_d,
            lambda_e,
            lambda_c,
            capacity,
            horizon,
            warmup_fraction,
            replications,
            seed,
            out,
        } => cmd_simulate(
            lambda_d,
            lambda_e,
            lambda_c,
            capacity,
            horizon,
            warmup_fraction,
            replications,
            seed,
            &out,
        ),
        Command::Oracle {
            lambda_d,
            lambda_e,
            lambda_c,
            capacity,
            dmax_budget,
            dmax_cap,
            dump,
            out,
        } => cmd_oracle(
            lambda_d,
            lambda_e,
            lambda_c,
            capacity,
            dmax_budget,
            dmax_cap,
            dump,
            &out,
        ),
        Command::Sweep {
            figure,
            gamma_grid,
            alpha_grid,
            beta_grid,
            gamma,
            alpha,
            svg,
            out,
        } => cmd_sweep(figure, gamma_grid, alpha_grid, beta_grid, gamma, alpha, svg, &out),
        Command::Validate {
            gamma_grid,
            k_grid,
            lambda_c,
            gamma_e,
            horizon,
            warmup_fraction,
            replications,
            seed,
            dmax_budget,
            out,
        } => cmd_validate(
            gamma_grid,
            k_grid,
            lambda_c,
            gamma_e,
            horizon,
            warmup_fraction,
            replications,
            seed,
            dmax_budget,
            &out,
        ),
    }
}

fn cmd_size(
    gamma: Option<f64>,
    lambda_d: Option<f64>,
    lambda_e: Option<f64>,
    alpha: f64,
    beta: f64,
    ep_size: Option<f64>,
    out: &OutputArgs,
) -> CliResult {
    let gamma = match (gamma, lambda_d, lambda_e) {
        (Some(g), None, None) => g,
        (None, Some(d), Some(e)) => {
            check_positive("lambda-d", d)?;
            check_positive("lambda-e", e)?;
            d / e
        }
        _ => return Err(usage("provide either --gamma or both --lambda-d and --lambda-e")),
    };
    check_unit_interval("gamma", gamma)?;
    check_unit_interval("alpha", alpha)?;
    check_unit_interval("beta", beta)?;
    if let Some(s) = ep_size {
        check_positive("ep-size", s)?;
    }
    let targets = DesignTargets::new(alpha, beta).map_err(|e| usage(e.to_string()))?;
    let result = size_battery(gamma, &targets).map_err(domain)?;
    let physical = ep_size.map(|s| to_physical_capacity(result.capacity, s));
    let text = render::sizing(gamma, alpha, beta, &result, ep_size, physical, out.format);
    write_output(out, &text)
}

fn cmd_analyze(
    lambda_d: f64,
    lambda_e: f64,
    lambda_c: f64,
    capacity: u32,
    out: &OutputArgs,
) -> CliResult {
    let rates = node_rates(lambda_d, lambda_e, lambda_c)?;
    if capacity < 1 {
        return Err(usage("capacity must be >= 1"));
    }
    let solution = analyze_node(&rates, capacity).map_err(domain)?;
    let text = render::analysis(&rates, &solution, out.format);
    write_output(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    lambda_d: f64,
    lambda_e: f64,
    lambda_c: f64,
    capacity: u32,
    horizon: f64,
    warmup_fraction: f64,
    replications: u32,
    seed: u64,
    out: &OutputArgs,
) -> CliResult {
    let config = SimulationConfig {
        lambda_d,
        lambda_e,
        lambda_c,
        capacity,
        horizon,
        warmup_fraction,
        replications,
        base_seed: seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_experiment(&config).map_err(domain)?;
    let text = render::simulation(&report, out.format);
    write_output(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    lambda_d: f64,
    lambda_e: f64,
    lambda_c: f64,
    capacity: u32,
    dmax_budget: f64,
    dmax_cap: u32,
    dump: Option<PathBuf>,
    out: &OutputArgs,
) -> CliResult {
    let rates = node_rates(lambda_d, lambda_e, lambda_c)?;
    if capacity < 1 {
        return Err(usage("capacity must be >= 1"));
    }
    if !(dmax_budget > 0.0 && dmax_budget < 1.0) {
        return Err(usage("dmax-budget must lie in (0, 1)"));
    }
    let dmax = ctmc_oracle::choose_truncation_with_cap(&rates, capacity, dmax_budget, dmax_cap)
        .map_err(domain)?;
    let spec = ctmc_oracle::JointChainSpec::new(rates, capacity, dmax);
    let dist = ctmc_oracle::stationary_distribution(&spec).map_err(domain)?;
    let marginals = ctmc_oracle::oracle_marginals(&dist);
    if let Some(path) = dump {
        write_file(out, &path, &dist.to_csv())?;
    }
    let text = render::oracle(&rates, capacity, dmax, &dist, &marginals, out.format);
    write_output(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    figure: Figure,
    gamma_grid: Option<Vec<f64>>,
    alpha_grid: Option<Vec<f64>>,
    beta_grid: Option<Vec<f64>>,
    gamma: Option<f64>,
    alpha: Option<f64>,
    svg: Option<PathBuf>,
    out: &OutputArgs,
) -> CliResult {
    let gammas = gamma_grid.unwrap_or_else(sweep::default_gamma_grid);
    let alphas = alpha_grid.unwrap_or_else(sweep::default_target_grid);
    let betas = beta_grid.unwrap_or_else(sweep::default_target_grid);
    for &g in &gammas {
        check_unit_interval("gamma-grid entries", g)?;
    }
    for &a in &alphas {
        check_unit_interval("alpha-grid entries", a)?;
    }
    for &b in &betas {
        check_unit_interval("beta-grid entries", b)?;
    }
    let (table, series) = match figure {
        Figure::KAlpha => {
            let t = sweep::sweep_k_alpha(&gammas, &alphas);
            let s = t.series("gamma", "k_alpha", Some("alpha"));
            (t, s)
        }
        Figure::KBeta => {
            let g = gamma.unwrap_or(0.95);
            check_unit_interval("gamma", g)?;
            let t = sweep::sweep_k_beta(&alphas, &betas, g);
            let s = t.series("beta", "k_beta", Some("alpha"));
            (t, s)
        }
        Figure::Compare => {
            let g = gamma.unwrap_or(0.9);
            let a = alpha.unwrap_or(0.05);
            check_unit_interval("gamma", g)?;
            check_unit_interval("alpha", a)?;
            let t = sweep::compare_sizing(g, a, &betas);
            let mut s = t.series("beta", "k_alpha", None);
            s.extend(t.series("beta", "k_beta", None));
            (t, s)
        }
    };
    if let Some(path) = svg {
        let chart = sweep::svg_line_chart(&series, "x", "capacity", &table.name);
        write_file(out, &path, &chart)?;
    }
    let text = render::table(&table, out.format);
    write_output(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    gamma_grid: Vec<f64>,
    k_grid: Vec<u32>,
    lambda_c: f64,
    gamma_e: f64,
    horizon: f64,
    warmup_fraction: f64,
    replications: u32,
    seed: u64,
    dmax_budget: f64,
    out: &OutputArgs,
) -> CliResult {
    if gamma_grid.is_empty() || k_grid.is_empty() {
        return Err(usage("gamma-grid and k-grid must be non-empty"));
    }
    for &g in &gamma_grid {
        check_unit_interval("gamma-grid entries", g)?;
    }
    for &k in &k_grid {
        if k < 1 {
            return Err(usage("k-grid entries must be >= 1"));
        }
    }
    check_positive("lambda-c", lambda_c)?;
    check_positive("gamma-e", gamma_e)?;
    check_positive("horizon", horizon)?;
    if !(0.0..=0.5).contains(&warmup_fraction) {
        return Err(usage("warmup-fraction must lie in [0, 0.5]"));
    }
    if replications < 1 {
        return Err(usage("replications must be >= 1"));
    }
    let template = sweep::ValidationTemplate {
        gamma_e,
        horizon,
        warmup_fraction,
        replications,
        base_seed: seed,
        mass_budget: dmax_budget,
    };
    let table = sweep::validation_grid(&gamma_grid, &k_grid, lambda_c, &template);
    let text = render::table(&table, out.format);
    write_output(out, &text)
}

fn resolve_path(path: &PathBuf) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.clone()
}

fn write_file(_out: &OutputArgs, path: &PathBuf, content: &str) -> CliResult {
    let path = resolve_path(path);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))
}

fn write_output(out: &OutputArgs, text: &str) -> CliResult {
    match &out.output {
        Some(path) => write_file(out, path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
