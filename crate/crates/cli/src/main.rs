use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cosim_cli::config::{parse_method, parse_model, DEFAULT_EPSILON};
use cosim_cli::runner::{summary_line, SUMMARY_HEADER};
use cosim_cli::{compare, run, CliError, FileConfig, Method, RunConfig};
use missiles_core::costarica::DEFAULT_STEHFEST_TERMS;
use missiles_core::Execution;

#[derive(Parser)]
#[command(name = "cosim", version, about = "Fixed-step co-simulation benchmarks")]
struct Cli {
    /// TOML file with default values; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// two-mass or lotka-volterra.
    #[arg(long)]
    model: Option<String>,
    /// End time in seconds (default: the model's benchmark end time).
    #[arg(long)]
    t_end: Option<f64>,
    /// Even Stehfest term count in 4..=18.
    #[arg(long)]
    stehfest_terms: Option<usize>,
    /// Directory caching monolithic references between runs.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Fan per-slave work out to a thread pool.
    #[arg(long)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one master and print its summary line.
    Run {
        #[command(flatten)]
        common: Common,
        /// missiles, ni-jacobi, ifosmondi-jfm or monolithic.
        #[arg(long)]
        method: Option<String>,
        /// Macro-step size in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// JFM convergence threshold.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Write the trajectory as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of methods and step sizes and print a comparison table.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated macro-step sizes.
        #[arg(long)]
        dt: Option<String>,
        /// Comma-separated methods (default: ni-jacobi,missiles,ifosmondi-jfm).
        #[arg(long)]
        methods: Option<String>,
        /// Comma-separated JFM thresholds (default: 1e-2,1e-5).
        #[arg(long)]
        epsilons: Option<String>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_list<T>(s: &str, parse: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(parse)
        .collect()
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.parse()
        .map_err(|_| CliError::ConfigInvalid(format!("`{s}` is not a number")))
}

fn base_config(common: &Common, file: &FileConfig) -> Result<RunConfig, CliError> {
    let model = common
        .model
        .as_deref()
        .or(file.model.as_deref())
        .ok_or_else(|| CliError::ConfigInvalid("--model is required".into()))?;
    let mut cfg = RunConfig::new(parse_model(model)?, Method::Missiles, 1.0);
    if let Some(t) = common.t_end.or(file.t_end) {
        cfg.t_end = t;
    }
    cfg.stehfest_terms = common
        .stehfest_terms
        .or(file.stehfest_terms)
        .unwrap_or(DEFAULT_STEHFEST_TERMS);
    cfg.cache_dir = common.cache_dir.clone().or_else(|| file.cache_dir.clone());
    if common.parallel || file.parallel.unwrap_or(false) {
        cfg.execution = Execution::Parallel;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Run {
            common,
            method,
            dt,
            epsilon,
            out,
        } => {
            let mut cfg = base_config(&common, &file)?;
            let method = method
                .as_deref()
                .or(file.method.as_deref())
                .ok_or_else(|| CliError::ConfigInvalid("--method is required".into()))?;
            cfg.method = parse_method(method)?;
            cfg.dt = dt
                .or(file.dt)
                .ok_or_else(|| CliError::ConfigInvalid("--dt is required".into()))?;
            cfg.epsilon = epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON);
            cfg.output_path = out.or_else(|| file.out.clone());
            let outcome = run(&cfg)?;
            println!("{SUMMARY_HEADER}");
            println!("{}", summary_line(&cfg, &outcome.summary));
            if let Some(why) = &outcome.summary.failure {
                eprintln!("run failed: {why}");
            }
            Ok(!outcome.summary.failed)
        }
        Command::Compare {
            common,
            dt,
            methods,
            epsilons,
            csv,
        } => {
            let base = base_config(&common, &file)?;
            let dts = match (dt, &file.dts) {
                (Some(s), _) => parse_list(&s, parse_f64)?,
                (None, Some(v)) => v.clone(),
                (None, None) => return Err(CliError::ConfigInvalid("--dt is required".into())),
            };
            let methods = match (methods, &file.methods) {
                (Some(s), _) => parse_list(&s, parse_method)?,
                (None, Some(v)) => v
                    .iter()
                    .map(|m| parse_method(m))
                    .collect::<Result<_, _>>()?,
                (None, None) => vec![Method::NiJacobi, Method::Missiles, Method::IfosmondiJfm],
            };
            let epsilons = match (epsilons, &file.epsilons) {
                (Some(s), _) => parse_list(&s, parse_f64)?,
                (None, Some(v)) => v.clone(),
                (None, None) => vec![1e-2, 1e-5],
            };
            let table = compare(&base, base.model, &dts, &methods, &epsilons)?;
            print!("{}", table.to_text());
            println!();
            print!("{}", table.to_csv());
            if let Some(path) = csv {
                std::fs::write(&path, table.to_csv())
                    .map_err(|e| CliError::Io { path, source: e })?;
            }
            for r in table.rows.iter().filter(|r| r.summary.failed) {
                eprintln!(
                    "{} dt={:e}: {}",
                    r.config.method,
                    r.config.dt,
                    r.summary.failure.as_deref().unwrap_or("failed")
                );
            }
            Ok(!table.any_failed())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
