use clap::{Args, Parser, Subcommand};
use orthofair::experiment::{
    cmd_decorrelate, cmd_metrics, cmd_pseudo, cmd_run, cmd_simulate, load_simulation_spec, read_json,
    DecorrelateConfig, ExperimentConfig, MetricsConfig, PseudoConfig,
};
use orthofair::{exit_code, Error};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Fairness-aware preprocessing experiments: copula simulation,
/// decorrelation, weighted logistic models and group metrics.
#[derive(Debug, Parser)]
#[command(name = "orthofair", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replicate processing.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate replicate datasets from a simulation spec.
    Simulate,
    /// Fit every model variant on every replicate and report fairness metrics.
    Run,
    /// Expand a raw survival CSV into a per-year pseudo table.
    Pseudo,
    /// Fairness report for an existing predictions CSV.
    Metrics,
    /// Decorrelate features from sensitive columns and write the result.
    Decorrelate,
}

fn config_path(global: &GlobalArgs) -> Result<&Path, Error> {
    global
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <json> is required".into()))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn absolute(path: &Path) -> Result<PathBuf, Error> {
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<i32, Error> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let path = config_path(&cli.global)?;
    let base = base_dir(path);
    let out_override = cli.global.out.as_deref().map(absolute).transpose()?;
    match cli.command {
        Command::Simulate => {
            let mut spec = load_simulation_spec(path)?;
            if let Some(seed) = cli.global.seed {
                spec.seed = seed;
            }
            let out = match out_override {
                Some(o) => o,
                None => {
                    let value: serde_json::Value = read_json(path)?;
                    let dir = value
                        .get("output_dir")
                        .and_then(|v| v.as_str())
                        .ok_or_else(|| Error::Config("no output directory: pass --out".into()))?;
                    base.join(dir)
                }
            };
            let manifest = cmd_simulate(&spec, &out)?;
            println!("wrote {} replicate(s) to {}", manifest.files.len(), out.display());
        }
        Command::Run => {
            let mut config: ExperimentConfig = read_json(path)?;
            if let Some(seed) = cli.global.seed {
                config.override_seed(seed);
            }
            if let Some(o) = out_override {
                config.output_dir = o;
            }
            let summary = cmd_run(&config, &base)?;
            for v in &summary.variants {
                println!(
                    "{}: {} of {} replicate(s) completed",
                    v.variant.name(),
                    v.completed,
                    summary.replicates
                );
                for f in &v.failures {
                    eprintln!("  replicate {} failed: {}", f.replicate, f.message);
                }
            }
            if summary.variants.iter().all(|v| v.completed == 0) {
                let code = summary
                    .variants
                    .iter()
                    .flat_map(|v| v.failures.first())
                    .map(|f| f.exit_code)
                    .next()
                    .unwrap_or(exit_code::DATA);
                return Ok(code);
            }
        }
        Command::Pseudo => {
            let mut config: PseudoConfig = read_json(path)?;
            if let Some(o) = out_override {
                config.output = o.join("pseudo.csv");
            }
            let rows = cmd_pseudo(&config, &base)?;
            println!("wrote {rows} pseudo row(s)");
        }
        Command::Metrics => {
            let mut config: MetricsConfig = read_json(path)?;
            if let Some(o) = out_override {
                config.output_dir = o;
            }
            let report = cmd_metrics(&config, &base)?;
            println!("scored {} row(s)", report.global.n);
        }
        Command::Decorrelate => {
            let mut config: DecorrelateConfig = read_json(path)?;
            if let Some(o) = out_override {
                config.output_dir = o;
            }
            let export = cmd_decorrelate(&config, &base)?;
            println!(
                "decorrelated {} column(s) against {} sensitive column(s)",
                export.columns.len() - export.transition.sensitive_indices.len(),
                export.transition.sensitive_indices.len()
            );
        }
    }
    Ok(exit_code::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
