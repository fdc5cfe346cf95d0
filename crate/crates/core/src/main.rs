use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlmc_abc::bench::config::ExperimentConfig;
use mlmc_abc::bench::presets::{preset, PRESETS};
use mlmc_abc::bench::reference::build_reference;
use mlmc_abc::bench::report::{collect_summaries, render};
use mlmc_abc::bench::run_experiment;
use mlmc_abc::{Error, Result};

#[derive(Parser)]
#[command(name = "mlmc-abc", version, about = "Multilevel Monte Carlo ABC experiments")]
struct Cli {
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run a named preset instead of a config file.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Simulation cap per sampler call.
    #[arg(long, global = true)]
    budget_cap: Option<u64>,
    /// Directory for cached references.
    #[arg(long, global = true, default_value = "reference-cache")]
    cache: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (or every experiment of a preset).
    Run { config: Option<PathBuf> },
    /// Build and cache the reference CDF.
    Reference { config: Option<PathBuf> },
    /// Aggregate `summary.csv` files below a directory.
    Report { dir: PathBuf },
    /// List the presets.
    Presets,
}

fn configs(cli: &Cli, path: Option<&PathBuf>) -> Result<Vec<ExperimentConfig>> {
    let mut list = match (path, &cli.preset) {
        (Some(p), None) => vec![ExperimentConfig::load(p)?],
        (None, Some(name)) => preset(name)?.configs,
        _ => return Err(Error::Config("give exactly one of a config file and --preset".into())),
    };
    for c in &mut list {
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        if let Some(cap) = cli.budget_cap {
            c.sampler.budget_cap = Some(cap);
        }
        let leaf = c.output.clone().unwrap_or_else(|| c.name.clone().into());
        c.output = Some(match &cli.out {
            Some(root) if path.is_some() => root.clone(),
            Some(root) => root.join(leaf),
            None => leaf,
        });
    }
    Ok(list)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Presets => {
            for name in PRESETS {
                let s = preset(name)?;
                println!("{name:<8} {} ({} runs)", s.description, s.configs.len());
            }
        }
        Command::Run { config } => {
            for c in configs(cli, config.as_ref())? {
                let out = c.output.clone().expect("set above");
                let report = run_experiment(&c, Some(&out), Some(&cli.cache))?;
                println!(
                    "{}: mean N_s {:.0}, rmse {}, {} failed -> {}",
                    report.name,
                    report.mean_cost(),
                    report.rmse().map_or("-".into(), |r| format!("{r:.4}")),
                    report.failures(),
                    out.display()
                );
            }
        }
        Command::Reference { config } => {
            for c in configs(cli, config.as_ref())? {
                if c.reference.is_none() {
                    continue;
                }
                let r = build_reference(&c, Some(&cli.cache))?;
                if let Some(f) = r.cache_file {
                    println!("{}: {}", c.name, f.display());
                }
            }
        }
        Command::Report { dir } => print!("{}", render(&collect_summaries(dir)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
