use std::path::PathBuf;
use std::process::ExitCode;

use anisoheat_cli::config::{self, RunConfig, Suite, Task};
use anisoheat_cli::output::report_render;
use anisoheat_cli::run::run;
use anisoheat_cli::CliError;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisoheat", version, about = "Anisotropic non-local heat equations: kernels, solvers, simulation and estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "ANISOHEAT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    Kernel(Common),
    Solve(Common),
    Simulate(Common),
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
    },
    Multiplier {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta1: Option<f64>,
        #[arg(long)]
        delta2: Option<f64>,
        /// Sample the derivative with a single power of the denominator.
        #[arg(long)]
        unsquared_derivative: bool,
    },
    /// Merges the reports of a directory into summary.csv and summary.txt.
    Render {
        #[arg(long)]
        out: PathBuf,
    },
}

fn multiplier_config(delta1: f64, delta2: f64, unsquared_derivative: bool) -> RunConfig {
    config::parse(
        &serde_json::json!({
            "anisotropy": { "dims": [1], "phis": [{ "kind": "drift", "drift": 1.0 }] },
            "task": { "kind": "multiplier", "delta1": delta1, "delta2": delta2, "unsquared_derivative": unsquared_derivative },
        })
        .to_string(),
        "command line",
    )
    .expect("built-in configuration parses")
}

fn load(common: &Common, expected: &str) -> Result<RunConfig, CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = config::load(path)?;
    if cfg.task.name() != expected {
        return Err(CliError::Config(format!(
            "{}: configuration declares task {} but the subcommand is {expected}",
            path.display(),
            cfg.task.name()
        )));
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (common, cfg) = match cli.command {
        Command::Render { out } => {
            let (rows, pass) = report_render(&out)?;
            for r in &rows {
                println!("{} {}/{} = {:e}", if r.pass { "PASS" } else { "FAIL" }, r.suite, r.metric, r.value);
            }
            return Ok(pass);
        }
        Command::Kernel(c) => {
            let cfg = load(&c, "kernel")?;
            (c, cfg)
        }
        Command::Solve(c) => {
            let cfg = load(&c, "solve")?;
            (c, cfg)
        }
        Command::Simulate(c) => {
            let cfg = load(&c, "simulate")?;
            (c, cfg)
        }
        Command::Verify { common, suite } => {
            let mut cfg = load(&common, "verify")?;
            if let (Task::Verify(v), Some(s)) = (&mut cfg.task, suite) {
                v.suite = Some(s);
            }
            (common, cfg)
        }
        Command::Multiplier { common, delta1, delta2, unsquared_derivative } => {
            let mut cfg = match (&common.config, delta1, delta2) {
                (Some(_), _, _) => load(&common, "multiplier")?,
                (None, Some(a), Some(b)) => multiplier_config(a, b, unsquared_derivative),
                _ => return Err(CliError::Config("multiplier needs --config or both --delta1 and --delta2".into())),
            };
            if let Task::Multiplier { delta1: d1, delta2: d2, unsquared_derivative: p } = &mut cfg.task {
                *d1 = delta1.unwrap_or(*d1);
                *d2 = delta2.unwrap_or(*d2);
                *p |= unsquared_derivative;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            (common, cfg)
        }
    };
    let workers = common.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let manifest = pool.install(|| run(&cfg, &common.out, workers))?;
    println!("{} {} -> {}", if manifest.pass { "PASS" } else { "FAIL" }, manifest.task, common.out.display());
    Ok(manifest.pass)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
