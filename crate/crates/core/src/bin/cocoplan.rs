use std::fs::{self, File};
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cocoplan::experiment::{run_experiment, write_csv, ExperimentError, RobustnessParams};
use cocoplan::scenario::{load_scenario, ConfigError, ScenarioConfig};
use cocoplan::strategy::StrategyKind;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cocoplan",
    version,
    about = "Multi-robot task planning with intermittent communication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write per-trial metrics as CSV.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Base seed; trial k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace the scenario's strategy kind, keeping its parameters.
        #[arg(long)]
        strategy: Option<StrategyKind>,
        /// Directory for trials.csv, summary.csv, robustness.csv and logs.
        /// Without it, trial rows go to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the task stream of a scenario's generator as CSV.
    Generate {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and report every problem found.
    Validate { scenario: PathBuf },
}

enum Failure {
    Config(String),
    Infeasible(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::NoTrials => Failure::Config(e.to_string()),
            other => Failure::Infeasible(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Infeasible(e.to_string())
    }
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = load_scenario(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(
    scenario: PathBuf,
    trials: usize,
    seed: Option<u64>,
    strategy: Option<StrategyKind>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = load(&scenario, seed)?;
    if let Some(kind) = strategy {
        cfg.strategy.kind = kind;
        cfg.validate()?;
    }
    let exp = run_experiment(&cfg, trials)?;
    match &out {
        Some(dir) => {
            fs::create_dir_all(dir.join("logs"))?;
            write_csv(&exp.rows(), File::create(dir.join("trials.csv"))?)?;
            write_csv(&[exp.summary()], File::create(dir.join("summary.csv"))?)?;
            let series = exp.robustness(&RobustnessParams::default());
            write_csv(&series, File::create(dir.join("robustness.csv"))?)?;
            for t in &exp.trials {
                let name = format!("{}_trial{}.log", exp.strategy.as_str().to_lowercase(), t.trial);
                fs::write(dir.join("logs").join(name), exp.log(t.trial))?;
            }
        }
        None => write_csv(&exp.rows(), io::stdout().lock())?,
    }
    for t in exp.trials.iter().filter(|t| !t.outcome.violations.is_empty()) {
        for v in &t.outcome.violations {
            eprintln!("trial {}: {v:?}", t.trial);
        }
    }
    if exp.has_violations() {
        return Err(Failure::Infeasible("schedule violations detected".into()));
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct TaskRow {
    id: u32,
    x: f64,
    y: f64,
    radius: f64,
    duration: f64,
    release: f64,
    /// `count*action` pairs separated by `;`.
    requirements: String,
    /// Precedence predecessors separated by `;`.
    after: String,
}

fn generate(scenario: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(&scenario, seed)?;
    if cfg.generator.is_none() {
        return Err(Failure::Config(
            "generator: the scenario has no [generator] section".into(),
        ));
    }
    let map = cfg.load_map().map_err(Failure::Config)?;
    let (tasks, relations) = cfg.task_stream(&map, cfg.seed)?;
    let rows: Vec<TaskRow> = tasks
        .iter()
        .map(|t| {
            let join = |v: Vec<String>| v.join(";");
            TaskRow {
                id: t.id,
                x: t.region_center.x,
                y: t.region_center.y,
                radius: t.region_radius,
                duration: t.duration,
                release: t.release_time,
                requirements: join(
                    t.requirements
                        .iter()
                        .map(|r| format!("{}*{}", r.count, r.action))
                        .collect(),
                ),
                after: join(
                    relations
                        .iter()
                        .filter(|r| r.second == t.id && r.kind == cocoplan::RelationKind::Precedence)
                        .map(|r| r.first.to_string())
                        .collect(),
                ),
            }
        })
        .collect();
    let written = match out {
        Some(path) => write_csv(&rows, File::create(path)?),
        None => write_csv(&rows, io::stdout().lock()),
    };
    written.map_err(Failure::from)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            trials,
            seed,
            strategy,
            out,
        } => run(scenario, trials, seed, strategy, out),
        Command::Generate { scenario, seed, out } => generate(scenario, seed, out),
        Command::Validate { scenario } => load(&scenario, None).map(|_| println!("{}: ok", scenario.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
    }
}
