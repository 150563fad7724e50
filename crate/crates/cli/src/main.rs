//! `evacopt` command-line front end.

mod commands;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "evacopt", version, about = "Crowd evacuation simulator and obstacle shape optimizer")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "EVACOPT_THREADS")]
    threads: Option<usize>,

    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write the density history.
    Simulate(SimulateArgs),
    /// Optimize obstacles with particle swarm or pattern search.
    Optimize(OptimizeArgs),
    /// Optimize obstacles by recursive random sampling.
    BruteForce(BruteForceArgs),
    /// Grid-convergence index of three solutions.
    Gci(GciArgs),
    /// Optimize over a grid of (rho_in, C_rep) points.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Scenario JSON file (a previous run's manifest.json works too).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped scenario: scenario_L, test_A or test_B.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (created if missing).
    #[arg(long, short)]
    out: PathBuf,
    /// Cells per side.
    #[arg(long)]
    n: Option<usize>,
    /// Sensory radius.
    #[arg(long)]
    r: Option<f64>,
    /// Repulsion strength.
    #[arg(long = "c-rep")]
    c_rep: Option<f64>,
    /// Entrance density.
    #[arg(long = "rho-in")]
    rho_in: Option<f64>,
    /// Let pedestrians perceive each other through obstacles.
    #[arg(long)]
    transparent: bool,
    /// Density frames written besides the initial one, evenly spaced in time.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Bezier,
    Circles,
}

#[derive(Args, Debug, Clone)]
struct DesignArgs {
    /// Obstacle family.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of obstacles.
    #[arg(long)]
    obstacles: Option<usize>,
    /// Smallest obstacle area as a fraction of the room.
    #[arg(long = "area-min")]
    area_min: Option<f64>,
    /// Largest obstacle area as a fraction of the room.
    #[arg(long = "area-max")]
    area_max: Option<f64>,
    /// Obstacle-free band along the walls, in cells.
    #[arg(long = "margin-cells")]
    margin_cells: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    design: DesignArgs,
    /// Obstacle design vector (comma separated); needs --mode/--obstacles.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    obstacle_design: Option<Vec<f64>>,
    /// Also write the distance fields, desired velocity and labels.
    #[arg(long)]
    dump_fields: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pso,
    Pattern,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    /// Generations.
    #[arg(long)]
    iters: Option<usize>,
    /// Use r1 = r2 = 1 in the velocity update.
    #[arg(long)]
    deterministic_pso: bool,
    /// Do not run a local search when the swarm stalls.
    #[arg(long)]
    no_local_search: bool,
    /// Starting design for pattern search (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    /// Initial pattern step, as a fraction of the box width.
    #[arg(long)]
    step: Option<f64>,
    /// Final pattern step, as a fraction of the box width.
    #[arg(long)]
    min_step: Option<f64>,
    /// Evaluation budget of the pattern search.
    #[arg(long)]
    max_evals: Option<usize>,
}

#[derive(Args, Debug)]
struct BruteForceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per round.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Width factor of the sampling box per round.
    #[arg(long)]
    shrink: Option<f64>,
}

#[derive(Args, Debug)]
struct GciArgs {
    f_coarse: f64,
    f_medium: f64,
    f_fine: f64,
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
    #[arg(long = "safety-factor", default_value_t = evacopt::analysis::DEFAULT_SAFETY_FACTOR)]
    safety_factor: f64,
    /// Also write gci.json here.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Only the (0.75, 6) and (1.5, 18) corners.
    #[arg(long)]
    corners: bool,
}

const EXIT_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    let out_dir = match &cli.command {
        Command::Simulate(a) => Some(a.scenario.out.clone()),
        Command::Optimize(a) => Some(a.scenario.out.clone()),
        Command::BruteForce(a) => Some(a.scenario.out.clone()),
        Command::Sweep(a) => Some(a.scenario.out.clone()),
        Command::Gci(a) => a.out.clone(),
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::BruteForce(a) => commands::brute_force(a),
        Command::Gci(a) => commands::gci(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::Timeout) => ExitCode::from(EXIT_TIMEOUT),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<evacopt::Error>() {
                Some(evacopt::Error::Config(_)) => EXIT_CONFIG,
                _ => EXIT_ERROR,
            };
            if let Some(dir) = out_dir {
                write_error_record(&dir, &e);
            }
            ExitCode::from(code)
        }
    }
}

fn write_error_record(dir: &Path, e: &anyhow::Error) {
    let (kind, details) = match e.downcast_ref::<evacopt::Error>() {
        Some(evacopt::Error::Config(list)) => ("config", list.clone()),
        Some(other) => ("model", vec![other.to_string()]),
        None => ("runtime", Vec::new()),
    };
    let record = serde_json::json!({
        "error": kind,
        "message": format!("{e:#}"),
        "details": details,
    });
    if std::fs::create_dir_all(dir).is_ok() {
        if let Err(w) = evacopt::io::write_json(&dir.join("error.json"), &record) {
            eprintln!("could not write error record: {w}");
        }
    }
}
