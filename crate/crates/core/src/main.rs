use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use swarmlift::perception::TriggerMode;
use swarmlift::sim::{export_run, load_scenario, metrics_json, run};

#[derive(Parser)]
#[command(name = "swarmlift", version, about = "Cooperative cable-suspended payload transport simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Event,
    Periodic,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the run logs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated time limit [s]
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        #[arg(long = "trigger-mode", value_enum)]
        trigger_mode: Option<Mode>,
        /// Output directory for CSV, JSON-lines and metrics files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Log every K-th physics step.
        #[arg(long)]
        decimation: Option<usize>,
    },
    /// Check a scenario's schema and that its goal is reachable.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
    },
}

/// Exit code for unusable input, distinct from the run outcomes.
const EXIT_USAGE: u8 = 1;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { scenario } => match load_scenario(&scenario).and_then(|(s, _)| s.check_reachable()) {
            Ok(cost) => {
                println!("ok: {} (static path length {cost:.2} m)", scenario.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_USAGE)
            }
        },
        Command::Run { scenario, seed, t_final, trigger_mode, out, decimation } => {
            let (sc, mut config) = match load_scenario(&scenario) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(t) = t_final {
                config.t_final = t;
            }
            if let Some(m) = trigger_mode {
                config.trigger_mode = match m {
                    Mode::Event => TriggerMode::Event,
                    Mode::Periodic => TriggerMode::Periodic,
                };
            }
            if let Some(k) = decimation {
                config.decimation = k;
            }
            config.out_dir = out;
            if let Err(e) = config.validate() {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }

            let output = run(&sc, &config);
            if let Some(dir) = &config.out_dir {
                if let Err(e) = export_run(dir, &output.log, &output.metrics) {
                    eprintln!("error: writing {}: {e}", dir.display());
                    return ExitCode::from(EXIT_USAGE);
                }
            }
            print!("{}", metrics_json(&output.metrics));
            ExitCode::from(output.status.exit_code() as u8)
        }
    }
}
