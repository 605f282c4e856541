use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tbo_service::cli::{cmd_run, cmd_serve, cmd_validate};

#[derive(Parser)]
#[command(name = "tbo", version, about = "Trajectory-based operations simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario to completion and write the event log, report and statistics.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate one plan offline (exit 0 CONCUR, 4 NEGOTIATE, 5 NON_CONCUR, 2 n/a).
    Validate { plan: PathBuf, scenario: PathBuf },
    /// Serve the HTTP API over a live simulation.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Start with the clock paused.
        #[arg(long)]
        paused: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    let code = match cli.command {
        Command::Run { scenario, seed, out: dir } => cmd_run(&scenario, seed, &dir, &mut out, &mut err),
        Command::Validate { plan, scenario } => cmd_validate(&plan, &scenario, &mut out, &mut err),
        Command::Serve {
            scenario,
            seed,
            port,
            host,
            speed,
            paused,
        } => match tokio::runtime::Runtime::new() {
            Ok(rt) => rt.block_on(cmd_serve(&scenario, seed, SocketAddr::new(host, port), speed, paused, &mut err)),
            Err(e) => {
                eprintln!("error: cannot start runtime: {e}");
                1
            }
        },
    };
    ExitCode::from(code as u8)
}
