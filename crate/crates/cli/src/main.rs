use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use cmlsync_cli::workloads::StressConfig;
use cmlsync_cli::{demo, modelcheck};

#[derive(Parser)]
#[command(
    name = "cmlsync",
    version,
    about = "Model checker and live harness for the cmlsync event library"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore the abstract machine of a select-program and check it.
    Modelcheck {
        /// Program file, or `-` for stdin.
        #[arg(default_value = "-", conflicts_with = "program")]
        file: PathBuf,
        /// Program text given inline.
        #[arg(short = 'e', long)]
        program: Option<String>,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        max_states: u64,
        /// Append the explored transitions, one per line.
        #[arg(long)]
        graph: bool,
    },
    /// Run scripted scenarios against live channels.
    Demo {
        /// Per-scenario timeout in milliseconds.
        #[arg(long, default_value_t = 10_000)]
        timeout: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a random system of symmetric choices that admits a complete matching.
    Stress {
        /// Number of tasks; must be even.
        #[arg(long, default_value_t = 200)]
        tasks: usize,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        channels: u64,
        /// Timeout in milliseconds.
        #[arg(long, default_value_t = 30_000, value_parser = clap::value_parser!(u64).range(1..))]
        timeout: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use guarded channels with satisfiable predicates.
        #[arg(long)]
        guarded: bool,
    },
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_time()
        .build()
        .expect("failed to start the runtime")
}

fn read_program(file: &PathBuf) -> std::io::Result<String> {
    if file.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(file)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (code, report) = match cli.command {
        Command::Modelcheck {
            file,
            program,
            max_states,
            graph,
        } => {
            let text = match program.map_or_else(|| read_program(&file), Ok) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    return ExitCode::from(2);
                }
            };
            modelcheck::modelcheck(&text, max_states as usize, graph)
        }
        Command::Demo { timeout, seed } => {
            runtime().block_on(demo::demo(Duration::from_millis(timeout), seed))
        }
        Command::Stress {
            tasks,
            channels,
            timeout,
            seed,
            guarded,
        } => {
            let cfg = StressConfig {
                tasks,
                channels: channels as usize,
                seed,
                guarded,
                timeout: Duration::from_millis(timeout),
            };
            runtime().block_on(demo::stress(&cfg))
        }
    };
    print!("{report}");
    ExitCode::from(code as u8)
}
