use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use levi_cli::{run, ExportMode, RunOptions};

const EXIT_CODES: &str = "Exit codes:
  0  every validation check passed
  1  at least one validation check failed (named on stderr and in report.json)
  2  configuration error (unknown key, invalid value, unreadable file)
  3  numerical, cache or I/O error while running

The cache directory defaults to <output>/cache and can be set with the
LEVI_CACHE_DIR environment variable or --cache-dir (the flag wins).";

#[derive(Parser)]
#[command(name = "levi", version, about = "Heat kernels of stable-like operators by the Levi parametrix", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the kernel for a config, run its checks and write the outputs.
    #[command(after_help = EXIT_CODES)]
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ExportMode::All)]
        export: ExportMode,
        /// Neither read nor write the kernel cache.
        #[arg(long)]
        no_cache: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Command::Run {
        config,
        threads,
        cache_dir,
        export,
        no_cache,
    } = cli.command;
    let opts = RunOptions {
        threads,
        cache_dir,
        export,
        use_cache: !no_cache,
    };
    match run(&config, &opts) {
        Ok(summary) => {
            let verdict = if summary.report.passed { "PASS" } else { "FAIL" };
            println!("{verdict} ({} checks, config {})", summary.report.checks.len(), &summary.manifest.config_hash[..12]);
            for name in summary.report.failing() {
                eprintln!("failed check: {name}");
            }
            ExitCode::from(summary.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
