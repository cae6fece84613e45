//! `ird`: generate, analyze and predict inhomogeneous random digraphs.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit codes: 0 ok, 1 other failure, 2 configuration or input, 3 model validity, 4 output exists.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn exists(path: &std::path::Path) -> Self {
        Self {
            code: 4,
            message: format!("{} already exists (pass --force to overwrite)", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ird_core::Error> for CliError {
    fn from(e: ird_core::Error) -> Self {
        use ird_core::Error::*;
        let code = match e {
            Config(_) | Domain(_) | Coverage { .. } | Parse { .. } | InsufficientData(_) => 2,
            ModelValidity(_) => 3,
            Numerical { .. } | Io(_) => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "ird", about = "Inhomogeneous random digraphs", version)]
struct Cli {
    /// Worker threads; output never depends on this.
    #[arg(long, global = true, env = "IRD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph and write it as a tab-separated edge list.
    Generate {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Report statistics of an edge list as JSON.
    Analyze {
        /// Edge list written by `generate`.
        input: PathBuf,
        /// Where to write the joint degree table (default: `<input>.degrees.csv`).
        #[arg(long)]
        degree_table: Option<PathBuf>,
        /// Truncation levels for the fraction of vertices with both components >= k.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Print limit predictions for the configured model as JSON.
    Predict {
        #[arg(long, short)]
        config: PathBuf,
        /// Also write the limiting joint degree pmf as CSV.
        #[arg(long)]
        pmf: Option<PathBuf>,
        /// Largest in- and out-degree in the pmf table.
        #[arg(long, default_value_t = 20)]
        pmf_cutoff: u64,
    },
    /// Run the configured sweep and write CSV plus a JSON sidecar.
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print the version.
    Version,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Generate {
            config,
            output,
            force,
        } => commands::generate(&config, &output, force),
        Command::Analyze {
            input,
            degree_table,
            k,
        } => commands::analyze(&input, degree_table, &k),
        Command::Predict {
            config,
            pmf,
            pmf_cutoff,
        } => commands::predict(&config, pmf.as_deref(), pmf_cutoff),
        Command::Sweep {
            config,
            output,
            force,
        } => commands::sweep(&config, &output, force),
        Command::Version => {
            println!("ird {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
