//! `trajvault`: inspect, profile and resample multi-agent trajectory vaults.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FlagValues, Format, Settings};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "trajvault",
    version,
    about = "Inspect, profile and resample trajectory vaults"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Output format [env: TRAJVAULT_FORMAT]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads [env: TRAJVAULT_THREADS]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Config file of `key = value` lines [env: TRAJVAULT_CONFIG]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List columns, dtypes, shapes and counts
    DescribeStructure { vault: PathBuf },
    /// Episode return summary, histogram and density
    DescribeReturns {
        vault: PathBuf,
        /// Histogram bins [env: TRAJVAULT_BINS]
        #[arg(long)]
        bins: Option<usize>,
        /// Directory for CSV, plot-spec JSON and SVG files
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coverage report and count-frequency spectrum
    DescribeCoverage {
        vault: PathBuf,
        /// Keep full keys instead of digests
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One summary row per vault
    Summary {
        #[arg(required = true)]
        vaults: Vec<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        /// Directory for per-vault histograms
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subsample whole episodes to a transition budget
    Subsample {
        vault: PathBuf,
        #[arg(long)]
        transitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target return distribution as JSON `{"edges": [...], "probs": [...]}`
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing output vault
        #[arg(long)]
        force: bool,
    },
    /// Concatenate vaults with the same schema
    Combine {
        #[arg(required = true)]
        vaults: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Subsample two vaults to matching return histograms
    Match {
        first: PathBuf,
        second: PathBuf,
        /// Transition budget per side; defaults to the larger input
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; receives `first/` and `second/`
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Select episodes with a target return mean and standard deviation
    Construct {
        pool: PathBuf,
        #[arg(long)]
        mean: f64,
        #[arg(long)]
        std: f64,
        #[arg(long)]
        episodes: usize,
        /// Mean and std tolerances, `MEAN,STD`
        #[arg(long, default_value = "0.1,0.1")]
        tol: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = trajvault_core::resample::DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Rebuild a resampled vault from its source and selection plan
    Replay {
        source: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Download a packed vault, verify it and install it
    Fetch {
        /// http, https or file URL of a .tar.gz vault
        url: Option<String>,
        /// Install location; defaults to a directory under the cache
        #[arg(long)]
        dest: Option<PathBuf>,
        /// Cache directory [env: TRAJVAULT_CACHE_DIR]
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// List the built-in dataset registry instead
        #[arg(long, conflicts_with = "url")]
        list: bool,
    },
    /// Pack a vault directory into a deterministic .tar.gz
    Pack { vault: PathBuf, archive: PathBuf },
    /// Import a JSON-lines file as a vault
    Import {
        input: PathBuf,
        /// JSON import schema: `{"agents": [...], "mapping": {...}}`
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Check a vault's datasheet
    Lint {
        vault: PathBuf,
        /// Directory written by describe-returns / describe-coverage --out
        #[arg(long)]
        attach: Option<PathBuf>,
        /// Compute the analyses instead of reading them
        #[arg(long, conflicts_with = "attach")]
        compute: bool,
        /// Exit 2 when any error-severity finding is reported
        #[arg(long)]
        strict: bool,
    },
    /// Generate a synthetic vault
    Synth {
        /// Generator spec JSON; defaults apply when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        quality: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generate a uniform return pool `LO,HI` instead
        #[arg(long, conflicts_with = "spec")]
        pool: Option<String>,
        /// Episode length for --pool
        #[arg(long, default_value_t = 50)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

impl Command {
    fn flag_values(&self, global: &GlobalArgs) -> FlagValues {
        let bins = match self {
            Command::DescribeReturns { bins, .. }
            | Command::Summary { bins, .. }
            | Command::Match { bins, .. } => *bins,
            _ => None,
        };
        let cache_dir = match self {
            Command::Fetch { cache_dir, .. } => cache_dir.clone(),
            _ => None,
        };
        FlagValues {
            format: global.format,
            threads: global.threads,
            cache_dir,
            bins,
        }
    }
}

fn settings_for(cli: &Cli) -> Result<Settings, CliError> {
    let file = config::load_config_file(cli.global.config.as_deref())?;
    Settings::resolve(
        &cli.command.flag_values(&cli.global),
        |k| std::env::var(k).ok(),
        &file,
    )
}

fn run(cli: Cli, settings: &Settings) -> Result<String, CliError> {
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::user(format!("cannot size thread pool: {e}")))?;
    }
    commands::execute(cli.command, settings)
}

fn report(e: &CliError, json: bool) -> ExitCode {
    eprintln!("error: {}", e.message);
    if json {
        println!(
            "{}",
            serde_json::json!({"error": e.message, "exit_code": e.exit_code()})
        );
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let settings = match settings_for(&cli) {
        Ok(s) => s,
        Err(e) => return report(&e, cli.global.format == Some(Format::Json)),
    };
    let json = settings.format == Format::Json;
    match run(cli, &settings) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => report(&e, json),
    }
}
