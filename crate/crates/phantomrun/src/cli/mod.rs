//! Command-line interface: `mine`, `reconstruct`, `parse`, `compare`,
//! `report`. Commands compose the pipeline end-to-end or run one stage
//! over an existing dataset.
//!
//! Exit codes: 0 when the requested batch completed (per-item failures
//! are data, not process failures), 1 for fatal batch errors, 2 for
//! configuration/usage errors.

mod commands;

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phantomrun_core::model::Forge;

use crate::config::PipelineConfig;
use crate::miner::{
    DenyTransport, FixtureTransport, ForgeSession, HttpTransport, RecordingTransport, RetryPolicy,
    Transport,
};
use crate::store::ArtifactStore;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Error that should terminate with a config/usage exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigUsageError(pub String);

#[derive(Debug, Parser)]
#[command(
    name = "phantomrun",
    about = "Mine failing CI runs, replay their builds in containers, and quantify fidelity",
    version
)]
pub struct Cli {
    /// Path to the pipeline config file (TOML). Missing file = defaults.
    #[arg(long, global = true, default_value = "phantomrun.toml")]
    pub config: PathBuf,

    /// Dataset root directory (overrides the config file).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,

    /// Replay forge responses from --fixtures; no network operations.
    #[arg(long, global = true)]
    pub offline: bool,

    /// Fixture directory for --offline replay or --record capture.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,

    /// Record live forge responses into --fixtures while mining.
    #[arg(long, global = true)]
    pub record: bool,

    /// Parallel replays.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    pub format: OutputFormat,

    /// Stop at the first per-item failure instead of keeping going.
    #[arg(long, global = true)]
    pub fail_fast: bool,

    /// Skip work whose manifest rows already exist.
    #[arg(long, global = true)]
    pub skip_existing: bool,

    /// Chatty progress on stderr.
    #[arg(long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// Aligned plain-text tables.
    Human,
    /// Line-delimited JSON records.
    Machine,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover repositories, enumerate runs, filter failing build
    /// workflows, and harvest their logs into the dataset.
    Mine(MineArgs),
    /// Reconstruct selected failing runs as containerized replays.
    Reconstruct(ReconstructArgs),
    /// Parse and normalize logs into the canonical representation.
    Parse(ParseArgs),
    /// Compare original and replay logs pairwise and report fidelity.
    Compare(CompareArgs),
    /// Render reconstruction success and failure-cause tables.
    Report,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Forge to mine (defaults to github).
    #[arg(long, value_parser = parse_forge, default_value = "github")]
    pub forge: Forge,
    /// Mine only these repositories (owner/name); discovery otherwise.
    #[arg(long = "repo")]
    pub repos: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Reconstruct only these run ids; every pending row otherwise.
    #[arg(long = "run-id")]
    pub run_ids: Vec<String>,
    /// Emit Dockerfile and build-script artifacts without executing.
    #[arg(long)]
    pub plan_only: bool,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Parse standalone log files instead of manifest rows.
    #[arg(long = "log")]
    pub logs: Vec<PathBuf>,
    /// Restrict manifest parsing to these run ids.
    #[arg(long = "run-id")]
    pub run_ids: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Restrict comparison to these run ids.
    #[arg(long = "run-id")]
    pub run_ids: Vec<String>,
    /// Draw a stratified proportional sample of this many records.
    #[arg(long)]
    pub sample: Option<u64>,
    /// Seed for the sample draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_forge(s: &str) -> Result<Forge, String> {
    match s {
        "github" => Ok(Forge::Github),
        "gitlab" => Ok(Forge::Gitlab),
        other => Err(format!(
            "unknown forge {other:?} (expected github or gitlab)"
        )),
    }
}

/// Everything a command needs, resolved from flags + config file.
pub struct AppContext {
    pub config: PipelineConfig,
    pub offline: bool,
    pub fixtures: Option<PathBuf>,
    pub record: bool,
    pub jobs: usize,
    pub format: OutputFormat,
    pub fail_fast: bool,
    pub skip_existing: bool,
    pub verbose: bool,
}

impl AppContext {
    pub fn from_cli(cli: &Cli) -> Result<AppContext, ConfigUsageError> {
        let mut config = if cli.config.exists() {
            PipelineConfig::load(&cli.config).map_err(|e| ConfigUsageError(e.to_string()))?
        } else {
            PipelineConfig::default()
        };
        if let Some(dataset) = &cli.dataset {
            config.dataset_root = dataset.clone();
        }
        if cli.offline && cli.fixtures.is_none() {
            return Err(ConfigUsageError(
                "--offline requires --fixtures <dir> with recorded forge responses".into(),
            ));
        }
        if cli.record && cli.fixtures.is_none() {
            return Err(ConfigUsageError(
                "--record requires --fixtures <dir>".into(),
            ));
        }
        Ok(AppContext {
            offline: cli.offline,
            fixtures: cli.fixtures.clone(),
            record: cli.record,
            jobs: cli.jobs.unwrap_or(config.runtime.parallelism).max(1),
            format: cli.format,
            fail_fast: cli.fail_fast,
            skip_existing: cli.skip_existing,
            verbose: cli.verbose,
            config,
        })
    }

    pub fn store(&self) -> anyhow::Result<ArtifactStore> {
        Ok(ArtifactStore::open(&self.config.dataset_root)?)
    }

    /// The transport for forge requests. Offline mode never constructs a
    /// network transport at all; a missing fixture is an error, not a
    /// network call.
    pub fn transport(&self) -> Arc<dyn Transport> {
        if self.offline {
            let dir = self.fixtures.as_ref().expect("validated in from_cli");
            return Arc::new(FixtureTransport::new(dir));
        }
        let http: Arc<dyn Transport> = Arc::new(HttpTransport::new());
        if self.record {
            let dir = self.fixtures.as_ref().expect("validated in from_cli");
            return Arc::new(RecordingTransport::new(http, dir));
        }
        http
    }

    /// Builds a session for `forge`. Live mode requires a PAT from the
    /// environment and fails before any network activity without one.
    pub fn session(&self, forge: Forge) -> Result<ForgeSession, ConfigUsageError> {
        let base_url = self.config.forge.base_url(forge).to_string();
        if self.offline {
            return Ok(ForgeSession::offline(forge, &base_url, self.transport()));
        }
        let token = self.config.forge.token_for(forge).ok_or_else(|| {
            ConfigUsageError(format!(
                "no token for {forge}: set {} (or {})",
                match forge {
                    Forge::Github => &self.config.forge.github_token_env,
                    Forge::Gitlab => &self.config.forge.gitlab_token_env,
                },
                self.config.forge.token_env
            ))
        })?;
        let retry = RetryPolicy {
            max_retries: 5,
            base_delay: std::time::Duration::from_millis(self.config.forge.retry_base_ms),
        };
        crate::miner::authenticate(forge, &base_url, &token, self.transport(), retry)
            .map_err(|e| ConfigUsageError(e.to_string()))
    }

    /// A deliberately unusable transport, for asserting that offline
    /// flows perform zero network operations.
    pub fn deny_transport() -> Arc<dyn Transport> {
        Arc::new(DenyTransport)
    }
}

/// Parses argv and runs the selected command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let ctx = match AppContext::from_cli(&cli) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match &cli.command {
        Command::Mine(args) => commands::cmd_mine(&ctx, args),
        Command::Reconstruct(args) => commands::cmd_reconstruct(&ctx, args),
        Command::Parse(args) => commands::cmd_parse(&ctx, args),
        Command::Compare(args) => commands::cmd_compare(&ctx, args),
        Command::Report => commands::cmd_report(&ctx),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            if e.downcast_ref::<ConfigUsageError>().is_some() {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            } else {
                eprintln!("error: {e:#}");
                EXIT_FATAL
            }
        }
    }
}

pub use commands::{cmd_compare, cmd_mine, cmd_parse, cmd_reconstruct, cmd_report};
