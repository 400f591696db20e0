mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::{EmbedArgs, PpgArgs, Ran, ServeArgs, SimulateArgs};
use config::CliConfig;
use error::CliError;
use manifest::{Outputs, RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "smartchair", version, about = "Smart-chair posture and heart-rate toolkit")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Commands write nothing outside it.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the cohort dataset and a replayable session stream.
    Simulate {
        #[arg(long)]
        subjects: Option<usize>,
        /// Seconds per posture.
        #[arg(long)]
        seconds: Option<f64>,
        /// Frame rate in Hz.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Split, train, evaluate and compare models; export the best one.
    TrainEval {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated subset of dt, rf, svm, mlp.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
    },
    /// Project the dataset to 2 or 3 dimensions with PCA or t-SNE.
    Embed {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        max_points: Option<usize>,
    },
    /// Compare the main and reference heart-rate pipelines on a synthetic trace.
    PpgValidate {
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        snr_db: Option<f64>,
        /// No drift, offset or white noise.
        #[arg(long)]
        zero_noise: bool,
    },
    /// Convert a binary model artifact to another format.
    Export {
        #[arg(long)]
        model: PathBuf,
        /// binary or firmware.
        #[arg(long, default_value = "firmware")]
        format: String,
    },
    /// Stream a session file to a running service.
    Replay {
        #[arg(long)]
        session: PathBuf,
        /// Ingest address of the service.
        #[arg(long)]
        addr: Option<String>,
        /// Playback speed; 0 sends as fast as possible.
        #[arg(long)]
        speed: Option<f64>,
    },
    /// Run the monitoring service until interrupted.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        ingest_addr: Option<String>,
        #[arg(long)]
        http_addr: Option<String>,
        #[arg(long)]
        debounce_k: Option<usize>,
        /// Stop after this many sessions have closed.
        #[arg(long)]
        max_sessions: Option<usize>,
    },
    /// Posture durations and repetitions of a stored session.
    Stats {
        /// Session file (`<storage>/<id>.ndjson`).
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::TrainEval { .. } => "train-eval",
            Command::Embed { .. } => "embed",
            Command::PpgValidate { .. } => "ppg-validate",
            Command::Export { .. } => "export",
            Command::Replay { .. } => "replay",
            Command::Serve { .. } => "serve",
            Command::Stats { .. } => "stats",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = CliConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let mut out = Outputs::new(&cli.out)?;
    let name = cli.command.name();
    let runtime = || {
        tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))
    };
    let ran: Ran = match cli.command {
        Command::Simulate { subjects, seconds, rate } => {
            commands::simulate(&cfg, seed, SimulateArgs { subjects, seconds, rate }, &mut out)?
        }
        Command::TrainEval { data, models } => commands::train_eval(&cfg, seed, &data, models, &mut out)?,
        Command::Embed { data, method, dims, max_points } => {
            commands::embed(&cfg, seed, EmbedArgs { data, method, dims, max_points }, &mut out)?
        }
        Command::PpgValidate { duration, snr_db, zero_noise } => {
            commands::ppg_validate(&cfg, seed, PpgArgs { duration, snr_db, zero_noise }, &mut out)?
        }
        Command::Export { model, format } => commands::export(&model, &format, &mut out)?,
        Command::Replay { session, addr, speed } => {
            runtime()?.block_on(commands::replay_cmd(&cfg, &session, addr, speed, &mut out))?
        }
        Command::Serve { model, ingest_addr, http_addr, debounce_k, max_sessions } => runtime()?.block_on(
            commands::serve_cmd(&cfg, ServeArgs { model, ingest_addr, http_addr, debounce_k, max_sessions }, &mut out),
        )?,
        Command::Stats { session, from, to } => commands::stats(&session, from, to, &mut out)?,
    };
    let manifest = RunManifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: ran.config,
        inputs: ran.inputs,
        outputs: out.digests()?,
        notes: ran.notes,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    std::fs::write(cli.out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("smartchair: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
