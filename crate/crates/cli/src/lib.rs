//! `smelldata` command line: one subcommand per pipeline stage, plus `run`
//! for the whole pipeline and `serve` for the review service.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use smelldata_core::pipeline::{self, PipelineConfig, PipelineError};

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const MISSING_INPUT: i32 = 3;
    pub const VALIDATION: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "smelldata", version, about = "Generate labeled code smell datasets from Java sources")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    /// More logging on stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline configuration file (TOML).
    #[arg(short, long, global = true, default_value = "smelldata.toml")]
    pub config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Threshold override, e.g. `--threshold lm_max=20` (repeatable).
    #[arg(long = "threshold", global = true, value_name = "KEY=VALUE")]
    pub thresholds: Vec<String>,
    /// Seed for negative down-sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Down-sample TRAIN negatives to the positive count on export.
    #[arg(long, global = true)]
    pub balance: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the corpora and write model.json.
    Ingest,
    /// Collect original candidates and run the smell generators.
    Generate,
    /// Route candidates into auto-accepted, manual-review or discarded.
    Group,
    /// Merge auto labels with reviewed annotations into dataset.jsonl.
    Export,
    /// Print dataset counts.
    Stats {
        /// Dataset file; defaults to the output directory's dataset.jsonl.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Re-check dataset invariants; exits 4 on any violation.
    Validate {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Serve the manual-review queue over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, default_value_t = smelldata_core::review::DEFAULT_LEASE_MINUTES)]
        lease_minutes: i64,
    },
    /// ingest, generate, group, export and validate in one go.
    Run,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Pipeline(PipelineError),
    Other(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Pipeline(PipelineError::Config(_)) => exit::CONFIG,
            CliError::Pipeline(PipelineError::MissingInput(_)) => exit::MISSING_INPUT,
            CliError::Pipeline(PipelineError::Validation(_)) => exit::VALIDATION,
            _ => exit::FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Pipeline(PipelineError::Validation(errs)) => {
                writeln!(f, "dataset validation failed:")?;
                for e in errs {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            CliError::Pipeline(e) => write!(f, "{e}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads the TOML configuration and applies command-line overrides.
/// Relative paths in the file are taken relative to the file itself.
pub fn load_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let path = &common.config;
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Pipeline(PipelineError::MissingInput(path.clone())),
        _ => CliError::Other(format!("{}: {e}", path.display())),
    })?;
    let mut cfg: PipelineConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.output.dir = resolve(&base, &cfg.output.dir);
    for c in &mut cfg.corpus {
        for r in &mut c.root_dirs {
            *r = resolve(&base, r);
        }
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    for kv in &common.thresholds {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("threshold override {kv:?} is not KEY=VALUE")))?;
        let v: usize = v.trim().parse().map_err(|_| CliError::Config(format!("threshold {k} needs an integer")))?;
        cfg.thresholds.set(k.trim(), v).map_err(CliError::Config)?;
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.balance {
        cfg.balance = true;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Runs one subcommand, printing its report on stdout.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.common)?;
    let a = cfg.artifacts();
    match &cli.command {
        Command::Ingest => {
            let models = pipeline::ingest(&cfg)?;
            pipeline::write_models(&cfg, &models)?;
            for m in &models {
                println!("{}: {} files, {} classes", m.project_id, m.files.len(), m.classes.len());
            }
        }
        Command::Generate => {
            let models = pipeline::read_models(&cfg)?;
            let (c, d) = pipeline::generate(&models, &cfg.thresholds);
            pipeline::write_candidates(&cfg, &c, &d)?;
            println!("{} candidates, {} discarded transformations", c.len(), d.len());
        }
        Command::Group => {
            let c = pipeline::read_candidates(&cfg)?;
            let records = pipeline::group(&cfg, c)?;
            pipeline::write_samples(&cfg, &records)?;
            print!("{}", smelldata_core::store::compute_stats(&records).render());
        }
        Command::Export => {
            let samples = pipeline::read_samples(&cfg)?;
            let log = pipeline::read_annotations(&a.annotations())?;
            let e = pipeline::export(&cfg, samples, log)?;
            pipeline::write_export(&cfg, &e)?;
            print!("{}", e.stats.render());
        }
        Command::Stats { dataset, json } => {
            let path = dataset.clone().unwrap_or_else(|| a.dataset());
            let st = smelldata_core::store::compute_stats(&pipeline::read_dataset(&path)?);
            if *json {
                println!("{}", serde_json::to_string_pretty(&st).map_err(|e| CliError::Other(e.to_string()))?);
            } else {
                print!("{}", st.render());
            }
        }
        Command::Validate { dataset } => {
            let path = dataset.clone().unwrap_or_else(|| a.dataset());
            let st = pipeline::validate(&cfg, &pipeline::read_dataset(&path)?)?;
            print!("{}", st.render());
            println!("ok: {} records satisfy every dataset invariant", st.total);
        }
        Command::Serve { bind, lease_minutes } => {
            let state = smelldata_review::ReviewState::open(
                cfg.clone(),
                Arc::new(smelldata_review::SystemClock),
                chrono::Duration::minutes(*lease_minutes),
            )?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
            rt.block_on(smelldata_review::serve(*bind, Arc::new(state)))
                .map_err(|e| CliError::Other(format!("review service: {e}")))?;
        }
        Command::Run => {
            let s = pipeline::run(&cfg)?;
            println!("grouped samples:");
            print!("{}", s.grouped.render());
            println!("exported dataset:");
            print!("{}", s.stats.render());
            println!(
                "{} candidates, {} grouped, {} discarded transformations, dataset at {}",
                s.candidates,
                s.samples,
                s.discards,
                a.dataset().display()
            );
        }
    }
    Ok(())
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(level).try_init();
}
