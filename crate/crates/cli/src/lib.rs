//! Command implementations behind the `coachsim` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use coachsim::coach::{
    json_schema, parse_episode, parse_robot_config, validate_value, Backend, BackendKind, Pipeline, RemoteBackend,
    RobotConfigState, SchemaId, StubBackend, Validation, CREDENTIAL_ENV,
};
use coachsim::curriculum::PolicyKind;
use coachsim::sim::report::{format_raw, format_significance, format_summary, parse_raw};
use coachsim::sim::{simulate_records, ExperimentConfig, ExperimentReport};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const RAW_FILE: &str = "raw.csv";
pub const SIGNIFICANCE_FILE: &str = "significance.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "coachsim", version, about = "Curriculum simulations and post-episode coaching")]
pub struct Cli {
    /// Override the master seed of the experiment configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (simulate, analyze, schemas) or file (coach).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the policy comparison and write summary, raw, significance and manifest files.
    Simulate(SimulateArgs),
    /// Recompute summary and significance from a raw records file.
    Analyze(AnalyzeArgs),
    /// Run the coaching pipeline on a recorded episode.
    Coach(CoachArgs),
    /// Export the JSON schemas of the five backend payloads.
    Schemas,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Raw records written by `simulate`.
    pub raw: PathBuf,
    /// Keep only these policies.
    #[arg(long = "policy", value_parser = parse_policy)]
    pub policies: Vec<PolicyKind>,
    /// Keep only these skill counts.
    #[arg(long = "skill-count")]
    pub skill_counts: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct CoachArgs {
    /// Episode file (JSON).
    pub episode: PathBuf,
    #[arg(long, default_value = "stub", value_parser = parse_backend)]
    pub backend: BackendKind,
    /// URL of the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable holding the remote backend credential.
    #[arg(long, default_value = CREDENTIAL_ENV)]
    pub credential_env: String,
    /// Per-request timeout of the remote backend, in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout_sec: f64,
    /// Robot configuration before the episode (JSON); defaults when omitted.
    #[arg(long)]
    pub robot_config: Option<PathBuf>,
    /// Transcribed user feedback; overrides any feedback in the episode file.
    #[arg(long)]
    pub feedback: Option<String>,
    /// Write zero stage latencies, for byte-comparable output.
    #[arg(long)]
    pub zero_latencies: bool,
}

fn parse_policy(s: &str) -> std::result::Result<PolicyKind, String> {
    s.parse().map_err(|e: coachsim::Error| e.to_string())
}

fn parse_backend(s: &str) -> std::result::Result<BackendKind, String> {
    s.parse().map_err(|e: coachsim::Error| e.to_string())
}

/// Hex SHA-256 of the resolved configuration's canonical JSON form.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a TOML experiment configuration; unknown keys are errors.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str::<ExperimentConfig>(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub artifact_version: String,
    pub started_unix_sec: u64,
    pub finished_unix_sec: u64,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes every file or none: on any failure the files already written are
/// removed again.
pub fn write_all_or_nothing(files: &[(PathBuf, String)]) -> Result<()> {
    let mut written: Vec<&Path> = Vec::new();
    for (path, content) in files {
        if let Err(e) = fs::write(path, content) {
            for p in written {
                let _ = fs::remove_file(p);
            }
            return Err(e).with_context(|| format!("writing {}", path.display()));
        }
        written.push(path);
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => bail!("--threads must be >= 1"),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
    }
}

pub fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), cli.seed)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let hash = config_hash(&cfg);
    let started = unix_now();
    log::info!(
        "simulating {} learners x {:?} skills x {} policies (seed {})",
        cfg.n_learners,
        cfg.skill_counts,
        cfg.policies.len(),
        cfg.master_seed
    );
    let records = with_pool(cli.threads, || simulate_records(&cfg))??;
    let report = ExperimentReport::from_records(records);

    let seed = cfg.master_seed.to_string();
    let tags = [("manifest", hash.as_str()), ("master_seed", seed.as_str())];
    let mut files = vec![
        (out.join(SUMMARY_FILE), format_summary(&report.summary, &tags)),
        (out.join(RAW_FILE), format_raw(&report.records, &tags)),
        (out.join(SIGNIFICANCE_FILE), format_significance(&report.significance, &tags)),
    ];
    let manifest = RunManifest {
        config_hash: hash.clone(),
        master_seed: cfg.master_seed,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_sec: started,
        finished_unix_sec: unix_now(),
        outputs: files.iter().map(|(p, _)| p.display().to_string()).collect(),
        config: cfg,
    };
    files.push((out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n"));
    ensure_dir(&out)?;
    write_all_or_nothing(&files)?;
    println!("wrote {} records to {}", report.records.len(), out.display());
    Ok(())
}

pub fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<()> {
    let text = fs::read_to_string(&args.raw).with_context(|| format!("reading {}", args.raw.display()))?;
    let table = parse_raw(&text).with_context(|| format!("invalid raw records {}", args.raw.display()))?;
    let records: Vec<_> = table
        .records
        .into_iter()
        .filter(|r| args.policies.is_empty() || args.policies.contains(&r.policy))
        .filter(|r| args.skill_counts.is_empty() || args.skill_counts.contains(&r.skill_count))
        .collect();
    if records.is_empty() {
        bail!("no records left after filtering");
    }
    let report = ExperimentReport::from_records(records);
    let tags: Vec<(&str, &str)> = table.tags.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();

    let mut files = vec![(SUMMARY_FILE, format_summary(&report.summary, &tags))];
    if report.significance.is_empty() {
        eprintln!("notice: significance omitted; the records hold no adaptive-versus-baseline pair");
    } else {
        files.push((SIGNIFICANCE_FILE, format_significance(&report.significance, &tags)));
    }
    match &cli.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let files: Vec<(PathBuf, String)> = files.into_iter().map(|(n, c)| (dir.join(n), c)).collect();
            write_all_or_nothing(&files)?;
        }
        None => {
            for (_, content) in files {
                print!("{content}");
            }
        }
    }
    Ok(())
}

fn build_backend(args: &CoachArgs) -> Result<Box<dyn Backend>> {
    Ok(match args.backend {
        BackendKind::Stub => Box::new(StubBackend),
        BackendKind::Remote => {
            let Some(endpoint) = &args.endpoint else {
                bail!("--backend remote requires --endpoint");
            };
            if !(args.timeout_sec.is_finite() && args.timeout_sec > 0.0) {
                bail!("--timeout-sec must be positive");
            }
            Box::new(RemoteBackend::from_env(
                endpoint.clone(),
                &args.credential_env,
                Duration::from_secs_f64(args.timeout_sec),
            )?)
        }
    })
}

pub fn cmd_coach(cli: &Cli, args: &CoachArgs) -> Result<()> {
    let text = fs::read_to_string(&args.episode).with_context(|| format!("reading {}", args.episode.display()))?;
    let episode = parse_episode(&text).with_context(|| format!("invalid episode {}", args.episode.display()))?;
    let robot = match &args.robot_config {
        Some(p) => {
            let raw = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_robot_config(&raw)?
        }
        None => RobotConfigState::default(),
    };
    let pipeline = Pipeline::new(build_backend(args)?);
    let output = with_pool(cli.threads, || pipeline.run(&episode, robot, args.feedback.as_deref()))??;
    let output = if args.zero_latencies { output.without_timing() } else { output };
    if output.fallback_flags.any() {
        log::warn!("some stages fell back to conservative defaults: {:?}", output.fallback_flags);
    }
    let json = output.to_json_pretty();
    match &cli.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                ensure_dir(dir)?;
            }
            write_all_or_nothing(&[(path.clone(), json)])?;
        }
        None => print!("{json}"),
    }
    Ok(())
}

/// File name of an exported schema.
pub fn schema_file_name(id: SchemaId) -> String {
    format!("{}.schema.json", id.as_str())
}

pub fn cmd_schemas(cli: &Cli) -> Result<()> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("schemas"));
    let mut files = Vec::new();
    for id in SchemaId::ALL {
        // every schema must accept its own example before it is shipped
        if !matches!(validate_value(&id.example(), id), Validation::Valid(_)) {
            bail!("schema {id} rejects its own example");
        }
        files.push((dir.join(schema_file_name(id)), serde_json::to_string_pretty(&json_schema(id))? + "\n"));
    }
    ensure_dir(&dir)?;
    write_all_or_nothing(&files)?;
    println!("wrote {} schemas to {}", files.len(), dir.display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Analyze(a) => cmd_analyze(cli, a),
        Command::Coach(a) => cmd_coach(cli, a),
        Command::Schemas => cmd_schemas(cli),
    }
}
