//! Shared command plumbing: error-to-exit-code mapping, dataset loading,
//! config resolution, and run-directory bookkeeping.

pub mod ablate;
pub mod eval;
pub mod generate;
pub mod train;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use signet_core::{
    ingest_tsv, CheckpointError, GraphError, HeteroGraph, IngestSummary, TensorError, TrainConfig,
    TrainError,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config file contents (exit 2).
    Config(String),
    /// Missing or malformed inputs: datasets, checkpoints, run dirs (exit 3).
    Data(String),
    /// Non-finite values or kernel failures during computation (exit 4).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Data(msg) | CliError::Numeric(msg) => {
                write!(f, "{msg}")
            }
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(msg) => CliError::Config(msg),
            TrainError::NumericHealth { .. } => CliError::Numeric(e.to_string()),
            TrainError::Tensor(t) => CliError::from(t),
            TrainError::Graph(g) => CliError::from(g),
        }
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<signet_core::EvalError> for CliError {
    fn from(e: signet_core::EvalError) -> Self {
        match e {
            signet_core::EvalError::Tensor(t) => CliError::from(t),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub fn load_dataset(dir: &Path) -> Result<(HeteroGraph, IngestSummary), CliError> {
    let nodes = dir.join("nodes.tsv");
    let edges = dir.join("edges.tsv");
    for p in [&nodes, &edges] {
        if !p.exists() {
            return Err(CliError::Data(format!("dataset file {} not found", p.display())));
        }
    }
    Ok(ingest_tsv(&nodes, &edges)?)
}

/// Resolve a config from an optional file plus `key=value` overrides
/// (flags win over file values).
pub fn resolve_config(
    config_path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<TrainConfig, CliError> {
    let mut config = match config_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            TrainConfig::from_str(&text).map_err(CliError::Config)?
        }
        None => TrainConfig::default(),
    };
    let mut problems = Vec::new();
    for (key, value) in overrides {
        if let Err(e) = config.set(key, value) {
            problems.push(e);
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Config(problems.join("\n")));
    }
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

/// Parse repeated `--set key=value` arguments.
pub fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>, CliError> {
    sets.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{s}`")))
        })
        .collect()
}

/// Create `dir`, refusing to reuse a non-empty one unless `force` is set.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(CliError::Data(format!(
                "{} exists and is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    } else {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Reproducibility record written before any long computation starts.
pub struct Manifest {
    pub digest: String,
    pub config: TrainConfig,
    pub data_dir: PathBuf,
    pub artifacts: Vec<(String, String)>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut out = String::new();
        out.push_str(&format!("config_digest={}\n", self.digest));
        out.push_str(&format!("seed={}\n", self.config.seed));
        out.push_str(&format!("model={}\n", self.config.model));
        out.push_str(&format!("cl_enabled={}\n", self.config.cl_enabled));
        out.push_str(&format!("chem_subgraph={}\n", self.config.chem_subgraph));
        out.push_str(&format!("gene_subgraph={}\n", self.config.gene_subgraph));
        out.push_str(&format!("data_dir={}\n", self.data_dir.display()));
        for (name, value) in &self.artifacts {
            out.push_str(&format!("artifact_{name}={value}\n"));
        }
        out.push_str(&format!("created_unix={}\n", unix_now()));
        fs::write(path, out)?;
        Ok(())
    }
}

/// Worker cap for ablation arms: SIGNET_THREADS, else available parallelism.
pub fn thread_cap(jobs: usize) -> usize {
    let env_cap = std::env::var("SIGNET_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    env_cap.unwrap_or(hw).min(jobs.max(1))
}
