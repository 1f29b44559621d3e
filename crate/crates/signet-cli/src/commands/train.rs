//! `signet train`: fit a model and persist the run directory.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use signet_core::{log_to_csv, save_checkpoint, split_edges, train, ModelKind};

use super::{load_dataset, parse_sets, prepare_dir, resolve_config, CliError, Manifest};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClFlag {
    On,
    Off,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory containing nodes.tsv and edges.tsv.
    pub data: PathBuf,
    /// Config file (flat key=value); flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model kind (rgcntd|rgcn|graphsage|transe).
    #[arg(long)]
    pub model: Option<String>,
    /// Cannot-Link constraint sampling.
    #[arg(long, value_enum)]
    pub cl: Option<ClFlag>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Base directory for run directories (one per config digest).
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Additional config overrides as key=value (repeatable).
    #[arg(long = "set")]
    pub sets: Vec<String>,
    /// Overwrite an existing run directory.
    #[arg(long)]
    pub force: bool,
}

/// Run training; returns the run directory.
pub fn run(args: TrainArgs) -> Result<PathBuf, CliError> {
    let mut overrides = parse_sets(&args.sets)?;
    if let Some(model) = &args.model {
        // surface unknown model names with the accepted list
        model
            .parse::<ModelKind>()
            .map_err(CliError::Config)?;
        overrides.push(("model".to_string(), model.clone()));
    }
    if let Some(cl) = args.cl {
        overrides.push(("cl_enabled".to_string(), (cl == ClFlag::On).to_string()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    let config = resolve_config(args.config.as_deref(), &overrides)?;

    let (graph, summary) = load_dataset(&args.data)?;
    if config.chem_subgraph && graph.chem_chem_edges().is_empty() {
        return Err(CliError::Config(
            "chem_subgraph enabled but the dataset has no chem_chem edges".into(),
        ));
    }
    if config.gene_subgraph && graph.gene_gene_edges().is_empty() {
        return Err(CliError::Config(
            "gene_subgraph enabled but the dataset has no gene_gene edges".into(),
        ));
    }

    let run_dir = args.out.join(config.digest_hex());
    prepare_dir(&run_dir, args.force)?;
    let manifest = Manifest {
        digest: config.digest_hex(),
        config: config.clone(),
        data_dir: args.data.clone(),
        artifacts: vec![
            ("config".into(), "config.txt".into()),
            ("checkpoint".into(), "checkpoint.bin".into()),
            ("train_log".into(), "train_log.csv".into()),
        ],
    };
    manifest.write(&run_dir.join("manifest.txt"))?;
    fs::write(run_dir.join("config.txt"), config.to_canonical_string())?;

    println!(
        "data: {} chemicals, {} genes, {} chemical-gene edges",
        summary.n_chem,
        summary.n_gene,
        summary.edges_per_relation.iter().sum::<usize>()
    );
    let split = split_edges(&graph, config.ratios()?, config.seed)?;
    for warning in &split.warnings {
        eprintln!("warning: {warning}");
    }

    let outcome = train(&graph, &split, &config)?;
    for record in &outcome.log {
        if record.split == "train"
            && (record.epoch % config.print_step.max(1) == 0 || record.epoch == 1)
        {
            println!("epoch {:>4} train loss {:.6}", record.epoch, record.loss);
        }
    }
    if outcome.stopped_early {
        println!(
            "early stop: best validation loss {:.6} at epoch {}",
            outcome.state.best_val_loss, outcome.state.best_epoch
        );
    }
    if outcome.collisions > 0 {
        println!("negative-sampling collisions: {}", outcome.collisions);
    }

    fs::write(run_dir.join("train_log.csv"), log_to_csv(&outcome.log))?;
    save_checkpoint(
        &outcome.state.model,
        outcome.state.best_epoch,
        outcome.state.best_val_loss,
        &config.digest(),
        &run_dir.join("checkpoint.bin"),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;

    println!("run directory: {}", run_dir.display());
    Ok(run_dir)
}
