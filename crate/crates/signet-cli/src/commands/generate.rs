//! `signet generate`: synthetic dataset emission.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use signet_core::{generate_synthetic, write_tsv, SyntheticConfig};

use super::{prepare_dir, CliError};

#[derive(Args)]
pub struct GenerateArgs {
    /// Number of chemical nodes.
    #[arg(long, default_value_t = 50)]
    pub chem: usize,
    /// Number of gene nodes.
    #[arg(long, default_value_t = 50)]
    pub gene: usize,
    /// Probability that a (chemical, gene) pair receives an edge.
    #[arg(long, default_value_t = 0.05)]
    pub density: f64,
    /// Probability that a pair's relation follows the planted sign product.
    #[arg(long = "polarity-signal", default_value_t = 0.9)]
    pub polarity_signal: f64,
    /// Probability of a coexisting Binding edge on a sampled pair.
    #[arg(long = "binding-fraction", default_value_t = 0.15)]
    pub binding_fraction: f64,
    /// Base probability of same-sign homogeneous edges.
    #[arg(long = "homo-density", default_value_t = 0.03)]
    pub homo_density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset directory.
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// Overwrite an existing non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let config = SyntheticConfig {
        n_chem: args.chem,
        n_gene: args.gene,
        density: args.density,
        polarity_signal: args.polarity_signal,
        binding_fraction: args.binding_fraction,
        homo_density: args.homo_density,
        seed: args.seed,
    };
    let (graph, meta) =
        generate_synthetic(&config).map_err(|e| CliError::Config(e.to_string()))?;

    prepare_dir(&args.out, args.force)?;
    write_tsv(
        &graph,
        &args.out.join("nodes.tsv"),
        &args.out.join("edges.tsv"),
    )?;

    let mut signs = String::from("# node_id\tkind\tlatent_sign\n");
    for (i, s) in meta.chem_signs.iter().enumerate() {
        signs.push_str(&format!("c{i}\tchemical\t{s:+}\n"));
    }
    for (i, s) in meta.gene_signs.iter().enumerate() {
        signs.push_str(&format!("g{i}\tgene\t{s:+}\n"));
    }
    fs::write(args.out.join("generator_meta.tsv"), signs)?;

    let mut summary = String::new();
    summary.push_str(&format!(
        "seed={} chem={} gene={} density={} polarity_signal={} binding_fraction={} homo_density={}\n",
        args.seed, args.chem, args.gene, args.density, args.polarity_signal,
        args.binding_fraction, args.homo_density
    ));
    for rel in signet_core::RelationType::ALL {
        summary.push_str(&format!("{}={}\n", rel, graph.edges(rel).len()));
    }
    summary.push_str(&format!("chem_chem={}\n", graph.chem_chem_edges().len()));
    summary.push_str(&format!("gene_gene={}\n", graph.gene_gene_edges().len()));
    fs::write(args.out.join("generate_summary.txt"), summary)?;

    println!(
        "wrote {} ({} chemical-gene edges)",
        args.out.display(),
        graph.edge_count()
    );
    Ok(())
}
