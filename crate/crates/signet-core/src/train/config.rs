//! Experiment configuration: flat `key=value` text, defaults, validation,
//! and the canonical digest that names run directories.

use sha2::{Digest, Sha256};

use crate::encoder::SubgraphToggles;
use crate::graph::SplitRatios;
use crate::model::{ModelHyper, ModelKind};
use crate::tensor::Activation;

/// How the constraint loss reduces over pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClReduction {
    Mean,
    Sum,
}

/// Interpretation of the polar-edge AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AucPolarityMode {
    /// (N_correct - N_wrong) / N in [-1, 1].
    Signed,
    /// N_correct / N in [0, 1].
    Accuracy,
}

/// All training and evaluation knobs. Field names match the config-file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dimensions: Vec<usize>,
    pub learning_rate: f64,
    pub regularization: f64,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub grad_norm: f64,
    pub cl_enabled: bool,
    pub cl_weight: f64,
    pub cl_reduction: ClReduction,
    pub patience: usize,
    pub seed: u64,
    pub chem_subgraph: bool,
    pub gene_subgraph: bool,
    pub n_negatives: usize,
    pub test_batch_size: usize,
    pub print_step: usize,
    pub ap_k: usize,
    pub cp_k: usize,
    pub n_bases: usize,
    pub split_ratios: (f64, f64, f64),
    pub hidden_activation: Activation,
    pub neighbor_samples: usize,
    pub transe_gamma: f64,
    pub auc_polarity_mode: AucPolarityMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Rgcntd,
            epochs: 50,
            batch_size: 64,
            hidden_dimensions: vec![32, 16],
            learning_rate: 1e-2,
            regularization: 1e-4,
            grad_norm: 1.0,
            cl_enabled: false,
            cl_weight: 1.0,
            cl_reduction: ClReduction::Mean,
            patience: 5,
            seed: 0,
            chem_subgraph: false,
            gene_subgraph: false,
            n_negatives: 1,
            test_batch_size: 8192,
            print_step: 10,
            ap_k: 20,
            cp_k: 500,
            n_bases: 4,
            split_ratios: (0.8, 0.1, 0.1),
            hidden_activation: Activation::Tanh,
            neighbor_samples: 10,
            transe_gamma: 2.0,
            auc_polarity_mode: AucPolarityMode::Signed,
        }
    }
}

impl TrainConfig {
    /// Parse `key=value` lines (`#` comments and blank lines skipped) on top
    /// of the defaults.
    pub fn from_str(text: &str) -> Result<Self, String> {
        let mut config = TrainConfig::default();
        let mut problems = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim().trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((key, value)) => {
                    if let Err(e) = config.set(key.trim(), value.trim()) {
                        problems.push(format!("line {}: {}", lineno + 1, e));
                    }
                }
                None => problems.push(format!(
                    "line {}: expected key=value, got `{line}`",
                    lineno + 1
                )),
            }
        }
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(problems.join("\n"))
        }
    }

    /// Set one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| format!("bad value `{value}` for {key}: {e}"))
        }
        match key {
            "model" => self.model = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "hidden_dimensions" => {
                let dims: Result<Vec<usize>, _> = value
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|p| p.trim().parse())
                    .collect();
                self.hidden_dimensions =
                    dims.map_err(|e| format!("bad value `{value}` for {key}: {e}"))?;
            }
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "regularization" => self.regularization = parse(key, value)?,
            "grad_norm" => self.grad_norm = parse(key, value)?,
            "cl_enabled" => self.cl_enabled = parse(key, value)?,
            "cl_weight" => self.cl_weight = parse(key, value)?,
            "cl_reduction" => {
                self.cl_reduction = match value {
                    "mean" => ClReduction::Mean,
                    "sum" => ClReduction::Sum,
                    other => return Err(format!("bad value `{other}` for {key} (mean|sum)")),
                }
            }
            "patience" => self.patience = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "chem_subgraph" => self.chem_subgraph = parse(key, value)?,
            "gene_subgraph" => self.gene_subgraph = parse(key, value)?,
            "n_negatives" => self.n_negatives = parse(key, value)?,
            "test_batch_size" => self.test_batch_size = parse(key, value)?,
            "print_step" => self.print_step = parse(key, value)?,
            "ap_k" => self.ap_k = parse(key, value)?,
            "cp_k" => self.cp_k = parse(key, value)?,
            "n_bases" => self.n_bases = parse(key, value)?,
            "split_ratios" => {
                let parts: Result<Vec<f64>, _> =
                    value.split(',').map(|p| p.trim().parse()).collect();
                let parts = parts.map_err(|e| format!("bad value `{value}` for {key}: {e}"))?;
                if parts.len() != 3 {
                    return Err(format!("{key} needs three comma-separated fractions"));
                }
                self.split_ratios = (parts[0], parts[1], parts[2]);
            }
            "hidden_activation" => self.hidden_activation = parse(key, value)?,
            "neighbor_samples" => self.neighbor_samples = parse(key, value)?,
            "transe_gamma" => self.transe_gamma = parse(key, value)?,
            "auc_polarity_mode" => {
                self.auc_polarity_mode = match value {
                    "signed" => AucPolarityMode::Signed,
                    "accuracy" => AucPolarityMode::Accuracy,
                    other => return Err(format!("bad value `{other}` for {key} (signed|accuracy)")),
                }
            }
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// All problems with the current values, combined into one report.
    pub fn validate(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        if self.epochs == 0 {
            problems.push("epochs must be >= 1".to_string());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be >= 1".to_string());
        }
        if self.hidden_dimensions.is_empty() || self.hidden_dimensions.contains(&0) {
            problems.push("hidden_dimensions must be non-empty positive integers".to_string());
        }
        if self.learning_rate <= 0.0 {
            problems.push("learning_rate must be positive".to_string());
        }
        if self.regularization < 0.0 {
            problems.push("regularization must be non-negative".to_string());
        }
        if self.cl_weight < 0.0 {
            problems.push("cl_weight must be non-negative".to_string());
        }
        if self.patience == 0 {
            problems.push("patience must be >= 1".to_string());
        }
        if self.n_negatives == 0 {
            problems.push("n_negatives must be >= 1".to_string());
        }
        if self.test_batch_size == 0 {
            problems.push("test_batch_size must be >= 1".to_string());
        }
        if self.ap_k == 0 {
            problems.push("ap_k must be >= 1".to_string());
        }
        if self.cp_k == 0 {
            problems.push("cp_k must be >= 1".to_string());
        }
        if self.n_bases == 0 {
            problems.push("n_bases must be >= 1".to_string());
        }
        if self.neighbor_samples == 0 {
            problems.push("neighbor_samples must be >= 1".to_string());
        }
        let (a, b, c) = self.split_ratios;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            problems.push(format!(
                "split_ratios must be positive and sum to 1, got {a},{b},{c}"
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("\n"))
        }
    }

    /// Canonical serialization: every field, sorted by key, one per line.
    pub fn to_canonical_string(&self) -> String {
        let act = match self.hidden_activation {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        };
        let mut pairs = vec![
            ("ap_k".to_string(), self.ap_k.to_string()),
            (
                "auc_polarity_mode".to_string(),
                match self.auc_polarity_mode {
                    AucPolarityMode::Signed => "signed".to_string(),
                    AucPolarityMode::Accuracy => "accuracy".to_string(),
                },
            ),
            ("batch_size".to_string(), self.batch_size.to_string()),
            ("chem_subgraph".to_string(), self.chem_subgraph.to_string()),
            ("cl_enabled".to_string(), self.cl_enabled.to_string()),
            (
                "cl_reduction".to_string(),
                match self.cl_reduction {
                    ClReduction::Mean => "mean".to_string(),
                    ClReduction::Sum => "sum".to_string(),
                },
            ),
            ("cl_weight".to_string(), format!("{}", self.cl_weight)),
            ("cp_k".to_string(), self.cp_k.to_string()),
            ("epochs".to_string(), self.epochs.to_string()),
            ("gene_subgraph".to_string(), self.gene_subgraph.to_string()),
            ("grad_norm".to_string(), format!("{}", self.grad_norm)),
            (
                "hidden_activation".to_string(),
                act.to_string(),
            ),
            (
                "hidden_dimensions".to_string(),
                self.hidden_dimensions
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("learning_rate".to_string(), format!("{}", self.learning_rate)),
            ("model".to_string(), self.model.to_string()),
            ("n_bases".to_string(), self.n_bases.to_string()),
            ("n_negatives".to_string(), self.n_negatives.to_string()),
            (
                "neighbor_samples".to_string(),
                self.neighbor_samples.to_string(),
            ),
            ("patience".to_string(), self.patience.to_string()),
            ("print_step".to_string(), self.print_step.to_string()),
            ("regularization".to_string(), format!("{}", self.regularization)),
            ("seed".to_string(), self.seed.to_string()),
            (
                "split_ratios".to_string(),
                format!(
                    "{},{},{}",
                    self.split_ratios.0, self.split_ratios.1, self.split_ratios.2
                ),
            ),
            ("test_batch_size".to_string(), self.test_batch_size.to_string()),
            ("transe_gamma".to_string(), format!("{}", self.transe_gamma)),
        ];
        pairs.sort();
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(&k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.to_canonical_string().as_bytes());
        hasher.finalize().into()
    }

    /// Short hex digest used for run-directory names.
    pub fn digest_hex(&self) -> String {
        self.digest()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn toggles(&self) -> SubgraphToggles {
        SubgraphToggles {
            chem: self.chem_subgraph,
            gene: self.gene_subgraph,
        }
    }

    pub fn ratios(&self) -> Result<SplitRatios, crate::graph::GraphError> {
        SplitRatios::new(self.split_ratios.0, self.split_ratios.1, self.split_ratios.2)
    }

    pub fn model_hyper(&self) -> ModelHyper {
        ModelHyper {
            kind: self.model,
            hidden_dims: self.hidden_dimensions.clone(),
            n_bases: self.n_bases,
            toggles: self.toggles(),
            hidden_activation: self.hidden_activation,
            neighbor_samples: self.neighbor_samples,
            transe_gamma: self.transe_gamma,
        }
    }
}
