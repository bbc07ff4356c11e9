//! Experiment configuration: command-line definitions, JSON round-trip via
//! `--config`, flag-over-file merging, and validation with actionable
//! messages.
//!
//! A finished run emits its fully resolved config as `config.json`; feeding
//! that file back through `--config` reproduces the run bit for bit.

use clap::{Args, Parser, Subcommand};
use krausopt::qml::load_dataset;
use krausopt::reg::RegKind;
use krausopt::tomo::APP_C_GRID;
use krausopt::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(
    name = "krausopt",
    version,
    about = "Quantum-channel optimization experiments on the Stiefel manifold of Kraus stacks"
)]
pub struct Cli {
    /// JSON experiment config; explicit flags override file values.
    #[arg(long, value_name = "PATH", global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<CliCommand>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Process tomography of random target channels
    Tomo(TomoArgs),
    /// Tomography through the train/test γ grid-search protocol
    GridSearch(TomoArgs),
    /// Train a channel classifier on a bundled dataset
    Classify(ClassifyArgs),
    /// Finite-difference verification of the analytic gradients
    GradCheck(GradCheckArgs),
    /// Aggregate completed runs under a directory into a summary CSV
    Summarize(SummarizeArgs),
}

fn parse_reg(s: &str) -> std::result::Result<RegKind, String> {
    RegKind::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Default, Args)]
pub struct TomoArgs {
    /// Number of qubits n; the system dimension is d = 2^n
    #[arg(long)]
    pub qubits: Option<usize>,
    /// Kraus rank of each random target channel (default: full rank d²)
    #[arg(long)]
    pub target_rank: Option<usize>,
    /// Kraus operators in the fitted model (default: full rank d²)
    #[arg(long)]
    pub model_kraus: Option<usize>,
    /// Measurement shots per input state; 0 = infinite (exact statistics)
    #[arg(long)]
    pub shots: Option<u64>,
    /// Regularization term: none|hs|choi|l1
    #[arg(long, value_parser = parse_reg)]
    pub reg: Option<RegKind>,
    /// Regularization strength γ ≥ 0
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Run the train/test grid search over γ instead of a single fit
    #[arg(long)]
    pub grid_search: bool,
    /// Comma-separated γ grid for the grid search (default: 11-point log grid)
    #[arg(long, value_delimiter = ',')]
    pub grid_gammas: Option<Vec<f64>>,
    /// Train fraction of the shot budget in the grid-search split
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Gradient-descent epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Cayley step size ε
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Trace recording cadence in epochs
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Independent runs, each with a fresh random target
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed; per-run seeds derive from (seed, run index)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads across independent runs
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory for manifest, traces, reports and models
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct ClassifyArgs {
    /// Bundled dataset: iris or wine
    #[arg(long)]
    pub dataset: Option<String>,
    /// Kraus operators in the model channel
    #[arg(long)]
    pub model_kraus: Option<usize>,
    /// Regularization term: none|hs|choi|l1
    #[arg(long, value_parser = parse_reg)]
    pub reg: Option<RegKind>,
    /// Regularization strength γ ≥ 0
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Gradient-descent epochs (default: the dataset's epoch budget)
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Number of independent random splits
    #[arg(long)]
    pub splits: Option<usize>,
    /// Train fraction of each random split
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Leading PCA components to keep; 0 disables PCA (default: dataset convention)
    #[arg(long)]
    pub pca_components: Option<usize>,
    /// Cayley step size ε
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Trace recording cadence in epochs
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Master seed; per-split seeds derive from (seed, split index)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads across independent splits
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory for manifest, traces, reports and models
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct GradCheckArgs {
    /// System dimension d (a power of two: 2, 4 or 8)
    #[arg(long)]
    pub dim: Option<usize>,
    /// Kraus operators in the checked stacks (default: full rank d²)
    #[arg(long)]
    pub model_kraus: Option<usize>,
    /// Random evaluation points per cost
    #[arg(long)]
    pub points: Option<usize>,
    /// Finite-difference step h
    #[arg(long)]
    pub step: Option<f64>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional output directory for report.json and manifest
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Directory tree holding completed runs
    #[arg(value_name = "DIR")]
    pub dir: PathBuf,
    /// Summary CSV path (default: DIR/summary.csv)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A fully resolved, serializable experiment; `subcommand` is the JSON tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Tomo(TomoConfig),
    GridSearch(TomoConfig),
    Classify(ClassifyConfig),
    GradCheck(GradCheckConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TomoConfig {
    pub qubits: usize,
    /// 0 means "resolve to full rank d²" during validation.
    pub target_rank: usize,
    /// 0 means "resolve to full rank d²" during validation.
    pub model_kraus: usize,
    pub shots: u64,
    pub reg: RegKind,
    pub gamma: f64,
    pub grid_search: bool,
    pub grid_gammas: Vec<f64>,
    pub split_fraction: f64,
    pub epochs: usize,
    pub epsilon: f64,
    pub record_every: usize,
    pub runs: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for TomoConfig {
    fn default() -> Self {
        TomoConfig {
            qubits: 1,
            target_rank: 0,
            model_kraus: 0,
            shots: 0,
            reg: RegKind::None,
            gamma: 0.0,
            grid_search: false,
            grid_gammas: APP_C_GRID.to_vec(),
            split_fraction: 0.8,
            epochs: 5000,
            epsilon: 1.0,
            record_every: 100,
            runs: 1,
            seed: 0,
            workers: 1,
            out: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub dataset: String,
    pub model_kraus: usize,
    pub reg: RegKind,
    pub gamma: f64,
    /// 0 means "resolve to the dataset's epoch budget" during validation.
    pub epochs: usize,
    pub splits: usize,
    pub split_fraction: f64,
    /// `None` means "resolve to the dataset convention"; `Some(0)` disables PCA.
    pub pca_components: Option<usize>,
    pub epsilon: f64,
    pub record_every: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            dataset: "iris".into(),
            model_kraus: 16,
            reg: RegKind::None,
            gamma: 0.0,
            epochs: 0,
            splits: 20,
            split_fraction: 0.8,
            pca_components: None,
            epsilon: 1.0,
            record_every: 100,
            seed: 0,
            workers: 1,
            out: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    pub dim: usize,
    /// 0 means "resolve to full rank d²" during validation.
    pub model_kraus: usize,
    pub points: usize,
    pub step: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dim: 2,
            model_kraus: 0,
            points: 20,
            step: 1e-5,
            seed: 0,
            out: None,
        }
    }
}

/// What `main` should do after parsing.
pub enum Action {
    Experiment(ExperimentConfig),
    Summarize(SummarizeArgs),
}

/// Turns parsed argv (plus an optional `--config` file) into a validated
/// action. Flags override file values; the file may also stand alone.
pub fn resolve(cli: Cli) -> Result<Action> {
    if let Some(CliCommand::Summarize(args)) = cli.command {
        return Ok(Action::Summarize(args));
    }
    let file = match &cli.config {
        Some(path) => Some(load_config_file(path)?),
        None => None,
    };
    let mut cfg = match (file, cli.command) {
        (None, None) => {
            return Err(Error::InvalidArgument(
                "a subcommand or --config <file> is required; see --help".into(),
            ))
        }
        (Some(cfg), None) => cfg,
        (file, Some(cmd)) => merge(file, cmd)?,
    };
    cfg.validate()?;
    Ok(Action::Experiment(cfg))
}

pub fn load_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read config file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("config file {}: {e}", path.display())))
}

fn kind_name(cfg: &ExperimentConfig) -> &'static str {
    match cfg {
        ExperimentConfig::Tomo(_) => "tomo",
        ExperimentConfig::GridSearch(_) => "grid-search",
        ExperimentConfig::Classify(_) => "classify",
        ExperimentConfig::GradCheck(_) => "grad-check",
    }
}

fn mismatch(wanted: &str, got: &ExperimentConfig) -> Error {
    Error::InvalidArgument(format!(
        "config file describes a '{}' experiment but the command line says '{wanted}'",
        kind_name(got)
    ))
}

fn merge(file: Option<ExperimentConfig>, cmd: CliCommand) -> Result<ExperimentConfig> {
    match cmd {
        CliCommand::Tomo(args) => {
            let base = match file {
                None => TomoConfig::default(),
                Some(ExperimentConfig::Tomo(c)) | Some(ExperimentConfig::GridSearch(c)) => c,
                Some(other) => return Err(mismatch("tomo", &other)),
            };
            Ok(ExperimentConfig::Tomo(merge_tomo(base, args, false)))
        }
        CliCommand::GridSearch(args) => {
            let base = match file {
                None => TomoConfig::default(),
                Some(ExperimentConfig::Tomo(c)) | Some(ExperimentConfig::GridSearch(c)) => c,
                Some(other) => return Err(mismatch("grid-search", &other)),
            };
            Ok(ExperimentConfig::GridSearch(merge_tomo(base, args, true)))
        }
        CliCommand::Classify(args) => {
            let base = match file {
                None => ClassifyConfig::default(),
                Some(ExperimentConfig::Classify(c)) => c,
                Some(other) => return Err(mismatch("classify", &other)),
            };
            Ok(ExperimentConfig::Classify(merge_classify(base, args)))
        }
        CliCommand::GradCheck(args) => {
            let base = match file {
                None => GradCheckConfig::default(),
                Some(ExperimentConfig::GradCheck(c)) => c,
                Some(other) => return Err(mismatch("grad-check", &other)),
            };
            Ok(ExperimentConfig::GradCheck(merge_grad_check(base, args)))
        }
        CliCommand::Summarize(_) => unreachable!("summarize is handled before merging"),
    }
}

fn merge_tomo(mut base: TomoConfig, a: TomoArgs, force_grid: bool) -> TomoConfig {
    if let Some(v) = a.qubits {
        base.qubits = v;
    }
    if let Some(v) = a.target_rank {
        base.target_rank = v;
    }
    if let Some(v) = a.model_kraus {
        base.model_kraus = v;
    }
    if let Some(v) = a.shots {
        base.shots = v;
    }
    if let Some(v) = a.reg {
        base.reg = v;
    }
    if let Some(v) = a.gamma {
        base.gamma = v;
    }
    if a.grid_search || force_grid {
        base.grid_search = true;
    }
    if let Some(v) = a.grid_gammas {
        base.grid_gammas = v;
    }
    if let Some(v) = a.split_fraction {
        base.split_fraction = v;
    }
    if let Some(v) = a.epochs {
        base.epochs = v;
    }
    if let Some(v) = a.epsilon {
        base.epsilon = v;
    }
    if let Some(v) = a.record_every {
        base.record_every = v;
    }
    if let Some(v) = a.runs {
        base.runs = v;
    }
    if let Some(v) = a.seed {
        base.seed = v;
    }
    if let Some(v) = a.workers {
        base.workers = v;
    }
    if let Some(v) = a.out {
        base.out = v;
    }
    base
}

fn merge_classify(mut base: ClassifyConfig, a: ClassifyArgs) -> ClassifyConfig {
    if let Some(v) = a.dataset {
        base.dataset = v;
    }
    if let Some(v) = a.model_kraus {
        base.model_kraus = v;
    }
    if let Some(v) = a.reg {
        base.reg = v;
    }
    if let Some(v) = a.gamma {
        base.gamma = v;
    }
    if let Some(v) = a.epochs {
        base.epochs = v;
    }
    if let Some(v) = a.splits {
        base.splits = v;
    }
    if let Some(v) = a.split_fraction {
        base.split_fraction = v;
    }
    if let Some(v) = a.pca_components {
        base.pca_components = Some(v);
    }
    if let Some(v) = a.epsilon {
        base.epsilon = v;
    }
    if let Some(v) = a.record_every {
        base.record_every = v;
    }
    if let Some(v) = a.seed {
        base.seed = v;
    }
    if let Some(v) = a.workers {
        base.workers = v;
    }
    if let Some(v) = a.out {
        base.out = v;
    }
    base
}

fn merge_grad_check(mut base: GradCheckConfig, a: GradCheckArgs) -> GradCheckConfig {
    if let Some(v) = a.dim {
        base.dim = v;
    }
    if let Some(v) = a.model_kraus {
        base.model_kraus = v;
    }
    if let Some(v) = a.points {
        base.points = v;
    }
    if let Some(v) = a.step {
        base.step = v;
    }
    if let Some(v) = a.seed {
        base.seed = v;
    }
    if let Some(v) = a.out {
        base.out = Some(v);
    }
    base
}

impl ExperimentConfig {
    /// Checks ranges and conflicts and resolves the documented defaults
    /// (0 sentinels, dataset conventions) into concrete values.
    pub fn validate(&mut self) -> Result<()> {
        match self {
            ExperimentConfig::Tomo(c) => c.validate(),
            ExperimentConfig::GridSearch(c) => {
                c.grid_search = true;
                c.validate()
            }
            ExperimentConfig::Classify(c) => c.validate(),
            ExperimentConfig::GradCheck(c) => c.validate(),
        }
    }
}

fn require_out(out: &Path) -> Result<()> {
    if out.as_os_str().is_empty() {
        return Err(Error::InvalidArgument(
            "an output directory is required; pass --out <dir>".into(),
        ));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gamma must be a finite value ≥ 0, got {gamma}"
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be a finite value > 0, got {epsilon}"
        )));
    }
    Ok(())
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    Ok(())
}

impl TomoConfig {
    fn validate(&mut self) -> Result<()> {
        if !(1..=4).contains(&self.qubits) {
            return Err(Error::InvalidArgument(format!(
                "qubits must be between 1 and 4, got {}",
                self.qubits
            )));
        }
        let d = 1usize << self.qubits;
        if self.target_rank == 0 {
            self.target_rank = d * d;
        }
        if self.target_rank > d * d {
            return Err(Error::InvalidArgument(format!(
                "target rank {} exceeds the maximum d² = {} for {} qubit(s)",
                self.target_rank,
                d * d,
                self.qubits
            )));
        }
        if self.model_kraus == 0 {
            self.model_kraus = d * d;
        }
        check_gamma(self.gamma)?;
        check_epsilon(self.epsilon)?;
        check_fraction(self.split_fraction)?;
        if self.grid_search {
            if self.shots < 5 {
                return Err(Error::InvalidArgument(format!(
                    "the grid search splits the shot budget into train/test tables and \
                     needs finite statistics; pass --shots ≥ 5 (got {})",
                    self.shots
                )));
            }
            if self.grid_gammas.is_empty() {
                return Err(Error::InvalidArgument("the γ grid must be nonempty".into()));
            }
            for &g in &self.grid_gammas {
                check_gamma(g)?;
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record-every must be ≥ 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be ≥ 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be ≥ 1".into()));
        }
        require_out(&self.out)
    }
}

impl ClassifyConfig {
    fn validate(&mut self) -> Result<()> {
        let data = load_dataset(&self.dataset)?;
        if self.epochs == 0 {
            self.epochs = match data.name() {
                "wine" => 750,
                _ => 1500,
            };
        }
        if self.pca_components.is_none() {
            self.pca_components = Some(data.default_pca().unwrap_or(0));
        }
        if let Some(c) = self.pca_components {
            if c > data.feature_count() {
                return Err(Error::InvalidArgument(format!(
                    "pca-components {} exceeds the {} features of {}",
                    c,
                    data.feature_count(),
                    data.name()
                )));
            }
        }
        if self.model_kraus == 0 {
            return Err(Error::InvalidArgument("model-kraus must be ≥ 1".into()));
        }
        check_gamma(self.gamma)?;
        check_epsilon(self.epsilon)?;
        check_fraction(self.split_fraction)?;
        if self.splits == 0 {
            return Err(Error::InvalidArgument("splits must be ≥ 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record-every must be ≥ 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be ≥ 1".into()));
        }
        require_out(&self.out)
    }
}

impl GradCheckConfig {
    fn validate(&mut self) -> Result<()> {
        if ![2, 4, 8].contains(&self.dim) {
            return Err(Error::InvalidArgument(format!(
                "dim must be 2, 4 or 8 (a power of two with Pauli tables), got {}",
                self.dim
            )));
        }
        if self.model_kraus == 0 {
            self.model_kraus = self.dim * self.dim;
        }
        if self.points == 0 {
            return Err(Error::InvalidArgument("points must be ≥ 1".into()));
        }
        if !(1e-7..=1e-3).contains(&self.step) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step must lie in [1e-7, 1e-3], got {}",
                self.step
            )));
        }
        Ok(())
    }
}
