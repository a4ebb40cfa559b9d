use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "clarifuse", version, about = "Instance-specific classifier score fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate synthetic train and test score tables.
    Synth(SynthCmd),
    /// Learn per-instance fusion weights for a test table.
    Learn(LearnCmd),
    /// Rank test instances from learned solutions.
    Rank(RankCmd),
    /// Compute AP (and MAP over several label columns) for rankings.
    Eval(EvalCmd),
    /// Add Gaussian noise to selected classifiers on a fraction of rows.
    Corrupt(CorruptCmd),
    /// Select the sigmoid sharpness on a labeled validation table.
    Alpha(AlphaCmd),
    /// Run every fusion mode end to end and print a comparison table.
    Experiment(ExperimentCmd),
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    /// Gradient step size.
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Convergence threshold on the change in raw clarity.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iters: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Number of classifiers.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    #[arg(long, default_value_t = 40)]
    pub n_train_pos: usize,
    #[arg(long, default_value_t = 40)]
    pub n_train_neg: usize,
    #[arg(long, default_value_t = 200)]
    pub n_test: usize,
    /// Share of positive test rows.
    #[arg(long, default_value_t = 0.5)]
    pub test_pos_fraction: f64,
    /// Positive-class score mean; one value or one per classifier.
    #[arg(long, value_delimiter = ',', default_value = "0.7")]
    pub pos_mean: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub neg_mean: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.15")]
    pub pos_std: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.15")]
    pub neg_std: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives train.csv and test.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LearnCmd {
    /// Labeled training score table.
    #[arg(long)]
    pub train: PathBuf,
    /// Test score table; a label column, if present, is ignored.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Average,
    #[value(alias = "weighted-score")]
    Weighted,
    RawClarity,
    NbestAvg,
    NbestWeighted,
}

#[derive(Debug, Args)]
pub struct RankCmd {
    #[arg(long)]
    pub test: PathBuf,
    /// Learned solutions; not needed for `average`.
    #[arg(long)]
    pub solutions: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub criterion: CriterionArg,
    /// N for the N-best criteria.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_best: Option<u64>,
    /// Rescale the selected weights to unit norm for `nbest-weighted`.
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Ranking file(s); one per label column, or one shared by all.
    #[arg(long, required = true)]
    pub ranking: Vec<PathBuf>,
    /// Table with an `id` column and one or more `label*` columns.
    #[arg(long)]
    pub labels: PathBuf,
    /// Also write the metrics as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptCmd {
    #[arg(long)]
    pub test: PathBuf,
    /// Zero-based classifier columns to corrupt.
    #[arg(long, value_delimiter = ',', required = true)]
    pub classifiers: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlphaCriterionArg {
    Weighted,
    RawClarity,
}

#[derive(Debug, Args)]
pub struct AlphaCmd {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub validation: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50,100")]
    pub alpha_grid: Vec<f64>,
    #[arg(long, value_enum, default_value = "weighted")]
    pub criterion: AlphaCriterionArg,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentCmd {
    /// Labeled training table. Without --train/--test, data is synthesized.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Labeled validation table for --alpha-grid in file mode.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Independent synthetic one-vs-rest problems; MAP averages over them.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub classes: u64,
    /// Synthetic validation rows per class (used with --alpha-grid).
    #[arg(long, default_value_t = 100)]
    pub n_validation: usize,
    /// Fixed sharpness.
    #[arg(long, conflicts_with = "alpha_grid")]
    pub alpha: Option<f64>,
    /// Select sharpness per class on the validation set.
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "weighted")]
    pub alpha_criterion: AlphaCriterionArg,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    /// Classifiers to corrupt (same columns for every class).
    #[arg(long, value_delimiter = ',', conflicts_with = "corrupt_count")]
    pub classifiers: Option<Vec<usize>>,
    /// Corrupt this many randomly chosen classifiers per class.
    #[arg(long)]
    pub corrupt_count: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    /// Noise standard deviation; required when corrupting.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Rescale N-best weights to unit norm.
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
