use crate::data::LabelKind;
use crate::losses::Ablation;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Train and evaluate content/style disentangling encoders over precomputed
/// image embeddings.
#[derive(Debug, Parser)]
#[command(name = "disentangle", version)]
pub struct Cli {
    /// Seed for every random choice of the command [default: 0]
    #[arg(long, global = true, value_name = "SEED")]
    pub rng_seed: Option<u64>,

    /// Worker threads; 0 uses all cores, 1 is bit-reproducible
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub threads: usize,

    /// JSON run configuration; command-line flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the content x style x seed prompt grid as JSON lines
    GenPrompts(GenPromptsArgs),
    /// Write a synthetic embedding dataset from a latent factor model
    GenSynthetic(GenSyntheticArgs),
    /// Split an embedding file into train and validation files by prompt group
    Split(SplitArgs),
    /// Train the content and style encoders
    Train(TrainArgs),
    /// Write content and style embeddings of a dataset
    Export(ExportArgs),
    /// Distance correlation between two aligned embedding files
    EvalDc(EvalDcArgs),
    /// Fit a linear probe on one embedding file and score it on another
    EvalProbe(EvalProbeArgs),
    /// Cosine top-k neighbours of one record
    Retrieve(RetrieveArgs),
}

#[derive(Debug, Args)]
pub struct GenPromptsArgs {
    /// Content descriptions, one per line
    #[arg(long, value_name = "PATH", required_unless_present = "placeholder_contents")]
    pub contents: Option<PathBuf>,

    /// Use N numbered placeholder descriptions instead of a file
    #[arg(long, value_name = "N", conflicts_with = "contents")]
    pub placeholder_contents: Option<usize>,

    /// Style table as `id,name` CSV [default: built-in 27 styles]
    #[arg(long, value_name = "PATH")]
    pub styles: Option<PathBuf>,

    /// Distinct styles sampled per content
    #[arg(long, default_value_t = 5)]
    pub per_content: usize,

    /// Generation seeds per prompt
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,

    /// Manifest output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Also split the manifest by prompt with this train fraction
    #[arg(long, value_name = "FRACTION")]
    pub train_fraction: Option<f64>,

    /// Train manifest output when splitting
    #[arg(long, value_name = "PATH", requires = "train_fraction")]
    pub train_out: Option<PathBuf>,

    /// Validation manifest output when splitting
    #[arg(long, value_name = "PATH", requires = "train_fraction")]
    pub val_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    /// Number of records
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,

    /// Number of content clusters
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,

    /// Number of style classes
    #[arg(long, default_value_t = 4)]
    pub styles: usize,

    /// Image embedding dimension
    #[arg(long, default_value_t = 512)]
    pub d_img: usize,

    /// Text embedding dimension; 0 omits text
    #[arg(long, default_value_t = 64)]
    pub d_txt: usize,

    /// Latent factor dimension
    #[arg(long, default_value_t = 16)]
    pub latent_dim: usize,

    /// Per-coordinate std of image noise
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,

    /// Per-coordinate std of text noise
    #[arg(long, default_value_t = 0.03)]
    pub text_noise: f64,

    /// Output GEMB file
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Input GEMB file
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    /// Fraction of prompt groups assigned to train
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,

    /// Train GEMB output
    #[arg(long, value_name = "PATH")]
    pub train_out: PathBuf,

    /// Validation GEMB output
    #[arg(long, value_name = "PATH")]
    pub val_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training GEMB file
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,

    /// Validation GEMB file
    #[arg(long, value_name = "PATH")]
    pub val: Option<PathBuf>,

    /// Directory for the log and checkpoints
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Training epochs [default: 30]
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Mini-batch size [default: 512]
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Adam learning rate [default: 0.0005]
    #[arg(long)]
    pub lr: Option<f64>,

    /// Per-epoch learning-rate decay [default: 0.9]
    #[arg(long)]
    pub lr_decay: Option<f64>,

    /// Text cosine-distance threshold for content positives [default: 0.25]
    #[arg(long)]
    pub eps_t: Option<f64>,

    /// Content negative margin [default: 0.5]
    #[arg(long)]
    pub eps_c: Option<f64>,

    /// Style negative margin [default: 0.5]
    #[arg(long)]
    pub eps_s: Option<f64>,

    /// Content loss weight [default: 1]
    #[arg(long)]
    pub lambda_c: Option<f64>,

    /// Style loss weight [default: 1]
    #[arg(long)]
    pub lambda_s: Option<f64>,

    /// Style classifier loss weight [default: 1]
    #[arg(long)]
    pub lambda_sc: Option<f64>,

    /// Pairwise objective [default: goya-contrastive]
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<Ablation>,

    /// Drop the style classifier loss
    #[arg(long)]
    pub no_classifier: bool,

    /// Content and style embedding size [default: 2048]
    #[arg(long)]
    pub embed_dim: Option<usize>,

    /// Content encoder hidden width [default: 2048]
    #[arg(long)]
    pub content_hidden: Option<usize>,

    /// Projector hidden width [default: 2048]
    #[arg(long)]
    pub projector_hidden: Option<usize>,

    /// Use single linear encoders
    #[arg(long)]
    pub single_layer: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Trained checkpoint
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,

    /// Input GEMB file
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    /// Content embedding output
    #[arg(long, value_name = "PATH")]
    pub content_out: PathBuf,

    /// Style embedding output
    #[arg(long, value_name = "PATH")]
    pub style_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalDcArgs {
    /// First embedding file
    #[arg(long, value_name = "PATH")]
    pub content: PathBuf,

    /// Second embedding file, aligned by record id
    #[arg(long, value_name = "PATH")]
    pub style: PathBuf,

    /// Rows above this are subsampled
    #[arg(long, default_value_t = 20_000)]
    pub max_rows: usize,

    /// Also write the JSON report here
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalProbeArgs {
    /// Embeddings the probe is fitted on
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,

    /// Embeddings the probe is scored on
    #[arg(long, value_name = "PATH")]
    pub test: PathBuf,

    /// Label to predict: style, genre or content_cluster
    #[arg(long, value_parser = parse_label)]
    pub label: LabelKind,

    /// Confusion matrix CSV output
    #[arg(long, value_name = "PATH")]
    pub confusion_out: Option<PathBuf>,

    /// Class names as `id,name` CSV for the confusion matrix
    #[arg(long, value_name = "PATH")]
    pub names: Option<PathBuf>,

    /// Also write the JSON report here
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Probe SGD learning rate [default: 0.02]
    #[arg(long)]
    pub probe_lr: Option<f64>,

    /// Probe epochs [default: 90]
    #[arg(long)]
    pub probe_epochs: Option<usize>,

    /// Probe batch size, capped at the training size [default: 4096]
    #[arg(long)]
    pub probe_batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Embedding database
    #[arg(long, value_name = "PATH")]
    pub db: PathBuf,

    /// Record id of the query
    #[arg(long)]
    pub query_id: u64,

    /// Number of neighbours
    #[arg(long, default_value_t = 5)]
    pub k: usize,

    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_label(s: &str) -> Result<LabelKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}
