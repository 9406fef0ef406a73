use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rprobe::cca::CcaSummary;
use rprobe::freetasks::{DtwNorm, FrameDistance, Matching};
use rprobe::spanpool::PoolMode;
use rprobe::trends::ScatterTransform;

#[derive(Debug, Parser)]
#[command(name = "rprobe", version, about = "Layer-wise representation analysis toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores). RPROBE_THREADS overrides this flag.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; without it results only go to stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Number of sample sets (or cross-validation rounds) per score.
    #[arg(long, global = true, default_value_t = 3)]
    pub sample_sets: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonical correlation analysis between representations and a target.
    Cca(CcaArgs),
    /// Linear centered kernel alignment.
    Cka(SimArgs),
    /// Orthogonal Procrustes distance.
    Procrustes(SimArgs),
    /// Normalized mutual information between k-means clusters and labels.
    Mi(MiArgs),
    /// Softmax linear probe accuracy.
    Linprobe(ProbeArgs),
    /// Acoustic word discrimination average precision.
    Awd(AwdArgs),
    /// Training-free word boundary detection scores.
    Wordseg(WordsegArgs),
    /// Spoken sentence similarity correlation with human scores.
    Sts(StsArgs),
    /// Pools frame features into one vector per segment.
    Pool(PoolArgs),
    /// Correlations between layer-wise score curves.
    TrendCorr(TrendArgs),
    /// Named entity recognition micro-F1 and label-F1.
    NerEval(NerArgs),
    /// Named entity localization frame-F1 and word-F1.
    NelEval(NelArgs),
    /// Runs the embedded property suite on synthetic data.
    Selfcheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cca(_) => "cca",
            Command::Cka(_) => "cka",
            Command::Procrustes(_) => "procrustes",
            Command::Mi(_) => "mi",
            Command::Linprobe(_) => "linprobe",
            Command::Awd(_) => "awd",
            Command::Wordseg(_) => "wordseg",
            Command::Sts(_) => "sts",
            Command::Pool(_) => "pool",
            Command::TrendCorr(_) => "trend-corr",
            Command::NerEval(_) => "ner-eval",
            Command::NelEval(_) => "nel-eval",
            Command::Selfcheck => "selfcheck",
        }
    }

    pub fn config(&self) -> serde_json::Value {
        let v = match self {
            Command::Cca(a) => serde_json::to_value(a),
            Command::Cka(a) | Command::Procrustes(a) => serde_json::to_value(a),
            Command::Mi(a) => serde_json::to_value(a),
            Command::Linprobe(a) => serde_json::to_value(a),
            Command::Awd(a) => serde_json::to_value(a),
            Command::Wordseg(a) => serde_json::to_value(a),
            Command::Sts(a) => serde_json::to_value(a),
            Command::Pool(a) => serde_json::to_value(a),
            Command::TrendCorr(a) => serde_json::to_value(a),
            Command::NerEval(a) => serde_json::to_value(a),
            Command::NelEval(a) => serde_json::to_value(a),
            Command::Selfcheck => Ok(serde_json::json!({})),
        };
        v.expect("arguments serialize")
    }
}

/// Either one feature input or a manifest of per-layer inputs.
#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct Views {
    /// Representation input (file, or directory of per-utterance files).
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Manifest of `layer_index[<TAB>path]` lines.
    #[arg(long)]
    pub layers: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct Target {
    /// Continuous target features.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Discrete target labels, one token per line (one-hot unless --attributes is given).
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TargetOpts {
    /// Attribute map turning label tokens into vectors.
    #[arg(long, requires = "labels")]
    pub attributes: Option<PathBuf>,
    /// Label vocabulary, one token per line (default: sorted distinct labels).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CcaArgs {
    #[command(flatten)]
    pub views: Views,
    #[command(flatten)]
    pub target: Target,
    #[command(flatten)]
    pub opts: TargetOpts,
    #[arg(long, default_value = "pwcca", value_parser = parse_summary)]
    pub summary: CcaSummary,
    /// Candidate ridge values (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Vec<f64>,
    /// SVD variance retention applied to both views before CCA.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Fit on each sample set directly instead of cross-validating.
    #[arg(long)]
    pub no_cv: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SimArgs {
    #[command(flatten)]
    pub views: Views,
    #[command(flatten)]
    pub target: Target,
    #[command(flatten)]
    pub opts: TargetOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct MiArgs {
    #[command(flatten)]
    pub views: Views,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long, default_value_t = 39)]
    pub k: usize,
    #[arg(long, default_value_t = rprobe::discretize::PHONE_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, default_value_t = rprobe::discretize::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Lloyd iterations over all rows instead of mini-batches.
    #[arg(long)]
    pub full_batch: bool,
    /// Rows kept per class when balancing (default: size of the smallest class).
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Sample uniformly instead of balancing label counts.
    #[arg(long, conflicts_with = "per_class")]
    pub no_balance: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub views: Views,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Learning rates to try (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub lr_grid: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Mini-batch size; 0 trains on the full batch.
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AwdMetric {
    Pooled,
    Dtw,
}

#[derive(Debug, Args, Serialize)]
pub struct AwdArgs {
    #[command(flatten)]
    pub views: Views,
    /// Pair manifest TSV.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value_t = AwdMetric::Pooled)]
    pub metric: AwdMetric,
    #[arg(long, default_value = "mean", value_parser = parse_pool)]
    pub pool: PoolMode,
    #[arg(long, default_value = "path-length", value_parser = parse_dtw_norm)]
    pub dtw_norm: DtwNorm,
    #[arg(long, default_value_t = 0.02)]
    pub frame_duration: f64,
    #[arg(long, default_value_t = 0.5)]
    pub min_duration: f64,
    #[arg(long, default_value_t = 2.0)]
    pub max_duration: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct WordsegArgs {
    #[command(flatten)]
    pub views: Views,
    /// Reference word alignments.
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
    /// Frame distance.
    #[arg(long, default_value = "cosine", value_parser = parse_distance)]
    pub metric: FrameDistance,
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    #[arg(long, default_value_t = 0.1)]
    pub prominence: f64,
    /// Search distance, window and prominence over the default grid.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, value_enum, default_value_t = MatchingArg::Greedy)]
    pub matching: MatchingArg,
    #[arg(long, default_value_t = 0.02)]
    pub frame_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchingArg {
    Greedy,
    Optimal,
}

impl From<MatchingArg> for Matching {
    fn from(m: MatchingArg) -> Self {
        match m {
            MatchingArg::Greedy => Matching::Greedy,
            MatchingArg::Optimal => Matching::Optimal,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct StsArgs {
    /// STS manifest TSV; feature paths resolve against its directory.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PoolArgs {
    #[command(flatten)]
    pub views: Views,
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long, default_value = "mean", value_parser = parse_pool)]
    pub pool: PoolMode,
    #[arg(long, default_value_t = 0.02)]
    pub frame_duration: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrendArgs {
    /// scores.json files; each metric in each file becomes one curve.
    #[arg(long = "scores", required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Keep only these metrics.
    #[arg(long, value_delimiter = ',')]
    pub metric: Vec<String>,
    #[arg(long, default_value = "model")]
    pub model: String,
    /// Curve plotted on the x axis of scatter.csv.
    #[arg(long, requires = "scatter_y")]
    pub scatter_x: Option<String>,
    #[arg(long, requires = "scatter_x")]
    pub scatter_y: Option<String>,
    #[arg(long, default_value = "none", value_parser = parse_transform)]
    pub transform: ScatterTransform,
}

#[derive(Debug, Args, Serialize)]
pub struct NerArgs {
    /// Hypothesis entity records (JSON array or JSON lines).
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct NelArgs {
    /// Hypothesis entity spans.
    #[arg(long, conflicts_with = "posteriors", required_unless_present = "posteriors")]
    pub hyp: Option<PathBuf>,
    /// Directory of per-utterance CTC posterior grids.
    #[arg(long, requires = "vocab")]
    pub posteriors: Option<PathBuf>,
    /// Posterior vocabulary sidecar (`index<TAB>token`).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value = "<blank>")]
    pub blank: String,
    #[arg(long, default_value = "]")]
    pub end_marker: String,
    /// Entity start markers as TOKEN=TAG.
    #[arg(long, value_parser = parse_marker)]
    pub start_marker: Vec<(String, String)>,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Word alignments; enables word-F1.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Overlap fractions for word-F1 (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub rho: Vec<f64>,
    /// Seconds added to spans read off posteriors.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub offset: f64,
    /// Extend spans read off posteriors through trailing blanks.
    #[arg(long)]
    pub incl_blank: bool,
    #[arg(long, default_value_t = 0.02)]
    pub frame_duration: f64,
}

fn parse_summary(s: &str) -> Result<CcaSummary, String> {
    s.parse().map_err(|e: rprobe::Error| e.to_string())
}

fn parse_pool(s: &str) -> Result<PoolMode, String> {
    s.parse().map_err(|e: rprobe::Error| e.to_string())
}

fn parse_dtw_norm(s: &str) -> Result<DtwNorm, String> {
    s.parse().map_err(|e: rprobe::Error| e.to_string())
}

fn parse_distance(s: &str) -> Result<FrameDistance, String> {
    s.parse().map_err(|e: rprobe::Error| e.to_string())
}

fn parse_transform(s: &str) -> Result<ScatterTransform, String> {
    s.parse().map_err(|e: rprobe::Error| e.to_string())
}

fn parse_marker(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((t, g)) if !t.is_empty() && !g.is_empty() => Ok((t.to_string(), g.to_string())),
        _ => Err(format!("expected TOKEN=TAG, got {s:?}")),
    }
}
