use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use tsnet_core::network::Precision;
use tsnet_core::{BlockSize, ColorSpace, StreamKind, TransformSet};

#[derive(Debug, Parser)]
#[command(name = "tsnet", version, about = "Two-stream fake image detector")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn verbosity(&self) -> LevelFilter {
        match self.verbose {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            _ => LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a balanced synthetic real/fake corpus as PNGs plus a manifest.
    Synth(SynthArgs),
    /// Compute the frequency cube of one image and store it as FQC1.
    Transform(TransformArgs),
    /// Train one stream and write a model file.
    Train(TrainArgs),
    /// Score one model, or two models and their fusion, on a labelled directory.
    Eval(EvalArgs),
    /// Re-score under test-time blur and JPEG perturbations.
    Robustness(RobustnessArgs),
    /// Render plots and a summary table from a report CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root of every random stream in the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for per-sample work (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TransformFlags {
    #[arg(long, value_parser = parse_colorspace)]
    pub colorspace: Option<ColorSpace>,
    /// `dft`, `dwt` or `dft,dwt`.
    #[arg(long, value_parser = parse_transforms)]
    pub transforms: Option<TransformSet>,
    /// 8, 16, 32 or `full`.
    #[arg(long, value_parser = parse_block_size)]
    pub block_size: Option<BlockSize>,
    /// Use the swapped, unscaled chroma formula instead of BT.601 scaling.
    #[arg(long)]
    pub chroma_swap: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentFlags {
    /// Probability of each training perturbation.
    #[arg(long)]
    pub aug_prob: Option<f64>,
    /// Blur sigma range as `lo,hi`.
    #[arg(long, value_parser = parse_f64_pair)]
    pub aug_blur_range: Option<[f64; 2]>,
    /// JPEG quality range as `lo,hi`.
    #[arg(long, value_parser = parse_u8_pair)]
    pub aug_jpeg_range: Option<[u8; 2]>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Images per class in the training split.
    #[arg(long, default_value_t = 500)]
    pub n_train: usize,
    #[arg(long, default_value_t = 100)]
    pub n_val: usize,
    #[arg(long, default_value_t = 100)]
    pub n_test: usize,
    /// Side length (multiple of 16).
    #[arg(long)]
    pub size: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub transform: TransformFlags,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_stream)]
    pub stream: StreamKind,
    /// Corpus root containing `train/` and `val/`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub image_size: Option<usize>,
    /// `f64` (default) or `f32`.
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    #[command(flatten)]
    pub transform: TransformFlags,
    #[command(flatten)]
    pub augment: AugmentFlags,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, conflicts_with_all = ["model_a", "model_b"], required_unless_present = "model_a")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model_b")]
    pub model_a: Option<PathBuf>,
    #[arg(long, requires = "model_a")]
    pub model_b: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    /// Directory with `real/` and `fake/`.
    #[arg(long)]
    pub data: PathBuf,
    /// CSV destination; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    /// Test directory with `real/` and `fake/`.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the CSV, plots and resolved config.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated blur sigmas (empty for none).
    #[arg(long, value_parser = parse_f64_list)]
    pub blur_sigmas: Option<List<f64>>,
    /// Comma-separated JPEG qualities (empty for none).
    #[arg(long, value_parser = parse_u8_list)]
    pub jpeg_qualities: Option<List<u8>>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report CSV written by `eval` or `robustness`.
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_colorspace(s: &str) -> Result<ColorSpace, String> {
    s.parse().map_err(|e: tsnet_core::Error| e.to_string())
}

fn parse_transforms(s: &str) -> Result<TransformSet, String> {
    s.parse().map_err(|e: tsnet_core::Error| e.to_string())
}

fn parse_block_size(s: &str) -> Result<BlockSize, String> {
    let b: BlockSize = s.parse().map_err(|e: tsnet_core::Error| e.to_string())?;
    match b {
        BlockSize::Full | BlockSize::Pixels(8 | 16 | 32) => Ok(b),
        other => Err(format!("block size must be 8, 16, 32 or full, got {other}")),
    }
}

fn parse_stream(s: &str) -> Result<StreamKind, String> {
    s.parse().map_err(|e: tsnet_core::Error| e.to_string())
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s {
        "f64" => Ok(Precision::F64),
        "f32" => Ok(Precision::F32),
        other => Err(format!("precision must be f64 or f32, got {other:?}")),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

/// A comma-separated flag value, kept as one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn parse_f64_list(s: &str) -> Result<List<f64>, String> {
    parse_list(s).map(List)
}

fn parse_u8_list(s: &str) -> Result<List<u8>, String> {
    parse_list(s).map(List)
}

fn pair<T: std::str::FromStr + Copy>(s: &str) -> Result<[T; 2], String>
where
    T::Err: std::fmt::Display,
{
    match parse_list::<T>(s)?.as_slice() {
        &[lo, hi] => Ok([lo, hi]),
        _ => Err(format!("expected `lo,hi`, got {s:?}")),
    }
}

fn parse_f64_pair(s: &str) -> Result<[f64; 2], String> {
    pair(s)
}

fn parse_u8_pair(s: &str) -> Result<[u8; 2], String> {
    pair(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsers() {
        assert_eq!(parse_f64_list("3, 5,7").unwrap(), List(vec![3.0, 5.0, 7.0]));
        assert!(parse_f64_list("").unwrap().0.is_empty());
        assert!(parse_u8_list("300").is_err());
        assert_eq!(parse_u8_pair("70,95").unwrap(), [70, 95]);
        assert!(parse_f64_pair("1").is_err());
        assert!(parse_block_size("12").is_err());
        assert_eq!(parse_block_size("full").unwrap(), BlockSize::Full);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn sweep_lists_parse_as_single_values() {
        let cli = Cli::try_parse_from([
            "tsnet",
            "robustness",
            "--model",
            "m",
            "--data",
            "d",
            "--out",
            "o",
            "--blur-sigmas",
            "3,5",
            "--jpeg-qualities",
            "",
        ])
        .unwrap();
        let Command::Robustness(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.blur_sigmas, Some(List(vec![3.0, 5.0])));
        assert_eq!(a.jpeg_qualities, Some(List(vec![])));
    }
}
