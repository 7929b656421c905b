//! `prism` command-line tool.

mod bench;
mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use prism_core::io::PlyFormat;
use prism_core::model::{DEFAULT_KNN, DEFAULT_NSS_BUCKETS};
use prism_core::{Execution, Method};

#[derive(Parser)]
#[command(
    name = "prism",
    version,
    about = "Color-stratified point cloud downsampling"
)]
struct Cli {
    /// Run every data-parallel loop on the calling thread
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Downsample a cloud and write the result with a run manifest
    Sample(SampleArgs),
    /// Compare a downsampled cloud against its reference
    Metrics(MetricsArgs),
    /// Run all four methods over several seeds and write a CSV summary
    Bench(BenchArgs),
    /// Sweep quantization bits and chromaticity at a fixed capacity
    Ablate(AblateArgs),
    /// Write the hue/saturation histogram of a cloud as JSON
    Histogram(HistogramArgs),
    /// Attach image colors to points through a pinhole camera
    Colorize(ColorizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Prism,
    Random,
    Voxel,
    Nss,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Prism => Method::Prism,
            MethodArg::Random => Method::Random,
            MethodArg::Voxel => Method::Voxel,
            MethodArg::Nss => Method::Nss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn is_on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Ascii,
    Binary,
}

impl From<FormatArg> for PlyFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ascii => PlyFormat::Ascii,
            FormatArg::Binary => PlyFormat::BinaryLittleEndian,
        }
    }
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if r > 0.0 && r <= 1.0 {
        Ok(r)
    } else {
        Err(format!("{r} is outside (0, 1]"))
    }
}

fn parse_bits(s: &str) -> Result<u8, String> {
    match s {
        "0" | "1" | "2" | "4" => Ok(s.parse().unwrap()),
        _ => Err(format!("`{s}` is not one of 0, 1, 2, 4")),
    }
}

fn parse_positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

/// Sampler flags shared by `sample` and `bench`.
#[derive(Args, Debug, Clone)]
pub struct SamplerFlags {
    /// Color quantization shift
    #[arg(long, default_value = "0", value_parser = parse_bits)]
    pub bits: u8,
    /// Normalize colors by their channel sum before binning
    #[arg(long, value_enum, default_value = "off")]
    pub chromaticity: Switch,
    /// Normal buckets for the nss method
    #[arg(long, default_value_t = DEFAULT_NSS_BUCKETS, value_parser = clap::value_parser!(u64).range(2..).map(|v| v as usize))]
    pub nss_buckets: usize,
    /// Neighbors used to estimate normals for the nss method
    #[arg(long, default_value_t = DEFAULT_KNN, value_parser = clap::value_parser!(u64).range(3..).map(|v| v as usize))]
    pub knn: usize,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output cloud (.ply, or .csv)
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Fraction of points to keep, in (0, 1]
    #[arg(long, value_parser = parse_ratio, conflicts_with = "k")]
    pub target_ratio: Option<f64>,
    /// Fixed per-bin capacity (prism only)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Option<u64>,
    /// Fixed voxel edge in meters (voxel only)
    #[arg(long, value_parser = parse_positive_f64)]
    pub voxel_size: Option<f64>,
    #[command(flatten)]
    pub sampler: SamplerFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Manifest path; defaults to the output path with `.manifest.json` appended
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatArg,
    /// Also evaluate the output against the input and store the report in the manifest
    #[arg(long)]
    pub metrics: bool,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Reference cloud
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Cloud to compare
    #[arg(long)]
    pub cmp: PathBuf,
    /// Report JSON path
    #[arg(long)]
    pub report: PathBuf,
    /// Method name recorded in the report
    #[arg(long, default_value = "unknown")]
    pub method: String,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_ratio, default_value = "0.01")]
    pub target_ratio: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Seeds 0..N are run for every method
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// CSV of published values to compare the mean rows against
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct HistogramArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 36, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    pub hue_bins: usize,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    pub sat_bins: usize,
}

#[derive(Args, Debug)]
pub struct ColorizeArgs {
    /// Cloud to color; its own colors are ignored
    #[arg(long)]
    pub points: PathBuf,
    /// PNG or PPM image
    #[arg(long)]
    pub image: PathBuf,
    /// Calibration JSON
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Keep points that miss the image, colored black
    #[arg(long)]
    pub keep_uncolored: bool,
    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match &cli.command {
        Command::Sample(args) => commands::sample(args, exec),
        Command::Metrics(args) => commands::metrics(args, exec),
        Command::Bench(args) => bench::bench(args, exec),
        Command::Ablate(args) => bench::ablate(args, exec),
        Command::Histogram(args) => commands::histogram(args),
        Command::Colorize(args) => commands::colorize(args, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.code == error::code::USAGE => {
            use clap::CommandFactory;
            let _ = Cli::command()
                .error(clap::error::ErrorKind::ArgumentConflict, e.message)
                .print();
            ExitCode::from(error::code::USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
