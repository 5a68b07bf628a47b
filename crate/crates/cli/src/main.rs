//! `odc` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use odc_core::adc::{compute_adc_with, AdcConfig};
use odc_core::dataset::{read_volume, write_volume};
use odc_core::dialectics::{merge_map_from_json, relabel};
use odc_core::morphology::{
    morphological_similarity, pattern_spectrum, BinaryImage, StructuringElement,
};
use odc_core::pgm::{read_label_map, write_atomic, write_band, write_label_map, BitDepth};
use odc_core::phantom::{default_brain_phantom, synthesize_phantom, PhantomSpec};
use odc_core::pipeline::run_config_file;
use odc_core::{ErrorCategory, Execution};

const SEED_ENV: &str = "ODC_SEED";

#[derive(Parser)]
#[command(
    name = "odc",
    version,
    about = "Objective dialectical classification of multispectral DW-MR images"
)]
struct Cli {
    /// Run every data-parallel stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a phantom volume with ground truth.
    Phantom(PhantomArgs),
    /// Compute ADC maps for every slice of a volume.
    Adc(AdcArgs),
    /// Train, classify and score as described by a run config.
    Run(RunArgs),
    /// Apply a label merge map to a label-map PGM.
    Relabel(RelabelArgs),
    /// Write the pattern spectrum of one class as CSV.
    Spectrum(SpectrumArgs),
    /// Print the morphological similarity index of one class in two maps.
    Similarity(SimilarityArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Overrides the seed from the spec or config.
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PhantomArgs {
    /// Phantom spec JSON; the built-in brain phantom is used when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Edge length of the built-in phantom.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Slice count of the built-in phantom.
    #[arg(long, default_value_t = 8)]
    slices: usize,
    /// Overrides the spec's noise level.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, value_enum, default_value_t = Depth::Sixteen)]
    bit_depth: Depth,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct AdcArgs {
    /// Dataset directory written by `phantom`.
    #[arg(long)]
    volume: PathBuf,
    /// ADC parameters as JSON (`c`, `epsilon`, `output_scale`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Depth::Sixteen)]
    bit_depth: Depth,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct RelabelArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON object mapping source labels to target labels.
    #[arg(long)]
    merge: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    class: u32,
    #[arg(long, value_enum, default_value_t = Se::Square)]
    se: Se,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimilarityArgs {
    #[arg(long)]
    a: PathBuf,
    /// Reference map.
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    class: u32,
    #[arg(long, value_enum, default_value_t = Se::Square)]
    se: Se,
}

#[derive(Clone, Copy, ValueEnum)]
enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

impl From<Depth> for BitDepth {
    fn from(d: Depth) -> Self {
        match d {
            Depth::Eight => BitDepth::Eight,
            Depth::Sixteen => BitDepth::Sixteen,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Se {
    Square,
    Cross,
}

impl From<Se> for StructuringElement {
    fn from(s: Se) -> Self {
        match s {
            Se::Square => StructuringElement::Square3,
            Se::Cross => StructuringElement::Cross3,
        }
    }
}

fn cmd_phantom(args: &PhantomArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| odc_core::Error::io(path, e))?;
            PhantomSpec::from_json(&text)?
        }
        None => default_brain_phantom(args.size, args.slices)?,
    };
    if let Some(sigma) = args.noise {
        spec.noise_sigma = sigma;
    }
    if let Some(seed) = args.seed.seed {
        spec.seed = seed;
    }
    let phantom = synthesize_phantom(&spec)?;
    write_volume(
        &args.out,
        &phantom.volume,
        Some(&phantom.truth),
        args.bit_depth.into(),
    )?;
    let mut text = serde_json::to_string_pretty(&spec)?;
    text.push('\n');
    write_atomic(&args.out.join("phantom.json"), text.as_bytes())?;
    println!(
        "wrote {} slices x {} bands to {}",
        phantom.volume.slice_count(),
        spec.b_values.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_adc(args: &AdcArgs, exec: Execution) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| odc_core::Error::io(path, e))?;
            let cfg: AdcConfig = serde_json::from_str(&text).map_err(odc_core::Error::from)?;
            cfg.validate()?;
            cfg
        }
        None => AdcConfig::default(),
    };
    let (_, volume) = read_volume(&args.volume)?;
    fs::create_dir_all(&args.out).map_err(|e| odc_core::Error::io(&args.out, e))?;
    for (z, slice) in volume.slices().iter().enumerate() {
        let band = compute_adc_with(slice, &cfg, exec)?;
        write_band(
            &band,
            &args.out.join(format!("adc_slice{z:02}.pgm")),
            args.bit_depth.into(),
        )?;
    }
    println!(
        "wrote {} ADC maps to {}",
        volume.slice_count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs, exec: Execution) -> Result<()> {
    let summary = run_config_file(&args.config, args.seed.seed, exec)?;
    for s in summary {
        println!(
            "{:<4} mean kappa {:.4}  mean phi {:.4}",
            s.method.name(),
            s.mean_kappa,
            s.mean_phi
        );
    }
    Ok(())
}

fn cmd_relabel(args: &RelabelArgs) -> Result<()> {
    let map = read_label_map(&args.input)?;
    let text = fs::read_to_string(&args.merge).map_err(|e| odc_core::Error::io(&args.merge, e))?;
    let merge = merge_map_from_json(&text)?;
    write_label_map(&relabel(&map, &merge)?, &args.out)?;
    Ok(())
}

fn class_mask(path: &Path, class: u32) -> Result<BinaryImage> {
    Ok(BinaryImage::from_class(&read_label_map(path)?, class))
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<()> {
    let mask = class_mask(&args.map, args.class)?;
    let spectrum = pattern_spectrum(&mask, args.se.into())?;
    write_atomic(&args.out, spectrum.to_csv().as_bytes())?;
    Ok(())
}

fn cmd_similarity(args: &SimilarityArgs) -> Result<()> {
    let a = class_mask(&args.a, args.class)?;
    let b = class_mask(&args.b, args.class)?;
    if a.grid() != b.grid() {
        return Err(
            odc_core::Error::InvalidParameter("label maps must share one grid".into()).into(),
        );
    }
    println!("{:.4}", morphological_similarity(&a, &b, args.se.into())?);
    Ok(())
}

/// 2 for configuration and I/O problems, 3 for data problems, 4 for training
/// that failed to converge.
fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err
        .chain()
        .find_map(|c| c.downcast_ref::<odc_core::Error>())
    else {
        return 2;
    };
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Convergence => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let result = match &cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Adc(a) => cmd_adc(a, exec),
        Command::Run(a) => cmd_run(a, exec),
        Command::Relabel(a) => cmd_relabel(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Similarity(a) => cmd_similarity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
