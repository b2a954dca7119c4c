//! Command-line front end for the activation codec.
//!
//! Thin adapter over the library: every subcommand reads tensor/container
//! files, calls the corresponding library operation and prints
//! machine-readable `key=value` stats. Exit codes: 0 success, 1 usage or
//! invalid input, 2 I/O failure, 3 format/corruption.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use actcodec::error::Error;
use actcodec::golomb::ReferenceSelector;
use actcodec::kernels::apply_nm_sparsity;
use actcodec::pipeline::{
    self, bandwidth_report, energy_report, CoderConfig, CompressedActivation, EnergyModel,
    LayerCost, PipelineConfig,
};
use actcodec::quantize::{int8_weight_scales, quantize_int8_weights};
use actcodec::tensor::{self, Tensor};
use actcodec::transform::ChannelTransform;

#[derive(Parser)]
#[command(name = "actcodec", version, about = "Activation-map compression codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a float tensor file (.atns) into a container (.actc)
    Compress {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        codec: CodecFlags,
    },
    /// Decompress a container (.actc) back to a float tensor file (.atns)
    Decompress {
        input: PathBuf,
        output: PathBuf,
        /// Transform parameter file prefix (must match the compressor's)
        #[arg(long)]
        transform: Option<String>,
    },
    /// Print coded-size estimates and the weighted penalty for a tensor
    Estimate {
        input: PathBuf,
        #[command(flatten)]
        codec: CodecFlags,
    },
    /// Fit a decorrelating transform from a directory of sample tensors
    FitTransform {
        /// Directory of .atns sample files (all with the same channel count)
        sample_dir: PathBuf,
        /// Output path prefix for the four parameter files
        out_prefix: String,
    },
    /// Sparsify and/or int8-quantize a 4-D weight file
    QuantizeWeights {
        input: PathBuf,
        /// n:m sparsity pattern, e.g. 2:4
        #[arg(long)]
        nm: Option<String>,
        /// Compute per-output-channel int8 weights and scales
        #[arg(long)]
        int8: bool,
        /// Where to write the sparsified f32 weights
        #[arg(long)]
        out_weights: Option<PathBuf>,
        /// Where to write the int8 weights
        #[arg(long)]
        out_int8: Option<PathBuf>,
        /// Where to write the per-channel scales (Ox1x1 f32 tensor)
        #[arg(long)]
        out_scales: Option<PathBuf>,
    },
    /// Bandwidth (and optional energy) report over original/compressed pairs
    Stats {
        /// Alternating ORIGINAL.atns COMPRESSED.actc pairs
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Energy cost table (key = value file); enables the energy report
        #[arg(long)]
        energy_config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CodecFlags {
    /// Entropy coder: symeg, eg or rans
    #[arg(long, default_value = "symeg")]
    coder: String,
    /// Quantizer bit depth
    #[arg(long, default_value_t = 8)]
    q: u8,
    /// Exp-Golomb order (eg coder only)
    #[arg(long, default_value_t = 4)]
    k: u8,
    /// Reference statistic for symeg: mean, mode or median
    #[arg(long = "ref", default_value = "median")]
    reference: String,
    /// Transform parameter file prefix (identity when absent)
    #[arg(long)]
    transform: Option<String>,
    /// Penalty weight
    #[arg(long, default_value_t = 0.0)]
    gamma: f32,
}

impl CodecFlags {
    fn pipeline_config(&self) -> Result<PipelineConfig, Error> {
        let coder = match self.coder.as_str() {
            "symeg" => CoderConfig::SymEg {
                selector: self.reference.parse::<ReferenceSelector>()?,
            },
            "eg" => CoderConfig::EgK { k: self.k },
            "rans" => CoderConfig::RansGaussian,
            other => return Err(Error::Config(format!("unknown coder '{other}'"))),
        };
        let transform = load_transform(self.transform.as_deref())?;
        PipelineConfig::new(transform, self.q, coder, self.gamma)
    }
}

fn load_transform(prefix: Option<&str>) -> Result<ChannelTransform, Error> {
    match prefix {
        None => Ok(ChannelTransform::identity()),
        Some(p) => ChannelTransform::load_prefix(p),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io(_) => 2,
                Error::Format(_) | Error::Corrupt(_) | Error::Unsupported(_) => 3,
                Error::Domain(_) | Error::Shape(_) | Error::Config(_) => {
                    eprintln!("run 'actcodec --help' for usage");
                    1
                }
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Compress { input, output, codec } => cmd_compress(&input, &output, &codec),
        Command::Decompress {
            input,
            output,
            transform,
        } => cmd_decompress(&input, &output, transform.as_deref()),
        Command::Estimate { input, codec } => cmd_estimate(&input, &codec),
        Command::FitTransform { sample_dir, out_prefix } => cmd_fit_transform(&sample_dir, &out_prefix),
        Command::QuantizeWeights {
            input,
            nm,
            int8,
            out_weights,
            out_int8,
            out_scales,
        } => cmd_quantize_weights(
            &input,
            nm.as_deref(),
            int8,
            out_weights.as_deref(),
            out_int8.as_deref(),
            out_scales.as_deref(),
        ),
        Command::Stats { files, energy_config } => cmd_stats(&files, energy_config.as_deref()),
    }
}

fn cmd_compress(input: &Path, output: &Path, codec: &CodecFlags) -> Result<(), Error> {
    let cfg = codec.pipeline_config()?;
    let x = tensor::read_tensor(input)?.into_f32()?;
    let packed = pipeline::compress(&x, &cfg)?;
    packed.write_to(output)?;
    let in_bytes = 4 * x.len() as u64;
    let out_bytes = packed.total_bytes();
    println!(
        "in_bytes={} out_bytes={} ratio={:.6} bits_per_element={:.6}",
        in_bytes,
        out_bytes,
        in_bytes as f64 / out_bytes as f64,
        out_bytes as f64 * 8.0 / x.len() as f64
    );
    Ok(())
}

fn cmd_decompress(input: &Path, output: &Path, transform: Option<&str>) -> Result<(), Error> {
    let packed = CompressedActivation::read_from(input)?;
    let cfg = PipelineConfig {
        transform: load_transform(transform)?,
        q: packed.q,
        coder: CoderConfig::RansGaussian, // decode is container-driven; coder here is unused
        gamma: 0.0,
    };
    let restored = pipeline::decompress(&packed, &cfg)?;
    tensor::write_tensor(&restored, output)?;
    Ok(())
}

fn cmd_estimate(input: &Path, codec: &CodecFlags) -> Result<(), Error> {
    let cfg = codec.pipeline_config()?;
    let x = tensor::read_tensor(input)?.into_f32()?;
    let est = pipeline::estimate_penalty(&x, &cfg)?;
    println!(
        "total_bits={:.6} bits_per_element={:.6} normalized_bits={:.6} penalty={:.6}",
        est.total_bits, est.bits_per_element, est.normalized_bits, est.penalty
    );
    Ok(())
}

fn cmd_fit_transform(sample_dir: &Path, out_prefix: &str) -> Result<(), Error> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(sample_dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "atns"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no .atns sample files in {}",
            sample_dir.display()
        )));
    }
    let samples = paths
        .iter()
        .map(|p| tensor::read_tensor(p)?.into_f32())
        .collect::<Result<Vec<_>, Error>>()?;
    let transform = ChannelTransform::fit_pca(&samples)?;
    transform.save_prefix(out_prefix)?;
    let channels = transform.channels().unwrap_or(0);
    println!("samples={} channels={channels} prefix={out_prefix}", samples.len());
    Ok(())
}

fn parse_nm(spec: &str) -> Result<(usize, usize), Error> {
    let (n, m) = spec
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("sparsity pattern must look like 2:4, got '{spec}'")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad sparsity count '{s}'")))
    };
    Ok((parse(n)?, parse(m)?))
}

fn cmd_quantize_weights(
    input: &Path,
    nm: Option<&str>,
    int8: bool,
    out_weights: Option<&Path>,
    out_int8: Option<&Path>,
    out_scales: Option<&Path>,
) -> Result<(), Error> {
    if nm.is_none() && !int8 {
        return Err(Error::Config("nothing to do: pass --nm and/or --int8".into()));
    }
    let weights = tensor::read_weights_as::<f32>(input)?;
    let (o, i, kh, kw) = weights.dims();
    let total = weights.len();

    let (weights, kept) = match nm {
        Some(spec) => {
            let (n, m) = parse_nm(spec)?;
            let (sparse, mask) = apply_nm_sparsity(&weights, n, m)?;
            let kept = mask.kept();
            if let Some(path) = out_weights {
                tensor::write_weights(&sparse, path)?;
            }
            (sparse, kept)
        }
        None => (weights, total),
    };
    println!(
        "o={o} i={i} kh={kh} kw={kw} nonzeros={kept} total={total} density={:.6}",
        kept as f64 / total as f64
    );

    if int8 {
        let scales = int8_weight_scales(&weights)?;
        let quantized = quantize_int8_weights(&weights, &scales)?;
        if let Some(path) = out_int8 {
            tensor::write_weights(&quantized, path)?;
        }
        if let Some(path) = out_scales {
            let t = Tensor::new((o, 1, 1), scales.clone())?;
            tensor::write_tensor(&t, path)?;
        }
        let min = scales.iter().copied().fold(f32::INFINITY, f32::min);
        let max = scales.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        println!("scale_min={min:.6} scale_max={max:.6}");
    }
    Ok(())
}

fn cmd_stats(files: &[PathBuf], energy_config: Option<&Path>) -> Result<(), Error> {
    if files.len() < 2 || files.len() % 2 != 0 {
        return Err(Error::Config(
            "stats takes alternating ORIGINAL.atns COMPRESSED.actc pairs".into(),
        ));
    }
    let mut tensors = Vec::with_capacity(files.len() / 2);
    let mut containers = Vec::with_capacity(files.len() / 2);
    for pair in files.chunks(2) {
        tensors.push(tensor::read_tensor(&pair[0])?.into_f32()?);
        containers.push(CompressedActivation::read_from(&pair[1])?);
    }
    let report = bandwidth_report(&tensors, &containers)?;
    for (i, layer) in report.layers.iter().enumerate() {
        println!(
            "layer={i} uncompressed_bytes={} compressed_bytes={} ratio={:.6}",
            layer.uncompressed_bytes, layer.compressed_bytes, layer.ratio
        );
    }
    println!(
        "total_uncompressed={} total_compressed={} aggregate_ratio={:.6}",
        report.total_uncompressed, report.total_compressed, report.aggregate_ratio
    );

    if let Some(path) = energy_config {
        // traffic-only comparison: DRAM bytes with and without compression
        let model = EnergyModel::from_file(path)?;
        let baseline: Vec<LayerCost> = report
            .layers
            .iter()
            .map(|l| LayerCost {
                dram_bytes: l.uncompressed_bytes,
                fp32_macs: 0,
                int8_macs: 0,
            })
            .collect();
        let compressed: Vec<LayerCost> = report
            .layers
            .iter()
            .map(|l| LayerCost {
                dram_bytes: l.compressed_bytes,
                fp32_macs: 0,
                int8_macs: 0,
            })
            .collect();
        let energy = energy_report(&baseline, &compressed, &model)?;
        println!(
            "energy_model dram_pj_per_byte={} mac_pj_fp32={} mac_pj_int8={}",
            model.dram_pj_per_byte, model.mac_pj_fp32, model.mac_pj_int8
        );
        println!(
            "energy_baseline_pj={:.3} energy_pipeline_pj={:.3} energy_ratio={:.6}",
            energy.baseline_pj, energy.pipeline_pj, energy.ratio
        );
    }

    // human-readable table
    println!("\nlayer\tuncompressed_bytes\tcompressed_bytes\tratio");
    for (i, layer) in report.layers.iter().enumerate() {
        println!(
            "{i}\t{}\t{}\t{:.3}",
            layer.uncompressed_bytes, layer.compressed_bytes, layer.ratio
        );
    }
    println!(
        "all\t{}\t{}\t{:.3}",
        report.total_uncompressed, report.total_compressed, report.aggregate_ratio
    );
    Ok(())
}
