//! `wz`: batch driver for the Wyner-Ziv codec.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wz_core::frame_io::{psnr_from_mse, Fps};
use wz_core::pipeline::{
    mean_psnr, rate_report, rd_point, side_info_eval, write_rd_csv, write_si_csv, write_stats_csv,
};
use wz_core::sideinfo::SideInfoConfig;
use wz_core::splitter::ActivityConfig;
use wz_core::{
    decode, encode, psnr, read_raw, write_raw, Bitstream, CodecConfig, Error, GopMode, Layout,
    Sequence, SoftInputGranularity,
};

const EXIT_INPUT: u8 = 2;
const EXIT_BITSTREAM: u8 = 3;
const EXIT_FLAGGED: u8 = 4;

#[derive(Parser)]
#[command(name = "wz", version, about = "Transform-domain Wyner-Ziv video codec")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw sequence into an archive bitstream.
    Encode(EncodeArgs),
    /// Decode an archive bitstream, simulating the feedback channel.
    Decode(DecodeArgs),
    /// Mean luma PSNR between two raw sequences.
    Psnr(PsnrArgs),
    /// Encode and decode at several quantization matrices, writing one RD row each.
    Rd(RdArgs),
    /// Side-information quality against plain averaging, from uncoded references.
    SiEval(SiEvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Y,
    Yuv420,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Y => Layout::YOnly,
            LayoutArg::Yuv420 => Layout::Yuv420,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Band,
    Coeff,
}

#[derive(Clone, Copy, Debug)]
enum GopArg {
    Adaptive,
    Fixed(usize),
}

impl FromStr for GopArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "adaptive" {
            return Ok(GopArg::Adaptive);
        }
        s.parse()
            .map(GopArg::Fixed)
            .map_err(|_| format!("expected 'adaptive' or a GOP size, got '{s}'"))
    }
}

#[derive(Clone, Copy, Debug)]
struct Sweep(u8, u8);

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected a range like 1..8, got '{s}'");
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let a: u8 = a.trim().parse().map_err(|_| bad())?;
        let b: u8 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a == 0 || a > b || b > 8 {
            return Err(format!("sweep {a}..{b} is outside 1..8"));
        }
        Ok(Sweep(a, b))
    }
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, value_enum, default_value = "yuv420")]
    layout: LayoutArg,
    #[arg(long, default_value = "15")]
    fps: Fps,
}

#[derive(Args)]
struct CodingArgs {
    /// GOP size, or `adaptive` for the motion-activity splitter.
    #[arg(long, default_value = "2")]
    gop: GopArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Key-frame qp; defaults to the value paired with the matrix.
    #[arg(long)]
    key_qp: Option<u8>,
    #[command(flatten)]
    decoder: DecoderArgs,
}

#[derive(Args)]
struct DecoderArgs {
    #[arg(long, default_value_t = wz_core::ldpca::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "coeff")]
    granularity: GranularityArg,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Quantization matrix 1..8.
    #[arg(long, default_value_t = 4)]
    q: u8,
    #[command(flatten)]
    coding: CodingArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Layout of the written YUV file.
    #[arg(long, value_enum, default_value = "yuv420")]
    layout: LayoutArg,
    #[command(flatten)]
    decoder: DecoderArgs,
}

#[derive(Args)]
struct PsnrArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, value_enum, default_value = "yuv420")]
    layout: LayoutArg,
}

#[derive(Args)]
struct RdArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "1..8")]
    sweep: Sweep,
    #[command(flatten)]
    coding: CodingArgs,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct SiEvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 2)]
    gop: usize,
    #[arg(long)]
    csv: PathBuf,
}

/// An error paired with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::MalformedBitstream(_) | Error::UnknownIntraCodec(_) | Error::CorruptPayload(_)) => {
                EXIT_BITSTREAM
            }
            Some(
                Error::BadDimensions { .. }
                | Error::BadBufferSize { .. }
                | Error::TruncatedStream { .. }
                | Error::DimensionMismatch(_)
                | Error::EmptySequence
                | Error::InvalidConfig(_),
            ) => EXIT_INPUT,
            _ => 1,
        };
        Failure { code, err }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        anyhow::Error::new(err).into()
    }
}

type Outcome = Result<u8, Failure>;

fn read_input(path: &Path, width: usize, height: usize, layout: Layout, fps: Fps) -> Result<Sequence, Failure> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let seq = read_raw(&bytes, width, height, layout)?;
    if seq.is_empty() {
        return Err(Error::EmptySequence.into());
    }
    Ok(Sequence::new(seq.into_frames(), fps)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn create(path: &Path) -> Result<fs::File, Failure> {
    Ok(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?)
}

fn decoder_config(cfg: &mut CodecConfig, d: &DecoderArgs) {
    cfg.max_iter = d.max_iter;
    cfg.granularity = match d.granularity {
        GranularityArg::Band => SoftInputGranularity::Band,
        GranularityArg::Coeff => SoftInputGranularity::Coefficient,
    };
}

fn codec_config(q: u8, c: &CodingArgs) -> CodecConfig {
    let mut cfg = CodecConfig {
        quant: q,
        gop: match c.gop {
            GopArg::Adaptive => GopMode::Adaptive(ActivityConfig::default()),
            GopArg::Fixed(n) => GopMode::Fixed(n),
        },
        seed: c.seed,
        key_qp: c.key_qp,
        ..CodecConfig::default()
    };
    decoder_config(&mut cfg, &c.decoder);
    cfg
}

fn run_encode(a: &EncodeArgs) -> Outcome {
    let i = &a.input;
    let seq = read_input(&i.input, i.width, i.height, i.layout.into(), i.fps)?;
    let cfg = codec_config(a.q, &a.coding);
    let (bs, stats) = encode(&seq, &cfg)?;
    let bytes = bs.to_bytes();
    write_file(&a.out, &bytes)?;
    eprintln!(
        "encoded {} frames in {} GOPs: {} bytes ({} key bits, {} stored syndrome bits)",
        seq.len(),
        stats.plan.sizes.len(),
        bytes.len(),
        stats.key_bits,
        stats.stored_syndrome_bits
    );
    Ok(0)
}

fn run_decode(a: &DecodeArgs) -> Outcome {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let bs = Bitstream::from_bytes(&bytes)?;
    let mut cfg = CodecConfig::default();
    decoder_config(&mut cfg, &a.decoder);
    let (seq, stats) = decode(&bs, &cfg)?;
    write_file(&a.out, &write_raw(&seq, a.layout.into()))?;
    if let Some(path) = &a.stats {
        write_stats_csv(&stats, create(path)?)?;
    }
    let r = rate_report(&stats);
    eprintln!(
        "decoded {} frames: {:.2} kbps (key {:.2}, WZ {:.2}), {} of {} stored syndrome bits consumed",
        seq.len(),
        r.total_kbps(),
        r.key_kbps(),
        r.wz_kbps(),
        r.bits.wz,
        stats.stored_syndrome_bits
    );
    let flagged = stats.flagged();
    if flagged > 0 {
        eprintln!("{flagged} bit planes failed CRC verification and use hard decisions");
        return Ok(EXIT_FLAGGED);
    }
    Ok(0)
}

fn run_psnr(a: &PsnrArgs) -> Outcome {
    let fps = Fps::default();
    let x = read_input(&a.a, a.width, a.height, a.layout.into(), fps)?;
    let y = read_input(&a.b, a.width, a.height, a.layout.into(), fps)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} frames", x.len(), y.len())).into());
    }
    let mut identical = true;
    for (f, g) in x.frames().iter().zip(y.frames()) {
        identical &= psnr(f, g)?.is_infinite();
    }
    if identical {
        println!("{}", psnr_from_mse(0.0));
    } else {
        println!("{:.4}", mean_psnr(&x, &y)?);
    }
    Ok(0)
}

fn run_rd(a: &RdArgs) -> Outcome {
    let i = &a.input;
    let seq = read_input(&i.input, i.width, i.height, i.layout.into(), i.fps)?;
    let mut points = Vec::new();
    let mut flagged = 0;
    for q in a.sweep.0..=a.sweep.1 {
        let cfg = codec_config(q, &a.coding);
        let (p, _, stats) = rd_point(&seq, &cfg)?;
        eprintln!(
            "Q{q}: {:.2} kbps (key {:.2}, WZ {:.2}), {:.2} dB",
            p.kbps_total, p.kbps_key, p.kbps_wz, p.psnr_mean
        );
        flagged += stats.flagged();
        points.push(p);
    }
    write_rd_csv(&points, create(&a.csv)?)?;
    if flagged > 0 {
        eprintln!("{flagged} bit planes failed CRC verification across the sweep");
        return Ok(EXIT_FLAGGED);
    }
    Ok(0)
}

fn run_si_eval(a: &SiEvalArgs) -> Outcome {
    let i = &a.input;
    let seq = read_input(&i.input, i.width, i.height, i.layout.into(), i.fps)?;
    let rows = side_info_eval(&seq, a.gop, &SideInfoConfig::default())?;
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let si = rows.iter().map(|r| r.psnr_si.min(100.0)).sum::<f64>() / n;
        let avg = rows.iter().map(|r| r.psnr_average.min(100.0)).sum::<f64>() / n;
        eprintln!("{} WZ frames: side information {si:.2} dB, averaging {avg:.2} dB", rows.len());
    }
    write_si_csv(&rows, create(&a.csv)?)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {}", anyhow!(e));
        return ExitCode::FAILURE;
    }
    let outcome = match &cli.command {
        Command::Encode(a) => run_encode(a),
        Command::Decode(a) => run_decode(a),
        Command::Psnr(a) => run_psnr(a),
        Command::Rd(a) => run_rd(a),
        Command::SiEval(a) => run_si_eval(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
