//! Encoder, decoder, feedback channel and rate accounting.
//!
//! The encoder stores every accumulated syndrome in the archive. The decoder
//! pulls chunks through a [`FeedbackChannel`] one at a time, so the rate it
//! reports is what a live feedback system would have sent.

mod bitstream;

use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

use rayon::prelude::*;

pub use bitstream::{
    BandRecord, Bitstream, GopRecord, Header, PlaneRecord, WzRecord, GOP_HEADER_BYTES, HEADER_BYTES,
    MAGIC, VERSION,
};

use crate::error::{Error, Result};
use crate::frame_io::{psnr, Frame, Sequence};
use crate::keyframe::{codec_for_id, default_qp, BuiltinDct, IntraCodec};
use crate::ldpca::{decode_plane, encode_plane, hard_decisions, verify, LdpcaCode, DEFAULT_DEGREE, DEFAULT_MAX_ITER};
use crate::noise_model::{alpha_from_variance, LaplacianModel};
use crate::quantizer::{
    ac_step, bins_to_bitplanes, bit_count, bitplanes_to_bins, dc_step, quantize_ac_with_range, quantize_dc,
    quantize_frame, BandPlanes, BitPlaneSet, QuantMatrix, QuantizedBands,
};
use crate::reconstruction::reconstruct_plane;
use crate::sideinfo::{estimate, plan_interpolation, InterpolationContext, SideInfoConfig};
use crate::softinput::{plane_llrs, PlaneContext};
use crate::splitter::{plan_fixed, plan_gops, ActivityConfig, GopPlan};
use crate::transform::{frame_to_bands, CoeffBands};

#[derive(Clone, Debug, PartialEq)]
pub enum GopMode {
    Fixed(usize),
    Adaptive(ActivityConfig),
}

/// Which Laplacian parameter feeds the soft input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftInputGranularity {
    Band,
    Coefficient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodecConfig {
    /// Quantization matrix `Q1..Q8`.
    pub quant: u8,
    pub gop: GopMode,
    pub seed: u64,
    pub degree: usize,
    /// Key-frame qp; `None` picks the default paired with `quant`.
    pub key_qp: Option<u8>,
    pub max_iter: usize,
    pub granularity: SoftInputGranularity,
    /// Chunks requested before the first decoding attempt of a plane.
    pub initial_chunks: usize,
    /// Skip decoding attempts while the received syndrome bits are below the
    /// conditional entropy implied by the soft input.
    pub entropy_gate: bool,
    /// Floor each band's residual variance at the key-frame coding noise.
    pub key_noise_floor: bool,
    pub sideinfo: SideInfoConfig,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            quant: 4,
            gop: GopMode::Fixed(2),
            seed: 1,
            degree: DEFAULT_DEGREE,
            key_qp: None,
            max_iter: DEFAULT_MAX_ITER,
            granularity: SoftInputGranularity::Coefficient,
            initial_chunks: 1,
            entropy_gate: true,
            key_noise_floor: true,
            sideinfo: SideInfoConfig::default(),
        }
    }
}

impl CodecConfig {
    pub fn with_quant(quant: u8) -> Self {
        CodecConfig {
            quant,
            ..Default::default()
        }
    }

    pub fn key_qp(&self) -> Result<u8> {
        match self.key_qp {
            Some(qp) => Ok(qp),
            None => default_qp(self.quant),
        }
    }

    pub fn validate(&self) -> Result<()> {
        QuantMatrix::new(self.quant)?;
        BuiltinDct::new(self.key_qp()?)?;
        match &self.gop {
            GopMode::Fixed(n) if !(1..=255).contains(n) => {
                return Err(Error::InvalidConfig(format!("GOP size {n}")));
            }
            GopMode::Adaptive(a) => a.validate()?,
            _ => {}
        }
        if self.degree == 0 || self.degree > 255 {
            return Err(Error::InvalidConfig(format!("LDPCA degree {}", self.degree)));
        }
        if self.initial_chunks == 0 {
            return Err(Error::InvalidConfig("initial chunk count 0".into()));
        }
        Ok(())
    }
}

pub fn plan(seq: &Sequence, mode: &GopMode) -> Result<GopPlan> {
    match mode {
        GopMode::Fixed(n) => plan_fixed(seq.len(), *n),
        GopMode::Adaptive(cfg) => plan_gops(seq, cfg),
    }
}

/// Encoder-side view of one WZ frame, kept for verification.
#[derive(Clone, Debug)]
pub struct EncodedWz {
    pub frame: usize,
    pub bins: QuantizedBands,
    pub planes: BitPlaneSet,
}

#[derive(Clone, Debug)]
pub struct EncodeStats {
    pub plan: GopPlan,
    pub wz: Vec<EncodedWz>,
    pub key_bits: u64,
    pub stored_syndrome_bits: u64,
}

fn to_u16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} exceeds 65535")))
}

fn encode_wz(frame: &Frame, matrix: &QuantMatrix, code: &LdpcaCode) -> Result<(WzRecord, EncodedWz)> {
    let bins = quantize_frame(&frame_to_bands(frame), matrix)?;
    let planes = bins_to_bitplanes(&bins)?;
    let bands = planes
        .bands
        .iter()
        .map(|bp| {
            let planes = bp
                .planes
                .iter()
                .map(|bits| {
                    let s = encode_plane(bits, code)?;
                    Ok(PlaneRecord {
                        crc: s.crc,
                        chunks: s.chunks(code),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BandRecord {
                band: bp.band,
                range: bp.range,
                planes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        WzRecord {
            frame: frame.index,
            bands,
        },
        EncodedWz {
            frame: frame.index,
            bins,
            planes,
        },
    ))
}

pub fn encode(seq: &Sequence, cfg: &CodecConfig) -> Result<(Bitstream, EncodeStats)> {
    cfg.validate()?;
    let (w, h) = seq.dims().ok_or(Error::EmptySequence)?;
    let header = Header {
        width: to_u16(w, "width")?,
        height: to_u16(h, "height")?,
        fps: seq.fps,
        frames: u32::try_from(seq.len()).map_err(|_| Error::InvalidConfig("too many frames".into()))?,
        quant: cfg.quant,
        seed: cfg.seed,
        degree: cfg.degree as u8,
        key_codec: crate::keyframe::BUILTIN_DCT_ID,
        key_qp: cfg.key_qp()?,
    };
    let gop_plan = plan(seq, &cfg.gop)?;
    if let Some(&big) = gop_plan.sizes.iter().find(|&&s| s > 255) {
        return Err(Error::InvalidConfig(format!("GOP size {big}")));
    }
    let matrix = QuantMatrix::new(cfg.quant)?;
    let code = LdpcaCode::build(header.band_len(), cfg.degree, cfg.seed)?;
    let intra = BuiltinDct::new(header.key_qp)?;
    let frames = seq.frames();

    let keys = gop_plan.key_indices();
    let key_payloads = keys
        .par_iter()
        .map(|&k| intra.encode(&frames[k]))
        .collect::<Result<Vec<_>>>()?;
    let wz_indices: Vec<usize> = keys
        .iter()
        .zip(&gop_plan.sizes)
        .flat_map(|(&k, &s)| k + 1..k + s)
        .collect();
    let mut encoded = wz_indices
        .par_iter()
        .map(|&i| encode_wz(&frames[i], &matrix, &code))
        .collect::<Result<Vec<_>>>()?
        .into_iter();

    let mut gops = Vec::with_capacity(keys.len());
    let mut wz_stats = Vec::with_capacity(wz_indices.len());
    for (key, &size) in key_payloads.into_iter().zip(&gop_plan.sizes) {
        let mut wz = Vec::with_capacity(size - 1);
        for _ in 1..size {
            let (record, stats) = encoded.next().expect("one record per WZ frame");
            wz.push(record);
            wz_stats.push(stats);
        }
        gops.push(GopRecord { size, key, wz });
    }
    let bs = Bitstream { header, gops };
    let stats = EncodeStats {
        plan: gop_plan,
        wz: wz_stats,
        key_bits: bs.gops.iter().map(GopRecord::key_bits).sum(),
        stored_syndrome_bits: bs.stored_syndrome_bits(),
    };
    Ok((bs, stats))
}

/// Decoder-to-encoder request path. Each call hands out the next chunk of
/// the plane in ladder order, or `None` once the plane is exhausted.
pub trait FeedbackChannel: Sync {
    fn request(&self, frame: usize, band: usize, plane: usize) -> Option<Vec<u8>>;
}

/// Serves chunks from an archive bitstream.
pub struct ArchiveChannel<'a> {
    planes: HashMap<(usize, usize, usize), &'a PlaneRecord>,
    served: Mutex<HashMap<(usize, usize, usize), usize>>,
}

impl<'a> ArchiveChannel<'a> {
    pub fn new(bs: &'a Bitstream) -> Self {
        let mut planes = HashMap::new();
        for wz in bs.wz_records() {
            for band in &wz.bands {
                for (p, rec) in band.planes.iter().enumerate() {
                    planes.insert((wz.frame, band.band, p), rec);
                }
            }
        }
        ArchiveChannel {
            planes,
            served: Mutex::new(HashMap::new()),
        }
    }
}

impl FeedbackChannel for ArchiveChannel<'_> {
    fn request(&self, frame: usize, band: usize, plane: usize) -> Option<Vec<u8>> {
        let rec = self.planes.get(&(frame, band, plane))?;
        let mut served = self.served.lock().unwrap();
        let next = served.entry((frame, band, plane)).or_insert(0);
        let chunk = rec.chunks.get(*next)?.clone();
        *next += 1;
        Some(chunk)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    Key,
    Wz,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneStat {
    pub frame: usize,
    pub band: usize,
    /// Plane position, 0 = most significant (the sign plane for AC bands).
    pub plane: usize,
    pub chunks: usize,
    /// Syndrome bits consumed.
    pub bits: u64,
    pub crc_ok: bool,
    pub attempts: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameStat {
    pub frame: usize,
    pub kind: FrameKind,
    /// Key payload bits, or consumed syndrome, CRC and range bits.
    pub bits: u64,
}

/// Bits per stream component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RateBits {
    pub key: u64,
    pub wz: u64,
    pub crc: u64,
    pub range: u64,
    pub header: u64,
}

impl RateBits {
    pub fn total(&self) -> u64 {
        self.key + self.wz + self.crc + self.range + self.header
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeStats {
    pub header: Header,
    pub gop_sizes: Vec<usize>,
    /// Display order.
    pub frames: Vec<FrameStat>,
    pub planes: Vec<PlaneStat>,
    pub bits: RateBits,
    /// Syndrome bits stored in the archive, consumed or not.
    pub stored_syndrome_bits: u64,
}

impl DecodeStats {
    /// Planes that fell back to hard decisions.
    pub fn flagged(&self) -> usize {
        self.planes.iter().filter(|p| !p.crc_ok).count()
    }
}

/// Decoder-side view of one WZ frame.
#[derive(Clone, Debug)]
pub struct WzTrace {
    pub frame: usize,
    pub side_info: Frame,
    pub planes: BitPlaneSet,
    pub bins: QuantizedBands,
    pub coeffs: CoeffBands,
}

#[derive(Clone, Debug, Default)]
pub struct DecodeTrace {
    pub wz: Vec<WzTrace>,
}

struct BandJob<'a> {
    frame: usize,
    record: &'a BandRecord,
    levels: u32,
    y: &'a [f64],
    alpha: Vec<f64>,
}

fn decode_band(
    job: &BandJob,
    code: &LdpcaCode,
    channel: &dyn FeedbackChannel,
    cfg: &CodecConfig,
) -> Result<(BandPlanes, Vec<PlaneStat>)> {
    let rec = job.record;
    let bits = bit_count(job.levels) as usize;
    if rec.planes.len() != bits {
        return Err(Error::MalformedBitstream(format!(
            "band {} has {} planes, expected {bits}",
            rec.band,
            rec.planes.len()
        )));
    }
    let (step, y_q) = match rec.range {
        None => {
            let (q, w) = quantize_dc(job.y, job.levels)?;
            debug_assert_eq!(w, dc_step(job.levels));
            (w, q)
        }
        Some(r) => {
            let (q, w) = quantize_ac_with_range(job.y, job.levels, r)?;
            debug_assert_eq!(w, ac_step(job.levels, r.max(1)));
            (w, q)
        }
    };
    let mut decoded: Vec<Vec<u8>> = Vec::with_capacity(bits);
    let mut stats = Vec::with_capacity(bits);
    for (p, prec) in rec.planes.iter().enumerate() {
        let ctx = PlaneContext {
            band: rec.band,
            plane: bits - 1 - p,
            bits,
            decoded: &decoded,
            y: job.y,
            y_q: &y_q,
            step,
            alpha: &job.alpha,
        };
        let llr = plane_llrs(&ctx)?;
        let gate = if cfg.entropy_gate { conditional_entropy(&llr) } else { 0.0 };
        let mut received: Vec<Vec<u8>> = Vec::new();
        let mut stat = PlaneStat {
            frame: job.frame,
            band: rec.band,
            plane: p,
            chunks: 0,
            bits: 0,
            crc_ok: false,
            attempts: 0,
            iterations: 0,
        };
        let mut accepted = None;
        loop {
            let Some(chunk) = channel.request(job.frame, rec.band, p) else {
                break;
            };
            stat.bits += chunk.len() as u64;
            received.push(chunk);
            let last = received.len() == code.num_chunks();
            if !last && (received.len() < cfg.initial_chunks || (stat.bits as f64) < gate) {
                continue;
            }
            let result = decode_plane(&llr, &received, code, cfg.max_iter)?;
            stat.attempts += 1;
            stat.iterations += match &result {
                crate::ldpca::PlaneDecode::Decoded { iterations, .. }
                | crate::ldpca::PlaneDecode::NotConverged { iterations, .. } => *iterations,
            };
            if result.is_decoded() && verify(result.bits(), prec.crc) {
                accepted = Some(result.bits().to_vec());
                break;
            }
        }
        stat.chunks = received.len();
        stat.crc_ok = accepted.is_some();
        decoded.push(accepted.unwrap_or_else(|| hard_decisions(&llr)));
        stats.push(stat);
    }
    Ok((
        BandPlanes {
            band: rec.band,
            levels: job.levels,
            step,
            range: rec.range,
            planes: decoded,
        },
        stats,
    ))
}

/// Sum of binary entropies of the bit posteriors implied by `llr`.
pub fn conditional_entropy(llr: &[f64]) -> f64 {
    llr.iter()
        .map(|l| {
            let p = 1.0 / (1.0 + l.abs().exp());
            if p <= 0.0 {
                0.0
            } else {
                -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
            }
        })
        .sum()
}

struct WzOutcome {
    frame: Frame,
    trace: WzTrace,
    stats: Vec<PlaneStat>,
    range_bits: u64,
}

struct DecodeCtx<'a> {
    matrix: QuantMatrix,
    code: LdpcaCode,
    channel: &'a dyn FeedbackChannel,
    cfg: &'a CodecConfig,
    /// Largest α per band, from the key-frame noise floor.
    alpha_cap: [f64; 16],
}

fn decode_wz(record: &WzRecord, x_b: &Frame, x_f: &Frame, tau: f64, dc: &DecodeCtx) -> Result<WzOutcome> {
    let (matrix, code, channel, cfg) = (&dc.matrix, &dc.code, dc.channel, dc.cfg);
    let ctx = InterpolationContext::new(x_b, x_f, tau)?;
    let si = estimate(&ctx, &cfg.sideinfo, record.frame)?;
    let si_bands = frame_to_bands(&si.frame);
    let model = LaplacianModel::fit(&si.residual)?;
    let per_coeff = cfg.granularity == SoftInputGranularity::Coefficient;
    let jobs: Vec<BandJob> = record
        .bands
        .iter()
        .map(|b| BandJob {
            frame: record.frame,
            record: b,
            levels: matrix.levels(b.band),
            y: si_bands.band(b.band),
            alpha: model
                .alphas(b.band, per_coeff)
                .into_iter()
                .map(|a| a.min(dc.alpha_cap[b.band]))
                .collect(),
        })
        .collect();
    let results = jobs
        .par_iter()
        .map(|job| decode_band(job, code, channel, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut bands = Vec::with_capacity(results.len());
    let mut stats = Vec::new();
    for (bp, s) in results {
        bands.push(bp);
        stats.extend(s);
    }
    let planes = BitPlaneSet {
        blocks_w: si_bands.blocks_w,
        blocks_h: si_bands.blocks_h,
        bands,
    };
    let bins = bitplanes_to_bins(&planes)?;
    let (plane, coeffs) = reconstruct_plane(&bins, &si_bands)?;
    let frame = plane.to_frame(record.frame)?;
    let range_bits = 16 * record.bands.iter().filter(|b| b.range.is_some()).count() as u64;
    Ok(WzOutcome {
        frame,
        trace: WzTrace {
            frame: record.frame,
            side_info: si.frame,
            planes,
            bins,
            coeffs,
        },
        stats,
        range_bits,
    })
}

/// Decodes an archive with the feedback simulated from the archive itself.
pub fn decode(bs: &Bitstream, cfg: &CodecConfig) -> Result<(Sequence, DecodeStats)> {
    let (seq, stats, _) = decode_traced(bs, cfg)?;
    Ok((seq, stats))
}

pub fn decode_traced(bs: &Bitstream, cfg: &CodecConfig) -> Result<(Sequence, DecodeStats, DecodeTrace)> {
    decode_with(bs, cfg, &ArchiveChannel::new(bs))
}

/// Decodes with an arbitrary feedback channel. Only decoder-side fields of
/// `cfg` are used; everything else comes from the header.
pub fn decode_with(
    bs: &Bitstream,
    cfg: &CodecConfig,
    channel: &dyn FeedbackChannel,
) -> Result<(Sequence, DecodeStats, DecodeTrace)> {
    let h = &bs.header;
    let (w, hgt) = h.dims();
    let total = h.frames as usize;
    if bs.gops.iter().map(|g| g.size).sum::<usize>() != total {
        return Err(Error::MalformedBitstream("GOP sizes do not cover the frame count".into()));
    }
    let matrix = QuantMatrix::new(h.quant).map_err(|e| Error::MalformedBitstream(e.to_string()))?;
    let code = LdpcaCode::build(h.band_len(), usize::from(h.degree), h.seed)?;
    let intra: Box<dyn IntraCodec> = codec_for_id(h.key_codec, h.key_qp)?;
    let mut alpha_cap = [f64::INFINITY; 16];
    if cfg.key_noise_floor {
        for (b, cap) in alpha_cap.iter_mut().enumerate() {
            let var = intra.noise_variance(b);
            if var > 0.0 {
                *cap = alpha_from_variance(var);
            }
        }
    }
    let dctx = DecodeCtx {
        matrix,
        code,
        channel,
        cfg,
        alpha_cap,
    };

    let mut starts = Vec::with_capacity(bs.gops.len());
    let mut s = 0;
    for g in &bs.gops {
        starts.push(s);
        s += g.size;
    }
    let mut decoded: Vec<Option<Frame>> = vec![None; total];
    let mut frame_stats: Vec<Option<FrameStat>> = vec![None; total];
    let keys = bs
        .gops
        .par_iter()
        .zip(&starts)
        .map(|(g, &k)| intra.decode(&g.key, w, hgt, k))
        .collect::<Result<Vec<_>>>()?;
    for ((f, g), &k) in keys.into_iter().zip(&bs.gops).zip(&starts) {
        decoded[k] = Some(f);
        frame_stats[k] = Some(FrameStat {
            frame: k,
            kind: FrameKind::Key,
            bits: g.key_bits(),
        });
    }

    let mut planes = Vec::new();
    let mut trace = DecodeTrace::default();
    let mut bits = RateBits {
        key: bs.gops.iter().map(GopRecord::key_bits).sum(),
        header: 8 * (HEADER_BYTES + GOP_HEADER_BYTES * bs.gops.len()) as u64,
        ..Default::default()
    };
    for (gi, (g, &start)) in bs.gops.iter().zip(&starts).enumerate() {
        // the last GOP has no following key frame and leans on its own
        let next_key = if gi + 1 < bs.gops.len() { start + g.size } else { start };
        for step in plan_interpolation(g.size) {
            let target = start + step.target;
            let back = start + step.backward;
            let fwd = if step.forward == g.size { next_key } else { start + step.forward };
            let record = &g.wz[step.target - 1];
            debug_assert_eq!(record.frame, target);
            let outcome = {
                let x_b = decoded[back].as_ref().expect("backward reference decoded");
                let x_f = decoded[fwd].as_ref().expect("forward reference decoded");
                decode_wz(record, x_b, x_f, step.tau, &dctx)?
            };
            let syndrome: u64 = outcome.stats.iter().map(|p| p.bits).sum();
            let crc = 8 * outcome.stats.len() as u64;
            bits.wz += syndrome;
            bits.crc += crc;
            bits.range += outcome.range_bits;
            frame_stats[target] = Some(FrameStat {
                frame: target,
                kind: FrameKind::Wz,
                bits: syndrome + crc + outcome.range_bits,
            });
            planes.extend(outcome.stats);
            decoded[target] = Some(outcome.frame);
            trace.wz.push(outcome.trace);
        }
    }
    trace.wz.sort_by_key(|t| t.frame);
    planes.sort_by_key(|p| (p.frame, p.band, p.plane));
    let frames: Vec<Frame> = decoded
        .into_iter()
        .map(|f| f.expect("every frame decoded"))
        .collect();
    let seq = Sequence::new(frames, h.fps)?;
    let stats = DecodeStats {
        header: h.clone(),
        gop_sizes: bs.gop_sizes(),
        frames: frame_stats
            .into_iter()
            .map(|f| f.expect("every frame accounted"))
            .collect(),
        planes,
        bits,
        stored_syndrome_bits: bs.stored_syndrome_bits(),
    };
    Ok((seq, stats, trace))
}

/// Rate split into stream components.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub fps: f64,
    pub frames: usize,
    pub bits: RateBits,
    /// `(frame, bits)` in display order; headers are not attributed.
    pub per_frame: Vec<(usize, u64)>,
}

impl RateReport {
    pub fn kbps(&self, bits: u64) -> f64 {
        if self.frames == 0 {
            return 0.0;
        }
        bits as f64 * self.fps / self.frames as f64 / 1000.0
    }

    pub fn total_kbps(&self) -> f64 {
        self.kbps(self.bits.total())
    }

    pub fn key_kbps(&self) -> f64 {
        self.kbps(self.bits.key)
    }

    /// Syndromes, CRCs and ranges.
    pub fn wz_kbps(&self) -> f64 {
        self.kbps(self.bits.wz + self.bits.crc + self.bits.range)
    }
}

pub fn rate_report(stats: &DecodeStats) -> RateReport {
    RateReport {
        fps: stats.header.fps.as_f64(),
        frames: stats.frames.len(),
        bits: stats.bits,
        per_frame: stats.frames.iter().map(|f| (f.frame, f.bits)).collect(),
    }
}

/// One row per key frame and one per WZ bit plane.
pub fn write_stats_csv<W: Write>(stats: &DecodeStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "type", "band", "plane", "chunks_consumed", "crc_ok", "bits"])?;
    let mut planes = stats.planes.iter().peekable();
    for f in &stats.frames {
        match f.kind {
            FrameKind::Key => {
                w.write_record([f.frame.to_string(), "key".into(), String::new(), String::new(), String::new(), String::new(), f.bits.to_string()])?;
            }
            FrameKind::Wz => {
                while let Some(p) = planes.next_if(|p| p.frame == f.frame) {
                    w.write_record([
                        p.frame.to_string(),
                        "wz".into(),
                        p.band.to_string(),
                        p.plane.to_string(),
                        p.chunks.to_string(),
                        p.crc_ok.to_string(),
                        p.bits.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One point of a rate-distortion curve.
#[derive(Clone, Debug, PartialEq)]
pub struct RdPoint {
    pub q: u8,
    pub kbps_total: f64,
    pub kbps_key: f64,
    pub kbps_wz: f64,
    pub psnr_mean: f64,
}

/// Mean luma PSNR, ignoring identical frames' infinite values by capping
/// them at 100 dB.
pub fn mean_psnr(a: &Sequence, b: &Sequence) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} vs {} frames", a.len(), b.len())));
    }
    let mut sum = 0.0;
    for (x, y) in a.frames().iter().zip(b.frames()) {
        sum += psnr(x, y)?.min(100.0);
    }
    Ok(sum / a.len() as f64)
}

/// Encodes and decodes `seq` at `cfg`, returning the RD point along with the
/// decoded sequence and statistics.
pub fn rd_point(seq: &Sequence, cfg: &CodecConfig) -> Result<(RdPoint, Sequence, DecodeStats)> {
    let (bs, _) = encode(seq, cfg)?;
    let (dec, stats) = decode(&bs, cfg)?;
    let report = rate_report(&stats);
    Ok((
        RdPoint {
            q: cfg.quant,
            kbps_total: report.total_kbps(),
            kbps_key: report.key_kbps(),
            kbps_wz: report.wz_kbps(),
            psnr_mean: mean_psnr(seq, &dec)?,
        },
        dec,
        stats,
    ))
}

pub fn write_rd_csv<W: Write>(points: &[RdPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q", "kbps_total", "kbps_key", "kbps_wz", "psnr_mean"])?;
    for p in points {
        w.write_record([
            p.q.to_string(),
            format!("{:.4}", p.kbps_total),
            format!("{:.4}", p.kbps_key),
            format!("{:.4}", p.kbps_wz),
            format!("{:.4}", p.psnr_mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Side-information quality of one WZ frame, built from uncoded references.
#[derive(Clone, Debug, PartialEq)]
pub struct SiEval {
    pub frame: usize,
    pub tau: f64,
    pub psnr_si: f64,
    /// Plain average of the two references, for comparison.
    pub psnr_average: f64,
}

pub fn side_info_eval(seq: &Sequence, gop: usize, cfg: &SideInfoConfig) -> Result<Vec<SiEval>> {
    let gop_plan = plan_fixed(seq.len(), gop)?;
    let frames = seq.frames();
    let keys = gop_plan.key_indices();
    let mut out = Vec::new();
    for (gi, (&start, &size)) in keys.iter().zip(&gop_plan.sizes).enumerate() {
        let next_key = if gi + 1 < keys.len() { start + size } else { start };
        for step in plan_interpolation(size) {
            let fwd = if step.forward == size { next_key } else { start + step.forward };
            let (x_b, x_f) = (&frames[start + step.backward], &frames[fwd]);
            let target = &frames[start + step.target];
            let ctx = InterpolationContext::new(x_b, x_f, step.tau)?;
            let si = estimate(&ctx, cfg, target.index)?;
            let avg = Frame::from_fn(x_b.width(), x_b.height(), target.index, |x, y| {
                ((1.0 - step.tau) * f64::from(x_b.at(x, y)) + step.tau * f64::from(x_f.at(x, y))).round() as u8
            })?;
            out.push(SiEval {
                frame: target.index,
                tau: step.tau,
                psnr_si: psnr(&si.frame, target)?,
                psnr_average: psnr(&avg, target)?,
            });
        }
    }
    out.sort_by_key(|e| e.frame);
    Ok(out)
}

pub fn write_si_csv<W: Write>(rows: &[SiEval], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "tau", "psnr_si", "psnr_average"])?;
    for r in rows {
        w.write_record([
            r.frame.to_string(),
            format!("{:.6}", r.tau),
            format!("{:.4}", r.psnr_si),
            format!("{:.4}", r.psnr_average),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::Fps;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clip(frames: usize, w: usize, h: usize, speed: f64) -> Sequence {
        let frames = (0..frames)
            .map(|t| {
                let shift = speed * t as f64;
                Frame::from_fn(w, h, t, |x, y| {
                    let (x, y) = (x as f64 - shift, y as f64);
                    (128.0 + 50.0 * (0.19 * x + 0.07 * y).sin() + 30.0 * (0.05 * x - 0.23 * y + 1.0).cos())
                        .round() as u8
                })
                .unwrap()
            })
            .collect();
        Sequence::new(frames, Fps::default()).unwrap()
    }

    #[test]
    fn single_frame_has_no_wz_records() {
        let seq = clip(1, 32, 32, 0.0);
        let (bs, stats) = encode(&seq, &CodecConfig::default()).unwrap();
        assert_eq!(bs.gops.len(), 1);
        assert!(bs.gops[0].wz.is_empty());
        assert!(stats.wz.is_empty());
        let (dec, ds) = decode(&bs, &CodecConfig::default()).unwrap();
        assert_eq!(dec.len(), 1);
        assert_eq!(rate_report(&ds).bits.wz, 0);
    }

    #[test]
    fn structure_and_round_trip() {
        let seq = clip(4, 32, 32, 1.0);
        for q in [1u8, 8] {
            let cfg = CodecConfig::with_quant(q);
            let (bs, _) = encode(&seq, &cfg).unwrap();
            assert_eq!(bs.gop_sizes(), [2, 2]);
            let coded = QuantMatrix::new(q).unwrap().coded_bands().count();
            assert!(bs.wz_records().all(|w| w.bands.len() == coded));
            let bytes = bs.to_bytes();
            assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), bs);
        }
        let small = encode(&seq, &CodecConfig::with_quant(1)).unwrap().0.to_bytes().len();
        let large = encode(&seq, &CodecConfig::with_quant(8)).unwrap().0.to_bytes().len();
        assert!(large > small);
    }

    #[test]
    fn malformed_streams() {
        let seq = clip(3, 32, 32, 1.0);
        let bytes = encode(&seq, &CodecConfig::default()).unwrap().0.to_bytes();
        for bad in [&bytes[..10], &bytes[..bytes.len() - 1]] {
            assert!(matches!(Bitstream::from_bytes(bad), Err(Error::MalformedBitstream(_))));
        }
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Bitstream::from_bytes(&magic).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Bitstream::from_bytes(&extra).is_err());
    }

    #[test]
    fn static_clip_decodes_near_perfectly() {
        let seq = clip(3, 32, 32, 0.0);
        let cfg = CodecConfig::with_quant(8);
        let (bs, enc) = encode(&seq, &cfg).unwrap();
        let (dec, stats, trace) = decode_traced(&bs, &cfg).unwrap();
        assert_eq!(stats.flagged(), 0);
        for wz in &enc.wz {
            assert!(psnr(&seq.frames()[wz.frame], &dec.frames()[wz.frame]).unwrap() >= 40.0);
        }
        assert_eq!(trace.wz[0].planes, enc.wz[0].planes);
        assert!(stats.bits.wz < stats.stored_syndrome_bits);
    }

    #[test]
    fn accounting_identity() {
        let seq = clip(5, 32, 32, 1.5);
        let cfg = CodecConfig::with_quant(5);
        let (bs, _) = encode(&seq, &cfg).unwrap();
        let (_, stats) = decode(&bs, &cfg).unwrap();
        let r = rate_report(&stats);
        let per_frame: u64 = r.per_frame.iter().map(|(_, b)| b).sum();
        assert_eq!(per_frame + r.bits.header, r.bits.total());
        assert!(r.bits.wz <= stats.stored_syndrome_bits);
        let mut doubled = stats.clone();
        doubled.header.fps = Fps::new(30, 1).unwrap();
        let r2 = rate_report(&doubled);
        assert!((r2.total_kbps() - 2.0 * r.total_kbps()).abs() < 1e-9);
    }

    #[test]
    fn tampered_crc_is_flagged() {
        let seq = clip(3, 32, 32, 1.0);
        let cfg = CodecConfig::with_quant(2);
        let (mut bs, _) = encode(&seq, &cfg).unwrap();
        bs.gops[0].wz[0].bands[0].planes[0].crc ^= 0x5a;
        let (dec, stats) = decode(&bs, &cfg).unwrap();
        assert_eq!(dec.len(), 3);
        assert_eq!(stats.flagged(), 1);
        let p = &stats.planes[0];
        assert!(!p.crc_ok);
        assert_eq!(p.chunks, LdpcaCode::build(64, 3, 1).unwrap().num_chunks());
    }

    #[test]
    fn deterministic_decode() {
        let seq = clip(4, 32, 32, 2.0);
        let cfg = CodecConfig::with_quant(6);
        let (bs, _) = encode(&seq, &cfg).unwrap();
        let (a, sa) = decode(&bs, &cfg).unwrap();
        let (b, sb) = decode(&bs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        write_stats_csv(&sa, &mut c1).unwrap();
        write_stats_csv(&sb, &mut c2).unwrap();
        assert_eq!(c1, c2);
        let text = String::from_utf8(c1).unwrap();
        assert!(text.starts_with("frame,type,band,plane,chunks_consumed,crc_ok,bits\n0,key,"));
    }

    #[test]
    fn adaptive_gops_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut frames = clip(6, 32, 32, 1.0).into_frames();
        frames.push(Frame::from_fn(32, 32, 6, |_, _| rng.gen()).unwrap());
        let seq = Sequence::new(frames, Fps::default()).unwrap();
        let cfg = CodecConfig {
            gop: GopMode::Adaptive(ActivityConfig::default()),
            ..CodecConfig::with_quant(3)
        };
        let (bs, enc) = encode(&seq, &cfg).unwrap();
        assert_eq!(enc.plan.total(), 7);
        let (dec, _) = decode(&Bitstream::from_bytes(&bs.to_bytes()).unwrap(), &cfg).unwrap();
        assert_eq!(dec.len(), 7);
    }
}
