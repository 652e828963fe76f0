//! Intra coding of key frames.
//!
//! [`BuiltinDct`] is a small transform codec: 4x4 DCT, uniform quantization
//! with a step that doubles every 6 qp, zig-zag scan and exp-Golomb coded
//! `(run, level)` pairs. Per block the stream is a list of `ue(run + 1)`,
//! `se(level)` pairs closed by `ue(0)`. Blocks follow raster order and bits
//! are packed MSB first, the final byte zero padded.

use crate::error::{Error, Result};
use crate::frame_io::Frame;
use crate::transform::{dct4, idct4, Block4, ZIGZAG};

pub const MAX_QP: u8 = 51;

/// Codec identifiers as stored in the bitstream header.
pub const BUILTIN_DCT_ID: u8 = 0;
pub const EXTERNAL_ID: u8 = 1;

/// Default key-frame qp paired with each quantization matrix `Q1..Q8`.
pub const DEFAULT_QP: [u8; 8] = [40, 38, 36, 34, 31, 28, 25, 22];

pub fn default_qp(matrix: u8) -> Result<u8> {
    DEFAULT_QP
        .get(usize::from(matrix).wrapping_sub(1))
        .copied()
        .ok_or_else(|| Error::InvalidConfig(format!("quantization matrix {matrix}")))
}

pub trait IntraCodec: Send + Sync {
    fn id(&self) -> u8;
    fn encode(&self, frame: &Frame) -> Result<Vec<u8>>;
    fn decode(&self, payload: &[u8], width: usize, height: usize, index: usize) -> Result<Frame>;

    /// Expected squared coding error of DCT band `band` in decoded frames.
    fn noise_variance(&self, _band: usize) -> f64 {
        0.0
    }
}

/// Looks up the codec named in a bitstream.
pub fn codec_for_id(id: u8, qp: u8) -> Result<Box<dyn IntraCodec>> {
    match id {
        BUILTIN_DCT_ID => Ok(Box::new(BuiltinDct::new(qp)?)),
        other => Err(Error::UnknownIntraCodec(other)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuiltinDct {
    qp: u8,
}

impl BuiltinDct {
    pub fn new(qp: u8) -> Result<Self> {
        if qp > MAX_QP {
            return Err(Error::InvalidConfig(format!("qp {qp} above {MAX_QP}")));
        }
        Ok(BuiltinDct { qp })
    }

    pub fn qp(&self) -> u8 {
        self.qp
    }

    /// AC step, `2^((qp - 12) / 6)`.
    pub fn step(&self) -> f64 {
        2f64.powf((f64::from(self.qp) - 12.0) / 6.0)
    }

    /// The DC step never exceeds 4, so flat areas keep their exact level
    /// (the DC of a constant block is 4 times its value).
    pub fn dc_step(&self) -> f64 {
        self.step().min(4.0)
    }

    fn steps(&self) -> [f64; 16] {
        let mut s = [self.step(); 16];
        s[0] = self.dc_step();
        s
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    used: u8,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter {
            bytes: Vec::new(),
            used: 8,
        }
    }

    fn bit(&mut self, b: bool) {
        if self.used == 8 {
            self.bytes.push(0);
            self.used = 0;
        }
        if b {
            *self.bytes.last_mut().unwrap() |= 0x80 >> self.used;
        }
        self.used += 1;
    }

    fn ue(&mut self, v: u32) {
        let x = u64::from(v) + 1;
        let len = 64 - x.leading_zeros();
        for _ in 1..len {
            self.bit(false);
        }
        for i in (0..len).rev() {
            self.bit((x >> i) & 1 == 1);
        }
    }

    fn se(&mut self, v: i32) {
        let m = if v > 0 {
            2 * v.unsigned_abs() - 1
        } else {
            2 * v.unsigned_abs()
        };
        self.ue(m);
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn bit(&mut self) -> Result<bool> {
        let byte = self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| Error::CorruptPayload("payload ends inside a block".into()))?;
        let b = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(b)
    }

    fn ue(&mut self) -> Result<u32> {
        let mut zeros = 0;
        while !self.bit()? {
            zeros += 1;
            if zeros > 31 {
                return Err(Error::CorruptPayload("exp-Golomb prefix too long".into()));
            }
        }
        let mut x = 1u64;
        for _ in 0..zeros {
            x = (x << 1) | u64::from(self.bit()?);
        }
        u32::try_from(x - 1).map_err(|_| Error::CorruptPayload("exp-Golomb value overflow".into()))
    }

    fn se(&mut self) -> Result<i32> {
        let m = self.ue()?;
        let mag = i32::try_from(m.div_ceil(2))
            .map_err(|_| Error::CorruptPayload("level overflow".into()))?;
        Ok(if m % 2 == 1 { mag } else { -mag })
    }
}

fn block_of(f: &Frame, bx: usize, by: usize) -> Block4 {
    let mut b = [[0.0; 4]; 4];
    for (y, row) in b.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = f64::from(f.at(bx * 4 + x, by * 4 + y));
        }
    }
    b
}

impl IntraCodec for BuiltinDct {
    fn id(&self) -> u8 {
        BUILTIN_DCT_ID
    }

    fn encode(&self, frame: &Frame) -> Result<Vec<u8>> {
        let steps = self.steps();
        let mut w = BitWriter::new();
        for by in 0..frame.height() / 4 {
            for bx in 0..frame.width() / 4 {
                let c = dct4(&block_of(frame, bx, by));
                let mut run = 0u32;
                for (k, &(r, col)) in ZIGZAG.iter().enumerate() {
                    let level = (c[r][col] / steps[k]).round() as i32;
                    if level == 0 {
                        run += 1;
                    } else {
                        w.ue(run + 1);
                        w.se(level);
                        run = 0;
                    }
                }
                w.ue(0);
            }
        }
        Ok(w.bytes)
    }

    fn decode(&self, payload: &[u8], width: usize, height: usize, index: usize) -> Result<Frame> {
        crate::frame_io::check_dims(width, height)?;
        let steps = self.steps();
        let mut r = BitReader {
            bytes: payload,
            pos: 0,
        };
        let mut luma = vec![0u8; width * height];
        for by in 0..height / 4 {
            for bx in 0..width / 4 {
                let mut c = [[0.0; 4]; 4];
                let mut k = 0usize;
                loop {
                    let code = r.ue()?;
                    if code == 0 {
                        break;
                    }
                    k += (code - 1) as usize;
                    if k >= 16 {
                        return Err(Error::CorruptPayload(format!("run past the block end at {k}")));
                    }
                    let (row, col) = ZIGZAG[k];
                    c[row][col] = f64::from(r.se()?) * steps[k];
                    k += 1;
                }
                let p = idct4(&c);
                for (y, prow) in p.iter().enumerate() {
                    for (x, v) in prow.iter().enumerate() {
                        luma[(by * 4 + y) * width + bx * 4 + x] = v.round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
        Frame::new(width, height, luma, index)
    }

    /// Uniform quantization noise, `step^2 / 12`.
    fn noise_variance(&self, band: usize) -> f64 {
        let s = if band == 0 { self.dc_step() } else { self.step() };
        s * s / 12.0
    }
}
