//! Raw planar video I/O, frame containers and PSNR.
//!
//! Only luma is processed. Readers drop 4:2:0 chroma; writers synthesize it
//! as mid-gray (`0x80`) so ordinary players show a neutral picture.

use std::path::Path;

use crate::error::{Error, Result};

/// Value written into every synthesized chroma sample.
pub const NEUTRAL_CHROMA: u8 = 0x80;

/// One 8-bit luma plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
    /// Display index within its sequence.
    pub index: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, luma: Vec<u8>, index: usize) -> Result<Self> {
        check_dims(width, height)?;
        if luma.len() != width * height {
            return Err(Error::BadBufferSize {
                expected: width * height,
                got: luma.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            luma,
            index,
        })
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: usize, height: usize, value: u8, index: usize) -> Result<Self> {
        Frame::new(width, height, vec![value; width * height], index)
    }

    /// Builds a frame by evaluating `f(x, y)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        index: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut luma = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                luma.push(f(x, y));
            }
        }
        Frame::new(width, height, luma, index)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    /// Sample with coordinates clamped to the frame (edge extension).
    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.luma[y * self.width + x]
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn into_luma(self) -> Vec<u8> {
        self.luma
    }
}

pub(crate) fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width % 16 != 0 || height % 16 != 0 {
        return Err(Error::BadDimensions { width, height });
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(a: &Frame, b: &Frame) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

/// Frame rate as a rational number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fps {
    pub num: u16,
    pub den: u16,
}

impl Fps {
    pub fn new(num: u16, den: u16) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidConfig(format!("fps {num}/{den}")));
        }
        Ok(Fps { num, den })
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl Default for Fps {
    fn default() -> Self {
        Fps { num: 15, den: 1 }
    }
}

impl std::str::FromStr for Fps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse fps '{s}'"));
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), "1"),
        };
        Fps::new(num.parse().map_err(|_| bad())?, den.parse().map_err(|_| bad())?)
    }
}

/// An ordered run of equally sized frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence {
    frames: Vec<Frame>,
    pub fps: Fps,
}

impl Sequence {
    /// Frames are re-indexed from 0 in the given order.
    pub fn new(frames: Vec<Frame>, fps: Fps) -> Result<Self> {
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                ensure_same_dims(first, f)?;
            }
        }
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.with_index(i))
            .collect();
        Ok(Sequence { frames, fps })
    }

    pub fn empty(fps: Fps) -> Self {
        Sequence {
            frames: Vec::new(),
            fps,
        }
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of the frames, if there are any.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

/// Raw file layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Bare luma planes back to back.
    YOnly,
    /// Planar 4:2:0: luma then quarter-size U and V. Chroma is discarded on
    /// read and written as [`NEUTRAL_CHROMA`].
    Yuv420,
}

impl Layout {
    pub fn frame_bytes(self, width: usize, height: usize) -> usize {
        match self {
            Layout::YOnly => width * height,
            Layout::Yuv420 => width * height * 3 / 2,
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "y" | "Y" | "y-only" => Ok(Layout::YOnly),
            "yuv420" | "yuv" | "420" => Ok(Layout::Yuv420),
            other => Err(Error::InvalidConfig(format!("unknown layout '{other}'"))),
        }
    }
}

pub fn read_raw(bytes: &[u8], width: usize, height: usize, layout: Layout) -> Result<Sequence> {
    check_dims(width, height)?;
    let frame_bytes = layout.frame_bytes(width, height);
    let trailing = bytes.len() % frame_bytes;
    if trailing != 0 {
        return Err(Error::TruncatedStream {
            trailing,
            frame_bytes,
        });
    }
    let luma_len = width * height;
    let frames = bytes
        .chunks_exact(frame_bytes)
        .enumerate()
        .map(|(i, chunk)| Frame::new(width, height, chunk[..luma_len].to_vec(), i))
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(frames, Fps::default())
}

pub fn read_raw_file(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    layout: Layout,
) -> Result<Sequence> {
    let bytes = std::fs::read(path)?;
    read_raw(&bytes, width, height, layout)
}

pub fn write_raw(seq: &Sequence, layout: Layout) -> Vec<u8> {
    let Some((w, h)) = seq.dims() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(layout.frame_bytes(w, h) * seq.len());
    for f in seq.frames() {
        out.extend_from_slice(f.luma());
        if layout == Layout::Yuv420 {
            out.resize(out.len() + w * h / 2, NEUTRAL_CHROMA);
        }
    }
    out
}

/// Luma PSNR in dB, `f64::INFINITY` when the frames are identical.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    ensure_same_dims(a, b)?;
    Ok(psnr_from_mse(mse(a.luma(), b.luma())))
}

pub(crate) fn mse(a: &[u8], b: &[u8]) -> f64 {
    let sse: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    sse as f64 / a.len() as f64
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}
