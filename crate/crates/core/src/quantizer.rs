//! Band quantization and bit-plane extraction.
//!
//! The DC band uses a uniform quantizer over the fixed range `[0, 1024)`.
//! AC bands use a dead-zone quantizer whose step follows the per-frame
//! dynamic range of the band, so the zero bin `(-W, W)` is twice as wide as
//! the others.

use crate::error::{Error, Result};
use crate::transform::{CoeffBands, BANDS, ZIGZAG};

/// Exclusive upper bound of orthonormal 4x4 DC coefficients of 8-bit input.
pub const DC_RANGE: f64 = 1024.0;

/// One of the eight quantization matrices. Level counts are laid out on the
/// 4x4 coefficient grid; a count of 0 leaves that band uncoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantMatrix {
    pub id: u8,
    pub grid: [[u32; 4]; 4],
}

const MATRICES: [[[u32; 4]; 4]; 8] = [
    [[16, 8, 0, 0], [8, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]],
    [[32, 8, 0, 0], [8, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]],
    [[32, 8, 4, 0], [8, 4, 0, 0], [4, 0, 0, 0], [0, 0, 0, 0]],
    [[32, 16, 8, 4], [16, 8, 4, 0], [8, 4, 0, 0], [4, 0, 0, 0]],
    [[32, 16, 8, 4], [16, 8, 4, 4], [8, 4, 4, 0], [4, 4, 0, 0]],
    [[64, 16, 8, 8], [16, 8, 8, 4], [8, 8, 4, 4], [8, 4, 4, 0]],
    [[64, 32, 16, 8], [32, 16, 8, 4], [16, 8, 4, 4], [8, 4, 4, 0]],
    [[128, 64, 32, 16], [64, 32, 16, 8], [32, 16, 8, 4], [16, 8, 4, 0]],
];

impl QuantMatrix {
    /// Matrix `Q<id>`, `id` in 1..=8 (Q1 coarsest).
    pub fn new(id: u8) -> Result<Self> {
        if !(1..=8).contains(&id) {
            return Err(Error::InvalidConfig(format!(
                "quantization matrix id {id} outside 1..=8"
            )));
        }
        Ok(QuantMatrix {
            id,
            grid: MATRICES[usize::from(id) - 1],
        })
    }

    /// Level count of zig-zag band `band`.
    pub fn levels(&self, band: usize) -> u32 {
        let (r, c) = ZIGZAG[band];
        self.grid[r][c]
    }

    pub fn coded_bands(&self) -> impl Iterator<Item = usize> + '_ {
        (0..BANDS).filter(|&b| self.levels(b) > 0)
    }

    /// Total bit planes per WZ frame.
    pub fn plane_count(&self) -> usize {
        self.coded_bands()
            .map(|b| bit_count(self.levels(b)) as usize)
            .sum()
    }
}

fn check_levels(levels: u32) -> Result<()> {
    if levels < 4 || !levels.is_power_of_two() || levels > 1 << 15 {
        return Err(Error::BadLevels(levels));
    }
    Ok(())
}

/// Bits per bin, `log2(levels)`.
pub fn bit_count(levels: u32) -> u32 {
    levels.trailing_zeros()
}

pub fn dc_step(levels: u32) -> f64 {
    DC_RANGE / f64::from(levels)
}

pub fn ac_step(levels: u32, range: u16) -> f64 {
    2.0 * f64::from(range) / f64::from(levels)
}

/// Largest AC bin magnitude for `levels`.
pub fn ac_max_magnitude(levels: u32) -> i32 {
    (levels / 2) as i32 - 1
}

pub fn quantize_dc(coeffs: &[f64], levels: u32) -> Result<(Vec<i32>, f64)> {
    check_levels(levels)?;
    let w = dc_step(levels);
    let top = levels as i32 - 1;
    let bins = coeffs
        .iter()
        .map(|&c| ((c / w).floor() as i32).clamp(0, top))
        .collect();
    Ok((bins, w))
}

/// Dynamic range of an AC band as transmitted: `max |c|` rounded up to an
/// integer, at least 1.
pub fn ac_range(coeffs: &[f64]) -> u16 {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    (max.ceil().max(1.0)).min(f64::from(u16::MAX)) as u16
}

pub fn quantize_ac(coeffs: &[f64], levels: u32) -> Result<(Vec<i32>, f64, u16)> {
    let range = ac_range(coeffs);
    let (bins, w) = quantize_ac_with_range(coeffs, levels, range)?;
    Ok((bins, w, range))
}

/// AC quantization against a known range; the decoder uses this to
/// quantize side information with the transmitted range.
pub fn quantize_ac_with_range(coeffs: &[f64], levels: u32, range: u16) -> Result<(Vec<i32>, f64)> {
    check_levels(levels)?;
    let w = ac_step(levels, range.max(1));
    let bins = coeffs.iter().map(|&c| quantize_ac_value(c, w, levels)).collect();
    Ok((bins, w))
}

#[inline]
pub fn quantize_ac_value(c: f64, w: f64, levels: u32) -> i32 {
    let mag = ((c.abs() / w).floor() as i32).min(ac_max_magnitude(levels));
    if c < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Interval of coefficient values a bin stands for, as `(lo, hi)` with
/// `lo < hi`. DC bins map to `[qW, (q+1)W)`, positive AC bins likewise,
/// negative AC bins to `((q-1)W, qW]` and the AC zero bin to `(-W, W)`.
pub fn bin_interval(is_dc: bool, q: i32, w: f64) -> (f64, f64) {
    let qf = f64::from(q);
    if is_dc || q > 0 {
        (qf * w, (qf + 1.0) * w)
    } else if q < 0 {
        ((qf - 1.0) * w, qf * w)
    } else {
        (-w, w)
    }
}

/// Quantized bins of one coded band.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedBand {
    pub band: usize,
    pub levels: u32,
    pub step: f64,
    /// Transmitted dynamic range; `None` for the DC band.
    pub range: Option<u16>,
    pub bins: Vec<i32>,
}

impl QuantizedBand {
    pub fn is_dc(&self) -> bool {
        self.band == 0
    }
}

/// Quantized WZ frame. Bands absent from `bands` are uncoded.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedBands {
    pub blocks_w: usize,
    pub blocks_h: usize,
    pub bands: Vec<QuantizedBand>,
}

impl QuantizedBands {
    pub fn get(&self, band: usize) -> Option<&QuantizedBand> {
        self.bands.iter().find(|b| b.band == band)
    }

    pub fn skipped(&self) -> Vec<usize> {
        (0..BANDS).filter(|&k| self.get(k).is_none()).collect()
    }
}

pub fn quantize_frame(coeffs: &CoeffBands, matrix: &QuantMatrix) -> Result<QuantizedBands> {
    let bands = matrix
        .coded_bands()
        .map(|band| {
            let levels = matrix.levels(band);
            if band == 0 {
                let (bins, step) = quantize_dc(coeffs.band(0), levels)?;
                Ok(QuantizedBand {
                    band,
                    levels,
                    step,
                    range: None,
                    bins,
                })
            } else {
                let (bins, step, range) = quantize_ac(coeffs.band(band), levels)?;
                Ok(QuantizedBand {
                    band,
                    levels,
                    step,
                    range: Some(range),
                    bins,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedBands {
        blocks_w: coeffs.blocks_w,
        blocks_h: coeffs.blocks_h,
        bands,
    })
}

/// Bit planes of one band, most significant first. For AC bands `planes[0]`
/// is the sign plane (1 = negative) followed by the magnitude planes.
#[derive(Clone, Debug, PartialEq)]
pub struct BandPlanes {
    pub band: usize,
    pub levels: u32,
    pub step: f64,
    pub range: Option<u16>,
    pub planes: Vec<Vec<u8>>,
}

impl BandPlanes {
    /// Significance index (`L-1` = MSB/sign, 0 = LSB) of `planes[i]`.
    pub fn significance(&self, i: usize) -> usize {
        self.planes.len() - 1 - i
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitPlaneSet {
    pub blocks_w: usize,
    pub blocks_h: usize,
    pub bands: Vec<BandPlanes>,
}

pub fn band_to_bitplanes(q: &QuantizedBand) -> Result<BandPlanes> {
    check_levels(q.levels)?;
    let bits = bit_count(q.levels) as usize;
    let mut planes = vec![vec![0u8; q.bins.len()]; bits];
    if q.is_dc() {
        for (i, &bin) in q.bins.iter().enumerate() {
            if bin < 0 || bin >= q.levels as i32 {
                return Err(Error::BinOutOfRange {
                    bin,
                    levels: q.levels,
                });
            }
            for (p, plane) in planes.iter_mut().enumerate() {
                plane[i] = ((bin >> (bits - 1 - p)) & 1) as u8;
            }
        }
    } else {
        let max = ac_max_magnitude(q.levels);
        for (i, &bin) in q.bins.iter().enumerate() {
            if bin.abs() > max {
                return Err(Error::BinOutOfRange {
                    bin,
                    levels: q.levels,
                });
            }
            planes[0][i] = u8::from(bin < 0);
            let mag = bin.unsigned_abs();
            for p in 1..bits {
                planes[p][i] = ((mag >> (bits - 1 - p)) & 1) as u8;
            }
        }
    }
    Ok(BandPlanes {
        band: q.band,
        levels: q.levels,
        step: q.step,
        range: q.range,
        planes,
    })
}

pub fn bitplanes_to_band(p: &BandPlanes) -> Result<QuantizedBand> {
    check_levels(p.levels)?;
    let bits = bit_count(p.levels) as usize;
    if p.planes.len() != bits {
        return Err(Error::InconsistentPlaneCount {
            expected: bits,
            got: p.planes.len(),
        });
    }
    let n = p.planes[0].len();
    if let Some(bad) = p.planes.iter().find(|pl| pl.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let is_dc = p.band == 0;
    let bins = (0..n)
        .map(|i| {
            let first = usize::from(!is_dc);
            let mag = p.planes[first..]
                .iter()
                .fold(0i32, |acc, plane| (acc << 1) | i32::from(plane[i] & 1));
            if !is_dc && p.planes[0][i] & 1 == 1 {
                -mag
            } else {
                mag
            }
        })
        .collect();
    Ok(QuantizedBand {
        band: p.band,
        levels: p.levels,
        step: p.step,
        range: p.range,
        bins,
    })
}

pub fn bins_to_bitplanes(q: &QuantizedBands) -> Result<BitPlaneSet> {
    Ok(BitPlaneSet {
        blocks_w: q.blocks_w,
        blocks_h: q.blocks_h,
        bands: q.bands.iter().map(band_to_bitplanes).collect::<Result<_>>()?,
    })
}

pub fn bitplanes_to_bins(p: &BitPlaneSet) -> Result<QuantizedBands> {
    Ok(QuantizedBands {
        blocks_w: p.blocks_w,
        blocks_h: p.blocks_h,
        bands: p.bands.iter().map(bitplanes_to_band).collect::<Result<_>>()?,
    })
}
