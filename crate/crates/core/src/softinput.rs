//! Per-bit probabilities and LLRs for one bit plane, from the side
//! information coefficients and the Laplacian model.
//!
//! A bit plane splits the bins still compatible with the already decoded
//! planes into two halves. Each half is an interval of coefficient values
//! and its probability is the Laplacian mass over that interval, centred on
//! the side information. The sign plane of an AC band is instead scored in
//! the bin domain against the quantized side information.

use crate::error::{Error, Result};
use crate::ldpca::LLR_CLAMP;

/// Below this total the two probabilities carry no usable information.
pub const DEGENERATE_MASS: f64 = 1e-300;

/// Everything needed to score plane `plane` of `band` at every position.
#[derive(Clone, Copy, Debug)]
pub struct PlaneContext<'a> {
    pub band: usize,
    /// Significance of the plane being decoded (`bits - 1` = MSB/sign).
    pub plane: usize,
    /// Total bit planes of the band.
    pub bits: usize,
    /// Planes of significance `bits-1` down to `plane+1`, MSB first. For AC
    /// bands `decoded[0]` is the sign plane.
    pub decoded: &'a [Vec<u8>],
    /// Side information coefficients.
    pub y: &'a [f64],
    /// Side information quantized with the band's step; used by the sign plane.
    pub y_q: &'a [i32],
    pub step: f64,
    pub alpha: &'a [f64],
}

impl PlaneContext<'_> {
    fn is_dc(&self) -> bool {
        self.band == 0
    }

    fn check_decoded(&self) -> Result<()> {
        if self.plane >= self.bits {
            return Err(Error::WrongPlane {
                plane: self.plane,
                bits: self.bits,
            });
        }
        if self.decoded.len() != self.bits - 1 - self.plane {
            return Err(Error::MissingPlane(self.bits - 1 - self.decoded.len()));
        }
        Ok(())
    }

    fn decoded_bits(&self, pos: usize) -> Vec<u8> {
        self.decoded.iter().map(|p| p[pos]).collect()
    }

    /// Magnitude intervals `[lo, hi)` in bin units for bit 0 and bit 1.
    fn bin_halves(&self, pos: usize) -> Result<((f64, f64), (f64, f64))> {
        let xp = partial_value(&self.decoded_bits(pos), self.plane, self.bits, !self.is_dc())?;
        let half = f64::from(1u32 << self.plane);
        let xp = f64::from(xp);
        Ok(((xp, xp + half), (xp + half, xp + 2.0 * half)))
    }
}

/// Magnitude assembled from the decoded planes above `plane`:
/// `sum Q^(i) 2^i`. `decoded[j]` has significance `bits-1-j`; for AC bands
/// the sign (`decoded[0]`) is left out.
pub fn partial_value(decoded: &[u8], plane: usize, bits: usize, ac: bool) -> Result<u32> {
    if plane >= bits {
        return Err(Error::WrongPlane { plane, bits });
    }
    let need = bits - 1 - plane;
    if decoded.len() < need {
        return Err(Error::MissingPlane(bits - 1 - decoded.len()));
    }
    let skip = usize::from(ac);
    Ok(decoded[..need]
        .iter()
        .enumerate()
        .skip(skip)
        .map(|(j, &b)| u32::from(b & 1) << (bits - 1 - j))
        .sum())
}

/// `ln(1 - e^{-x})` for `x > 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

/// Natural log of the Laplacian mass on `[lo, hi)`, accurate far into the
/// tails.
pub fn ln_laplace_mass(lo: f64, hi: f64, y: f64, alpha: f64) -> f64 {
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    if lo >= y {
        // whole interval right of the centre
        -std::f64::consts::LN_2 - alpha * (lo - y) + ln_one_minus_exp(alpha * (hi - lo))
    } else if hi <= y {
        -std::f64::consts::LN_2 - alpha * (y - hi) + ln_one_minus_exp(alpha * (hi - lo))
    } else {
        let left = if lo == f64::NEG_INFINITY { 0.0 } else { (-alpha * (y - lo)).exp() };
        let right = if hi == f64::INFINITY { 0.0 } else { (-alpha * (hi - y)).exp() };
        (1.0 - 0.5 * (left + right)).ln()
    }
}

/// Mass of the Laplacian density `(alpha/2) e^{-alpha |t-y|}` on `[lo, hi)`.
pub fn laplace_mass(lo: f64, hi: f64, y: f64, alpha: f64) -> f64 {
    ln_laplace_mass(lo, hi, y, alpha).exp()
}

fn dc_ln_probabilities(ctx: &PlaneContext, pos: usize) -> Result<(f64, f64)> {
    let ((a0, b0), (a1, b1)) = ctx.bin_halves(pos)?;
    let (w, y, alpha) = (ctx.step, ctx.y[pos], ctx.alpha[pos]);
    Ok((
        ln_laplace_mass(a0 * w, b0 * w, y, alpha),
        ln_laplace_mass(a1 * w, b1 * w, y, alpha),
    ))
}

/// Unnormalized `(P0, P1)` of a DC bit.
pub fn dc_bit_probabilities(ctx: &PlaneContext, pos: usize) -> Result<(f64, f64)> {
    if !ctx.is_dc() {
        return Err(Error::WrongBand {
            expected: "DC",
            got: ctx.band,
        });
    }
    ctx.check_decoded()?;
    let (l0, l1) = dc_ln_probabilities(ctx, pos)?;
    Ok((l0.exp(), l1.exp()))
}

fn check_ac(ctx: &PlaneContext, sign_plane: bool) -> Result<()> {
    if ctx.is_dc() {
        return Err(Error::WrongBand {
            expected: "AC",
            got: ctx.band,
        });
    }
    ctx.check_decoded()?;
    if (ctx.plane == ctx.bits - 1) != sign_plane {
        return Err(Error::WrongPlane {
            plane: ctx.plane,
            bits: ctx.bits,
        });
    }
    Ok(())
}

/// Laplacian decay per bin for the bin-domain sign sums.
fn bin_decay(ctx: &PlaneContext, pos: usize) -> f64 {
    ctx.alpha[pos] * ctx.step
}

/// Terms `(a/2) e^{-a |i - y_q|}` of the sign sums in log form:
/// nonnegative bins `0..=max` for bit 0, negative bins `-1..=-max` for bit 1.
fn sign_ln_terms(ctx: &PlaneContext, pos: usize) -> (Vec<f64>, Vec<f64>) {
    let a = bin_decay(ctx, pos);
    let yq = f64::from(ctx.y_q[pos]);
    let max = (1i64 << (ctx.bits - 1)) - 1;
    let term = |i: i64| (a / 2.0).ln() - a * (i as f64 - yq).abs();
    ((0..=max).map(term).collect(), (1..=max).map(|i| term(-i)).collect())
}

fn ln_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Unnormalized `(P0, P1)` of the AC sign bit (1 = negative), summed over
/// bins against the quantized side information.
pub fn ac_sign_probability(ctx: &PlaneContext, pos: usize) -> Result<(f64, f64)> {
    check_ac(ctx, true)?;
    let a = bin_decay(ctx, pos);
    let yq = f64::from(ctx.y_q[pos]);
    let max = (1i64 << (ctx.bits - 1)) - 1;
    let term = |i: i64| a / 2.0 * (-a * (i as f64 - yq).abs()).exp();
    Ok(((0..=max).map(term).sum(), (1..=max).map(|i| term(-i)).sum()))
}

/// Real-axis interval covered by magnitudes `[lo, hi)` (in bins) under `sign`.
fn signed_interval(lo: f64, hi: f64, w: f64, sign: i8) -> (f64, f64) {
    if sign >= 0 {
        (lo * w, hi * w)
    } else {
        (-hi * w, -lo * w)
    }
}

fn ac_ln_probabilities(ctx: &PlaneContext, pos: usize, sign: i8) -> Result<(f64, f64)> {
    let ((a0, b0), (a1, b1)) = ctx.bin_halves(pos)?;
    let (w, y, alpha) = (ctx.step, ctx.y[pos], ctx.alpha[pos]);
    let (l0, h0) = signed_interval(a0, b0, w, sign);
    let (l1, h1) = signed_interval(a1, b1, w, sign);
    Ok((ln_laplace_mass(l0, h0, y, alpha), ln_laplace_mass(l1, h1, y, alpha)))
}

/// Unnormalized `(P0, P1)` of an AC magnitude bit given the decoded sign
/// (`+1` or `-1`).
pub fn ac_bit_probabilities(ctx: &PlaneContext, pos: usize, sign: i8) -> Result<(f64, f64)> {
    check_ac(ctx, false)?;
    let (l0, l1) = ac_ln_probabilities(ctx, pos, sign)?;
    Ok((l0.exp(), l1.exp()))
}

/// `ln(P0 / P1)` after normalization, clamped; no information when the
/// total mass is degenerate.
pub fn llr_from_probabilities(p0: f64, p1: f64) -> f64 {
    let total = p0 + p1;
    if !(total >= DEGENERATE_MASS) {
        return 0.0;
    }
    let (q0, q1) = (p0 / total, p1 / total);
    if q1 == 0.0 {
        return LLR_CLAMP;
    }
    if q0 == 0.0 {
        return -LLR_CLAMP;
    }
    (q0 / q1).ln().clamp(-LLR_CLAMP, LLR_CLAMP)
}

fn llr_from_logs(l0: f64, l1: f64) -> f64 {
    match (l0 == f64::NEG_INFINITY, l1 == f64::NEG_INFINITY) {
        (true, true) => 0.0,
        (false, true) => LLR_CLAMP,
        (true, false) => -LLR_CLAMP,
        (false, false) => (l0 - l1).clamp(-LLR_CLAMP, LLR_CLAMP),
    }
}

/// LLRs of every position of the plane. Probabilities are combined in the
/// log domain so that side information far outside both intervals still
/// yields a decision.
pub fn plane_llrs(ctx: &PlaneContext) -> Result<Vec<f64>> {
    ctx.check_decoded()?;
    let n = ctx.y.len();
    for len in [ctx.y_q.len(), ctx.alpha.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    if let Some(p) = ctx.decoded.iter().find(|p| p.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: p.len(),
        });
    }
    (0..n)
        .map(|pos| {
            let (l0, l1) = if ctx.is_dc() {
                dc_ln_probabilities(ctx, pos)?
            } else if ctx.plane == ctx.bits - 1 {
                let (t0, t1) = sign_ln_terms(ctx, pos);
                (ln_sum_exp(&t0), ln_sum_exp(&t1))
            } else {
                let sign = if ctx.decoded[0][pos] & 1 == 1 { -1 } else { 1 };
                ac_ln_probabilities(ctx, pos, sign)?
            };
            Ok(llr_from_logs(l0, l1))
        })
        .collect()
}
