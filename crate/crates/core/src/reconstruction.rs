//! Reconstruction of decoded bins: the side information value is kept when
//! it falls inside the decoded bin, otherwise it is clamped to the nearer bin
//! boundary.

use crate::error::{Error, Result};
use crate::frame_io::Frame;
use crate::quantizer::QuantizedBands;
use crate::transform::{bands_to_frame, CoeffBands, Plane, BANDS};

/// Clamp-to-bin reconstruction of one coefficient with bin `q`, side
/// information `y` and step `w`. `dc` selects the unsigned DC geometry.
pub fn reconstruct_coeff(q: i32, y: f64, w: f64, dc: bool) -> f64 {
    let qf = f64::from(q);
    if dc || q > 0 {
        let (z0, z1) = (qf * w, (qf + 1.0) * w);
        if y < z0 {
            z0
        } else if y < z1 {
            y
        } else {
            z1
        }
    } else if q < 0 {
        let (z0, z1) = (qf * w, (qf - 1.0) * w);
        if y > z0 {
            z0
        } else if y > z1 {
            y
        } else {
            z1
        }
    } else if y <= -w {
        -w
    } else if y <= w {
        y
    } else {
        w
    }
}

/// Coefficients of a WZ frame: coded bands reconstructed from `bins`,
/// uncoded bands taken from the side information.
pub fn reconstruct_bands(bins: &QuantizedBands, si: &CoeffBands) -> Result<CoeffBands> {
    si.check()?;
    if (bins.blocks_w, bins.blocks_h) != (si.blocks_w, si.blocks_h) {
        return Err(Error::InconsistentBands(format!(
            "bins {}x{} blocks, side information {}x{}",
            bins.blocks_w, bins.blocks_h, si.blocks_w, si.blocks_h
        )));
    }
    let mut out = si.clone();
    for band in &bins.bands {
        if band.band >= BANDS || band.bins.len() != si.band_len() {
            return Err(Error::InconsistentBands(format!(
                "band {} with {} bins",
                band.band,
                band.bins.len()
            )));
        }
        for (c, &q) in out.bands[band.band].iter_mut().zip(&band.bins) {
            *c = reconstruct_coeff(q, *c, band.step, band.is_dc());
        }
    }
    Ok(out)
}

/// Reconstructed WZ frame before rounding, plus its coefficients.
pub fn reconstruct_plane(bins: &QuantizedBands, si: &CoeffBands) -> Result<(Plane, CoeffBands)> {
    let coeffs = reconstruct_bands(bins, si)?;
    Ok((bands_to_frame(&coeffs)?, coeffs))
}

/// Reconstructed WZ frame, rounded and clamped to 8 bits.
pub fn reconstruct_frame(bins: &QuantizedBands, si: &CoeffBands, index: usize) -> Result<Frame> {
    reconstruct_plane(bins, si)?.0.to_frame(index)
}
