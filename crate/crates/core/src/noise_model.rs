//! Laplacian model of the difference between a WZ frame and its side
//! information, fitted from the interpolation residual.

use crate::error::{Error, Result};
use crate::transform::{plane_to_bands, CoeffBands, Plane, BANDS};

/// Variances below this are floored, capping alpha at about 1414.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianModel {
    pub alpha_band: [f64; BANDS],
    /// `alpha_coeff[band][i]` for coefficient `i` of `band`.
    pub alpha_coeff: Vec<Vec<f64>>,
    pub band_var: [f64; BANDS],
}

/// Laplacian parameter with variance `var` (`var = 2 / alpha^2`).
pub fn alpha_from_variance(var: f64) -> f64 {
    (2.0 / var.max(VARIANCE_FLOOR)).sqrt()
}

impl LaplacianModel {
    /// Fits a residual plane (e.g. half the difference of the compensated
    /// references).
    pub fn fit(residual: &Plane) -> Result<Self> {
        if residual.data.len() != residual.width * residual.height
            || residual.width % 4 != 0
            || residual.height % 4 != 0
        {
            return Err(Error::DimensionMismatch(format!(
                "residual {}x{} with {} samples",
                residual.width,
                residual.height,
                residual.data.len()
            )));
        }
        Ok(Self::from_bands(&plane_to_bands(residual)))
    }

    pub fn from_bands(bands: &CoeffBands) -> Self {
        let mut alpha_band = [0.0; BANDS];
        let mut band_var = [0.0; BANDS];
        let mut alpha_coeff = Vec::with_capacity(BANDS);
        for k in 0..BANDS {
            let r = bands.band(k);
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
            let var = var.max(VARIANCE_FLOOR);
            band_var[k] = var;
            alpha_band[k] = alpha_from_variance(var);
            alpha_coeff.push(
                r.iter()
                    .map(|&v| {
                        let r2 = v * v;
                        if r2 > var {
                            alpha_from_variance(r2)
                        } else {
                            alpha_band[k]
                        }
                    })
                    .collect(),
            );
        }
        LaplacianModel {
            alpha_band,
            alpha_coeff,
            band_var,
        }
    }

    /// Per-coefficient alphas of `band` at the chosen granularity.
    pub fn alphas(&self, band: usize, per_coefficient: bool) -> Vec<f64> {
        if per_coefficient {
            self.alpha_coeff[band].clone()
        } else {
            vec![self.alpha_band[band]; self.alpha_coeff[band].len()]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bands_with(values: impl Fn(usize, usize) -> f64, blocks: usize) -> CoeffBands {
        let mut b = CoeffBands::zeros(blocks, 1);
        for k in 0..BANDS {
            for i in 0..blocks {
                b.bands[k][i] = values(k, i);
            }
        }
        b
    }

    #[test]
    fn band_and_coefficient_alphas() {
        // band 3 alternates +-sqrt(2): mean 0, variance 2
        let s = 2f64.sqrt();
        let b = bands_with(|k, i| if k == 3 { if i % 2 == 0 { s } else { -s } } else { 0.0 }, 8);
        let m = LaplacianModel::from_bands(&b);
        assert!((m.band_var[3] - 2.0).abs() < 1e-12);
        assert!((m.alpha_band[3] - 1.0).abs() < 1e-12);
        assert!(m.alpha_coeff[3].iter().all(|&a| (a - 1.0).abs() < 1e-12));
        for k in (0..BANDS).filter(|&k| k != 3) {
            assert!((m.alpha_band[k] - 2e6f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn coefficient_branch() {
        // half the coefficients at +-sqrt(8), the rest 0: variance 4
        let s8 = 8f64.sqrt();
        let b = bands_with(
            |k, i| match (k, i % 4) {
                (5, 0) => s8,
                (5, 2) => -s8,
                _ => 0.0,
            },
            16,
        );
        let m = LaplacianModel::from_bands(&b);
        assert!((m.band_var[5] - 4.0).abs() < 1e-12);
        for (i, &a) in m.alpha_coeff[5].iter().enumerate() {
            if i % 2 == 0 {
                assert!((a - 0.5).abs() < 1e-12);
                assert!(a <= m.alpha_band[5]);
            } else {
                assert_eq!(a, m.alpha_band[5]);
            }
        }
    }

    #[test]
    fn zero_residual_hits_the_cap() {
        let m = LaplacianModel::fit(&Plane::zeros(16, 16)).unwrap();
        let cap = (2.0 / VARIANCE_FLOOR).sqrt();
        assert!(m.alpha_band.iter().all(|&a| a == cap));
        assert!(m.alpha_coeff.iter().flatten().all(|&a| a == cap));
    }

    #[test]
    fn recovers_sampled_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for alpha in [0.1, 1.0, 5.0] {
            let blocks = 100_000;
            let mut b = bands_with(|_, _| 0.0, blocks);
            for i in 0..blocks {
                let u: f64 = rng.gen_range(-0.5..0.5);
                b.bands[2][i] = -u.signum() * (1.0 - 2.0 * u.abs()).ln() / alpha;
            }
            let m = LaplacianModel::from_bands(&b);
            assert!((m.alpha_band[2] / alpha - 1.0).abs() < 0.05, "{alpha}: {}", m.alpha_band[2]);
        }
    }

    #[test]
    fn coefficient_alpha_never_exceeds_band_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut p = Plane::zeros(32, 32);
        p.data.iter_mut().for_each(|v| *v = rng.gen_range(-20.0..20.0));
        let m = LaplacianModel::fit(&p).unwrap();
        for k in 0..BANDS {
            for &a in &m.alpha_coeff[k] {
                assert!(a.is_finite() && a > 0.0 && a <= m.alpha_band[k]);
            }
        }
        assert!(LaplacianModel::fit(&Plane {
            width: 6,
            height: 4,
            data: vec![0.0; 24]
        })
        .is_err());
    }
}
