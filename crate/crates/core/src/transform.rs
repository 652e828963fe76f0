//! 4x4 orthonormal DCT and grouping of coefficients into 16 zig-zag bands.

use crate::error::{Error, Result};
use crate::frame_io::Frame;

pub type Block4 = [[f64; 4]; 4];

/// Number of coefficient bands (one per 4x4 position).
pub const BANDS: usize = 16;

/// `(row, col)` of the k-th coefficient in zig-zag order.
pub const ZIGZAG: [(usize, usize); 16] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (2, 0),
    (1, 1),
    (0, 2),
    (0, 3),
    (1, 2),
    (2, 1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (2, 3),
    (3, 2),
    (3, 3),
];

pub fn zigzag_order() -> [(usize, usize); 16] {
    ZIGZAG
}

/// Orthonormal 4-point DCT-II basis, `A[k][n]`.
fn basis() -> &'static [[f64; 4]; 4] {
    static A: std::sync::OnceLock<[[f64; 4]; 4]> = std::sync::OnceLock::new();
    A.get_or_init(|| {
        let mut a = [[0.0; 4]; 4];
        for (k, row) in a.iter_mut().enumerate() {
            let scale = if k == 0 { 0.5 } else { (0.5f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = scale
                    * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 8.0).cos();
            }
        }
        a
    })
}

/// `C = A X Aᵀ`.
pub fn dct4(block: &Block4) -> Block4 {
    let a = basis();
    let mut tmp = [[0.0; 4]; 4];
    for k in 0..4 {
        for c in 0..4 {
            tmp[k][c] = (0..4).map(|n| a[k][n] * block[n][c]).sum();
        }
    }
    let mut out = [[0.0; 4]; 4];
    for r in 0..4 {
        for l in 0..4 {
            out[r][l] = (0..4).map(|c| tmp[r][c] * a[l][c]).sum();
        }
    }
    out
}

/// `X = Aᵀ C A`.
pub fn idct4(coeffs: &Block4) -> Block4 {
    let a = basis();
    let mut tmp = [[0.0; 4]; 4];
    for n in 0..4 {
        for l in 0..4 {
            tmp[n][l] = (0..4).map(|k| a[k][n] * coeffs[k][l]).sum();
        }
    }
    let mut out = [[0.0; 4]; 4];
    for n in 0..4 {
        for m in 0..4 {
            out[n][m] = (0..4).map(|l| tmp[n][l] * a[l][m]).sum();
        }
    }
    out
}

/// A real-valued plane: residuals, unclamped reconstructions.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_frame(f: &Frame) -> Self {
        Plane {
            width: f.width(),
            height: f.height(),
            data: f.luma().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    /// Rounds and clamps into an 8-bit frame.
    pub fn to_frame(&self, index: usize) -> Result<Frame> {
        let luma = self
            .data
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        Frame::new(self.width, self.height, luma, index)
    }
}

/// The 16 zig-zag bands of a transformed frame; band `k` holds coefficient
/// `ZIGZAG[k]` of every block in raster block order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffBands {
    pub blocks_w: usize,
    pub blocks_h: usize,
    pub bands: Vec<Vec<f64>>,
}

impl CoeffBands {
    pub fn zeros(blocks_w: usize, blocks_h: usize) -> Self {
        CoeffBands {
            blocks_w,
            blocks_h,
            bands: vec![vec![0.0; blocks_w * blocks_h]; BANDS],
        }
    }

    pub fn band_len(&self) -> usize {
        self.blocks_w * self.blocks_h
    }

    pub fn band(&self, k: usize) -> &[f64] {
        &self.bands[k]
    }

    pub fn check(&self) -> Result<()> {
        if self.bands.len() != BANDS {
            return Err(Error::InconsistentBands(format!(
                "{} bands instead of 16",
                self.bands.len()
            )));
        }
        let len = self.band_len();
        if let Some((k, b)) = self.bands.iter().enumerate().find(|(_, b)| b.len() != len) {
            return Err(Error::InconsistentBands(format!(
                "band {k} has {} coefficients, expected {len}",
                b.len()
            )));
        }
        Ok(())
    }
}

pub fn frame_to_bands(f: &Frame) -> CoeffBands {
    plane_to_bands(&Plane::from_frame(f))
}

/// Same as [`frame_to_bands`] for real-valued input such as residuals.
/// Plane dimensions must be multiples of 4.
pub fn plane_to_bands(p: &Plane) -> CoeffBands {
    debug_assert!(p.width % 4 == 0 && p.height % 4 == 0);
    let (bw, bh) = (p.width / 4, p.height / 4);
    let mut out = CoeffBands::zeros(bw, bh);
    for by in 0..bh {
        for bx in 0..bw {
            let mut block = [[0.0; 4]; 4];
            for (r, row) in block.iter_mut().enumerate() {
                let base = (by * 4 + r) * p.width + bx * 4;
                row.copy_from_slice(&p.data[base..base + 4]);
            }
            let c = dct4(&block);
            let idx = by * bw + bx;
            for (k, &(r, col)) in ZIGZAG.iter().enumerate() {
                out.bands[k][idx] = c[r][col];
            }
        }
    }
    out
}

pub fn bands_to_frame(b: &CoeffBands) -> Result<Plane> {
    b.check()?;
    let (bw, bh) = (b.blocks_w, b.blocks_h);
    let mut out = Plane::zeros(bw * 4, bh * 4);
    for by in 0..bh {
        for bx in 0..bw {
            let idx = by * bw + bx;
            let mut c = [[0.0; 4]; 4];
            for (k, &(r, col)) in ZIGZAG.iter().enumerate() {
                c[r][col] = b.bands[k][idx];
            }
            let x = idct4(&c);
            for (r, row) in x.iter().enumerate() {
                let base = (by * 4 + r) * out.width + bx * 4;
                out.data[base..base + 4].copy_from_slice(row);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct basis-function definition of the orthonormal 2-D DCT-II.
    fn dct_oracle(x: &Block4) -> Block4 {
        let pi = std::f64::consts::PI;
        let c = |k: usize| if k == 0 { (0.25f64).sqrt() } else { (0.5f64).sqrt() };
        let mut out = [[0.0; 4]; 4];
        for u in 0..4 {
            for v in 0..4 {
                let mut s = 0.0;
                for m in 0..4 {
                    for n in 0..4 {
                        s += x[m][n]
                            * (pi * (2 * m + 1) as f64 * u as f64 / 8.0).cos()
                            * (pi * (2 * n + 1) as f64 * v as f64 / 8.0).cos();
                    }
                }
                out[u][v] = c(u) * c(v) * s;
            }
        }
        out
    }

    fn random_block(rng: &mut ChaCha8Rng) -> Block4 {
        let mut b = [[0.0; 4]; 4];
        for row in &mut b {
            for v in row {
                *v = rng.gen_range(-300.0..300.0);
            }
        }
        b
    }

    #[test]
    fn constant_block_has_only_dc() {
        let c = dct4(&[[9.0; 4]; 4]);
        assert!((c[0][0] - 36.0).abs() < 1e-12);
        for (r, row) in c.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                if (r, l) != (0, 0) {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
        assert_eq!(dct4(&[[0.0; 4]; 4]), [[0.0; 4]; 4]);
        let mut dc = [[0.0; 4]; 4];
        dc[0][0] = 4.0 * 7.0;
        for row in idct4(&dc) {
            for v in row {
                assert!((v - 7.0).abs() < 1e-12);
            }
        }
        assert_eq!(idct4(&[[0.0; 4]; 4]), [[0.0; 4]; 4]);
    }

    #[test]
    fn dct_matches_basis_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let b = random_block(&mut rng);
            let (got, want) = (dct4(&b), dct_oracle(&b));
            for r in 0..4 {
                for l in 0..4 {
                    assert!((got[r][l] - want[r][l]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zigzag_is_a_permutation() {
        let z = zigzag_order();
        assert_eq!(z[0], (0, 0));
        assert_eq!(z[15], (3, 3));
        let mut seen = [false; 16];
        for (r, c) in z {
            assert!(!seen[r * 4 + c]);
            seen[r * 4 + c] = true;
        }
    }

    #[test]
    fn constant_frame_bands() {
        let f = Frame::filled(16, 16, 50, 0).unwrap();
        let b = frame_to_bands(&f);
        assert_eq!(b.band_len(), 16);
        assert!(b.band(0).iter().all(|&v| (v - 200.0).abs() < 1e-9));
        for k in 1..16 {
            assert!(b.band(k).iter().all(|v| v.abs() < 1e-9));
        }
        let back = bands_to_frame(&b).unwrap();
        assert!(back.data.iter().all(|&v| (v - 50.0).abs() < 1e-9));
        assert!(bands_to_frame(&CoeffBands::zeros(4, 4))
            .unwrap()
            .data
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn bands_to_frame_matches_blockwise_idct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut b = CoeffBands::zeros(4, 2);
        for band in &mut b.bands {
            for v in band.iter_mut() {
                *v = rng.gen_range(-100.0..100.0);
            }
        }
        let plane = bands_to_frame(&b).unwrap();
        for by in 0..2 {
            for bx in 0..4 {
                let mut c = [[0.0; 4]; 4];
                for k in 0..16 {
                    let (r, l) = ZIGZAG[k];
                    c[r][l] = b.bands[k][by * 4 + bx];
                }
                let x = idct4(&c);
                for r in 0..4 {
                    for l in 0..4 {
                        let got = plane.data[(by * 4 + r) * 16 + bx * 4 + l];
                        assert!((got - x[r][l]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn inconsistent_bands_rejected() {
        let mut b = CoeffBands::zeros(2, 2);
        b.bands[3].pop();
        assert!(matches!(bands_to_frame(&b), Err(Error::InconsistentBands(_))));
    }

    proptest! {
        #[test]
        fn block_round_trip_and_parseval(vals in proptest::array::uniform16(-255.0f64..255.0)) {
            let mut b = [[0.0; 4]; 4];
            for (i, v) in vals.iter().enumerate() {
                b[i / 4][i % 4] = *v;
            }
            let c = dct4(&b);
            let back = idct4(&c);
            let mut ex = 0.0;
            let mut ec = 0.0;
            for r in 0..4 {
                for l in 0..4 {
                    prop_assert!((back[r][l] - b[r][l]).abs() < 1e-9);
                    ex += b[r][l] * b[r][l];
                    ec += c[r][l] * c[r][l];
                }
            }
            prop_assert!((ex - ec).abs() <= 1e-6 * ex.max(1.0));
        }

        #[test]
        fn frame_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = Frame::from_fn(32, 16, 0, |_, _| rng.gen()).unwrap();
            let back = bands_to_frame(&frame_to_bands(&f)).unwrap();
            for (a, b) in back.data.iter().zip(f.luma()) {
                prop_assert!((a - f64::from(*b)).abs() < 1e-6);
            }
        }
    }
}
