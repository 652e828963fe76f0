//! GOP planning from cheap frame-difference statistics (no motion search).
//!
//! Four activity metrics, each scaled to roughly `[0, 1]`, are combined by a
//! weighted sum. Consecutive pairs are accumulated until the running total
//! reaches the threshold, at which point the next frame opens a new GOP.

use crate::error::{Error, Result};
use crate::frame_io::{ensure_same_dims, Frame, Sequence};

/// Absolute differences above this count toward [`histogram_of_difference`].
pub const DEVIATION_THRESHOLD: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ActivityConfig {
    pub threshold: f64,
    pub max_gop: usize,
    /// Weights of diff-of-histograms, histogram-of-difference,
    /// block-histogram difference and block-variance difference.
    pub weights: [f64; 4],
    pub block_size: usize,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig {
            threshold: 0.35,
            max_gop: 8,
            weights: [0.25; 4],
            block_size: 8,
        }
    }
}

impl ActivityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!("threshold {}", self.threshold)));
        }
        if !(1..=8).contains(&self.max_gop) {
            return Err(Error::InvalidConfig(format!("max_gop {}", self.max_gop)));
        }
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("weights {:?}", self.weights)));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block size 0".into()));
        }
        Ok(())
    }
}

fn histogram(samples: impl Iterator<Item = u8>) -> [u32; 256] {
    let mut h = [0u32; 256];
    for s in samples {
        h[usize::from(s)] += 1;
    }
    h
}

fn histogram_distance(a: &[u32; 256], b: &[u32; 256], count: usize) -> f64 {
    let l1: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| u64::from(x.abs_diff(y)))
        .sum();
    l1 as f64 / (2.0 * count as f64)
}

pub fn diff_of_histograms(f1: &Frame, f2: &Frame) -> Result<f64> {
    ensure_same_dims(f1, f2)?;
    let (a, b) = (
        histogram(f1.luma().iter().copied()),
        histogram(f2.luma().iter().copied()),
    );
    Ok(histogram_distance(&a, &b, f1.luma().len()))
}

/// Share of samples whose absolute difference exceeds [`DEVIATION_THRESHOLD`].
pub fn histogram_of_difference(f1: &Frame, f2: &Frame) -> Result<f64> {
    ensure_same_dims(f1, f2)?;
    let moved = f1
        .luma()
        .iter()
        .zip(f2.luma())
        .filter(|(&a, &b)| a.abs_diff(b) > DEVIATION_THRESHOLD)
        .count();
    Ok(moved as f64 / f1.luma().len() as f64)
}

fn check_block(f: &Frame, block: usize) -> Result<()> {
    if block == 0 || f.width() % block != 0 || f.height() % block != 0 {
        return Err(Error::BadBlockSize {
            block,
            width: f.width(),
            height: f.height(),
        });
    }
    Ok(())
}

fn block_samples(f: &Frame, bx: usize, by: usize, block: usize) -> impl Iterator<Item = u8> + '_ {
    (0..block).flat_map(move |y| (0..block).map(move |x| f.at(bx * block + x, by * block + y)))
}

/// Mean over co-located blocks of `metric(block1, block2)`.
fn mean_over_blocks(
    f1: &Frame,
    f2: &Frame,
    block: usize,
    metric: impl Fn(&Frame, &Frame, usize, usize) -> f64,
) -> Result<f64> {
    ensure_same_dims(f1, f2)?;
    check_block(f1, block)?;
    let (bw, bh) = (f1.width() / block, f1.height() / block);
    let total: f64 = (0..bh)
        .flat_map(|by| (0..bw).map(move |bx| (bx, by)))
        .map(|(bx, by)| metric(f1, f2, bx, by))
        .sum();
    Ok(total / (bw * bh) as f64)
}

pub fn block_histogram_difference(f1: &Frame, f2: &Frame, block: usize) -> Result<f64> {
    mean_over_blocks(f1, f2, block, |a, b, bx, by| {
        let ha = histogram(block_samples(a, bx, by, block));
        let hb = histogram(block_samples(b, bx, by, block));
        histogram_distance(&ha, &hb, block * block)
    })
}

fn variance(samples: impl Iterator<Item = u8>) -> f64 {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for v in samples {
        let v = f64::from(v);
        n += 1.0;
        s += v;
        s2 += v * v;
    }
    let mean = s / n;
    s2 / n - mean * mean
}

/// Mean absolute change of per-block variance, scaled by `255^2`.
pub fn block_variance_difference(f1: &Frame, f2: &Frame, block: usize) -> Result<f64> {
    mean_over_blocks(f1, f2, block, |a, b, bx, by| {
        let va = variance(block_samples(a, bx, by, block));
        let vb = variance(block_samples(b, bx, by, block));
        (va - vb).abs() / (255.0 * 255.0)
    })
}

pub fn motion_activity(f1: &Frame, f2: &Frame, cfg: &ActivityConfig) -> Result<f64> {
    let metrics = [
        diff_of_histograms(f1, f2)?,
        histogram_of_difference(f1, f2)?,
        block_histogram_difference(f1, f2, cfg.block_size)?,
        block_variance_difference(f1, f2, cfg.block_size)?,
    ];
    Ok(metrics.iter().zip(&cfg.weights).map(|(m, w)| m * w).sum())
}

/// GOP lengths covering a sequence; each GOP starts with a key frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GopPlan {
    pub sizes: Vec<usize>,
}

impl GopPlan {
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Display index of the key frame opening each GOP.
    pub fn key_indices(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .scan(0, |start, &s| {
                let k = *start;
                *start += s;
                Some(k)
            })
            .collect()
    }
}

pub fn plan_fixed(frames: usize, gop: usize) -> Result<GopPlan> {
    if frames == 0 {
        return Err(Error::EmptySequence);
    }
    if gop == 0 {
        return Err(Error::InvalidConfig("GOP size 0".into()));
    }
    let mut sizes = vec![gop; frames / gop];
    if frames % gop != 0 {
        sizes.push(frames % gop);
    }
    Ok(GopPlan { sizes })
}

/// Greedy adaptive split: a GOP is closed once its accumulated activity
/// would reach `cfg.threshold`, or when it holds `cfg.max_gop` frames.
pub fn plan_gops(seq: &Sequence, cfg: &ActivityConfig) -> Result<GopPlan> {
    cfg.validate()?;
    let frames = seq.frames();
    if frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let activity = frames
        .windows(2)
        .map(|w| motion_activity(&w[0], &w[1], cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut sizes = Vec::new();
    let (mut size, mut acc) = (1usize, 0.0f64);
    for a in activity {
        if size == cfg.max_gop || acc + a >= cfg.threshold {
            sizes.push(size);
            size = 1;
            acc = 0.0;
        } else {
            size += 1;
            acc += a;
        }
    }
    sizes.push(size);
    Ok(GopPlan { sizes })
}
