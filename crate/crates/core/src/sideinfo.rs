//! Side information by motion-compensated interpolation between two decoded
//! references.
//!
//! Vectors are stored in half-pel units as offsets from the block of the
//! frame being estimated: `backward` points into the past reference,
//! `forward` into the future one. Half-pel samples come from bilinear
//! upsampled copies of the references kept at 4x scale, so every SAD below is
//! exact integer arithmetic.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame_io::{ensure_same_dims, Frame};
use crate::transform::Plane;

pub const FORWARD_BLOCK: usize = 16;
pub const FINE_BLOCK: usize = 8;
pub const SEARCH_RANGE: i32 = 32;

/// Motion vector in half-pel units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Mv {
    pub x: i32,
    pub y: i32,
}

impl Mv {
    pub const ZERO: Mv = Mv { x: 0, y: 0 };

    pub fn new(x: i32, y: i32) -> Self {
        Mv { x, y }
    }

    fn sub(self, o: Mv) -> Mv {
        Mv::new(self.x - o.x, self.y - o.y)
    }

    fn chebyshev(self, o: Mv) -> i32 {
        (self.x - o.x).abs().max((self.y - o.y).abs())
    }

    fn dist(self, o: Mv) -> f64 {
        f64::from(self.x - o.x).hypot(f64::from(self.y - o.y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockMotion {
    pub backward: Mv,
    pub forward: Mv,
    /// SAD in pixel units.
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionField {
    pub block: usize,
    pub cols: usize,
    pub rows: usize,
    pub vectors: Vec<BlockMotion>,
}

impl MotionField {
    pub fn get(&self, bx: usize, by: usize) -> &BlockMotion {
        &self.vectors[by * self.cols + bx]
    }
}

/// A reference upsampled by two in each direction, sample values scaled by 4.
#[derive(Clone, Debug)]
pub struct HalfPelPlane {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl HalfPelPlane {
    pub fn from_frame(f: &Frame) -> Self {
        let (w, h) = (f.width(), f.height());
        let (w2, h2) = (2 * w, 2 * h);
        let p = |x: usize, y: usize| u16::from(f.at(x.min(w - 1), y.min(h - 1)));
        let mut data = vec![0u16; w2 * h2];
        for y in 0..h {
            for x in 0..w {
                let (a, b, c, d) = (p(x, y), p(x + 1, y), p(x, y + 1), p(x + 1, y + 1));
                let row = 2 * y * w2;
                data[row + 2 * x] = 4 * a;
                data[row + 2 * x + 1] = 2 * (a + b);
                data[row + w2 + 2 * x] = 2 * (a + c);
                data[row + w2 + 2 * x + 1] = a + b + c + d;
            }
        }
        HalfPelPlane {
            width: w2,
            height: h2,
            data,
        }
    }

    /// Sample at pixel `(x, y)` displaced by `v` half-pels, edge clamped.
    #[inline]
    fn sample(&self, x: usize, y: usize, v: Mv) -> u16 {
        let u = (2 * x as i64 + i64::from(v.x)).clamp(0, self.width as i64 - 1) as usize;
        let w = (2 * y as i64 + i64::from(v.y)).clamp(0, self.height as i64 - 1) as usize;
        self.data[w * self.width + u]
    }
}

/// Two references around the frame to estimate, at temporal position `tau`.
#[derive(Clone, Debug)]
pub struct InterpolationContext<'a> {
    pub x_b: &'a Frame,
    pub x_f: &'a Frame,
    pub tau: f64,
    up_b: HalfPelPlane,
    up_f: HalfPelPlane,
}

impl<'a> InterpolationContext<'a> {
    pub fn new(x_b: &'a Frame, x_f: &'a Frame, tau: f64) -> Result<Self> {
        ensure_same_dims(x_b, x_f)?;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidConfig(format!("tau {tau} outside (0, 1)")));
        }
        Ok(InterpolationContext {
            x_b,
            x_f,
            tau,
            up_b: HalfPelPlane::from_frame(x_b),
            up_f: HalfPelPlane::from_frame(x_f),
        })
    }

    fn width(&self) -> usize {
        self.x_b.width()
    }

    fn height(&self) -> usize {
        self.x_b.height()
    }

    /// SAD at 4x scale between the two compensated predictions of a block.
    fn bi_sad(&self, x0: usize, y0: usize, block: usize, m: (Mv, Mv)) -> u32 {
        let mut sad = 0u32;
        for y in y0..y0 + block {
            for x in x0..x0 + block {
                let a = self.up_b.sample(x, y, m.0);
                let b = self.up_f.sample(x, y, m.1);
                sad += u32::from(a.abs_diff(b));
            }
        }
        sad
    }

    fn predictions(&self, field: &MotionField, x: usize, y: usize) -> (f64, f64) {
        let m = field.get(x / field.block, y / field.block);
        (
            f64::from(self.up_b.sample(x, y, m.backward)) / 4.0,
            f64::from(self.up_f.sample(x, y, m.forward)) / 4.0,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SideInfoConfig {
    pub search_range: i32,
    /// Refinement window in half-pels.
    pub window: i32,
    /// Window used when a neighbour disagrees.
    pub wide_window: i32,
    /// Neighbour disagreement (half-pels) that widens the window.
    pub disagreement: i32,
    pub smoothing: bool,
}

impl Default for SideInfoConfig {
    fn default() -> Self {
        SideInfoConfig {
            search_range: SEARCH_RANGE,
            window: 2,
            wide_window: 4,
            disagreement: 4,
            smoothing: true,
        }
    }
}

fn block_sad(f: &Frame, g: &Frame, fx: usize, fy: usize, gx: usize, gy: usize, block: usize) -> u32 {
    let (a, b, w) = (f.luma(), g.luma(), f.width());
    let mut sad = 0u32;
    for r in 0..block {
        let ra = &a[(fy + r) * w + fx..][..block];
        let rb = &b[(gy + r) * w + gx..][..block];
        sad += ra.iter().zip(rb).map(|(&p, &q)| u32::from(p.abs_diff(q))).sum::<u32>();
    }
    sad
}

/// Integer-pel full search of every `block` of `x_f` inside `x_b`. Only
/// candidates lying wholly inside the frame are considered. The vector is
/// stored in `backward` (the displacement into `x_b`), `forward` is zero.
pub fn forward_me(ctx: &InterpolationContext, block: usize, range: i32) -> Result<MotionField> {
    let (w, h) = (ctx.width(), ctx.height());
    if block == 0 || w % block != 0 || h % block != 0 {
        return Err(Error::BadBlockSize {
            block,
            width: w,
            height: h,
        });
    }
    let (cols, rows) = (w / block, h / block);
    let vectors = (0..cols * rows)
        .into_par_iter()
        .map(|i| {
            let (x0, y0) = ((i % cols * block) as i32, (i / cols * block) as i32);
            let mut best: Option<(u32, i32, i32, i32)> = None;
            for dy in -range..=range {
                let y = y0 + dy;
                if y < 0 || y as usize + block > h {
                    continue;
                }
                for dx in -range..=range {
                    let x = x0 + dx;
                    if x < 0 || x as usize + block > w {
                        continue;
                    }
                    let sad = block_sad(
                        ctx.x_f,
                        ctx.x_b,
                        x0 as usize,
                        y0 as usize,
                        x as usize,
                        y as usize,
                        block,
                    );
                    let key = (sad, dx.abs() + dy.abs(), dy, dx);
                    if best.map_or(true, |b| key < b) {
                        best = Some(key);
                    }
                }
            }
            let (sad, _, dy, dx) = best.expect("zero displacement is always a candidate");
            BlockMotion {
                backward: Mv::new(2 * dx, 2 * dy),
                forward: Mv::ZERO,
                cost: f64::from(sad),
            }
        })
        .collect();
    Ok(MotionField {
        block,
        cols,
        rows,
        vectors,
    })
}

fn round_hp(v: f64) -> i32 {
    v.round() as i32
}

/// Picks, for each block of the frame to estimate, the forward-search vector
/// whose linear trajectory passes nearest the block centre and splits it
/// between the two references.
fn select_trajectories(ctx: &InterpolationContext, fwd: &MotionField, block: usize) -> MotionField {
    let (cols, rows) = (ctx.width() / block, ctx.height() / block);
    let tau = ctx.tau;
    // trajectory position at time tau, in half-pels
    let crossings: Vec<(f64, f64, Mv)> = fwd
        .vectors
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (cx, cy) = (
                ((i % fwd.cols) * fwd.block) as f64 * 2.0 + fwd.block as f64,
                ((i / fwd.cols) * fwd.block) as f64 * 2.0 + fwd.block as f64,
            );
            let v = m.backward;
            (
                cx + f64::from(v.x) * (1.0 - tau),
                cy + f64::from(v.y) * (1.0 - tau),
                v,
            )
        })
        .collect();
    let vectors = (0..cols * rows)
        .map(|i| {
            let (qx, qy) = (
                ((i % cols) * block) as f64 * 2.0 + block as f64,
                ((i / cols) * block) as f64 * 2.0 + block as f64,
            );
            let mut best = (f64::INFINITY, Mv::ZERO);
            for &(px, py, v) in &crossings {
                let d = (px - qx).hypot(py - qy);
                if d < best.0 {
                    best = (d, v);
                }
            }
            let v = best.1;
            let backward = Mv::new(round_hp(f64::from(v.x) * tau), round_hp(f64::from(v.y) * tau));
            BlockMotion {
                backward,
                forward: backward.sub(v),
                cost: 0.0,
            }
        })
        .collect();
    MotionField {
        block,
        cols,
        rows,
        vectors,
    }
}

fn split_field(parent: &MotionField) -> MotionField {
    let (cols, rows) = (parent.cols * 2, parent.rows * 2);
    let vectors = (0..cols * rows)
        .map(|i| *parent.get(i % cols / 2, i / cols / 2))
        .collect();
    MotionField {
        block: parent.block / 2,
        cols,
        rows,
        vectors,
    }
}

/// Local half-pel refinement keeping the trajectory through the block centre.
/// The initial pair is always a candidate and is replaced only on strict
/// improvement.
fn refine(ctx: &InterpolationContext, init: &MotionField, cfg: &SideInfoConfig) -> MotionField {
    let (block, cols, rows) = (init.block, init.cols, init.rows);
    let ratio = ctx.tau / (1.0 - ctx.tau);
    let vectors = (0..cols * rows)
        .into_par_iter()
        .map(|i| {
            let (bx, by) = (i % cols, i / cols);
            let here = init.vectors[i];
            let neighbours = [
                (bx > 0).then(|| i - 1),
                (bx + 1 < cols).then(|| i + 1),
                (by > 0).then(|| i - cols),
                (by + 1 < rows).then(|| i + cols),
            ];
            let wide = neighbours
                .iter()
                .flatten()
                .any(|&j| init.vectors[j].forward.chebyshev(here.forward) > cfg.disagreement);
            let r = if wide { cfg.wide_window } else { cfg.window };
            let (x0, y0) = (bx * block, by * block);
            let mut best = (here.backward, here.forward);
            let mut best_sad = ctx.bi_sad(x0, y0, block, best);
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let forward = Mv::new(here.forward.x + dx, here.forward.y + dy);
                    let backward = Mv::new(
                        here.backward.x - round_hp(f64::from(dx) * ratio),
                        here.backward.y - round_hp(f64::from(dy) * ratio),
                    );
                    let sad = ctx.bi_sad(x0, y0, block, (backward, forward));
                    if sad < best_sad {
                        best_sad = sad;
                        best = (backward, forward);
                    }
                }
            }
            BlockMotion {
                backward: best.0,
                forward: best.1,
                cost: f64::from(best_sad) / 4.0,
            }
        })
        .collect();
    MotionField {
        block,
        cols,
        rows,
        vectors,
    }
}

/// Bidirectional estimation at `block` (16 or 8). At 16 the field is seeded
/// from the forward search; at 8 `seed` must be the refined 16x16 field,
/// which is split into its children.
pub fn bidirectional_me(
    ctx: &InterpolationContext,
    seed: &MotionField,
    block: usize,
    cfg: &SideInfoConfig,
) -> Result<MotionField> {
    let (w, h) = (ctx.width(), ctx.height());
    if block == 0 || w % block != 0 || h % block != 0 {
        return Err(Error::BadBlockSize {
            block,
            width: w,
            height: h,
        });
    }
    let init = if seed.block == block * 2 && block != FORWARD_BLOCK {
        split_field(seed)
    } else {
        select_trajectories(ctx, seed, block)
    };
    Ok(refine(ctx, &init, cfg))
}

/// Weighted vector median over each 3x3 neighbourhood. Weights favour
/// neighbours with low matching error; the centre wins ties. Costs of the
/// chosen vectors are recomputed for the block they now serve.
pub fn smooth_motion(ctx: &InterpolationContext, field: &MotionField) -> MotionField {
    let (block, cols, rows) = (field.block, field.cols, field.rows);
    let area = (block * block) as f64;
    let vectors = (0..cols * rows)
        .map(|i| {
            let (bx, by) = ((i % cols) as isize, (i / cols) as isize);
            let mut hood = vec![i];
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (x, y) = (bx + dx, by + dy);
                    if (dx, dy) != (0, 0) && x >= 0 && y >= 0 && (x as usize) < cols && (y as usize) < rows {
                        hood.push(y as usize * cols + x as usize);
                    }
                }
            }
            let weight = |j: usize| 1.0 / (1.0 + field.vectors[j].cost / area);
            let score = |c: usize| -> f64 {
                hood.iter()
                    .map(|&j| weight(j) * field.vectors[c].forward.dist(field.vectors[j].forward))
                    .sum()
            };
            let mut best = (score(i), i);
            for &c in &hood[1..] {
                let s = score(c);
                if s < best.0 {
                    best = (s, c);
                }
            }
            let chosen = field.vectors[best.1];
            if best.1 == i {
                return chosen;
            }
            let sad = ctx.bi_sad(
                bx as usize * block,
                by as usize * block,
                block,
                (chosen.backward, chosen.forward),
            );
            BlockMotion {
                cost: f64::from(sad) / 4.0,
                ..chosen
            }
        })
        .collect();
    MotionField {
        block,
        cols,
        rows,
        vectors,
    }
}

/// `round((1 - tau) P_b + tau P_f)`, clamped, with `index` as frame index.
pub fn interpolate(ctx: &InterpolationContext, field: &MotionField, index: usize) -> Result<Frame> {
    let tau = ctx.tau;
    Frame::from_fn(ctx.width(), ctx.height(), index, |x, y| {
        let (pb, pf) = ctx.predictions(field, x, y);
        ((1.0 - tau) * pb + tau * pf).round().clamp(0.0, 255.0) as u8
    })
}

/// Half the difference of the two compensated predictions.
pub fn residual_frame(ctx: &InterpolationContext, field: &MotionField) -> Plane {
    let (w, h) = (ctx.width(), ctx.height());
    let mut plane = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (pb, pf) = ctx.predictions(field, x, y);
            plane.data[y * w + x] = (pb - pf) / 2.0;
        }
    }
    plane
}

#[derive(Clone, Debug)]
pub struct SideInfo {
    pub frame: Frame,
    pub residual: Plane,
    pub field: MotionField,
}

/// The complete chain: forward search, bidirectional 16x16 then 8x8,
/// smoothing, compensation.
pub fn estimate(ctx: &InterpolationContext, cfg: &SideInfoConfig, index: usize) -> Result<SideInfo> {
    let fwd = forward_me(ctx, FORWARD_BLOCK, cfg.search_range)?;
    let coarse = bidirectional_me(ctx, &fwd, FORWARD_BLOCK, cfg)?;
    let mut field = bidirectional_me(ctx, &coarse, FINE_BLOCK, cfg)?;
    if cfg.smoothing {
        field = smooth_motion(ctx, &field);
    }
    Ok(SideInfo {
        frame: interpolate(ctx, &field, index)?,
        residual: residual_frame(ctx, &field),
        field,
    })
}

/// One interpolation: `target` from references `backward` and `forward`,
/// all as offsets from the GOP's key frame (`gop` is the next key frame).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpStep {
    pub target: usize,
    pub backward: usize,
    pub forward: usize,
    pub tau: f64,
}

/// Hierarchical decoding order within a GOP: midpoint first, then each half.
pub fn plan_interpolation(gop: usize) -> Vec<InterpStep> {
    fn split(lo: usize, hi: usize, out: &mut Vec<InterpStep>) {
        if hi - lo < 2 {
            return;
        }
        let mid = (lo + hi) / 2;
        out.push(InterpStep {
            target: mid,
            backward: lo,
            forward: hi,
            tau: (mid - lo) as f64 / (hi - lo) as f64,
        });
        split(lo, mid, out);
        split(mid, hi, out);
    }
    let mut out = Vec::new();
    if gop > 0 {
        split(0, gop, &mut out);
    }
    out
}
