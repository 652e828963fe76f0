//! Rate-adaptive LDPC accumulate (LDPCA) syndrome coding.
//!
//! The syndrome former is a square, pseudo-random sparse matrix `H` with
//! regular variable degree; its syndromes are prefix-XOR accumulated and the
//! accumulated bits are handed out in chunks. Receiving a subset of the
//! accumulated bits at positions `t_1 < t_2 < ...` tells the decoder the XOR
//! of every run of syndromes `(t_{j-1}, t_j]`, so each rate step is a valid
//! LDPC code whose checks are merged syndrome nodes. With every chunk
//! received the mapping is invertible.
//!
//! Chunks are interleaved: syndrome index `i` belongs to group `i / m` at
//! phase `i % m`, where `m` is the number of chunks, and chunk `k` carries
//! every index whose phase is `order[k]`. The first chunk closes every group,
//! later chunks split the longest remaining runs, so after `k` chunks the
//! merged checks have roughly equal size. When the graph allows it, the
//! checks of one variable sit in distinct groups so no merged check ever
//! cancels an edge.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Rate steps of the ladder for long planes.
pub const LADDER_STEPS: usize = 66;
pub const DEFAULT_DEGREE: usize = 3;
/// Channel and message LLR magnitudes are clamped to this value.
pub const LLR_CLAMP: f64 = 25.0;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const MAX_RESEEDS: u32 = 64;
/// An attempt is abandoned once the count of unsatisfied checks has not
/// reached a new minimum for this many iterations.
pub const STALL_LIMIT: usize = 20;
const GRAPH_FORMAT_VERSION: u8 = 1;

/// An LDPCA code for planes of `n` bits.
#[derive(Clone, Debug)]
pub struct LdpcaCode {
    n: usize,
    degree: usize,
    seed: u64,
    /// Check (syndrome node) indices of each variable, variable-major.
    var_checks: Vec<u32>,
    check_vars: Vec<Vec<u32>>,
    chunks: Vec<Vec<usize>>,
    /// Rows of `H^-1` as bitsets, used once every chunk has arrived.
    inverse: Vec<Vec<u64>>,
}

impl PartialEq for LdpcaCode {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.degree == other.degree
            && self.seed == other.seed
            && self.var_checks == other.var_checks
    }
}

/// Chunk size of the ladder for a plane of `n` bits.
pub fn chunk_size(n: usize) -> usize {
    (n / LADDER_STEPS).max(1)
}

/// Accumulated-syndrome indices of every chunk, in transmission order.
pub fn ladder(n: usize) -> Vec<Vec<usize>> {
    let c = chunk_size(n);
    let m = n.div_ceil(c);
    phase_order(m)
        .into_iter()
        .map(|p| (p..n).step_by(m).collect())
        .collect()
}

/// Nested phase order: close the group first, then repeatedly split the
/// longest run of untransmitted phases (earliest run on ties).
fn phase_order(m: usize) -> Vec<usize> {
    let mut sent = vec![false; m];
    let mut order = Vec::with_capacity(m);
    sent[m - 1] = true;
    order.push(m - 1);
    while order.len() < m {
        let (mut best_start, mut best_len) = (0, 0);
        let mut run_start = 0;
        for p in 0..m {
            if sent[p] {
                let len = p - run_start;
                if len > best_len {
                    best_len = len;
                    best_start = run_start;
                }
                run_start = p + 1;
            }
        }
        // runs of untransmitted phases [a, a+len) are bounded by sent phases
        let pick = best_start + best_len / 2;
        let pick = pick.min(best_start + best_len - 1);
        sent[pick] = true;
        order.push(pick);
    }
    order
}

impl LdpcaCode {
    /// Deterministic construction; reseeds (`seed + 1`, ...) until the
    /// syndrome former has full rank.
    pub fn build(n: usize, degree: usize, seed: u64) -> Result<Self> {
        if n < 16 {
            return Err(Error::InvalidConfig(format!("LDPCA plane length {n} < 16")));
        }
        if degree == 0 || degree > n {
            return Err(Error::InvalidConfig(format!("variable degree {degree}")));
        }
        for attempt in 0..MAX_RESEEDS {
            let s = seed.wrapping_add(u64::from(attempt));
            let Some(var_checks) = random_edges(n, degree, s) else {
                continue;
            };
            if let Some(code) = Self::from_edges(n, degree, s, var_checks) {
                return Ok(code);
            }
        }
        Err(Error::ConstructionFailed {
            n,
            attempts: MAX_RESEEDS,
        })
    }

    /// Diagnostic code in which syndrome `i` is bit `i`.
    pub fn identity(n: usize) -> Self {
        Self::from_edges(n, 1, 0, (0..n as u32).collect()).expect("identity has full rank")
    }

    fn from_edges(n: usize, degree: usize, seed: u64, var_checks: Vec<u32>) -> Option<Self> {
        let mut check_vars = vec![Vec::with_capacity(degree); n];
        for (v, cs) in var_checks.chunks_exact(degree).enumerate() {
            for &c in cs {
                check_vars[c as usize].push(v as u32);
            }
        }
        let inverse = invert(n, &check_vars)?;
        Some(LdpcaCode {
            n,
            degree,
            seed,
            var_checks,
            check_vars,
            chunks: ladder(n),
            inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Seed that produced the graph (after any reseeding).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.len()
    }

    pub fn chunk(&self, k: usize) -> &[usize] {
        &self.chunks[k]
    }

    /// Bits carried by the first `k` chunks.
    pub fn bits_in_chunks(&self, k: usize) -> usize {
        self.chunks[..k].iter().map(Vec::len).sum()
    }

    pub fn check_neighbors(&self, check: usize) -> &[u32] {
        &self.check_vars[check]
    }

    pub fn syndromes(&self, bits: &[u8]) -> Vec<u8> {
        self.check_vars
            .iter()
            .map(|vs| vs.iter().fold(0u8, |acc, &v| acc ^ (bits[v as usize] & 1)))
            .collect()
    }

    /// Versioned graph dump: version u8, n u32, degree u8, seed u64, then
    /// `n * degree` check indices (u32, variable-major). Little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + 4 * self.var_checks.len());
        out.push(GRAPH_FORMAT_VERSION);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.push(self.degree as u8);
        out.extend_from_slice(&self.seed.to_le_bytes());
        for &c in &self.var_checks {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::MalformedBitstream(format!("LDPCA graph: {m}"));
        if bytes.len() < 14 || bytes[0] != GRAPH_FORMAT_VERSION {
            return Err(bad("bad header"));
        }
        let n = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
        let degree = usize::from(bytes[5]);
        let seed = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
        let body = &bytes[14..];
        if degree == 0 || body.len() != 4 * n * degree {
            return Err(bad("edge list length"));
        }
        let var_checks: Vec<u32> = body
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if var_checks.iter().any(|&c| c as usize >= n) {
            return Err(bad("check index out of range"));
        }
        Self::from_edges(n, degree, seed, var_checks).ok_or_else(|| bad("singular graph"))
    }
}

/// Configuration model with local repair. Each check gets exactly `degree`
/// edges; a variable's checks are distinct, and in distinct ladder groups
/// whenever there are more groups than the degree.
fn random_edges(n: usize, degree: usize, seed: u64) -> Option<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = n.div_ceil(chunk_size(n));
    let groups = n.div_ceil(m);
    let key = |c: u32| -> usize {
        if groups > degree {
            c as usize / m
        } else {
            c as usize
        }
    };
    let mut sockets: Vec<u32> = (0..n as u32)
        .flat_map(|c| std::iter::repeat(c).take(degree))
        .collect();
    sockets.shuffle(&mut rng);

    let clashes = |sockets: &[u32], v: usize, slot: usize, c: u32| {
        (0..degree).any(|j| j != slot && key(sockets[v * degree + j]) == key(c))
    };
    for v in 0..n {
        for slot in 0..degree {
            let pos = v * degree + slot;
            if !clashes(&sockets, v, slot, sockets[pos]) {
                continue;
            }
            let mut fixed = false;
            for _ in 0..20 * n {
                let other = rng.gen_range(0..sockets.len());
                let (w, wslot) = (other / degree, other % degree);
                if w == v {
                    continue;
                }
                let (a, b) = (sockets[pos], sockets[other]);
                if !clashes(&sockets, v, slot, b) && !clashes(&sockets, w, wslot, a) {
                    sockets.swap(pos, other);
                    fixed = true;
                    break;
                }
            }
            if !fixed {
                return None;
            }
        }
    }
    Some(sockets)
}

fn bit(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

/// Gauss-Jordan over GF(2). Returns the rows of `H^-1`, or `None` when `H`
/// is singular.
fn invert(n: usize, check_vars: &[Vec<u32>]) -> Option<Vec<Vec<u64>>> {
    let words = n.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = check_vars
        .iter()
        .enumerate()
        .map(|(i, vs)| {
            let mut r = vec![0u64; 2 * words];
            for &v in vs {
                r[v as usize / 64] ^= 1 << (v % 64);
            }
            r[words + i / 64] |= 1 << (i % 64);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| bit(&rows[r], col))?;
        rows.swap(col, pivot);
        let (head, tail) = rows.split_at_mut(col);
        let (prow, tail) = tail.split_first_mut().unwrap();
        let start = col / 64;
        for r in head.iter_mut().chain(tail.iter_mut()) {
            if bit(r, col) {
                for (a, b) in r[start..].iter_mut().zip(&prow[start..]) {
                    *a ^= *b;
                }
            }
        }
    }
    Some(rows.into_iter().map(|r| r[words..].to_vec()).collect())
}

/// Accumulated syndromes and checksum of one bit plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyndromePlane {
    pub acc: Vec<u8>,
    pub crc: u8,
}

impl SyndromePlane {
    /// Values of chunk `k` in ladder order.
    pub fn chunk_values(&self, code: &LdpcaCode, k: usize) -> Vec<u8> {
        code.chunk(k).iter().map(|&i| self.acc[i]).collect()
    }

    pub fn chunks(&self, code: &LdpcaCode) -> Vec<Vec<u8>> {
        (0..code.num_chunks())
            .map(|k| self.chunk_values(code, k))
            .collect()
    }
}

pub fn encode_plane(bits: &[u8], code: &LdpcaCode) -> Result<SyndromePlane> {
    if bits.len() != code.n {
        return Err(Error::LengthMismatch {
            expected: code.n,
            got: bits.len(),
        });
    }
    let mut acc = code.syndromes(bits);
    for i in 1..acc.len() {
        acc[i] ^= acc[i - 1];
    }
    Ok(SyndromePlane {
        acc,
        crc: crc8(bits),
    })
}

/// CRC-8 (poly 0x07, init 0, unreflected, no final XOR) over the bits packed
/// MSB-first, last byte zero-padded.
pub fn crc8(bits: &[u8]) -> u8 {
    pack_bits(bits).iter().fold(0u8, |mut crc, &byte| {
        crc ^= byte;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ 0x07
            } else {
                crc << 1
            };
        }
        crc
    })
}

pub fn verify(bits: &[u8], crc: u8) -> bool {
    crc8(bits) == crc
}

/// Packs 0/1 values MSB-first into bytes, zero-padding the tail.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u8, |b, (i, &v)| b | ((v & 1) << (7 - i)))
        })
        .collect()
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

/// Result of one decoding attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlaneDecode {
    /// The decoded plane reproduces every received constraint.
    Decoded { bits: Vec<u8>, iterations: usize },
    /// Iteration budget spent; `bits` are the last hard decisions.
    NotConverged { bits: Vec<u8>, iterations: usize },
}

impl PlaneDecode {
    pub fn bits(&self) -> &[u8] {
        match self {
            PlaneDecode::Decoded { bits, .. } | PlaneDecode::NotConverged { bits, .. } => bits,
        }
    }

    pub fn is_decoded(&self) -> bool {
        matches!(self, PlaneDecode::Decoded { .. })
    }
}

/// Merged parity constraints available from a prefix of chunks, in CSR form.
struct MergedChecks {
    ptr: Vec<usize>,
    vars: Vec<u32>,
    target: Vec<u8>,
}

impl MergedChecks {
    fn new(code: &LdpcaCode, received: &[Vec<u8>]) -> Self {
        let mut acc: Vec<Option<u8>> = vec![None; code.n];
        for (k, values) in received.iter().enumerate() {
            for (&i, &v) in code.chunk(k).iter().zip(values) {
                acc[i] = Some(v & 1);
            }
        }
        let mut parity = vec![0u8; code.n];
        let mut touched = Vec::new();
        let mut out = MergedChecks {
            ptr: vec![0],
            vars: Vec::with_capacity(code.n * code.degree),
            target: Vec::new(),
        };
        let mut prev_value = 0u8;
        let mut start = 0;
        for (t, a) in acc.iter().enumerate() {
            let Some(a) = *a else { continue };
            for check in start..=t {
                for &v in &code.check_vars[check] {
                    if parity[v as usize] == 0 {
                        touched.push(v);
                    }
                    parity[v as usize] ^= 1;
                }
            }
            touched.sort_unstable();
            for &v in &touched {
                if parity[v as usize] == 1 {
                    out.vars.push(v);
                }
                parity[v as usize] = 0;
            }
            touched.clear();
            out.ptr.push(out.vars.len());
            out.target.push(a ^ prev_value);
            prev_value = a;
            start = t + 1;
        }
        out
    }

    fn len(&self) -> usize {
        self.target.len()
    }

    fn vars_of(&self, c: usize) -> &[u32] {
        &self.vars[self.ptr[c]..self.ptr[c + 1]]
    }

    fn unsatisfied(&self, bits: &[u8]) -> usize {
        (0..self.len())
            .filter(|&c| {
                let p = self
                    .vars_of(c)
                    .iter()
                    .fold(0u8, |acc, &v| acc ^ bits[v as usize]);
                p != self.target[c]
            })
            .count()
    }
}

/// Decodes a plane from intrinsic LLRs (positive favours 0) and the first
/// `received.len()` chunks. With every chunk present the plane is solved
/// exactly; otherwise flooding sum-product runs until the hard decisions
/// satisfy every merged check, `max_iter` is reached or progress stalls
/// (see [`STALL_LIMIT`]).
pub fn decode_plane(
    llr: &[f64],
    received: &[Vec<u8>],
    code: &LdpcaCode,
    max_iter: usize,
) -> Result<PlaneDecode> {
    if llr.len() != code.n {
        return Err(Error::LengthMismatch {
            expected: code.n,
            got: llr.len(),
        });
    }
    if received.is_empty() || received.len() > code.num_chunks() {
        return Err(Error::LengthMismatch {
            expected: code.num_chunks(),
            got: received.len(),
        });
    }
    for (k, values) in received.iter().enumerate() {
        if values.len() != code.chunk(k).len() {
            return Err(Error::LengthMismatch {
                expected: code.chunk(k).len(),
                got: values.len(),
            });
        }
    }
    if received.len() == code.num_chunks() {
        return Ok(PlaneDecode::Decoded {
            bits: solve_full_rate(code, received),
            iterations: 0,
        });
    }
    let checks = MergedChecks::new(code, received);
    Ok(belief_propagation(llr, &checks, code.n, max_iter))
}

fn solve_full_rate(code: &LdpcaCode, received: &[Vec<u8>]) -> Vec<u8> {
    let mut acc = vec![0u8; code.n];
    for (k, values) in received.iter().enumerate() {
        for (&i, &v) in code.chunk(k).iter().zip(values) {
            acc[i] = v & 1;
        }
    }
    let words = code.n.div_ceil(64);
    let mut s = vec![0u64; words];
    let mut prev = 0;
    for (i, &a) in acc.iter().enumerate() {
        if a ^ prev == 1 {
            s[i / 64] |= 1 << (i % 64);
        }
        prev = a;
    }
    code.inverse
        .iter()
        .map(|row| {
            let ones: u32 = row.iter().zip(&s).map(|(r, x)| (r & x).count_ones()).sum();
            (ones & 1) as u8
        })
        .collect()
}

fn belief_propagation(llr: &[f64], checks: &MergedChecks, n: usize, max_iter: usize) -> PlaneDecode {
    let edges = checks.vars.len();
    // variable -> edge indices, CSR
    let mut var_deg = vec![0usize; n + 1];
    for &v in &checks.vars {
        var_deg[v as usize + 1] += 1;
    }
    for i in 0..n {
        var_deg[i + 1] += var_deg[i];
    }
    let var_ptr = var_deg;
    let mut fill = var_ptr.clone();
    let mut var_edges = vec![0usize; edges];
    for (e, &v) in checks.vars.iter().enumerate() {
        var_edges[fill[v as usize]] = e;
        fill[v as usize] += 1;
    }

    let channel: Vec<f64> = llr
        .iter()
        .map(|&l| if l.is_finite() { l.clamp(-LLR_CLAMP, LLR_CLAMP) } else { 0.0 })
        .collect();
    let mut v2c: Vec<f64> = checks.vars.iter().map(|&v| channel[v as usize]).collect();
    let mut c2v = vec![0.0f64; edges];
    let mut bits = vec![0u8; n];
    let mut t = Vec::new();
    let mut suffix = Vec::new();
    let mut best = usize::MAX;
    let mut since_best = 0;

    for iter in 1..=max_iter {
        for c in 0..checks.len() {
            let (lo, hi) = (checks.ptr[c], checks.ptr[c + 1]);
            if lo == hi {
                continue;
            }
            t.clear();
            t.extend(v2c[lo..hi].iter().map(|&m| (m * 0.5).tanh()));
            suffix.clear();
            suffix.resize(t.len() + 1, 1.0);
            for i in (0..t.len()).rev() {
                suffix[i] = suffix[i + 1] * t[i];
            }
            let sign = if checks.target[c] == 1 { -1.0 } else { 1.0 };
            let mut prefix = 1.0;
            for (i, e) in (lo..hi).enumerate() {
                let p = (prefix * suffix[i + 1]).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                c2v[e] = (sign * 2.0 * p.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP);
                prefix *= t[i];
            }
        }
        for v in 0..n {
            let es = &var_edges[var_ptr[v]..var_ptr[v + 1]];
            let total = channel[v] + es.iter().map(|&e| c2v[e]).sum::<f64>();
            for &e in es {
                v2c[e] = (total - c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
            }
            bits[v] = u8::from(total < 0.0);
        }
        let unsatisfied = checks.unsatisfied(&bits);
        if unsatisfied == 0 {
            return PlaneDecode::Decoded {
                bits,
                iterations: iter,
            };
        }
        if unsatisfied < best {
            best = unsatisfied;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_LIMIT {
                return PlaneDecode::NotConverged {
                    bits,
                    iterations: iter,
                };
            }
        }
    }
    PlaneDecode::NotConverged {
        bits,
        iterations: max_iter,
    }
}

/// Hard decisions of intrinsic LLRs (negative means 1).
pub fn hard_decisions(llr: &[f64]) -> Vec<u8> {
    llr.iter().map(|&l| u8::from(l < 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2u8)).collect()
    }

    #[test]
    fn construction_is_deterministic_and_regular() {
        let a = LdpcaCode::build(256, 3, 7).unwrap();
        let b = LdpcaCode::build(256, 3, 7).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let mut check_deg = vec![0; 256];
        for v in 0..256 {
            let cs = &a.var_checks[v * 3..v * 3 + 3];
            assert!(cs[0] != cs[1] && cs[1] != cs[2] && cs[0] != cs[2]);
            for &c in cs {
                check_deg[c as usize] += 1;
            }
        }
        assert!(check_deg.iter().all(|&d| d == 3));
        assert_ne!(a, LdpcaCode::build(256, 3, 1000).unwrap());
    }

    #[test]
    fn long_planes_spread_checks_over_groups() {
        let code = LdpcaCode::build(1584, 3, 1).unwrap();
        for v in 0..1584 {
            let mut g: Vec<u32> = code.var_checks[v * 3..v * 3 + 3]
                .iter()
                .map(|c| c / 66)
                .collect();
            g.sort_unstable();
            g.dedup();
            assert_eq!(g.len(), 3);
        }
    }

    #[test]
    fn ladder_shape() {
        let l = ladder(1584);
        assert_eq!(l.len(), 66);
        assert!(l.iter().all(|c| c.len() == 24));
        assert_eq!(l[0][0], 65);
        let mut all: Vec<usize> = l.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1584).collect::<Vec<_>>());

        let l = ladder(256);
        assert_eq!(chunk_size(256), 3);
        assert_eq!(l.len(), 86);
        assert_eq!(l.iter().map(Vec::len).sum::<usize>(), 256);
        assert_eq!(ladder(16).len(), 16);
    }

    #[test]
    fn phase_order_is_nested_and_balanced() {
        let order = phase_order(66);
        assert_eq!(&order[..2], &[65, 32]);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..66).collect::<Vec<_>>());
        // after 2^j chunks no run exceeds ceil(66 / 2^j) + 1
        for j in 0..6 {
            let k = 1usize << j;
            let mut sent: Vec<usize> = order[..k].to_vec();
            sent.sort_unstable();
            let mut prev: isize = -1;
            for &p in &sent {
                assert!((p as isize - prev) as usize <= 66usize.div_ceil(k) + 1);
                prev = p as isize;
            }
        }
    }

    #[test]
    fn zero_plane_encodes_to_zero() {
        let code = LdpcaCode::build(64, 3, 0).unwrap();
        let s = encode_plane(&[0; 64], &code).unwrap();
        assert!(s.acc.iter().all(|&b| b == 0));
        assert_eq!(s.crc, 0);
        assert!(matches!(
            encode_plane(&[0; 63], &code),
            Err(Error::LengthMismatch { expected: 64, got: 63 })
        ));
    }

    #[test]
    fn identity_graph_accumulates_prefix_xor() {
        let code = LdpcaCode::identity(32);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bits = random_bits(&mut rng, 32);
        let s = encode_plane(&bits, &code).unwrap();
        let mut x = 0;
        for (i, &b) in bits.iter().enumerate() {
            x ^= b;
            assert_eq!(s.acc[i], x);
        }
    }

    #[test]
    fn de_accumulation_recovers_syndromes() {
        let code = LdpcaCode::build(300, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bits = random_bits(&mut rng, 300);
        let s = encode_plane(&bits, &code).unwrap();
        let syn = code.syndromes(&bits);
        for i in 0..300 {
            let prev = if i == 0 { 0 } else { s.acc[i - 1] };
            assert_eq!(s.acc[i] ^ prev, syn[i]);
        }
    }

    #[test]
    fn crc_reference_values() {
        assert_eq!(crc8(&[]), 0);
        let bits: Vec<u8> = b"123456789"
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
            .collect();
        assert_eq!(crc8(&bits), 0xF4);
        assert!(verify(&bits, 0xF4));
        assert!(verify(&[], 0));
    }

    #[test]
    fn crc_detects_every_single_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [1usize, 13, 256, 1024] {
            let mut bits = random_bits(&mut rng, n);
            let crc = crc8(&bits);
            for i in 0..n {
                bits[i] ^= 1;
                assert_ne!(crc8(&bits), crc);
                assert!(!verify(&bits, crc));
                bits[i] ^= 1;
            }
        }
    }

    #[test]
    fn certain_zeros_decode_in_one_iteration() {
        let code = LdpcaCode::build(256, 3, 0).unwrap();
        let s = encode_plane(&[0; 256], &code).unwrap();
        let out = decode_plane(&[25.0; 256], &s.chunks(&code)[..5], &code, 100).unwrap();
        assert_eq!(
            out,
            PlaneDecode::Decoded {
                bits: vec![0; 256],
                iterations: 1
            }
        );
    }

    #[test]
    fn full_rate_recovers_without_side_information() {
        let code = LdpcaCode::build(256, 3, 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let bits = random_bits(&mut rng, 256);
            let s = encode_plane(&bits, &code).unwrap();
            let out = decode_plane(&[0.0; 256], &s.chunks(&code), &code, 100).unwrap();
            assert_eq!(out.bits(), &bits[..]);
        }
    }

    #[test]
    fn decode_validates_inputs() {
        let code = LdpcaCode::build(64, 3, 0).unwrap();
        let s = encode_plane(&[0; 64], &code).unwrap();
        assert!(decode_plane(&[0.0; 63], &s.chunks(&code)[..1], &code, 10).is_err());
        assert!(decode_plane(&[0.0; 64], &[], &code, 10).is_err());
        assert!(decode_plane(&[0.0; 64], &[vec![0; 99]], &code, 10).is_err());
    }

    #[test]
    fn graph_serialization_round_trips() {
        let code = LdpcaCode::build(128, 3, 5).unwrap();
        let bytes = code.to_bytes();
        assert_eq!(bytes.len(), 14 + 4 * 128 * 3);
        assert_eq!(LdpcaCode::from_bytes(&bytes).unwrap(), code);
        assert!(LdpcaCode::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn rejects_tiny_planes() {
        assert!(LdpcaCode::build(8, 3, 0).is_err());
    }

    #[test]
    fn pack_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits = random_bits(&mut rng, 37);
        let packed = pack_bits(&bits);
        assert_eq!(packed.len(), 5);
        assert_eq!(unpack_bits(&packed, 37), bits);
    }
}
