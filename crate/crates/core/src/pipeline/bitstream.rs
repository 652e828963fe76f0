//! Archive bitstream. All integers are little-endian.
//!
//! ```text
//! header   "WZC1" version:u8 width:u16 height:u16 fps_num:u16 fps_den:u16
//!          frames:u32 quant:u8 seed:u64 d_v:u8 key_codec:u8 key_qp:u8
//! per GOP  size:u8 key_len:u32 key_payload
//!          per WZ frame (display order), per coded band (zig-zag order):
//!            range:u16 (AC bands only)
//!            per plane (MSB first): crc:u8 chunks:u16 chunk bits
//! ```
//!
//! Chunk bits are the accumulated syndromes of each stored chunk in ladder
//! order, concatenated, packed MSB first and zero padded to a byte.

use crate::error::{Error, Result};
use crate::frame_io::{check_dims, Fps};
use crate::ldpca::{ladder, pack_bits, unpack_bits};
use crate::quantizer::{bit_count, QuantMatrix};

pub const MAGIC: &[u8; 4] = b"WZC1";
pub const VERSION: u8 = 1;
/// Size of the stream header.
pub const HEADER_BYTES: usize = 29;
/// GOP size and key payload length.
pub const GOP_HEADER_BYTES: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub width: u16,
    pub height: u16,
    pub fps: Fps,
    pub frames: u32,
    pub quant: u8,
    pub seed: u64,
    pub degree: u8,
    pub key_codec: u8,
    pub key_qp: u8,
}

impl Header {
    pub fn dims(&self) -> (usize, usize) {
        (usize::from(self.width), usize::from(self.height))
    }

    /// Coefficients per band, which is also the LDPCA plane length.
    pub fn band_len(&self) -> usize {
        let (w, h) = self.dims();
        w * h / 16
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneRecord {
    pub crc: u8,
    /// Accumulated syndrome values of each stored chunk, in ladder order.
    pub chunks: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandRecord {
    pub band: usize,
    pub range: Option<u16>,
    /// Most significant plane first.
    pub planes: Vec<PlaneRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WzRecord {
    /// Display index; implied by the GOP layout, not serialized.
    pub frame: usize,
    pub bands: Vec<BandRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GopRecord {
    pub size: usize,
    pub key: Vec<u8>,
    pub wz: Vec<WzRecord>,
}

impl GopRecord {
    pub fn key_bits(&self) -> u64 {
        self.key.len() as u64 * 8
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream {
    pub header: Header,
    pub gops: Vec<GopRecord>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&h.width.to_le_bytes());
        out.extend_from_slice(&h.height.to_le_bytes());
        out.extend_from_slice(&h.fps.num.to_le_bytes());
        out.extend_from_slice(&h.fps.den.to_le_bytes());
        out.extend_from_slice(&h.frames.to_le_bytes());
        out.push(h.quant);
        out.extend_from_slice(&h.seed.to_le_bytes());
        out.push(h.degree);
        out.push(h.key_codec);
        out.push(h.key_qp);
        debug_assert_eq!(out.len(), HEADER_BYTES);
        for gop in &self.gops {
            out.push(gop.size as u8);
            out.extend_from_slice(&(gop.key.len() as u32).to_le_bytes());
            out.extend_from_slice(&gop.key);
            for wz in &gop.wz {
                for band in &wz.bands {
                    if let Some(r) = band.range {
                        out.extend_from_slice(&r.to_le_bytes());
                    }
                    for plane in &band.planes {
                        out.push(plane.crc);
                        out.extend_from_slice(&(plane.chunks.len() as u16).to_le_bytes());
                        let bits: Vec<u8> = plane.chunks.concat();
                        out.extend_from_slice(&pack_bits(&bits));
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(malformed("bad magic"));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(malformed(format!("unsupported version {version}")));
        }
        let header = Header {
            width: r.u16()?,
            height: r.u16()?,
            fps: {
                let (num, den) = (r.u16()?, r.u16()?);
                Fps::new(num, den).map_err(|_| malformed(format!("fps {num}/{den}")))?
            },
            frames: r.u32()?,
            quant: r.u8()?,
            seed: r.u64()?,
            degree: r.u8()?,
            key_codec: r.u8()?,
            key_qp: r.u8()?,
        };
        let (w, h) = header.dims();
        check_dims(w, h).map_err(|e| malformed(e.to_string()))?;
        if header.degree == 0 {
            return Err(malformed("zero LDPCA degree"));
        }
        let matrix = QuantMatrix::new(header.quant).map_err(|e| malformed(e.to_string()))?;
        let chunk_lens: Vec<usize> = ladder(header.band_len()).iter().map(Vec::len).collect();
        let frames = header.frames as usize;
        let mut gops = Vec::new();
        let mut start = 0usize;
        while start < frames {
            let size = usize::from(r.u8()?);
            if size == 0 || start + size > frames {
                return Err(malformed(format!("GOP of {size} frames at frame {start}")));
            }
            let key_len = r.u32()? as usize;
            let key = r.take(key_len)?.to_vec();
            let mut wz = Vec::with_capacity(size - 1);
            for frame in start + 1..start + size {
                let mut bands = Vec::new();
                for band in matrix.coded_bands() {
                    let range = if band == 0 { None } else { Some(r.u16()?) };
                    let planes = (0..bit_count(matrix.levels(band)))
                        .map(|_| {
                            let crc = r.u8()?;
                            let count = usize::from(r.u16()?);
                            if count > chunk_lens.len() {
                                return Err(malformed(format!(
                                    "{count} chunks stored, ladder has {}",
                                    chunk_lens.len()
                                )));
                            }
                            let total: usize = chunk_lens[..count].iter().sum();
                            let bits = unpack_bits(r.take(total.div_ceil(8))?, total);
                            let mut chunks = Vec::with_capacity(count);
                            let mut at = 0;
                            for &len in &chunk_lens[..count] {
                                chunks.push(bits[at..at + len].to_vec());
                                at += len;
                            }
                            Ok(PlaneRecord { crc, chunks })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    bands.push(BandRecord {
                        band,
                        range,
                        planes,
                    });
                }
                wz.push(WzRecord { frame, bands });
            }
            gops.push(GopRecord { size, key, wz });
            start += size;
        }
        if r.pos != bytes.len() {
            return Err(malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Bitstream { header, gops })
    }

    /// Every stored syndrome bit, consumed or not.
    pub fn stored_syndrome_bits(&self) -> u64 {
        self.wz_records()
            .flat_map(|wz| &wz.bands)
            .flat_map(|b| &b.planes)
            .map(|p| p.chunks.iter().map(|c| c.len() as u64).sum::<u64>())
            .sum()
    }

    pub fn wz_records(&self) -> impl Iterator<Item = &WzRecord> {
        self.gops.iter().flat_map(|g| &g.wz)
    }

    pub fn gop_sizes(&self) -> Vec<usize> {
        self.gops.iter().map(|g| g.size).collect()
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedBitstream(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
