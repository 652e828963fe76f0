use std::sync::atomic::{AtomicUsize, Ordering};

use wz_core::frame_io::Fps;
use wz_core::pipeline::ArchiveChannel;
use wz_core::{decode, decode_with, encode, psnr, Bitstream, CodecConfig, FeedbackChannel, Frame, GopMode, Sequence};

fn clip(frames: usize, shift: f64) -> Sequence {
    let frames = (0..frames)
        .map(|t| {
            Frame::from_fn(48, 32, t, |x, y| {
                let u = x as f64 - shift * t as f64;
                (128.0 + 60.0 * (0.15 * u + 0.1 * y as f64).sin()).round() as u8
            })
            .unwrap()
        })
        .collect();
    Sequence::new(frames, Fps::new(15, 1).unwrap()).unwrap()
}

#[test]
fn archive_bytes_decode_like_the_in_memory_stream() {
    let seq = clip(5, 1.0);
    let cfg = CodecConfig::with_quant(6);
    let (bs, _) = encode(&seq, &cfg).unwrap();
    let parsed = Bitstream::from_bytes(&bs.to_bytes()).unwrap();
    let (a, sa) = decode(&bs, &cfg).unwrap();
    let (b, sb) = decode(&parsed, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa.bits.total(), sb.bits.total());
    assert_eq!(sa.flagged(), 0);
    for (o, r) in seq.frames().iter().zip(a.frames()) {
        assert!(psnr(o, r).unwrap() > 28.0);
    }
}

/// Counts every request before forwarding it to the archive.
struct Counting<'a> {
    inner: ArchiveChannel<'a>,
    requests: AtomicUsize,
}

impl FeedbackChannel for Counting<'_> {
    fn request(&self, frame: usize, band: usize, plane: usize) -> Option<Vec<u8>> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.inner.request(frame, band, plane)
    }
}

#[test]
fn custom_channel_sees_every_request() {
    let seq = clip(3, 0.5);
    let cfg = CodecConfig { gop: GopMode::Fixed(2), ..CodecConfig::with_quant(3) };
    let (bs, _) = encode(&seq, &cfg).unwrap();
    let channel = Counting { inner: ArchiveChannel::new(&bs), requests: AtomicUsize::new(0) };
    let (_, stats, _) = decode_with(&bs, &cfg, &channel).unwrap();
    let chunks: usize = stats.planes.iter().map(|p| p.chunks).sum();
    assert_eq!(channel.requests.load(Ordering::Relaxed), chunks);
}
