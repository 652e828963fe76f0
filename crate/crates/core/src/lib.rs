//! Transform-domain Wyner-Ziv video codec.
//!
//! The encoder is deliberately light: key frames go through an intra codec,
//! every other frame is 4x4 DCT transformed, quantized band by band, split
//! into bit planes and turned into LDPCA accumulated syndromes. All the heavy
//! lifting happens in the decoder, which interpolates side information from
//! decoded references, models the correlation noise as Laplacian and decodes
//! each bit plane by belief propagation, pulling syndrome chunks over a
//! feedback channel until the plane checks out.
//!
//! ```text
//! encode: frames -> GOP split -> key: intra
//!                              -> WZ:  DCT -> quantize -> bit planes -> LDPCA -> archive
//! decode: archive -> key: intra -> side information -> noise model -> soft input
//!                 -> BP + feedback -> bins -> reconstruction -> IDCT -> frames
//! ```

pub mod error;
pub mod frame_io;
pub mod keyframe;
pub mod ldpca;
pub mod noise_model;
pub mod pipeline;
pub mod quantizer;
pub mod reconstruction;
pub mod sideinfo;
pub mod softinput;
pub mod splitter;
pub mod transform;

pub use error::{Error, Result};
pub use frame_io::{psnr, read_raw, write_raw, Frame, Layout, Sequence};
pub use pipeline::{
    decode, decode_traced, decode_with, encode, rate_report, Bitstream, CodecConfig, DecodeStats,
    EncodeStats, FeedbackChannel, GopMode, RateReport, SoftInputGranularity,
};
