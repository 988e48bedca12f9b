//! Frame encoders and decoders.
//!
//! A frame is `m` blocks of `N` channel uses. Transmitter 1 encodes the first
//! layer (its channel input); transmitter 2 reproduces that layer from the
//! shared frame randomness, then encodes the second, confidential, and prefix
//! layers on top. The receivers run successive cancellation per layer per
//! block in their mandated block orders (receiver 1 ascending, receiver 2
//! descending) with chained positions pinned from the adjacent block.

mod frame;
mod layer;
mod transcript;

pub use frame::{
    EncodedFrame, FrameCodec, FramePayload, LayerBlocks, LayerPublic, PayloadSizes, PublicSide,
    Rx1Result, Rx2Result, SideInfo,
};
pub(crate) use frame::{build_leaves, FrameFills};
pub use layer::{sc_decode_layer, sc_encode_layer, Fill};
pub use transcript::FrameTranscript;
