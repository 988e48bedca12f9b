//! Polar coding toolkit for the two-user cognitive interference channel with
//! confidential messages.
//!
//! The crate builds strong-secrecy chained polar codes on top of prime-alphabet
//! source polarization:
//!
//! * [`alphabet`], [`transform`]: modular symbol arithmetic and the `O(N log N)`
//!   polar transform pair over any prime alphabet.
//! * [`dist`], [`instance`]: dense joint distributions, entropy/information
//!   queries, and the channel/design bundle that defines one simulation
//!   instance.
//! * [`sc`], [`profile`], [`sets`]: the successive-cancellation recursion, exact
//!   and Monte-Carlo conditional-entropy profiles of the polarized positions,
//!   and the threshold index sets cut from them.
//! * [`case`], [`construction`]: classification of an instance into its
//!   chaining case, and the block-chaining plan (which positions carry fresh
//!   messages, repeats, frozen symbols, or sampled symbols in every block).
//! * [`region`]: the achievable-rate region bounds and membership tests.
//! * [`codec`]: frame encoders for both transmitters and frame decoders for
//!   both receivers.
//! * [`harness`], [`leakage`]: seeded experiments measuring error rate,
//!   randomness cost, and information leakage (exact oracle at tiny N, plug-in
//!   estimate at large N).
//!
//! Positions are indexed `0..N` internally; the classical construction counts
//! them `1..N`.

pub mod alphabet;
pub mod case;
pub mod codec;
pub mod construction;
pub mod dist;
pub mod fixtures;
pub mod harness;
pub mod instance;
pub mod leakage;
pub mod parse;
pub mod profile;
pub mod region;
pub mod rng;
pub mod sc;
pub mod sets;
pub mod transform;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
