//! Spectral tag modulation and spotting for OFDM-style receivers.
//!
//! A tag energises one wide carrier out of every pair of a fixed carrier
//! layout, chosen by a binary codeword. A receiver spots tags by folding the
//! spectrum of each window onto wide carriers and comparing the power inside
//! each codeword's mask against the total.

pub mod analysis;
pub mod channel;
pub mod codebook;
pub mod detector;
pub mod error;
pub mod fft;
pub mod iq;
pub mod layout;
pub mod trials;
pub mod waveform;

pub use codebook::{codeword_to_mask, Codebook, Codeword};
pub use error::{Error, Result};
pub use layout::{CarrierLayout, WideCarrierMask};
pub use waveform::{IqFrame, TagSpectrum};
