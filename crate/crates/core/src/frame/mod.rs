//! Transmitter frame synthesis.
//!
//! A frame is one period of the looping AWG waveform. It carries
//! `n_reference` CAZAC reference symbols followed by `n_quantum` Gaussian key
//! symbols in the quantum band, a concurrent QPSK stream (known header,
//! repetition-coded frame ID, seeded filler) and two unmodulated pilots.

mod builder;
mod cazac;
pub mod export;
mod layout;
mod qpsk;
mod symbols;

pub use builder::{build_frame, cyclic_extend, reference_symbols, AliceFrame};
pub use cazac::{generate_cazac, CazacSequence};
pub use layout::FrameLayout;
pub use qpsk::{
    bits_to_symbols, decode_frame_id, encode_frame_id, gray_demap, gray_map, header_symbols, symbols_to_bits, QpskFrame,
};
pub use symbols::{draw_gaussian_symbols, QuantumSymbols};

/// Heterodyne detection splits the signal over two quadrature measurements;
/// waveforms carry key symbols scaled by this factor so that the detected
/// outcome per quadrature is `sqrt(τ/2)·a` plus noise.
pub const HETERODYNE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;
