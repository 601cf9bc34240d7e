//! Software model of a digitally synchronized CV-QKD link with a locally
//! generated local oscillator.
//!
//! The crate is organized along the signal path:
//!
//! * [`signal`]: sample-level DSP primitives (pulse shaping, mixing,
//!   resampling, tone and delay estimation).
//! * [`frame`]: transmitter frame synthesis (Gaussian key symbols, CAZAC
//!   reference symbols, QPSK header/ID stream and pilot tones).
//! * [`channel`]: fiber loss, laser phase noise, LO beat, clock skew and
//!   detection noise, plus the shot-noise calibration procedure.
//! * [`sync`]: the receiver synchronization chain.
//! * [`params`]: shot-noise normalization, channel estimation, BER and the
//!   asymptotic secret key fraction.
//! * [`harness`]: seeded batch experiments, sweeps and result files.

pub mod channel;
pub mod error;
pub mod frame;
pub mod harness;
pub mod params;
pub mod rng;
pub mod signal;
pub mod sync;

pub use error::{Error, Result};
pub use signal::ComplexSeries;

/// Complex sample type used throughout the crate.
pub type Cf64 = num_complex::Complex<f64>;
