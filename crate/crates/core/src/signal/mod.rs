//! Sample-level DSP primitives shared by the transmitter and the receiver.

mod correlate;
pub mod fft;
mod resample;
mod rrc;
mod tone;

pub use correlate::correlate_delay;
pub use resample::{resample, RESAMPLER_TAPS};
pub use rrc::{design_rrc, RrcFilter};
pub use tone::{estimate_tone, ToneEstimate};
pub(crate) use tone::{peak_in_band, periodogram};

use crate::{Cf64, Error, Result};
use std::f64::consts::TAU;

/// A uniformly sampled complex baseband waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    samples: Vec<Cf64>,
    sample_rate: f64,
}

impl ComplexSeries {
    pub fn new(samples: Vec<Cf64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate {sample_rate} must be positive")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("a series needs at least one sample"));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::invalid("series contains non-finite samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a series without the finiteness scan. Callers guarantee the
    /// invariants hold.
    pub(crate) fn from_parts(samples: Vec<Cf64>, sample_rate: f64) -> Self {
        debug_assert!(!samples.is_empty() && sample_rate > 0.0);
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[Cf64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Cf64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Cf64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean of |x|².
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    /// Reinterprets the samples as taken at a different rate.
    pub fn relabel_rate(mut self, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate {sample_rate} must be positive")));
        }
        self.sample_rate = sample_rate;
        Ok(self)
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }
}

pub(crate) fn mean_power(x: &[Cf64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Phase of `exp(j2π·cycles_per_sample·n)` reduced before the multiply so
/// long records keep full precision.
#[inline]
pub(crate) fn oscillator(cycles_per_sample: f64, n: f64) -> Cf64 {
    let turns = (cycles_per_sample * n).fract();
    Cf64::from_polar(1.0, TAU * turns)
}

/// Mixes `x` by `exp(j2π f n / fs)`.
pub fn frequency_shift(x: &ComplexSeries, f: f64) -> Result<ComplexSeries> {
    check_below_nyquist(f, x.sample_rate)?;
    let mut out = x.clone();
    shift_in_place(out.samples_mut(), f / x.sample_rate, 0.0);
    Ok(out)
}

pub(crate) fn check_below_nyquist(f: f64, rate: f64) -> Result<()> {
    if !f.is_finite() || f.abs() >= rate / 2.0 {
        return Err(Error::invalid(format!(
            "frequency {f} Hz is not below the Nyquist frequency {} Hz",
            rate / 2.0
        )));
    }
    Ok(())
}

pub(crate) fn shift_in_place(x: &mut [Cf64], cycles_per_sample: f64, start: f64) {
    if cycles_per_sample == 0.0 {
        return;
    }
    for (n, s) in x.iter_mut().enumerate() {
        *s *= oscillator(cycles_per_sample, start + n as f64);
    }
}
