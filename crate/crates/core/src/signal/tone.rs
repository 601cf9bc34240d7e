use super::{fft, ComplexSeries};
use crate::{Cf64, Error, Result};

/// Peak of the windowed periodogram inside a search band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneEstimate {
    /// Hz.
    pub frequency: f64,
    /// Interpolated peak, scaled so a unit-amplitude tone reads 1.
    pub power: f64,
}

/// Gaussian window width as a fraction of the record length. Its transform
/// is Gaussian, so the log-power parabola through the three top bins is
/// (up to truncation at ±5σ) exact.
const WINDOW_SIGMA: f64 = 0.1;

/// Minimum record length accepted by [`estimate_tone`].
pub const MIN_TONE_SAMPLES: usize = 1024;

/// Windowed periodogram of `x`, zero-padded to a power of two. Returns the
/// power per bin normalized to tone power.
pub(crate) fn periodogram(x: &[Cf64]) -> Vec<f64> {
    let n = x.len();
    let nfft = n.next_power_of_two();
    let mid = (n as f64 - 1.0) / 2.0;
    let sigma = WINDOW_SIGMA * n as f64;
    let mut wsum = 0.0;
    let mut buf = vec![Cf64::new(0.0, 0.0); nfft];
    for (k, (dst, &s)) in buf.iter_mut().zip(x).enumerate() {
        let u = (k as f64 - mid) / sigma;
        let w = (-0.5 * u * u).exp();
        wsum += w;
        *dst = s * w;
    }
    fft::forward(&mut buf);
    let g = 1.0 / (wsum * wsum);
    buf.iter().map(|v| v.norm_sqr() * g).collect()
}

/// Frequency of the strongest periodogram bin of `x` inside `band` (Hz),
/// refined by a three-point parabola through the log-power.
pub fn estimate_tone(x: &ComplexSeries, band: [f64; 2]) -> Result<ToneEstimate> {
    let fs = x.sample_rate();
    let [lo, hi] = band;
    if !(lo < hi) || lo <= -fs / 2.0 || hi >= fs / 2.0 {
        return Err(Error::invalid(format!(
            "band [{lo}, {hi}] must be ordered and inside (−{0}, {0})",
            fs / 2.0
        )));
    }
    if x.len() < MIN_TONE_SAMPLES {
        return Err(Error::invalid(format!(
            "tone estimation needs {MIN_TONE_SAMPLES} samples, got {}",
            x.len()
        )));
    }
    let p = periodogram(x.samples());
    peak_in_band(&p, fs, lo, hi)
}

pub(crate) fn peak_in_band(p: &[f64], fs: f64, lo: f64, hi: f64) -> Result<ToneEstimate> {
    let nfft = p.len();
    let df = fs / nfft as f64;
    let mut best: Option<(usize, f64)> = None;
    let k_lo = (lo / df).ceil() as i64;
    let k_hi = (hi / df).floor() as i64;
    for ks in k_lo..=k_hi {
        let k = ks.rem_euclid(nfft as i64) as usize;
        if best.is_none_or(|(_, v)| p[k] > v) {
            best = Some((k, p[k]));
        }
    }
    let (k, peak) = best.ok_or(Error::BandEmpty { lo, hi })?;
    let tiny = f64::MIN_POSITIVE;
    let a = (p[(k + nfft - 1) % nfft] + tiny).ln();
    let b = (peak + tiny).ln();
    let c = (p[(k + 1) % nfft] + tiny).ln();
    let denom = a - 2.0 * b + c;
    let (delta, log_peak) = if denom < 0.0 {
        let d = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        (d, b - 0.25 * (a - c) * d)
    } else {
        (0.0, b)
    };
    Ok(ToneEstimate {
        frequency: (fft::bin_frequency(k, nfft, fs) / df + delta) * df,
        power: log_peak.exp(),
    })
}
