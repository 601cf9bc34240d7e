use crate::signal::fft::convolve_same;
use crate::{Cf64, Error, Result};
use std::f64::consts::PI;

/// Energy-normalized root-raised-cosine pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcFilter {
    rolloff: f64,
    span: usize,
    sps: usize,
    taps: Vec<f64>,
}

/// Closed-form RRC impulse response at `t` symbol periods (unit symbol
/// period, unnormalized).
pub(crate) fn rrc_impulse(t: f64, rolloff: f64) -> f64 {
    let b = rolloff;
    if t == 0.0 {
        return 1.0 + b * (4.0 / PI - 1.0);
    }
    let x = 4.0 * b * t;
    if (1.0 - x * x).abs() < 1e-9 {
        let a = PI / (4.0 * b);
        return b / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    ((PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos())
        / (PI * t * (1.0 - x * x))
}

/// Designs an RRC filter spanning `span` symbols at `sps` samples per symbol.
pub fn design_rrc(rolloff: f64, span: usize, sps: usize) -> Result<RrcFilter> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(Error::invalid(format!("roll-off {rolloff} outside (0, 1]")));
    }
    if span < 4 {
        return Err(Error::invalid(format!("span {span} below 4 symbols")));
    }
    if sps < 2 {
        return Err(Error::invalid(format!("{sps} samples per symbol, need at least 2")));
    }
    if (span * sps) % 2 != 0 {
        return Err(Error::invalid("span × sps must be even to have a center tap"));
    }
    let len = span * sps + 1;
    let mid = (len / 2) as isize;
    let mut taps: Vec<f64> = (0..len)
        .map(|j| rrc_impulse((j as isize - mid) as f64 / sps as f64, rolloff))
        .collect();
    // mirror so taps[k] == taps[len-1-k] bit for bit
    for k in 0..len / 2 {
        taps[len - 1 - k] = taps[k];
    }
    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= norm);
    Ok(RrcFilter {
        rolloff,
        span,
        sps,
        taps,
    })
}

impl RrcFilter {
    pub fn rolloff(&self) -> f64 {
        self.rolloff
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.sps
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Index of the center tap (the filter group delay in samples).
    pub fn center(&self) -> usize {
        self.taps.len() / 2
    }

    /// One-sided bandwidth of the shaped signal in units of the symbol rate.
    pub fn half_bandwidth(&self) -> f64 {
        (1.0 + self.rolloff) / 2.0
    }

    /// Pulse-shapes `symbols` periodically: symbol `k` is centered on sample
    /// `k·sps` and tails wrap around the end of the block, so the result
    /// describes one period of a looping waveform of `len·sps` samples.
    pub fn shape_periodic(&self, symbols: &[Cf64]) -> Vec<Cf64> {
        let n = symbols.len() * self.sps;
        let mut out = vec![Cf64::new(0.0, 0.0); n];
        if n == 0 {
            return out;
        }
        let c = self.center();
        for (k, &s) in symbols.iter().enumerate() {
            if s == Cf64::new(0.0, 0.0) {
                continue;
            }
            let start = (k * self.sps + n * (c / n + 1) - c) % n;
            for (j, &h) in self.taps.iter().enumerate() {
                let idx = (start + j) % n;
                out[idx] += s * h;
            }
        }
        out
    }

    /// Full-rate matched-filter output aligned with the input samples.
    pub fn matched_filter(&self, x: &[Cf64]) -> Vec<Cf64> {
        convolve_same(x, &self.taps)
    }
}
