//! Channel and detector model: propagation delay, loss, the free-running LO
//! beat with laser phase noise, receiver clock skew, and heterodyne
//! detection noise. Also simulates the three-step shot-noise calibration.

use crate::frame::{AliceFrame, FrameLayout};
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::signal::{design_rrc, resample, shift_in_place, ComplexSeries};
use crate::{Cf64, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Skews further than this from unity are rejected as unphysical.
pub const MAX_SKEW_DEVIATION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Seconds.
    pub delay: f64,
    /// Receiver clock over transmitter clock.
    pub skew: f64,
    /// Hz.
    pub lo_offset: f64,
    /// Combined transmitter and LO laser linewidth, Hz.
    pub linewidth_sum: f64,
    /// Fiber transmittance.
    pub transmittance: f64,
    /// Detector efficiency.
    pub efficiency: f64,
    /// SNU per quadrature.
    pub electronic_noise: f64,
    /// Channel-output thermal excess noise, PNU.
    pub excess_noise: f64,
    /// Nominal receiver sample rate, Hz.
    pub adc_rate: f64,
    pub seed: u64,
    /// Test hook: when false, no vacuum, electronic or excess noise is added.
    pub noise_enabled: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            delay: 101.4e-6,
            skew: 1.0,
            lo_offset: 280e6,
            linewidth_sum: 200.0,
            transmittance: fiber_transmittance(20.0),
            efficiency: 0.69,
            electronic_noise: 0.1,
            excess_noise: 0.0,
            adc_rate: 1e9,
            seed: 0,
            noise_enabled: true,
        }
    }
}

/// Transmittance of `km` of fiber at 0.2 dB/km.
pub fn fiber_transmittance(km: f64) -> f64 {
    10f64.powf(-0.2 * km / 10.0)
}

impl ChannelConfig {
    /// Ideal channel: no delay, skew, beat, phase noise, loss or noise.
    pub fn identity() -> Self {
        Self {
            delay: 0.0,
            lo_offset: 0.0,
            linewidth_sum: 0.0,
            transmittance: 1.0,
            efficiency: 1.0,
            electronic_noise: 0.0,
            noise_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return bad(format!("transmittance {} not in (0, 1]", self.transmittance));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad(format!("efficiency {} not in (0, 1]", self.efficiency));
        }
        if !(self.linewidth_sum >= 0.0 && self.linewidth_sum.is_finite()) {
            return bad(format!("linewidth {} must be non-negative", self.linewidth_sum));
        }
        if !(self.electronic_noise >= 0.0 && self.electronic_noise.is_finite()) {
            return bad(format!("electronic noise {} must be non-negative", self.electronic_noise));
        }
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            return bad(format!("excess noise {} must be non-negative", self.excess_noise));
        }
        if !((self.skew - 1.0).abs() <= MAX_SKEW_DEVIATION) {
            return bad(format!("skew {} outside [0.999, 1.001]", self.skew));
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return bad(format!("delay {} must be non-negative", self.delay));
        }
        if !(self.adc_rate > 0.0 && self.adc_rate.is_finite()) {
            return bad(format!("adc rate {} must be positive", self.adc_rate));
        }
        if !self.lo_offset.is_finite() || self.lo_offset.abs() >= self.adc_rate / 2.0 {
            return bad(format!("LO offset {} beyond Nyquist", self.lo_offset));
        }
        Ok(())
    }

    /// Product of fiber transmittance and detector efficiency.
    pub fn total_transmittance(&self) -> f64 {
        self.transmittance * self.efficiency
    }
}

/// Laser phase random walk: uniform start, Gaussian increments of variance
/// `2π·linewidth/rate`.
pub fn wiener_phase(n: usize, linewidth: f64, rate: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let start = rng.random::<f64>() * TAU;
    let sigma = (TAU * linewidth.max(0.0) / rate).sqrt();
    let mut phase = start;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 && sigma > 0.0 {
            phase += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        out.push(phase);
    }
    out
}

/// Complex white Gaussian noise with the given per-quadrature variance.
fn add_noise(x: &mut [Cf64], variance: f64, seed: u64) {
    if variance <= 0.0 {
        return;
    }
    let s = variance.sqrt();
    let mut rng = rng_from_seed(seed);
    for v in x.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Cf64::new(s * re, s * im);
    }
}

/// Propagates a transmitter waveform to the sampled heterodyne output.
///
/// Delay (zero-padding at the transmitter rate), loss, receiver clock skew
/// and the LO beat with phase noise are applied, then detection noise. The
/// skew is applied to the pre-beat signal and the beat is synthesized on the
/// receiver's time grid, which equals beating first and resampling second
/// but keeps the interpolator away from the band edge. The output is
/// labelled with the nominal `adc_rate`, as the receiver sees it.
pub fn apply_channel(x: &ComplexSeries, cfg: &ChannelConfig) -> Result<ComplexSeries> {
    cfg.validate()?;
    let rate = x.sample_rate();
    let pad = (cfg.delay * rate).round() as usize;
    let gain = cfg.total_transmittance().sqrt();
    let mut delayed = Vec::with_capacity(pad + x.len());
    delayed.resize(pad, Cf64::new(0.0, 0.0));
    delayed.extend(x.samples().iter().map(|s| s * gain));
    let delayed = ComplexSeries::from_parts(delayed, rate);

    let skewed = resample(&delayed, cfg.skew)?;
    let rx_rate = skewed.sample_rate();
    let mut y = skewed.into_samples();

    if cfg.lo_offset != 0.0 {
        shift_in_place(&mut y, cfg.lo_offset / rx_rate, 0.0);
    }
    if cfg.linewidth_sum > 0.0 {
        let phi = wiener_phase(y.len(), cfg.linewidth_sum, rx_rate, derive_seed(cfg.seed, 0, Stream::PhaseNoise));
        for (v, p) in y.iter_mut().zip(&phi) {
            *v *= Cf64::from_polar(1.0, *p);
        }
    }

    if cfg.noise_enabled {
        add_noise(&mut y, 1.0 + cfg.electronic_noise, derive_seed(cfg.seed, 0, Stream::DetectionNoise));
        // thermal excess at the channel output, seen through the detector
        let excess = cfg.efficiency * cfg.excess_noise;
        add_noise(&mut y, excess, derive_seed(cfg.seed, 0, Stream::ExcessNoise));
    }
    Ok(ComplexSeries::from_parts(y, cfg.adc_rate))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    /// Raw units² per quadrature, lasers off.
    pub electronic_variance: f64,
    /// Raw units² per quadrature, LO on and no signal.
    pub shot_plus_electronic_variance: f64,
    /// SNU per quadrature, from the back-to-back run.
    pub modulation_variance: f64,
}

impl CalibrationRecord {
    pub fn shot_noise_unit(&self) -> f64 {
        self.shot_plus_electronic_variance - self.electronic_variance
    }

    /// Electronic noise in SNU.
    pub fn electronic_noise_snu(&self) -> f64 {
        self.electronic_variance / self.shot_noise_unit()
    }

    pub fn validate(&self) -> Result<()> {
        let snu = self.shot_noise_unit();
        if !(snu > 0.0 && snu.is_finite()) || self.electronic_variance < 0.0 {
            return Err(Error::InvalidCalibration(snu));
        }
        Ok(())
    }
}

/// Samples in each noise-only calibration record.
pub const CALIBRATION_SAMPLES: usize = 1 << 21;
/// Frames averaged in the back-to-back modulation-variance run.
pub const CALIBRATION_FRAMES: u32 = 4;

/// Per-quadrature variance after removing the mean.
pub fn quadrature_variance(x: &[Cf64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<Cf64>() / n;
    x.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (2.0 * n)
}

/// Simulates the receiver calibration for a transmitter at mean photon
/// number `mean_photon_number`.
///
/// With `noise_enabled = false` the noise records would be empty, so the
/// nominal one-SNU scale is reported and only the modulation variance is
/// measured.
pub fn run_calibration(
    cfg: &ChannelConfig,
    layout: &FrameLayout,
    mean_photon_number: f64,
    seed: u64,
) -> Result<CalibrationRecord> {
    cfg.validate()?;
    layout.validate()?;
    let (el, shot) = if cfg.noise_enabled {
        let mut off = vec![Cf64::new(0.0, 0.0); CALIBRATION_SAMPLES];
        add_noise(&mut off, cfg.electronic_noise, derive_seed(seed, 1, Stream::Calibration));
        let mut lo = vec![Cf64::new(0.0, 0.0); CALIBRATION_SAMPLES];
        add_noise(&mut lo, 1.0 + cfg.electronic_noise, derive_seed(seed, 2, Stream::Calibration));
        (quadrature_variance(&off), quadrature_variance(&lo))
    } else {
        (0.0, 1.0)
    };
    let record = CalibrationRecord {
        electronic_variance: el,
        shot_plus_electronic_variance: shot,
        modulation_variance: 0.0,
    };
    record.validate()?;
    let snu = record.shot_noise_unit();
    let v_el = record.electronic_noise_snu();
    let vacuum = if cfg.noise_enabled { 1.0 } else { 0.0 };

    // back to back: no fiber, known timing, no clock skew
    let b2b = ChannelConfig {
        delay: 0.0,
        skew: 1.0,
        transmittance: 1.0,
        excess_noise: 0.0,
        ..cfg.clone()
    };
    let sps = layout.samples_per_symbol();
    let rrc = design_rrc(layout.rolloff, layout.rrc_span, sps)?;
    let mut power = 0.0;
    let mut count = 0usize;
    for k in 0..CALIBRATION_FRAMES {
        let frame = AliceFrame::synthesize(layout, mean_photon_number, seed, k)?;
        let tx = frame.waveform(layout)?;
        let ch = ChannelConfig {
            seed: derive_seed(seed, k as u64, Stream::Calibration),
            ..b2b.clone()
        };
        let mut rx = apply_channel(&tx, &ch)?.into_samples();
        shift_in_place(&mut rx, -(layout.f_quantum + cfg.lo_offset) / cfg.adc_rate, 0.0);
        let mf = rrc.matched_filter(&rx);
        let symbols: Vec<Cf64> = mf.iter().step_by(sps).map(|v| v / snu.sqrt()).collect();
        power += symbols.iter().map(|v| v.norm_sqr()).sum::<f64>();
        count += symbols.len();
    }
    let per_quadrature = power / (2 * count) as f64;
    Ok(CalibrationRecord {
        modulation_variance: 2.0 * (per_quadrature - vacuum - v_el) / cfg.efficiency,
        ..record
    })
}
