//! Parameter sweeps: forced sampling-instant error and clock skew.

use super::{ExperimentConfig, Pipeline};
use crate::params::secret_key_fraction;
use crate::sync::ClockMode;
use crate::{Error, Result};
use rayon::prelude::*;

/// Offsets, in samples, of the default delay sweep.
pub const DEFAULT_DELAY_OFFSETS: [i64; 6] = [0, 1, 2, 5, 10, 25];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySweepRow {
    /// Samples.
    pub offset: i64,
    /// Accepted frames contributing to this row.
    pub frames: usize,
    pub mean_excess_mpnu: f64,
    pub std_excess_mpnu: f64,
    pub mean_transmittance: f64,
    /// Key fraction at the mean transmittance and excess noise.
    pub skf: f64,
    /// Mean of the per-frame key fractions.
    pub mean_frame_skf: f64,
}

/// Runs each frame through synchronization once and then extracts the
/// quantum symbols at every offset from the synchronized instant.
pub fn sweep_delay_error(config: &ExperimentConfig, offsets: &[i64]) -> Result<Vec<DelaySweepRow>> {
    if !offsets.contains(&0) {
        return Err(Error::InvalidConfig("delay sweep offsets must include 0".into()));
    }
    let pipe = Pipeline::new(config)?;
    // per frame: one (excess, transmittance, skf) triple per offset
    let per_frame: Vec<Vec<(f64, f64, f64)>> = (0..config.n_frames)
        .into_par_iter()
        .filter_map(|id| {
            let frame = pipe.synchronize(id, false).ok()?;
            let mut out = Vec::with_capacity(offsets.len());
            for &off in offsets {
                let (est, _) = pipe.estimate(&frame, off).ok()?;
                if !est.accepted {
                    return None;
                }
                out.push((est.excess_noise_hat, est.transmittance_hat, est.skf));
            }
            Some(out)
        })
        .collect();
    let n = per_frame.len();
    if n == 0 {
        return Err(Error::EmptyReport);
    }
    offsets
        .iter()
        .enumerate()
        .map(|(k, &offset)| {
            let eps: Vec<f64> = per_frame.iter().map(|f| f[k].0).collect();
            let mean_eps = eps.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                eps.iter().map(|e| (e - mean_eps).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let mean_tau = per_frame.iter().map(|f| f[k].1).sum::<f64>() / n as f64;
            let skf = if mean_tau > 0.0 {
                secret_key_fraction(
                    pipe.calibration.modulation_variance,
                    mean_tau.min(1.0),
                    mean_eps.max(0.0),
                    &pipe.security,
                )?
            } else {
                0.0
            };
            Ok(DelaySweepRow {
                offset,
                frames: n,
                mean_excess_mpnu: mean_eps * 1e3,
                std_excess_mpnu: var.sqrt() * 1e3,
                mean_transmittance: mean_tau,
                skf,
                mean_frame_skf: per_frame.iter().map(|f| f[k].2).sum::<f64>() / n as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewSweepRow {
    pub skew: f64,
    /// Mean QPSK BER over synchronized frames, full chain.
    pub ber_compensated: f64,
    /// Same with skew compensation disabled.
    pub ber_uncompensated: f64,
    pub failed_compensated: usize,
    pub failed_uncompensated: usize,
}

fn mean_ber(config: &ExperimentConfig) -> Result<(f64, usize)> {
    let pipe = Pipeline::new(config)?;
    let bers: Vec<Option<f64>> = (0..config.n_frames)
        .into_par_iter()
        .map(|id| pipe.process(id, false).ok().map(|(e, _)| e.ber))
        .collect();
    let ok: Vec<f64> = bers.iter().flatten().copied().collect();
    let failed = bers.len() - ok.len();
    // a frame that cannot even be synchronized carries no information
    let mean = if ok.is_empty() { 0.5 } else { ok.iter().sum::<f64>() / ok.len() as f64 };
    Ok((mean, failed))
}

/// QPSK BER against clock skew with and without compensation, free-running
/// clocks.
pub fn sweep_skew(config: &ExperimentConfig, skews: &[f64]) -> Result<Vec<SkewSweepRow>> {
    skews
        .iter()
        .map(|&skew| {
            let mut cfg = config.clone();
            cfg.mode = ClockMode::FreeRunning;
            cfg.channel.skew = skew;
            cfg.skew_compensation = true;
            let (on, fail_on) = mean_ber(&cfg)?;
            cfg.skew_compensation = false;
            let (off, fail_off) = mean_ber(&cfg)?;
            Ok(SkewSweepRow {
                skew,
                ber_compensated: on,
                ber_uncompensated: off,
                failed_compensated: fail_on,
                failed_uncompensated: fail_off,
            })
        })
        .collect()
}
