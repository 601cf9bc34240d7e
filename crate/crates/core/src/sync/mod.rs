//! Receiver DSP chain: pilot-based skew estimation, UKF phase tracking,
//! optimum-sample selection, QPSK demodulation with M-th power phase
//! recovery, header-based frame synchronization, quantum-symbol extraction
//! and CAZAC bulk-phase correction.

mod mth;
mod receiver;
mod ukf;

pub use mth::{apply_window_phases, mth_power_phase};
pub use receiver::{
    demodulate_qpsk, extract_quantum_symbols, ClockMode, FrameHints, QpskDemod, Receiver, ReceiverConfig,
    RecoveredFrame, SyncedRecord,
};
pub use ukf::{ukf_track, ukf_track_phase, PhaseTrack, UkfConfig};

use crate::frame::CazacSequence;
use crate::signal::{correlate_delay, ComplexSeries};
use crate::{Cf64, Error, Result};

/// Default normalized-correlation threshold for accepting a header match.
pub const SYNC_THRESHOLD: f64 = 0.4;

/// Everything the chain learned about one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyncState {
    /// Hz, in the received record.
    pub f_pilot1_rx: f64,
    pub f_pilot2_rx: f64,
    /// Received over transmitted frequency spacing.
    pub delta_f: f64,
    /// Hz, in the received record.
    pub f_quantum_rx: f64,
    pub f_qpsk_rx: f64,
    /// Radians, one per sample of the skew-corrected record.
    pub phase_track: Vec<f64>,
    pub optimum_sample: usize,
    /// Symbol index of the frame start in the decimated record.
    pub frame_delay: usize,
    /// Radians, one per M-th power window.
    pub residual_theta: Vec<f64>,
    /// Decimated-symbol index where the first M-th power window begins.
    pub theta_origin: usize,
    pub theta_window: usize,
    /// Radians.
    pub bulk_phase: f64,
}

impl SyncState {
    /// Residual phase to remove from decimated symbol `j`; zero outside the
    /// tracked span or when no M-th power estimate was made.
    pub fn theta_at(&self, j: usize) -> f64 {
        if self.residual_theta.is_empty() || self.theta_window == 0 {
            return 0.0;
        }
        let k = j.saturating_sub(self.theta_origin) / self.theta_window;
        self.residual_theta[k.min(self.residual_theta.len() - 1)]
    }
}

/// Clock-skew modifier from the received pilot spacing.
pub fn estimate_skew(f1_rx: f64, f2_rx: f64, pilot_spacing_tx: f64) -> Result<f64> {
    if !(f1_rx > f2_rx) {
        return Err(Error::invalid(format!("pilot 1 ({f1_rx} Hz) must lie above pilot 2 ({f2_rx} Hz)")));
    }
    if !(pilot_spacing_tx > 0.0) {
        return Err(Error::invalid("pilot spacing must be positive"));
    }
    Ok((f1_rx - f2_rx) / pilot_spacing_tx)
}

/// `x(n)·exp(−j·phases(n))`.
pub fn compensate_phase(x: &ComplexSeries, phases: &[f64]) -> Result<ComplexSeries> {
    if phases.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: phases.len(),
        });
    }
    let out = x
        .samples()
        .iter()
        .zip(phases)
        .map(|(s, p)| s * Cf64::from_polar(1.0, -p))
        .collect();
    Ok(ComplexSeries::from_parts(out, x.sample_rate()))
}

/// Sampling phase in `[0, sps)` with the largest mean power in a matched
/// filter output; ties go to the smallest phase.
pub fn select_optimum_sample(matched: &ComplexSeries, sps: usize) -> Result<usize> {
    if sps == 0 {
        return Err(Error::invalid("samples per symbol must be positive"));
    }
    let needed = 10 * sps;
    if matched.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: matched.len(),
        });
    }
    let x = matched.samples();
    let mut power = vec![0.0; sps];
    let mut count = vec![0usize; sps];
    for (n, s) in x.iter().enumerate() {
        power[n % sps] += s.norm_sqr();
        count[n % sps] += 1;
    }
    let mut best = 0;
    let mut best_power = f64::NEG_INFINITY;
    for k in 0..sps {
        let p = power[k] / count[k] as f64;
        if p > best_power * (1.0 + 1e-12) {
            best = k;
            best_power = p;
        }
    }
    Ok(best)
}

/// Locates the known header in demodulated QPSK symbols.
pub fn synchronize_frame(qpsk_symbols: &[Cf64], header: &[Cf64], threshold: f64) -> Result<(usize, f64)> {
    let (lag, metric) = correlate_delay(qpsk_symbols, header)?;
    if metric < threshold {
        return Err(Error::SyncFailed {
            peak_metric: metric,
            threshold,
        });
    }
    Ok((lag, metric))
}

/// `arg Σ conj(ref_tx)·ref_rx`.
pub fn bulk_phase(ref_rx: &[Cf64], ref_tx: &CazacSequence) -> Result<f64> {
    if ref_rx.len() != ref_tx.values.len() {
        return Err(Error::LengthMismatch {
            expected: ref_tx.values.len(),
            actual: ref_rx.len(),
        });
    }
    let c: Cf64 = ref_rx.iter().zip(&ref_tx.values).map(|(r, t)| t.conj() * r).sum();
    if c.norm() < 1e-12 {
        return Err(Error::Degenerate("reference correlation vanishes"));
    }
    Ok(c.arg())
}

/// Rotates `symbols` by the negative of the CAZAC-derived bulk phase.
pub fn correct_bulk_phase(symbols: &[Cf64], ref_rx: &[Cf64], ref_tx: &CazacSequence) -> Result<Vec<Cf64>> {
    let rot = Cf64::from_polar(1.0, -bulk_phase(ref_rx, ref_tx)?);
    Ok(symbols.iter().map(|s| s * rot).collect())
}
