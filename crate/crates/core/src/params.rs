//! Shot-noise normalization, per-frame channel estimation, QPSK BER and
//! frame acceptance, and the asymptotic secret key fraction.
//!
//! Conventions: quadratures in SNU with vacuum variance 1; a thermal state
//! of mean photon number n has variance 2n + 1, so excess noise in PNU is
//! half the excess quadrature variance. Excess noise is referred to the
//! channel output.

use crate::channel::CalibrationRecord;
use crate::signal::ComplexSeries;
use crate::{Cf64, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityParams {
    /// Reconciliation efficiency.
    pub beta: f64,
    pub detector_efficiency: f64,
    /// SNU per quadrature.
    pub electronic_noise: f64,
    pub trusted_receiver: bool,
    /// Vacuum noise per quadrature in the normalized data: 1 for physical
    /// records, 0 for simulations with detection noise switched off.
    pub vacuum_noise: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            beta: 0.95,
            detector_efficiency: 0.69,
            electronic_noise: 0.1,
            trusted_receiver: true,
            vacuum_noise: 1.0,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidConfig(format!("beta {} not in (0, 1]", self.beta)));
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "detector efficiency {} not in (0, 1]",
                self.detector_efficiency
            )));
        }
        if !(self.electronic_noise >= 0.0 && self.electronic_noise.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "electronic noise {} must be non-negative",
                self.electronic_noise
            )));
        }
        if !(self.vacuum_noise >= 0.0 && self.vacuum_noise.is_finite()) {
            return Err(Error::InvalidConfig(format!("vacuum noise {} must be non-negative", self.vacuum_noise)));
        }
        Ok(())
    }
}

/// Default BER above which a frame is rejected.
pub const BER_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEstimate {
    pub frame_id: u32,
    pub transmittance_hat: f64,
    /// PNU, channel-output referred.
    pub excess_noise_hat: f64,
    pub ber: f64,
    /// Bits per symbol, clipped at zero.
    pub skf: f64,
    pub accepted: bool,
}

/// Removes the mean and rescales so vacuum noise is 1 per quadrature.
pub fn normalize_to_snu(raw: &ComplexSeries, cal: &CalibrationRecord) -> Result<ComplexSeries> {
    cal.validate()?;
    let scale = 1.0 / cal.shot_noise_unit().sqrt();
    let mean = raw.samples().iter().sum::<Cf64>() / raw.len() as f64;
    let out = raw.samples().iter().map(|s| (s - mean) * scale).collect();
    ComplexSeries::new(out, raw.sample_rate())
}

/// Moment estimates of transmittance and excess noise from Alice's symbols
/// and Bob's normalized heterodyne outcomes, under `b = √(τ/2)·a + z`.
///
/// The gain uses the magnitude of the complex correlation, so a common
/// rotation of `bob` does not change the result. With a trusted receiver
/// the detector efficiency and electronic noise are removed and the
/// returned transmittance is the channel's alone; otherwise the detector is
/// treated as part of the channel.
pub fn estimate_channel(alice: &[Cf64], bob: &[Cf64], params: &SecurityParams) -> Result<(f64, f64)> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch {
            expected: alice.len(),
            actual: bob.len(),
        });
    }
    if alice.is_empty() {
        return Err(Error::Degenerate("no symbols"));
    }
    let n = alice.len() as f64;
    let ea = alice.iter().map(|a| a.norm_sqr()).sum::<f64>() / n;
    if ea < 1e-12 {
        return Err(Error::Degenerate("Alice's symbols have no energy"));
    }
    let c = alice.iter().zip(bob).map(|(a, b)| a.conj() * b).sum::<Cf64>() / n;
    let gain = c / ea;
    let tau_total = 2.0 * gain.norm_sqr();
    let residual = alice.iter().zip(bob).map(|(a, b)| (b - gain * a).norm_sqr()).sum::<f64>() / (2.0 * n);
    let excess = residual - params.vacuum_noise;
    Ok(if params.trusted_receiver {
        let eta = params.detector_efficiency;
        (tau_total / eta, (excess - params.electronic_noise) / eta)
    } else {
        (tau_total, excess)
    })
}

pub fn ber(bits_rx: &[bool], bits_tx: &[bool]) -> Result<f64> {
    if bits_rx.len() != bits_tx.len() {
        return Err(Error::LengthMismatch {
            expected: bits_tx.len(),
            actual: bits_rx.len(),
        });
    }
    if bits_rx.is_empty() {
        return Err(Error::Degenerate("no bits"));
    }
    let errors = bits_rx.iter().zip(bits_tx).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / bits_rx.len() as f64)
}

/// Inclusive threshold test.
pub fn accept_frame(ber: f64, threshold: f64) -> bool {
    ber <= threshold
}

/// Entropy of a thermal state with symplectic eigenvalue `x`.
fn g(x: f64) -> f64 {
    let a = (x + 1.0) / 2.0;
    let b = (x - 1.0) / 2.0;
    let t = if b > 1e-15 { b * b.log2() } else { 0.0 };
    a * a.log2() - t
}

/// Asymptotic key fraction (bits/symbol) of Gaussian-modulated coherent
/// states with heterodyne detection and reverse reconciliation under
/// collective attacks.
///
/// `transmittance` and `excess_noise` (PNU, channel output) are in the
/// convention [`estimate_channel`] returns for `params.trusted_receiver`.
pub fn secret_key_fraction(v_mod: f64, transmittance: f64, excess_noise: f64, params: &SecurityParams) -> Result<f64> {
    params.validate()?;
    if !(v_mod > 0.0 && v_mod.is_finite()) {
        return Err(Error::invalid(format!("modulation variance {v_mod} must be positive")));
    }
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(Error::invalid(format!("transmittance {transmittance} not in (0, 1]")));
    }
    if !(excess_noise >= 0.0 && excess_noise.is_finite()) {
        return Err(Error::invalid(format!("excess noise {excess_noise} must be non-negative")));
    }
    let t = transmittance;
    let (eta, v_el) = if params.trusted_receiver {
        (params.detector_efficiency, params.electronic_noise)
    } else {
        (1.0, 0.0)
    };
    let v = v_mod + 1.0;
    // input-referred excess variance
    let xi = 2.0 * excess_noise / t;
    let chi_line = 1.0 / t - 1.0 + xi;
    let chi_het = (2.0 - eta + 2.0 * v_el) / eta;
    let chi_tot = chi_line + chi_het / t;
    let mutual = ((v + chi_tot) / (1.0 + chi_tot)).log2();

    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = (t * (v * chi_line + 1.0)).powi(2);
    let c_den = (t * (v + chi_tot)).powi(2);
    let c = (a * chi_het * chi_het
        + b
        + 1.0
        + 2.0 * chi_het * (v * b.sqrt() + t * (v + chi_line))
        + 2.0 * t * (v * v - 1.0))
        / c_den;
    let d = (v + b.sqrt() * chi_het).powi(2) / c_den;
    let pair = |s: f64, p: f64| {
        let disc = (s * s - 4.0 * p).max(0.0).sqrt();
        (((s + disc) / 2.0).sqrt(), ((s - disc) / 2.0).max(1.0).sqrt())
    };
    let (l1, l2) = pair(a, b);
    let (l3, l4) = pair(c, d);
    let holevo = g(l1) + g(l2) - g(l3.max(1.0)) - g(l4.max(1.0));
    Ok((params.beta * mutual - holevo).max(0.0))
}

/// Builds the per-frame record from recovered data.
pub fn estimate_frame(
    frame_id: u32,
    alice_key: &[Cf64],
    bob_key: &[Cf64],
    bits_rx: &[bool],
    bits_tx: &[bool],
    v_mod: f64,
    params: &SecurityParams,
    ber_threshold: f64,
) -> Result<FrameEstimate> {
    let (tau, eps) = estimate_channel(alice_key, bob_key, params)?;
    let ber = ber(bits_rx, bits_tx)?;
    let accepted = accept_frame(ber, ber_threshold);
    // estimation slack can push either estimate outside the key-rate domain
    let skf = if tau > 0.0 && tau <= 1.0 {
        secret_key_fraction(v_mod, tau, eps.max(0.0), params)?
    } else if tau > 1.0 {
        secret_key_fraction(v_mod, 1.0, eps.max(0.0), params)?
    } else {
        0.0
    };
    Ok(FrameEstimate {
        frame_id,
        transmittance_hat: tau,
        excess_noise_hat: eps,
        ber,
        skf,
        accepted,
    })
}
