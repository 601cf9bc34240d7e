use super::{
    bulk_phase, compensate_phase, estimate_skew, mth_power_phase, select_optimum_sample,
    synchronize_frame, ukf_track_phase, SyncState, UkfConfig, SYNC_THRESHOLD,
};
use crate::channel::MAX_SKEW_DEVIATION;
use crate::frame::{decode_frame_id, generate_cazac, header_symbols, symbols_to_bits, CazacSequence, FrameLayout};
use crate::signal::{
    design_rrc, fft, peak_in_band, periodogram, resample, shift_in_place, ComplexSeries, RrcFilter,
};
use crate::{Cf64, Error, Result};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Transmitter and receiver share a clock and the frame start is known.
    SharedClock,
    /// Skew and frame start are recovered from the signal.
    FreeRunning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub layout: FrameLayout,
    pub ukf: UkfConfig,
    pub mode: ClockMode,
    /// When false, the receiver assumes equal clocks: no pilot-spacing
    /// correction, no resampling and no M-th power tracking; the QPSK
    /// constellation gets a single header-derived rotation.
    pub skew_compensation: bool,
    pub sync_threshold: f64,
    pub mth_power: u32,
    pub mth_window: usize,
    /// Hz, half-width of the pilot band-pass.
    pub pilot_half_width: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            layout: FrameLayout::default(),
            ukf: UkfConfig::default(),
            mode: ClockMode::FreeRunning,
            skew_compensation: true,
            sync_threshold: SYNC_THRESHOLD,
            mth_power: 4,
            mth_window: 256,
            pilot_half_width: 2e6,
        }
    }
}

/// Side information available to the receiver for one record.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameHints {
    /// Sample index of the frame start, known only with a shared clock.
    pub known_start: Option<usize>,
    /// Symbols added to the frame delay after synchronization; simulates a
    /// wrong header lock.
    pub delay_error: i64,
}

/// Demodulated QPSK side channel of a whole record.
#[derive(Debug, Clone, PartialEq)]
pub struct QpskDemod {
    /// One symbol per symbol period, residual phase removed.
    pub symbols: Vec<Cf64>,
    pub residual_theta: Vec<f64>,
    pub theta_origin: usize,
}

/// Output of the chain for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredFrame {
    pub quantum_symbols: Vec<Cf64>,
    pub reference_symbols_rx: Vec<Cf64>,
    pub qpsk_symbols_rx: Vec<Cf64>,
    pub qpsk_bits: Vec<bool>,
    pub frame_id: Option<u32>,
    pub peak_metric: f64,
    pub sync: SyncState,
}

/// A record after blocks 1 to 8: skew-corrected, phase-compensated and
/// located in time, ready for quantum-symbol extraction.
#[derive(Debug, Clone)]
pub struct SyncedRecord {
    pub record: ComplexSeries,
    pub state: SyncState,
    pub qpsk_symbols_rx: Vec<Cf64>,
    pub qpsk_bits: Vec<bool>,
    pub frame_id: Option<u32>,
    pub peak_metric: f64,
}

/// Samples averaged for the pilot envelope used to find where the signal is.
const ENVELOPE_WINDOW: usize = 1024;
/// Floor on the automatic UKF measurement noise; keeps noise-free records
/// from driving the filter into numerically stiff gains.
const MIN_MEASUREMENT_NOISE: f64 = 1e-4;

/// Matched-filter output at sample `pos` of `x`, zero outside the record.
fn matched_at(x: &[Cf64], taps: &[f64], pos: i64) -> Cf64 {
    let c = (taps.len() / 2) as i64;
    let mut acc = Cf64::new(0.0, 0.0);
    let lo = (pos - c).max(0);
    let hi = (pos + c).min(x.len() as i64 - 1);
    for i in lo..=hi {
        acc += x[i as usize] * taps[(i - pos + c) as usize];
    }
    acc
}

/// Blocks 5 to 7 on a compensated record: QPSK downconversion, matched
/// filter, decimation at `state.optimum_sample`, and (if `mth` is given)
/// M-th power residual-phase removal over the symbol range `span`.
///
/// The QPSK constellation is diagonal, so the M-th power estimate is
/// shifted by π/4 to read as the carrier rotation.
pub fn demodulate_qpsk(
    x: &ComplexSeries,
    state: &SyncState,
    layout: &FrameLayout,
    rrc: &RrcFilter,
    mth: Option<(u32, usize)>,
    span: Range<usize>,
) -> Result<QpskDemod> {
    let mf = qpsk_matched(x, state, rrc);
    demodulate_matched(&mf, state, layout, mth, span)
}

/// QPSK band shifted to 0 Hz and matched-filtered at full rate.
fn qpsk_matched(x: &ComplexSeries, state: &SyncState, rrc: &RrcFilter) -> Vec<Cf64> {
    let offset = (state.f_qpsk_rx - state.f_pilot1_rx) / state.delta_f;
    let mut base = x.samples().to_vec();
    shift_in_place(&mut base, -offset / x.sample_rate(), 0.0);
    rrc.matched_filter(&base)
}

fn demodulate_matched(
    mf: &[Cf64],
    state: &SyncState,
    layout: &FrameLayout,
    mth: Option<(u32, usize)>,
    span: Range<usize>,
) -> Result<QpskDemod> {
    let sps = layout.samples_per_symbol();
    let symbols: Vec<Cf64> = mf.iter().skip(state.optimum_sample).step_by(sps).copied().collect();
    let Some((power, window)) = mth else {
        return Ok(QpskDemod {
            symbols,
            residual_theta: Vec::new(),
            theta_origin: 0,
        });
    };
    let span = span.start.min(symbols.len())..span.end.min(symbols.len());
    let origin = span.start;
    let mut theta = mth_power_phase(&symbols[span], power, window)?;
    theta.iter_mut().for_each(|t| *t -= FRAC_PI_4);
    let tracked = SyncState {
        residual_theta: theta,
        theta_origin: origin,
        theta_window: window,
        ..SyncState::default()
    };
    let symbols = symbols
        .iter()
        .enumerate()
        .map(|(j, s)| s * Cf64::from_polar(1.0, -tracked.theta_at(j)))
        .collect();
    Ok(QpskDemod {
        symbols,
        residual_theta: tracked.residual_theta,
        theta_origin: origin,
    })
}

/// Block 9: quantum-band downconversion, matched filtering at the frame's
/// symbol instants (shifted by `forced_offset` samples), and removal of the
/// residual M-th power phase. Returns `(reference_rx, key_rx)`.
pub fn extract_quantum_symbols(
    x: &ComplexSeries,
    state: &SyncState,
    layout: &FrameLayout,
    rrc: &RrcFilter,
    forced_offset: i64,
) -> Result<(Vec<Cf64>, Vec<Cf64>)> {
    let sps = layout.samples_per_symbol() as i64;
    let count = layout.n_reference + layout.n_quantum;
    let first = state.optimum_sample as i64 + state.frame_delay as i64 * sps + forced_offset;
    let last = first + (count as i64 - 1) * sps;
    if first < 0 || last >= x.len() as i64 {
        return Err(Error::InsufficientSamples {
            needed: (last + 1).max(0) as usize,
            available: x.len(),
        });
    }
    let offset = (state.f_quantum_rx - state.f_pilot1_rx) / state.delta_f;
    let c = (rrc.taps().len() / 2) as i64;
    let lo = (first - c).max(0) as usize;
    let hi = ((last + c + 1) as usize).min(x.len());
    let mut seg = x.samples()[lo..hi].to_vec();
    shift_in_place(&mut seg, -offset / x.sample_rate(), lo as f64);
    let symbols: Vec<Cf64> = (0..count)
        .map(|m| {
            let pos = first + m as i64 * sps - lo as i64;
            let j = state.frame_delay + m;
            matched_at(&seg, rrc.taps(), pos) * Cf64::from_polar(1.0, -state.theta_at(j))
        })
        .collect();
    let key = symbols[layout.n_reference..].to_vec();
    let mut reference = symbols;
    reference.truncate(layout.n_reference);
    Ok((reference, key))
}

/// Index range where the isolated pilot is present, from a moving average
/// of its power thresholded at half the maximum.
fn active_span(pilot: &[Cf64]) -> Range<usize> {
    let n = pilot.len();
    let w = ENVELOPE_WINDOW.min(n);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for s in pilot {
        acc += s.norm_sqr();
        prefix.push(acc);
    }
    let env: Vec<f64> = (0..n)
        .map(|i| {
            let a = i.saturating_sub(w / 2);
            let b = (a + w).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect();
    let thr = 0.5 * env.iter().cloned().fold(0.0, f64::max);
    let start = env.iter().position(|&e| e > thr).unwrap_or(0);
    let end = env.iter().rposition(|&e| e > thr).map_or(n, |i| i + 1);
    start..end
}

pub struct Receiver {
    cfg: ReceiverConfig,
    rrc: RrcFilter,
    header: Vec<Cf64>,
    cazac: CazacSequence,
}

impl Receiver {
    pub fn new(cfg: ReceiverConfig) -> Result<Self> {
        cfg.layout.validate()?;
        cfg.ukf.validate()?;
        if !(cfg.sync_threshold > 0.0 && cfg.sync_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("sync threshold {} not in (0, 1)", cfg.sync_threshold)));
        }
        let l = &cfg.layout;
        Ok(Self {
            rrc: design_rrc(l.rolloff, l.rrc_span, l.samples_per_symbol())?,
            header: header_symbols(l),
            cazac: generate_cazac(l.n_reference, l.cazac_root)?,
            cfg,
        })
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.cfg
    }

    pub fn rrc(&self) -> &RrcFilter {
        &self.rrc
    }

    pub fn cazac(&self) -> &CazacSequence {
        &self.cazac
    }

    /// Blocks 1 and 2: locates both pilots and derives the skew modifier.
    fn locate_pilots(&self, x: &ComplexSeries) -> Result<(f64, f64, f64)> {
        let l = &self.cfg.layout;
        let fs = x.sample_rate();
        let p = periodogram(x.samples());
        let bin = fs / p.len() as f64;
        let peak = peak_in_band(&p, fs, -fs / 2.0, fs / 2.0 - bin)?;
        let spacing = l.pilot_spacing();
        let tol = spacing * MAX_SKEW_DEVIATION + 4.0 * bin;
        let mut best: Option<(f64, f64)> = None;
        for sign in [-1.0, 1.0] {
            let center = peak.frequency + sign * spacing;
            let (lo, hi) = (center - tol, center + tol);
            if lo <= -fs / 2.0 || hi >= fs / 2.0 {
                continue;
            }
            if let Ok(t) = peak_in_band(&p, fs, lo, hi) {
                if best.is_none_or(|(_, pw)| t.power > pw) {
                    best = Some((t.frequency, t.power));
                }
            }
        }
        let (other, _) = best.ok_or(Error::Degenerate("second pilot not found"))?;
        let (f1, f2) = if peak.frequency > other {
            (peak.frequency, other)
        } else {
            (other, peak.frequency)
        };
        let delta_f = if self.cfg.mode == ClockMode::FreeRunning && self.cfg.skew_compensation {
            let d = estimate_skew(f1, f2, spacing)?;
            if (d - 1.0).abs() > MAX_SKEW_DEVIATION {
                return Err(Error::SkewOutOfRange(d));
            }
            d
        } else {
            1.0
        };
        Ok((f1, f2, delta_f))
    }

    /// Blocks 1 to 8 on a record normalized to shot-noise units.
    pub fn synchronize(&self, record: &ComplexSeries, hints: FrameHints) -> Result<SyncedRecord> {
        let l = &self.cfg.layout;
        let sps = l.samples_per_symbol();
        let fs = record.sample_rate();
        let (f1, f2, delta_f) = self.locate_pilots(record)?;

        let mut z = record.samples().to_vec();
        shift_in_place(&mut z, -f1 / fs, 0.0);
        let z = ComplexSeries::from_parts(z, fs);
        let z = if delta_f != 1.0 {
            resample(&z, delta_f)?.relabel_rate(fs)?
        } else {
            z
        };

        let w = self.cfg.pilot_half_width;
        // an empty stretch of spectrum between the pilot and the quantum
        // band gives the white noise density
        let mut bands = fft::band_masks(z.samples(), fs, &[(0.0, w), (3.0 * w, w)]);
        let side = bands.pop().unwrap();
        let pilot = bands.pop().unwrap();
        let active = active_span(&pilot);
        if active.len() < l.frame_samples() / 2 {
            return Err(Error::InsufficientSamples {
                needed: l.frame_samples() / 2,
                available: active.len(),
            });
        }
        let mut ukf = self.cfg.ukf.clone();
        if ukf.auto_measurement_noise {
            let noise_band = crate::signal::mean_power(&side[active.clone()]);
            let pilot_power = crate::signal::mean_power(&pilot[active.clone()]) - noise_band;
            let white = noise_band * fs / (2.0 * w);
            ukf.measurement_noise = (0.5 * white / pilot_power.max(1e-300)).max(MIN_MEASUREMENT_NOISE);
        }
        let pilot_series = ComplexSeries::from_parts(pilot[active.clone()].to_vec(), fs);
        let tracked = ukf_track_phase(&pilot_series, &ukf)?;
        let mut phase_track = Vec::with_capacity(z.len());
        phase_track.resize(active.start, tracked[0]);
        phase_track.extend_from_slice(&tracked);
        phase_track.resize(z.len(), *tracked.last().unwrap());
        let zc = compensate_phase(&z, &phase_track)?;

        let mut state = SyncState {
            f_pilot1_rx: f1,
            f_pilot2_rx: f2,
            delta_f,
            f_quantum_rx: f1 + (l.f_quantum - l.f_pilot1) * delta_f,
            f_qpsk_rx: f1 + (l.f_qpsk - l.f_pilot1) * delta_f,
            phase_track,
            ..SyncState::default()
        };

        // blocks 5 and 6: sampling phase from the QPSK band
        let mf = qpsk_matched(&zc, &state, &self.rrc);
        state.optimum_sample = match hints.known_start {
            Some(start) => start % sps,
            None => {
                let seg = ComplexSeries::from_parts(mf[active.clone()].to_vec(), fs);
                (active.start + select_optimum_sample(&seg, sps)?) % sps
            }
        };
        let span_sym = active.start.saturating_sub(state.optimum_sample).div_ceil(sps)
            ..active.end.saturating_sub(state.optimum_sample) / sps;
        let mth = self.cfg.skew_compensation.then_some((self.cfg.mth_power, self.cfg.mth_window));
        let demod = demodulate_matched(&mf, &state, l, mth, span_sym)?;
        drop(mf);
        state.residual_theta = demod.residual_theta;
        state.theta_origin = demod.theta_origin;
        state.theta_window = self.cfg.mth_window;

        // block 8
        let n_sym = l.n_symbols();
        let (frame_delay, peak_metric) = match hints.known_start {
            Some(start) => {
                let d = start / sps;
                (d, self.header_metric(&demod.symbols, d))
            }
            None => synchronize_frame(&demod.symbols, &self.header, self.cfg.sync_threshold)?,
        };
        let frame_delay = (frame_delay as i64 + hints.delay_error).max(0) as usize;
        if frame_delay + n_sym > demod.symbols.len() {
            return Err(Error::InsufficientSamples {
                needed: (frame_delay + n_sym) * sps,
                available: zc.len(),
            });
        }
        state.frame_delay = frame_delay;

        let frame = &demod.symbols[frame_delay..frame_delay + n_sym];
        let c: Cf64 = self.header.iter().zip(frame).map(|(h, y)| h.conj() * y).sum();
        let psi = if self.cfg.skew_compensation {
            // the M-th power estimate is only defined up to a quarter turn
            (c.arg() / FRAC_PI_2).round() * FRAC_PI_2
        } else {
            c.arg()
        };
        let rot = Cf64::from_polar(1.0, -psi);
        let qpsk: Vec<Cf64> = frame.iter().map(|s| s * rot).collect();
        let bits = symbols_to_bits(&qpsk);
        let id_start = 2 * l.n_qpsk_header;
        let id_bits = &bits[id_start..id_start + 2 * l.id_symbols()];
        let frame_id = decode_frame_id(id_bits, l.id_repetition).map(u32::from);
        Ok(SyncedRecord {
            record: zc,
            state,
            qpsk_symbols_rx: qpsk,
            qpsk_bits: bits,
            frame_id,
            peak_metric,
        })
    }

    fn header_metric(&self, symbols: &[Cf64], delay: usize) -> f64 {
        let Some(seg) = symbols.get(delay..delay + self.header.len()) else {
            return 0.0;
        };
        let c: Cf64 = self.header.iter().zip(seg).map(|(h, y)| h.conj() * y).sum();
        let e1: f64 = self.header.iter().map(|h| h.norm_sqr()).sum();
        let e2: f64 = seg.iter().map(|y| y.norm_sqr()).sum();
        if e2 == 0.0 {
            0.0
        } else {
            c.norm() / (e1 * e2).sqrt()
        }
    }

    /// Blocks 9 and 10.
    pub fn extract(&self, synced: &SyncedRecord, forced_offset: i64) -> Result<RecoveredFrame> {
        let l = &self.cfg.layout;
        let mut state = synced.state.clone();
        let (reference, key) = extract_quantum_symbols(&synced.record, &state, l, &self.rrc, forced_offset)?;
        let phi = bulk_phase(&reference, &self.cazac)?;
        state.bulk_phase = phi;
        let rot = Cf64::from_polar(1.0, -phi);
        Ok(RecoveredFrame {
            quantum_symbols: key.iter().map(|s| s * rot).collect(),
            reference_symbols_rx: reference.iter().map(|s| s * rot).collect(),
            qpsk_symbols_rx: synced.qpsk_symbols_rx.clone(),
            qpsk_bits: synced.qpsk_bits.clone(),
            frame_id: synced.frame_id,
            peak_metric: synced.peak_metric,
            sync: state,
        })
    }

    /// The whole chain for one record.
    pub fn process(&self, record: &ComplexSeries, hints: FrameHints, forced_offset: i64) -> Result<RecoveredFrame> {
        self.extract(&self.synchronize(record, hints)?, forced_offset)
    }
}
