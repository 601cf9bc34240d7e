//! Seeded batch experiments: calibration, per-frame simulation through the
//! channel and receiver, aggregation, sweeps and result files.

mod config;
mod output;
mod sweep;

pub use config::{mode_name, parse_mode, ExperimentConfig};
pub use output::{
    emit_plots, estimates_csv, load_estimates, write_delay_sweep, write_report, write_skew_sweep, Aggregates,
    EstimateRow, DELAY_SWEEP_FILE, ESTIMATES_FILE, FAILURES_FILE, SKEW_SWEEP_FILE, SUMMARY_FILE,
};
pub use sweep::{sweep_delay_error, sweep_skew, DelaySweepRow, SkewSweepRow, DEFAULT_DELAY_OFFSETS};

use crate::channel::{apply_channel, run_calibration, CalibrationRecord, ChannelConfig};
use crate::frame::{cyclic_extend, AliceFrame};
use crate::params::{estimate_frame, normalize_to_snu, FrameEstimate, SecurityParams};
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::signal::{periodogram, ComplexSeries};
use crate::sync::{ClockMode, FrameHints, Receiver, RecoveredFrame, SyncedRecord};
use crate::Result;
use rayon::prelude::*;
use std::time::Instant;

/// A frame the chain could not process.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFailure {
    pub frame_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub calibration: CalibrationRecord,
    /// Ordered by frame ID.
    pub estimates: Vec<FrameEstimate>,
    pub failures: Vec<FrameFailure>,
    /// Frames that were given a wrong delay on purpose.
    pub corrupted: Vec<u32>,
    pub wall_seconds: f64,
    /// (Hz, power) pairs of the first received record, 0 to Nyquist.
    pub spectrum: Vec<(f64, f64)>,
}

impl RunReport {
    pub fn aggregates(&self) -> Aggregates {
        Aggregates::from_estimates(&self.estimates, self.config.n_frames as usize)
    }
}

/// Calibrated receiver state shared by every frame of a run.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub calibration: CalibrationRecord,
    pub security: SecurityParams,
    receiver: Receiver,
}

/// Synchronized record of one frame, ready for symbol extraction.
pub struct SyncedFrame {
    pub alice: AliceFrame,
    pub synced: SyncedRecord,
}

impl Pipeline {
    /// Validates the configuration and runs the calibration.
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let cal_seed = derive_seed(config.seed, 0, Stream::Calibration);
        let calibration = run_calibration(&config.channel, &config.layout, config.mean_photon_number, cal_seed)?;
        Self::with_calibration(config, calibration)
    }

    pub fn with_calibration(config: &ExperimentConfig, calibration: CalibrationRecord) -> Result<Self> {
        config.validate()?;
        calibration.validate()?;
        let security = SecurityParams {
            detector_efficiency: config.channel.efficiency,
            electronic_noise: calibration.electronic_noise_snu(),
            vacuum_noise: if config.channel.noise_enabled { 1.0 } else { 0.0 },
            ..config.security.clone()
        };
        security.validate()?;
        Ok(Self {
            config: config.clone(),
            calibration,
            security,
            receiver: Receiver::new(config.receiver_config())?,
        })
    }

    pub fn receiver(&self) -> &Receiver {
        &self.receiver
    }

    /// Channel settings for one frame; a shared clock removes the skew.
    pub fn frame_channel(&self, frame_id: u32) -> ChannelConfig {
        let c = &self.config.channel;
        ChannelConfig {
            seed: derive_seed(self.config.seed, frame_id as u64, Stream::Channel),
            skew: match self.config.mode {
                ClockMode::SharedClock => 1.0,
                ClockMode::FreeRunning => c.skew,
            },
            ..c.clone()
        }
    }

    /// Synthesizes one frame and returns it with the received record in SNU.
    pub fn transmit(&self, frame_id: u32) -> Result<(AliceFrame, ComplexSeries)> {
        let cfg = &self.config;
        let alice = AliceFrame::synthesize(&cfg.layout, cfg.mean_photon_number, cfg.seed, frame_id)?;
        let tx = cyclic_extend(&alice.waveform(&cfg.layout)?, cfg.layout.guard_samples());
        let rx = apply_channel(&tx, &self.frame_channel(frame_id))?;
        Ok((alice, normalize_to_snu(&rx, &self.calibration)?))
    }

    fn hints(&self, corrupted: bool) -> FrameHints {
        let cfg = &self.config;
        FrameHints {
            known_start: (cfg.mode == ClockMode::SharedClock)
                .then(|| (cfg.channel.delay * cfg.layout.dac_rate).round() as usize + cfg.layout.guard_samples()),
            delay_error: if corrupted { cfg.corrupt_delay_symbols } else { 0 },
        }
    }

    pub fn synchronize(&self, frame_id: u32, corrupted: bool) -> Result<SyncedFrame> {
        let (alice, record) = self.transmit(frame_id)?;
        let synced = self.receiver.synchronize(&record, self.hints(corrupted))?;
        Ok(SyncedFrame { alice, synced })
    }

    /// Extracts symbols `forced_offset` samples away from the synchronized
    /// instant and estimates the channel.
    pub fn estimate(&self, frame: &SyncedFrame, forced_offset: i64) -> Result<(FrameEstimate, RecoveredFrame)> {
        let rec = self.receiver.extract(&frame.synced, forced_offset)?;
        let est = estimate_frame(
            frame.alice.frame_id,
            &frame.alice.quantum.values,
            &rec.quantum_symbols,
            &rec.qpsk_bits,
            &frame.alice.qpsk_bits(&self.config.layout),
            self.calibration.modulation_variance,
            &self.security,
            self.config.ber_threshold,
        )?;
        Ok((est, rec))
    }

    pub fn process(&self, frame_id: u32, corrupted: bool) -> Result<(FrameEstimate, RecoveredFrame)> {
        let frame = self.synchronize(frame_id, corrupted)?;
        self.estimate(&frame, self.config.forced_delay_error)
    }

    /// Averaged power spectrum of one received record, `bins` points
    /// between 0 Hz and Nyquist.
    pub fn spectrum(&self, frame_id: u32, bins: usize) -> Result<Vec<(f64, f64)>> {
        let (_, record) = self.transmit(frame_id)?;
        let p = periodogram(record.samples());
        let rate = record.sample_rate();
        let half = p.len() / 2;
        let per = (half / bins).max(1);
        Ok(p[..half]
            .chunks(per)
            .enumerate()
            .map(|(k, c)| {
                let f = (k * per) as f64 * rate / p.len() as f64;
                (f, c.iter().sum::<f64>() / c.len() as f64)
            })
            .collect())
    }
}

/// The frame IDs a run corrupts: `round(fraction·n)` of them, drawn
/// without replacement from the run seed.
pub fn corrupted_frames(config: &ExperimentConfig) -> Vec<u32> {
    let n = config.n_frames as usize;
    let k = (config.corrupt_fraction * n as f64).round() as usize;
    let mut rng = rng_from_seed(derive_seed(config.seed, 0, Stream::Corruption));
    let mut ids: Vec<u32> = rand::seq::index::sample(&mut rng, n, k.min(n)).iter().map(|i| i as u32).collect();
    ids.sort_unstable();
    ids
}

/// Bins in the spectrum snapshot.
pub const SPECTRUM_BINS: usize = 1000;

/// Runs a full batch. Single-frame failures are collected in the report.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let pipe = Pipeline::new(config)?;
    let corrupted = corrupted_frames(config);
    let outcomes: Vec<_> = (0..config.n_frames)
        .into_par_iter()
        .map(|id| (id, pipe.process(id, corrupted.binary_search(&id).is_ok())))
        .collect();
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for (frame_id, outcome) in outcomes {
        match outcome {
            Ok((est, _)) => estimates.push(est),
            Err(e) => failures.push(FrameFailure {
                frame_id,
                reason: e.to_string(),
            }),
        }
    }
    let spectrum = pipe.spectrum(0, SPECTRUM_BINS)?;
    Ok(RunReport {
        config: config.clone(),
        calibration: pipe.calibration,
        estimates,
        failures,
        corrupted,
        wall_seconds: start.elapsed().as_secs_f64(),
        spectrum,
    })
}
